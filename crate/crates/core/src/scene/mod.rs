//! e-Installation manifests: the declarative description of a virtualized
//! artwork, its validation rules, the built-in case-study scenes and the
//! curation rule that picks a reconstruction fidelity.

mod builtin;
mod curation;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_scene, ten_thousand_moving_cities, versailles_fountain, BUILTIN_NAMES};
pub use curation::{
    recommend_fidelity, AssessmentRecord, CurationError, EnvironmentFidelity, FidelityPlan,
    GeometryFidelity, Level, MaterialMeaningLink, TextureFidelity,
};
pub use validate::{validate_manifest, Violation, ViolationKind};

use crate::capsule::MediaItem;
use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    StaticMesh,
    NeonElement,
    MediaSurface,
}

/// What feeds a media surface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Binding {
    Channel(String),
    Projector(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub pose: Pose,
    /// Bounding-box half sizes.
    pub extent: Vec3,
    #[serde(default)]
    pub mesh_asset: Option<String>,
    #[serde(default)]
    pub binding: Option<Binding>,
}

/// A key into a content capsule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleKey {
    pub city_id: String,
    pub slot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlaylistRef {
    Capsule(CapsuleKey),
    Items(Vec<MediaItem>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoChannel {
    pub channel_id: String,
    pub playlist_ref: PlaylistRef,
    pub fps: f64,
    #[serde(rename = "loop")]
    pub looping: bool,
    pub delay_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Projector {
    pub projector_id: String,
    pub target_surface_ids: Vec<String>,
    pub slot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeakerSource {
    Channel(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Speaker {
    pub speaker_id: String,
    pub position: Vec3,
    pub source: SpeakerSource,
    pub reference_gain: f64,
    pub reference_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityOption {
    pub city_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuWidget {
    pub widget_id: String,
    pub pose: Pose,
    pub options: Vec<CityOption>,
    pub driven_slots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Environment {
    None,
    Panorama { asset: String },
    Modeled { asset: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scene_id: String,
    pub title: String,
    pub artist: String,
    pub environment: Environment,
    pub nodes: Vec<SceneNode>,
    pub channels: Vec<VideoChannel>,
    pub projectors: Vec<Projector>,
    pub speakers: Vec<Speaker>,
    pub widgets: Vec<MenuWidget>,
}

impl SceneManifest {
    pub fn node(&self, node_id: &str) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    pub fn channel(&self, channel_id: &str) -> Option<&VideoChannel> {
        self.channels.iter().find(|c| c.channel_id == channel_id)
    }

    pub fn projector(&self, projector_id: &str) -> Option<&Projector> {
        self.projectors
            .iter()
            .find(|p| p.projector_id == projector_id)
    }

    pub fn media_surfaces(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::MediaSurface)
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// The first menu widget, if the scene has one.
    pub fn menu(&self) -> Option<&MenuWidget> {
        self.widgets.first()
    }

    /// Every capsule key the scene can request: channel capsule refs plus
    /// each (city, driven slot) pair of every widget.
    pub fn required_capsule_keys(&self) -> Vec<CapsuleKey> {
        let mut keys: Vec<CapsuleKey> = self
            .channels
            .iter()
            .filter_map(|c| match &c.playlist_ref {
                PlaylistRef::Capsule(key) => Some(key.clone()),
                PlaylistRef::Items(_) => None,
            })
            .collect();
        for widget in &self.widgets {
            for option in &widget.options {
                for slot in &widget.driven_slots {
                    keys.push(CapsuleKey {
                        city_id: option.city_id.clone(),
                        slot: slot.clone(),
                    });
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }

    /// Whether running this scene needs a content capsule.
    pub fn needs_capsule(&self) -> bool {
        !self.widgets.is_empty()
            || !self.projectors.is_empty()
            || self
                .channels
                .iter()
                .any(|c| matches!(c.playlist_ref, PlaylistRef::Capsule(_)))
    }

    /// Canonical serialization: pretty-printed JSON, two-space indent, LF
    /// line endings, trailing newline, fields in declaration order.
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference at {path}: unknown id '{id}'")]
    DanglingReference { path: String, id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown built-in scene '{0}' (expected one of: vf, mc)")]
pub struct UnknownScene(pub String);

/// Parses and fully validates a manifest document.
pub fn parse_manifest(bytes: &[u8]) -> Result<SceneManifest, ManifestError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let manifest: SceneManifest = match serde_path_to_error::deserialize(&mut de) {
        Ok(m) => m,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(classify_json_error(path, inner));
        }
    };
    if let Err(err) = de.end() {
        return Err(classify_json_error(String::new(), err));
    }

    match validate_manifest(&manifest).into_iter().next() {
        None => Ok(manifest),
        Some(v) => Err(match v.kind {
            ViolationKind::DanglingReference { id } => {
                ManifestError::DanglingReference { path: v.path, id }
            }
            _ => ManifestError::Schema {
                path: v.path,
                message: v.message,
            },
        }),
    }
}

fn classify_json_error(path: String, err: serde_json::Error) -> ManifestError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Syntax | Category::Eof | Category::Io => ManifestError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        },
        Category::Data => ManifestError::Schema {
            path: if path.is_empty() {
                ".".to_owned()
            } else {
                path
            },
            message: err.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vf_json() -> String {
        versailles_fountain(0.0).to_canonical_json()
    }

    #[test]
    fn parses_vf_fixture() {
        let m = parse_manifest(vf_json().as_bytes()).unwrap();
        assert_eq!(m.count_kind(NodeKind::MediaSurface), 38);
        assert_eq!(m.count_kind(NodeKind::NeonElement), 20);
        assert_eq!(m.channels.len(), 2);
    }

    #[test]
    fn empty_nodes_is_schema_violation() {
        let mut m = versailles_fountain(0.0);
        m.nodes.clear();
        m.speakers.clear();
        let err = parse_manifest(m.to_canonical_json().as_bytes()).unwrap_err();
        assert_eq!(
            err,
            ManifestError::Schema {
                path: "nodes".into(),
                message: "nodes must be non-empty".into()
            }
        );
    }

    #[test]
    fn dangling_channel_names_id() {
        let mut m = versailles_fountain(0.0);
        m.nodes[0].binding = Some(Binding::Channel("C9".into()));
        let err = parse_manifest(m.to_canonical_json().as_bytes()).unwrap_err();
        match err {
            ManifestError::DanglingReference { id, path } => {
                assert_eq!(id, "C9");
                assert_eq!(path, "nodes[0].binding");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_manifest(m.to_canonical_json().as_bytes())
            .unwrap_err()
            .to_string()
            .contains("C9"));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_manifest(b"{\n  \"scene_id\": \"x\",\n  oops\n}").unwrap_err();
        match err {
            ManifestError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_error_reports_field_path() {
        let json = vf_json().replacen("\"fps\": 25.0", "\"fps\": \"fast\"", 1);
        let err = parse_manifest(json.as_bytes()).unwrap_err();
        match err {
            ManifestError::Schema { path, .. } => {
                assert_eq!(path, "channels[0].playlist_ref.items[0].fps")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_top_level_key_rejected() {
        let json = vf_json().replacen("{\n", "{\n  \"knobs\": [],\n", 1);
        assert!(matches!(
            parse_manifest(json.as_bytes()),
            Err(ManifestError::Schema { .. })
        ));
    }

    #[test]
    fn trailing_garbage_is_syntax_error() {
        let json = vf_json() + "}";
        assert!(matches!(
            parse_manifest(json.as_bytes()),
            Err(ManifestError::Syntax { .. })
        ));
    }

    #[test]
    fn canonical_json_has_exact_top_level_keys() {
        let value: serde_json::Value = serde_json::from_str(&vf_json()).unwrap();
        let keys: Vec<&str> = value
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        let mut expected = vec![
            "scene_id",
            "title",
            "artist",
            "environment",
            "nodes",
            "channels",
            "projectors",
            "speakers",
            "widgets",
        ];
        expected.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, expected);
        assert!(!vf_json().contains('\r'));
    }
}
