use std::collections::HashSet;

use super::{Binding, Environment, NodeKind, PlaylistRef, SceneManifest, SpeakerSource};
use crate::capsule::MediaItem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Schema,
    Duplicate,
    DanglingReference { id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
    pub kind: ViolationKind,
}

struct Collector(Vec<Violation>);

impl Collector {
    fn schema(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            path: path.into(),
            message: message.into(),
            kind: ViolationKind::Schema,
        });
    }

    fn duplicate(&mut self, path: impl Into<String>, id: &str) {
        self.0.push(Violation {
            path: path.into(),
            message: format!("duplicate id '{id}'"),
            kind: ViolationKind::Duplicate,
        });
    }

    fn dangling(&mut self, path: impl Into<String>, what: &str, id: &str) {
        self.0.push(Violation {
            path: path.into(),
            message: format!("unknown {what} '{id}'"),
            kind: ViolationKind::DanglingReference { id: id.to_owned() },
        });
    }
}

/// Checks every manifest invariant.
///
/// Violations come back in document order: top-level keys in canonical order,
/// then element index, then field. An empty list means the manifest is valid.
pub fn validate_manifest(manifest: &SceneManifest) -> Vec<Violation> {
    let mut out = Collector(Vec::new());

    if manifest.scene_id.is_empty() {
        out.schema("scene_id", "scene_id must be non-empty");
    }
    match &manifest.environment {
        Environment::None => {}
        Environment::Panorama { asset } | Environment::Modeled { asset } => {
            if asset.is_empty() {
                out.schema("environment.asset", "asset path must be non-empty");
            }
        }
    }

    let channel_ids: HashSet<&str> = manifest
        .channels
        .iter()
        .map(|c| c.channel_id.as_str())
        .collect();
    let projector_ids: HashSet<&str> = manifest
        .projectors
        .iter()
        .map(|p| p.projector_id.as_str())
        .collect();
    let slots: HashSet<&str> = manifest
        .projectors
        .iter()
        .map(|p| p.slot.as_str())
        .collect();

    if manifest.nodes.is_empty() {
        out.schema("nodes", "nodes must be non-empty");
    }
    let mut seen = HashSet::new();
    for (i, node) in manifest.nodes.iter().enumerate() {
        let at = format!("nodes[{i}]");
        if node.node_id.is_empty() {
            out.schema(format!("{at}.node_id"), "node_id must be non-empty");
        } else if !seen.insert(node.node_id.as_str()) {
            out.duplicate(format!("{at}.node_id"), &node.node_id);
        }
        if !node.pose.is_valid() {
            out.schema(
                format!("{at}.pose"),
                "pose must be finite with yaw in [-pi, pi)",
            );
        }
        let e = &node.extent;
        if !e.is_finite() || e.x < 0.0 || e.y < 0.0 || e.z < 0.0 {
            out.schema(
                format!("{at}.extent"),
                "extent must be finite and non-negative",
            );
        }
        match (node.kind, &node.binding) {
            (NodeKind::MediaSurface, None) => {
                out.schema(format!("{at}.binding"), "media_surface requires a binding");
            }
            (NodeKind::MediaSurface, Some(Binding::Channel(id))) => {
                if !channel_ids.contains(id.as_str()) {
                    out.dangling(format!("{at}.binding"), "channel", id);
                }
            }
            (NodeKind::MediaSurface, Some(Binding::Projector(id))) => {
                if !projector_ids.contains(id.as_str()) {
                    out.dangling(format!("{at}.binding"), "projector", id);
                }
            }
            (kind, Some(_)) => {
                out.schema(
                    format!("{at}.binding"),
                    format!("binding not allowed on {}", kind_name(kind)),
                );
            }
            (_, None) => {}
        }
    }

    let mut seen = HashSet::new();
    for (i, channel) in manifest.channels.iter().enumerate() {
        let at = format!("channels[{i}]");
        if !seen.insert(channel.channel_id.as_str()) {
            out.duplicate(format!("{at}.channel_id"), &channel.channel_id);
        }
        if !(channel.fps.is_finite() && channel.fps > 0.0) {
            out.schema(format!("{at}.fps"), "fps must be > 0");
        }
        if !(channel.delay_offset.is_finite() && channel.delay_offset >= 0.0) {
            out.schema(
                format!("{at}.delay_offset"),
                "delay_offset must be finite and >= 0",
            );
        }
        match &channel.playlist_ref {
            PlaylistRef::Capsule(key) => {
                if key.city_id.is_empty() || key.slot.is_empty() {
                    out.schema(
                        format!("{at}.playlist_ref.capsule"),
                        "capsule key needs city_id and slot",
                    );
                }
            }
            PlaylistRef::Items(items) => {
                if items.is_empty() {
                    out.schema(
                        format!("{at}.playlist_ref.items"),
                        "literal playlist must be non-empty",
                    );
                }
                for (j, item) in items.iter().enumerate() {
                    if let Err(message) = check_item(item) {
                        out.schema(format!("{at}.playlist_ref.items[{j}]"), message);
                    }
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for (i, projector) in manifest.projectors.iter().enumerate() {
        let at = format!("projectors[{i}]");
        if !seen.insert(projector.projector_id.as_str()) {
            out.duplicate(format!("{at}.projector_id"), &projector.projector_id);
        }
        if projector.target_surface_ids.is_empty() {
            out.schema(
                format!("{at}.target_surface_ids"),
                "projector needs at least one target",
            );
        }
        for (j, target) in projector.target_surface_ids.iter().enumerate() {
            let path = format!("{at}.target_surface_ids[{j}]");
            match manifest.node(target) {
                None => out.dangling(path, "node", target),
                Some(node) if node.kind != NodeKind::MediaSurface => {
                    out.schema(path, format!("target '{target}' is not a media_surface"));
                }
                Some(_) => {}
            }
        }
        if projector.slot.is_empty() {
            out.schema(format!("{at}.slot"), "slot must be non-empty");
        }
    }

    let mut seen = HashSet::new();
    for (i, speaker) in manifest.speakers.iter().enumerate() {
        let at = format!("speakers[{i}]");
        if !seen.insert(speaker.speaker_id.as_str()) {
            out.duplicate(format!("{at}.speaker_id"), &speaker.speaker_id);
        }
        if !speaker.position.is_finite() {
            out.schema(format!("{at}.position"), "position must be finite");
        }
        match &speaker.source {
            SpeakerSource::Channel(id) if !channel_ids.contains(id.as_str()) => {
                out.dangling(format!("{at}.source"), "channel", id);
            }
            SpeakerSource::Slot(slot) if !slots.contains(slot.as_str()) => {
                out.dangling(format!("{at}.source"), "slot", slot);
            }
            _ => {}
        }
        if !(speaker.reference_gain > 0.0 && speaker.reference_gain <= 1.0) {
            out.schema(
                format!("{at}.reference_gain"),
                "reference_gain must be in (0, 1]",
            );
        }
        if !(speaker.reference_distance.is_finite() && speaker.reference_distance > 0.0) {
            out.schema(
                format!("{at}.reference_distance"),
                "reference_distance must be > 0",
            );
        }
    }

    let mut seen = HashSet::new();
    for (i, widget) in manifest.widgets.iter().enumerate() {
        let at = format!("widgets[{i}]");
        if !seen.insert(widget.widget_id.as_str()) {
            out.duplicate(format!("{at}.widget_id"), &widget.widget_id);
        }
        if !widget.pose.is_valid() {
            out.schema(
                format!("{at}.pose"),
                "pose must be finite with yaw in [-pi, pi)",
            );
        }
        if widget.options.is_empty() {
            out.schema(format!("{at}.options"), "options must be non-empty");
        }
        let mut cities = HashSet::new();
        for (j, option) in widget.options.iter().enumerate() {
            if !cities.insert(option.city_id.as_str()) {
                out.duplicate(format!("{at}.options[{j}].city_id"), &option.city_id);
            }
        }
        if widget.driven_slots.is_empty() {
            out.schema(
                format!("{at}.driven_slots"),
                "driven_slots must be non-empty",
            );
        }
        for (j, slot) in widget.driven_slots.iter().enumerate() {
            if !slots.contains(slot.as_str()) {
                out.dangling(format!("{at}.driven_slots[{j}]"), "slot", slot);
            }
        }
    }

    out.0
}

fn check_item(item: &MediaItem) -> Result<(), String> {
    if !(item.duration.is_finite() && item.duration > 0.0) {
        return Err("duration must be > 0".into());
    }
    if !(item.fps.is_finite() && item.fps > 0.0) {
        return Err("fps must be > 0".into());
    }
    if item.frame_count == 0 {
        return Err("frame_count must be positive".into());
    }
    Ok(())
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::StaticMesh => "static_mesh",
        NodeKind::NeonElement => "neon_element",
        NodeKind::MediaSurface => "media_surface",
    }
}
