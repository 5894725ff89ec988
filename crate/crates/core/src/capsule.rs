//! Offline content capsules.
//!
//! A capsule is a plain directory holding an `index.json` plus the media
//! files it references. It stands in for the live web content a net artwork
//! would normally fetch, so every playback is reproducible. Media bytes are
//! never decoded; only the metadata in the index drives scheduling.
//!
//! ```text
//! capsule/
//!   index.json
//!   assets/<city>/<slot>/<file>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{hash_key, SplitMix64};
use crate::scene::CapsuleKey;

pub const CAPSULE_VERSION: &str = "capsule/1";
pub const INDEX_FILE: &str = "index.json";
pub const SIDECAR_SUFFIX: &str = ".meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Video,
    Image,
    Audio,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaItem {
    pub media_id: String,
    pub kind: MediaKind,
    pub duration: f64,
    pub fps: f64,
    pub frame_count: u64,
    pub uri: String,
}

impl MediaItem {
    pub fn expected_frame_count(duration: f64, fps: f64) -> u64 {
        ((duration * fps).round() as u64).max(1)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("{}: duration must be > 0", self.media_id));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(format!("{}: fps must be > 0", self.media_id));
        }
        if self.frame_count == 0 {
            return Err(format!("{}: frame_count must be positive", self.media_id));
        }
        if self.kind == MediaKind::Video
            && self.frame_count != Self::expected_frame_count(self.duration, self.fps)
        {
            return Err(format!(
                "{}: frame_count {} does not match duration x fps",
                self.media_id, self.frame_count
            ));
        }
        Ok(())
    }
}

/// Items played back to back; loops over `total_duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct Playlist {
    items: Vec<MediaItem>,
    total_duration: f64,
}

impl Playlist {
    /// Returns `None` for an empty item list.
    pub fn new(items: Vec<MediaItem>) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let total_duration = items.iter().map(|i| i.duration).sum();
        Some(Self {
            items,
            total_duration,
        })
    }

    pub fn items(&self) -> &[MediaItem] {
        &self.items
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    /// Maps elapsed playback time (any sign) to the current item and the
    /// time since that item started.
    pub fn locate(&self, elapsed: f64) -> (&MediaItem, f64) {
        let pos = elapsed.rem_euclid(self.total_duration);
        let mut start = 0.0;
        for item in &self.items {
            if pos < start + item.duration {
                return (item, (pos - start).max(0.0));
            }
            start += item.duration;
        }
        // Rounding can leave `pos` a hair past the last boundary.
        (&self.items[0], 0.0)
    }
}

#[derive(Debug, Error)]
pub enum CapsuleError {
    #[error("missing {INDEX_FILE} in {0}")]
    MissingIndex(PathBuf),
    #[error("malformed capsule index: {0}")]
    MalformedIndex(String),
    #[error("unresolvable uri '{0}'")]
    UnresolvableUri(String),
    #[error("unknown capsule key ({city_id}, {slot})")]
    UnknownKey { city_id: String, slot: String },
    #[error("missing sidecar metadata for {0}")]
    MissingSidecar(PathBuf),
    #[error("bad sidecar metadata in {path}: {message}")]
    BadSidecar { path: PathBuf, message: String },
    #[error("empty slot folder {0}")]
    EmptySlot(PathBuf),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CapsuleError + '_ {
    move |source| CapsuleError::Io {
        path: path.to_owned(),
        source,
    }
}

/// One row of `index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub city_id: String,
    pub slot: String,
    pub media_id: String,
    pub kind: MediaKind,
    pub duration: f64,
    pub fps: f64,
    pub frame_count: u64,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexFile {
    pub version: String,
    pub entries: Vec<IndexEntry>,
}

impl IndexFile {
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("index serializes");
        out.push('\n');
        out
    }
}

/// A verified, read-only capsule.
#[derive(Debug, Clone, PartialEq)]
pub struct Capsule {
    root: PathBuf,
    version: String,
    index: BTreeMap<CapsuleKey, Vec<MediaItem>>,
}

impl Capsule {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn keys(&self) -> impl Iterator<Item = &CapsuleKey> {
        self.index.keys()
    }

    pub fn items(&self, city_id: &str, slot: &str) -> Option<&[MediaItem]> {
        self.index
            .get(&CapsuleKey {
                city_id: city_id.to_owned(),
                slot: slot.to_owned(),
            })
            .map(Vec::as_slice)
    }

    pub fn contains(&self, key: &CapsuleKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn item_count(&self) -> usize {
        self.index.values().map(Vec::len).sum()
    }
}

fn is_safe_relative(uri: &str) -> bool {
    let path = Path::new(uri);
    !uri.is_empty()
        && path
            .components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

/// Opens a capsule directory and checks every entry eagerly.
pub fn open_capsule(path: impl AsRef<Path>) -> Result<Capsule, CapsuleError> {
    let root = path.as_ref();
    let index_path = root.join(INDEX_FILE);
    if !index_path.is_file() {
        return Err(CapsuleError::MissingIndex(root.to_owned()));
    }
    let bytes = fs::read(&index_path).map_err(io_err(&index_path))?;
    let file: IndexFile =
        serde_json::from_slice(&bytes).map_err(|e| CapsuleError::MalformedIndex(e.to_string()))?;
    if file.version != CAPSULE_VERSION {
        return Err(CapsuleError::MalformedIndex(format!(
            "unsupported version '{}'",
            file.version
        )));
    }

    let mut index: BTreeMap<CapsuleKey, Vec<MediaItem>> = BTreeMap::new();
    for entry in file.entries {
        if !is_safe_relative(&entry.uri) {
            return Err(CapsuleError::MalformedIndex(format!(
                "uri '{}' must be a relative path inside the capsule",
                entry.uri
            )));
        }
        if !root.join(&entry.uri).is_file() {
            return Err(CapsuleError::UnresolvableUri(entry.uri));
        }
        let key = CapsuleKey {
            city_id: entry.city_id,
            slot: entry.slot,
        };
        let item = MediaItem {
            media_id: entry.media_id,
            kind: entry.kind,
            duration: entry.duration,
            fps: entry.fps,
            frame_count: entry.frame_count,
            uri: entry.uri,
        };
        item.check().map_err(CapsuleError::MalformedIndex)?;
        let items = index.entry(key).or_default();
        if items.iter().any(|i| i.media_id == item.media_id) {
            return Err(CapsuleError::MalformedIndex(format!(
                "duplicate media_id '{}'",
                item.media_id
            )));
        }
        items.push(item);
    }

    Ok(Capsule {
        root: root.to_owned(),
        version: file.version,
        index,
    })
}

/// The playlist for one (city, slot), in an order fixed by `seed`.
///
/// The order comes from a Fisher–Yates shuffle driven by
/// `SplitMix64::new(fnv1a64(city_id ␟ slot ␟ decimal(seed)))`, so it depends
/// on nothing but the three arguments and the indexed item list.
pub fn resolve_playlist(
    capsule: &Capsule,
    city_id: &str,
    slot: &str,
    seed: u64,
) -> Result<Playlist, CapsuleError> {
    let mut items = capsule
        .items(city_id, slot)
        .ok_or_else(|| CapsuleError::UnknownKey {
            city_id: city_id.to_owned(),
            slot: slot.to_owned(),
        })?
        .to_vec();
    let mut rng = SplitMix64::new(hash_key(&[city_id, slot, &seed.to_string()]));
    rng.shuffle(&mut items);
    Ok(Playlist::new(items).expect("indexed keys always hold items"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    duration: f64,
    #[serde(default)]
    fps: Option<f64>,
    kind: MediaKind,
}

fn sorted_children(dir: &Path) -> Result<Vec<PathBuf>, CapsuleError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

fn utf8_name(path: &Path) -> Result<String, CapsuleError> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CapsuleError::BadSidecar {
            path: path.to_owned(),
            message: "file name is not valid UTF-8".into(),
        })
}

fn read_sidecar(media: &Path) -> Result<(MediaKind, f64, f64), CapsuleError> {
    let mut sidecar = media.as_os_str().to_owned();
    sidecar.push(SIDECAR_SUFFIX);
    let sidecar = PathBuf::from(sidecar);
    if !sidecar.is_file() {
        return Err(CapsuleError::MissingSidecar(media.to_owned()));
    }
    let bytes = fs::read(&sidecar).map_err(io_err(&sidecar))?;
    let meta: Sidecar = serde_json::from_slice(&bytes).map_err(|e| CapsuleError::BadSidecar {
        path: sidecar.clone(),
        message: e.to_string(),
    })?;
    let bad = |message: &str| CapsuleError::BadSidecar {
        path: sidecar.clone(),
        message: message.to_owned(),
    };
    if !(meta.duration.is_finite() && meta.duration > 0.0) {
        return Err(bad("duration must be > 0"));
    }
    let fps = match (meta.kind, meta.fps) {
        (MediaKind::Video, None) => return Err(bad("video needs fps")),
        (MediaKind::Video, Some(fps)) => fps,
        (MediaKind::Image | MediaKind::Text, _) => 1.0,
        (MediaKind::Audio, fps) => fps.unwrap_or(1.0),
    };
    if !(fps.is_finite() && fps > 0.0) {
        return Err(bad("fps must be > 0"));
    }
    Ok((meta.kind, meta.duration, fps))
}

/// Snapshots a `<city>/<slot>/<files>` tree into a capsule at `out`.
///
/// Each media file needs a `<file>.meta.json` sidecar with `duration`,
/// `kind` and (for video) `fps`. Files are copied to
/// `assets/<city>/<slot>/` and the index is written sorted by
/// (city, slot, media_id), so ingesting an unchanged tree twice yields the
/// same bytes.
pub fn ingest_directory(
    src: impl AsRef<Path>,
    out: impl AsRef<Path>,
) -> Result<Capsule, CapsuleError> {
    let src = src.as_ref();
    let out = out.as_ref();
    let mut entries = Vec::new();
    let mut copies = Vec::new();

    for city_dir in sorted_children(src)?.into_iter().filter(|p| p.is_dir()) {
        let city_id = utf8_name(&city_dir)?;
        for slot_dir in sorted_children(&city_dir)?
            .into_iter()
            .filter(|p| p.is_dir())
        {
            let slot = utf8_name(&slot_dir)?;
            let media: Vec<PathBuf> = sorted_children(&slot_dir)?
                .into_iter()
                .filter(|p| p.is_file())
                .filter(|p| !p.to_string_lossy().ends_with(SIDECAR_SUFFIX))
                .collect();
            if media.is_empty() {
                return Err(CapsuleError::EmptySlot(slot_dir));
            }
            for file in media {
                let media_id = utf8_name(&file)?;
                let (kind, duration, fps) = read_sidecar(&file)?;
                let uri = format!("assets/{city_id}/{slot}/{media_id}");
                copies.push((file, out.join(&uri)));
                entries.push(IndexEntry {
                    city_id: city_id.clone(),
                    slot: slot.clone(),
                    media_id,
                    kind,
                    duration,
                    fps,
                    frame_count: MediaItem::expected_frame_count(duration, fps),
                    uri,
                });
            }
        }
    }
    entries.sort_by(|a, b| {
        (&a.city_id, &a.slot, &a.media_id).cmp(&(&b.city_id, &b.slot, &b.media_id))
    });

    for (from, to) in &copies {
        if let Some(parent) = to.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::copy(from, to).map_err(io_err(from))?;
    }
    let index = IndexFile {
        version: CAPSULE_VERSION.to_owned(),
        entries,
    };
    let index_path = out.join(INDEX_FILE);
    fs::write(&index_path, index.to_canonical_json()).map_err(io_err(&index_path))?;
    open_capsule(out)
}
