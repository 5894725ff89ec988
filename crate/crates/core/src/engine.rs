//! Program logic of a re-enacted installation, advanced one tick at a time.
//!
//! Channels loop their playlists on a shared clock (optionally with the
//! dual-circuit delay on every channel after the first); projector slots play
//! the capsule playlist of the selected city from the tick it was chosen.
//! Surfaces report which media item they show and at which frame, never
//! pixels.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capsule::{resolve_playlist, Capsule, MediaItem, Playlist};
use crate::geometry::Pose;
use crate::scene::{validate_manifest, Binding, CityOption, PlaylistRef, SceneManifest, Speaker};

/// Media id reported by a projected surface before any city is selected.
pub const BLANK_MEDIA_ID: &str = "(blank)";

/// Distance floor for the speaker gain law, in meters.
pub const GAIN_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Hz
    pub tick_rate: f64,
    pub delay_emulation: bool,
    /// Seconds of delay applied to the second circuit when emulating.
    pub delay_offset: f64,
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tick_rate: 30.0,
            delay_emulation: false,
            delay_offset: 0.5,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceState {
    pub surface_id: String,
    pub media_id: String,
    pub frame_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuState {
    pub options: Vec<CityOption>,
    pub selected_city: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickFrame {
    pub t_ticks: u64,
    pub time: f64,
    pub surfaces: Vec<SurfaceState>,
    pub speaker_gains: BTreeMap<String, f64>,
    pub menu: MenuState,
    pub user_virtual_pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineInput {
    SelectCity(String),
    SetPose(Pose),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("capsule required")]
    CapsuleRequired,
    #[error("capsule has no entry for ({city_id}, {slot})")]
    MissingCapsuleKey { city_id: String, slot: String },
    #[error("no menu widget")]
    NoMenuWidget,
    #[error("unknown city '{0}'")]
    UnknownCity(String),
}

/// Index of the frame shown at time `t` by a looping item.
///
/// `euclid_mod(floor((t - delay_offset) * fps), frame_count)`; always in
/// `[0, frame_count)`, including for times before the offset.
pub fn frame_index(item: &MediaItem, delay_offset: f64, t: f64) -> u64 {
    let count = item.frame_count.max(1) as i64;
    let raw = snapped_floor((t - delay_offset) * item.fps) as i64;
    raw.rem_euclid(count) as u64
}

/// Relative distance to an integer below which a frame position counts as
/// sitting exactly on that frame boundary.
pub const FRAME_SNAP: f64 = 1e-9;

/// `floor`, except that values within rounding noise of an integer land on
/// it: `138 / 30 * 25` must give frame 115, not 114.
fn snapped_floor(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= FRAME_SNAP * nearest.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    }
}

/// `reference_gain * min(1, reference_distance / max(d, ε))`.
pub fn speaker_gain(user: &Pose, speaker: &Speaker) -> f64 {
    let d = user.position.distance(&speaker.position).max(GAIN_EPSILON);
    speaker.reference_gain * (speaker.reference_distance / d).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
struct ChannelPlayback {
    playlist: Playlist,
    offset: f64,
    looping: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotBinding {
    pub city_id: String,
    pub playlist: Playlist,
    /// Tick at which the slot clock was reset.
    pub bound_at_tick: u64,
}

/// Running state of one re-enactment.
#[derive(Debug, Clone)]
pub struct EngineState {
    manifest: Arc<SceneManifest>,
    capsule: Option<Arc<Capsule>>,
    config: EngineConfig,
    t_ticks: u64,
    channels: BTreeMap<String, ChannelPlayback>,
    slot_bindings: BTreeMap<String, SlotBinding>,
    selected_city: Option<String>,
    user_virtual_pose: Pose,
}

impl EngineState {
    pub fn init(
        manifest: Arc<SceneManifest>,
        capsule: Option<Arc<Capsule>>,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        if !(config.tick_rate.is_finite() && config.tick_rate > 0.0) {
            return Err(EngineError::InvalidConfig("tick_rate must be > 0".into()));
        }
        if !(config.delay_offset.is_finite() && config.delay_offset >= 0.0) {
            return Err(EngineError::InvalidConfig(
                "delay_offset must be >= 0".into(),
            ));
        }
        if let Some(v) = validate_manifest(&manifest).first() {
            return Err(EngineError::InvalidManifest(format!(
                "{}: {}",
                v.path, v.message
            )));
        }
        if manifest.needs_capsule() {
            let capsule = capsule.as_deref().ok_or(EngineError::CapsuleRequired)?;
            if let Some(missing) = manifest
                .required_capsule_keys()
                .into_iter()
                .find(|k| !capsule.contains(k))
            {
                return Err(EngineError::MissingCapsuleKey {
                    city_id: missing.city_id,
                    slot: missing.slot,
                });
            }
        }

        let mut channels = BTreeMap::new();
        for (i, channel) in manifest.channels.iter().enumerate() {
            let playlist = match &channel.playlist_ref {
                PlaylistRef::Items(items) => {
                    Playlist::new(items.clone()).expect("validated non-empty")
                }
                PlaylistRef::Capsule(key) => resolve_playlist(
                    capsule.as_deref().expect("checked above"),
                    &key.city_id,
                    &key.slot,
                    config.rng_seed,
                )
                .map_err(|_| EngineError::MissingCapsuleKey {
                    city_id: key.city_id.clone(),
                    slot: key.slot.clone(),
                })?,
            };
            let offset = match (config.delay_emulation, i) {
                (true, 0) => 0.0,
                (true, _) => config.delay_offset,
                (false, _) => channel.delay_offset,
            };
            channels.insert(
                channel.channel_id.clone(),
                ChannelPlayback {
                    playlist,
                    offset,
                    looping: channel.looping,
                },
            );
        }

        Ok(Self {
            manifest,
            capsule,
            config,
            t_ticks: 0,
            channels,
            slot_bindings: BTreeMap::new(),
            selected_city: None,
            user_virtual_pose: Pose::default(),
        })
    }

    pub fn manifest(&self) -> &SceneManifest {
        &self.manifest
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn t_ticks(&self) -> u64 {
        self.t_ticks
    }

    pub fn selected_city(&self) -> Option<&str> {
        self.selected_city.as_deref()
    }

    pub fn user_virtual_pose(&self) -> Pose {
        self.user_virtual_pose
    }

    pub fn slot_bindings(&self) -> &BTreeMap<String, SlotBinding> {
        &self.slot_bindings
    }

    /// Effective playback offset of each channel, in manifest order.
    pub fn channel_offsets(&self) -> Vec<(String, f64)> {
        self.manifest
            .channels
            .iter()
            .map(|c| (c.channel_id.clone(), self.channels[&c.channel_id].offset))
            .collect()
    }

    /// Checks an input against the scene without applying it.
    pub fn check_input(&self, input: &EngineInput) -> Result<(), EngineError> {
        match input {
            EngineInput::SelectCity(city_id) => {
                let menu = self.manifest.menu().ok_or(EngineError::NoMenuWidget)?;
                if !menu.options.iter().any(|o| &o.city_id == city_id) {
                    return Err(EngineError::UnknownCity(city_id.clone()));
                }
                Ok(())
            }
            EngineInput::SetPose(_) => Ok(()),
        }
    }

    pub fn handle_input(&mut self, input: EngineInput) -> Result<(), EngineError> {
        self.check_input(&input)?;
        match input {
            EngineInput::SelectCity(city_id) => {
                if self.selected_city.as_deref() == Some(city_id.as_str()) {
                    return Ok(());
                }
                let menu = self.manifest.menu().expect("checked");
                let capsule = self
                    .capsule
                    .as_deref()
                    .ok_or(EngineError::CapsuleRequired)?;
                let mut bindings = BTreeMap::new();
                for slot in &menu.driven_slots {
                    let playlist = resolve_playlist(capsule, &city_id, slot, self.config.rng_seed)
                        .map_err(|_| EngineError::MissingCapsuleKey {
                            city_id: city_id.clone(),
                            slot: slot.clone(),
                        })?;
                    bindings.insert(
                        slot.clone(),
                        SlotBinding {
                            city_id: city_id.clone(),
                            playlist,
                            bound_at_tick: self.t_ticks,
                        },
                    );
                }
                self.slot_bindings.extend(bindings);
                self.selected_city = Some(city_id);
            }
            EngineInput::SetPose(pose) => {
                self.user_virtual_pose = Pose::new(pose.position, pose.yaw);
            }
        }
        Ok(())
    }

    /// Advances one tick and reports what every surface and speaker does.
    pub fn tick(&mut self) -> TickFrame {
        self.t_ticks += 1;
        let rate = self.config.tick_rate;
        let ticks = self.t_ticks as f64;

        let surfaces = self
            .manifest
            .media_surfaces()
            .map(|node| {
                let (media_id, frame) = match &node.binding {
                    Some(Binding::Channel(id)) => {
                        let ch = &self.channels[id];
                        // Offset converted to ticks first so an offset of k/rate
                        // reproduces the undelayed stream k ticks later exactly.
                        let elapsed = (ticks - ch.offset * rate) / rate;
                        channel_frame(ch, elapsed)
                    }
                    Some(Binding::Projector(id)) => {
                        let slot = &self
                            .manifest
                            .projector(id)
                            .expect("validated projector")
                            .slot;
                        match self.slot_bindings.get(slot) {
                            Some(binding) => {
                                let elapsed = (self.t_ticks - binding.bound_at_tick) as f64 / rate;
                                let (item, local) = binding.playlist.locate(elapsed);
                                (item.media_id.clone(), frame_index(item, 0.0, local))
                            }
                            None => (BLANK_MEDIA_ID.to_owned(), 0),
                        }
                    }
                    None => unreachable!("validated media_surface has a binding"),
                };
                SurfaceState {
                    surface_id: node.node_id.clone(),
                    media_id,
                    frame_index: frame,
                }
            })
            .collect();

        let speaker_gains = self
            .manifest
            .speakers
            .iter()
            .map(|s| {
                (
                    s.speaker_id.clone(),
                    speaker_gain(&self.user_virtual_pose, s),
                )
            })
            .collect();

        TickFrame {
            t_ticks: self.t_ticks,
            time: ticks / rate,
            surfaces,
            speaker_gains,
            menu: MenuState {
                options: self
                    .manifest
                    .menu()
                    .map(|m| m.options.clone())
                    .unwrap_or_default(),
                selected_city: self.selected_city.clone(),
            },
            user_virtual_pose: self.user_virtual_pose,
        }
    }
}

fn channel_frame(ch: &ChannelPlayback, elapsed: f64) -> (String, u64) {
    let playlist = &ch.playlist;
    if !ch.looping {
        if elapsed < 0.0 {
            let first = &playlist.items()[0];
            return (first.media_id.clone(), 0);
        }
        if elapsed >= playlist.total_duration() {
            let last = playlist.items().last().expect("non-empty");
            return (last.media_id.clone(), last.frame_count - 1);
        }
    }
    let (item, local) = playlist.locate(elapsed);
    (item.media_id.clone(), frame_index(item, 0.0, local))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capsule::MediaKind;
    use crate::geometry::Vec3;
    use crate::scene::{builtin_scene, versailles_fountain, SpeakerSource};

    fn item(fps: f64, frame_count: u64) -> MediaItem {
        MediaItem {
            media_id: "m".into(),
            kind: MediaKind::Video,
            duration: frame_count as f64 / fps,
            fps,
            frame_count,
            uri: "m.mp4".into(),
        }
    }

    #[test]
    fn frame_index_examples() {
        let it = item(25.0, 250);
        assert_eq!(frame_index(&it, 0.0, 10.0), 0);
        assert_eq!(frame_index(&it, 0.5, 10.0), 237);
        assert_eq!(frame_index(&it, 0.5, 0.0), 237);
    }

    #[test]
    fn frame_boundaries_are_exact() {
        let it = item(25.0, 12000);
        for tick in 0..3000u64 {
            let t = tick as f64 / 30.0;
            assert_eq!(frame_index(&it, 0.0, t), tick * 25 / 30, "tick {tick}");
        }
        assert_eq!(frame_index(&it, 0.0, 138.0 / 30.0), 115);
        assert_eq!(frame_index(&it, 0.0, 0.0399), 0);
    }

    fn speaker(gain: f64, distance: f64) -> Speaker {
        Speaker {
            speaker_id: "s".into(),
            position: Vec3::new(1.0, 2.0, 0.0),
            source: SpeakerSource::Channel("A".into()),
            reference_gain: gain,
            reference_distance: distance,
        }
    }

    #[test]
    fn speaker_gain_examples() {
        let s = speaker(0.7, 2.0);
        assert_eq!(speaker_gain(&Pose::planar(1.0, 2.0, 0.0), &s), 0.7);
        assert_eq!(speaker_gain(&Pose::planar(3.0, 2.0, 0.0), &s), 0.7);
        let s = speaker(1.0, 2.0);
        assert_eq!(speaker_gain(&Pose::planar(5.0, 2.0, 0.0), &s), 0.5);
    }

    #[test]
    fn vf_delay_offsets() {
        let m = Arc::new(versailles_fountain(0.0));
        let on = EngineConfig {
            delay_emulation: true,
            ..Default::default()
        };
        let e = EngineState::init(m.clone(), None, on).unwrap();
        assert_eq!(
            e.channel_offsets(),
            vec![("A".to_owned(), 0.0), ("B".to_owned(), 0.5)]
        );
        let e = EngineState::init(m, None, EngineConfig::default()).unwrap();
        assert_eq!(
            e.channel_offsets(),
            vec![("A".to_owned(), 0.0), ("B".to_owned(), 0.0)]
        );
    }

    #[test]
    fn mc_needs_capsule() {
        let m = Arc::new(builtin_scene("mc").unwrap());
        let err = EngineState::init(m, None, EngineConfig::default()).unwrap_err();
        assert_eq!(err, EngineError::CapsuleRequired);
        assert_eq!(err.to_string(), "capsule required");
    }

    #[test]
    fn vf_select_city_rejected() {
        let m = Arc::new(versailles_fountain(0.0));
        let mut e = EngineState::init(m, None, EngineConfig::default()).unwrap();
        let err = e
            .handle_input(EngineInput::SelectCity("seoul".into()))
            .unwrap_err();
        assert_eq!(err.to_string(), "no menu widget");
    }

    #[test]
    fn bad_config_rejected() {
        let m = Arc::new(versailles_fountain(0.0));
        let cfg = EngineConfig {
            tick_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            EngineState::init(m, None, cfg),
            Err(EngineError::InvalidConfig(_))
        ));
    }

    #[test]
    fn tick_counts_and_time() {
        let m = Arc::new(versailles_fountain(0.0));
        let mut e = EngineState::init(m, None, EngineConfig::default()).unwrap();
        for k in 1..=45u64 {
            let f = e.tick();
            assert_eq!(f.t_ticks, k);
            assert_eq!(f.time, k as f64 / 30.0);
            assert_eq!(f.surfaces.len(), 38);
        }
        assert_eq!(e.tick().menu.options, vec![]);
    }

    #[test]
    fn non_looping_channel_holds_last_frame() {
        let mut m = versailles_fountain(0.0);
        m.channels[0].looping = false;
        if let PlaylistRef::Items(items) = &mut m.channels[0].playlist_ref {
            items[0].duration = 1.0;
            items[0].frame_count = 25;
        }
        let mut e = EngineState::init(Arc::new(m), None, EngineConfig::default()).unwrap();
        let mut last = None;
        for _ in 0..90 {
            last = Some(e.tick());
        }
        let f = last.unwrap();
        assert_eq!(f.surfaces[0].frame_index, 24);
    }
}
