//! The two case-study artworks as ready-made manifests.
//!
//! Positions are in the virtual frame; the visitor starts at the origin
//! facing +x, so both installations sit a few meters ahead of them.

use std::f64::consts::{PI, TAU};

use super::{
    Binding, CityOption, Environment, MenuWidget, NodeKind, PlaylistRef, Projector, SceneManifest,
    SceneNode, Speaker, SpeakerSource, UnknownScene, VideoChannel,
};
use crate::capsule::{MediaItem, MediaKind};
use crate::geometry::{Pose, Vec3};

pub const BUILTIN_NAMES: [&str; 2] = ["vf", "mc"];

pub fn builtin_scene(name: &str) -> Result<SceneManifest, UnknownScene> {
    match name {
        "vf" => Ok(versailles_fountain(0.0)),
        "mc" => Ok(ten_thousand_moving_cities()),
        other => Err(UnknownScene(other.to_owned())),
    }
}

const VF_CENTER: (f64, f64) = (4.0, 0.0);
const VF_FPS: f64 = 25.0;

/// (ring radius, monitor count, half-size, base height)
const VF_MONITOR_RINGS: [(f64, usize, f64, f64); 3] = [
    (0.6, 10, 0.26, 1.6),
    (1.0, 14, 0.2, 1.0),
    (1.4, 14, 0.15, 0.4),
];
const VF_NEON_COUNT: usize = 20;
const VF_NEON_RADIUS: f64 = 1.7;

fn vf_item(media_id: &str) -> MediaItem {
    let duration = 480.0;
    MediaItem {
        media_id: media_id.to_owned(),
        kind: MediaKind::Video,
        duration,
        fps: VF_FPS,
        frame_count: (duration * VF_FPS).round() as u64,
        uri: format!("media/{media_id}.mp4"),
    }
}

/// Nam June Paik's "Versailles Fountain": 38 CRT monitors on two circuits
/// plus 20 neon elements. `delay_offset_b` is stored on channel B as the
/// manifest-level offset.
pub fn versailles_fountain(delay_offset_b: f64) -> SceneManifest {
    let (cx, cy) = VF_CENTER;
    let mut nodes = Vec::with_capacity(58);
    let mut index = 0usize;
    for (ring, &(radius, count, half, base)) in VF_MONITOR_RINGS.iter().enumerate() {
        for k in 0..count {
            let angle = TAU * k as f64 / count as f64 + ring as f64 * 0.1;
            let channel = if index.is_multiple_of(2) { "A" } else { "B" };
            index += 1;
            nodes.push(SceneNode {
                node_id: format!("crt_{index:02}"),
                kind: NodeKind::MediaSurface,
                pose: Pose::new(
                    Vec3::new(
                        cx + radius * angle.cos(),
                        cy + radius * angle.sin(),
                        base + 0.15 * (k % 3) as f64,
                    ),
                    angle,
                ),
                extent: Vec3::new(half, half * 1.1, half * 0.8),
                mesh_asset: Some(format!("meshes/crt_{}.obj", ring + 1)),
                binding: Some(Binding::Channel(channel.to_owned())),
            });
        }
    }
    for k in 0..VF_NEON_COUNT {
        let angle = TAU * k as f64 / VF_NEON_COUNT as f64;
        nodes.push(SceneNode {
            node_id: format!("neon_{:02}", k + 1),
            kind: NodeKind::NeonElement,
            pose: Pose::new(
                Vec3::new(
                    cx + VF_NEON_RADIUS * angle.cos(),
                    cy + VF_NEON_RADIUS * angle.sin(),
                    1.2,
                ),
                angle,
            ),
            extent: Vec3::new(0.02, 0.02, 0.6),
            mesh_asset: Some("meshes/neon_tube.obj".to_owned()),
            binding: None,
        });
    }

    let channel = |id: &str, media: &str, offset: f64| VideoChannel {
        channel_id: id.to_owned(),
        playlist_ref: PlaylistRef::Items(vec![vf_item(media)]),
        fps: VF_FPS,
        looping: true,
        delay_offset: offset,
    };

    SceneManifest {
        scene_id: "vf".to_owned(),
        title: "Versailles Fountain".to_owned(),
        artist: "Nam June Paik".to_owned(),
        environment: Environment::Panorama {
            asset: "environment/zkm_hall_panorama.jpg".to_owned(),
        },
        nodes,
        channels: vec![
            channel("A", "vf_circuit_a", 0.0),
            channel("B", "vf_circuit_b", delay_offset_b),
        ],
        projectors: vec![],
        speakers: vec![
            Speaker {
                speaker_id: "speaker_a".to_owned(),
                position: Vec3::new(cx - 0.5, cy + 0.8, 0.5),
                source: SpeakerSource::Channel("A".to_owned()),
                reference_gain: 0.8,
                reference_distance: 1.0,
            },
            Speaker {
                speaker_id: "speaker_b".to_owned(),
                position: Vec3::new(cx - 0.5, cy - 0.8, 0.5),
                source: SpeakerSource::Channel("B".to_owned()),
                reference_gain: 0.8,
                reference_distance: 1.0,
            },
        ],
        widgets: vec![],
    }
}

pub const MC_CITIES: [(&str, &str); 3] = [
    ("karlsruhe", "Karlsruhe"),
    ("seoul", "Seoul"),
    ("shanghai", "Shanghai"),
];

/// Marc Lee's "10,000 Moving Cities – Same but Different": four projected
/// cubes fed by collage slots, driven by a city menu.
pub fn ten_thousand_moving_cities() -> SceneManifest {
    let cube_positions = [(3.0, 1.5), (3.0, -1.5), (6.0, 1.5), (6.0, -1.5)];
    let mut nodes = Vec::new();
    let mut projectors = Vec::new();
    let mut speakers = Vec::new();
    for (i, &(x, y)) in cube_positions.iter().enumerate() {
        let n = i + 1;
        let cube = format!("cube_{n}");
        let projector = format!("projector_{n}");
        let slot = format!("collage_{n}");
        nodes.push(SceneNode {
            node_id: cube.clone(),
            kind: NodeKind::MediaSurface,
            pose: Pose::new(
                Vec3::new(x, y, 0.75),
                if y > 0.0 { -PI / 2.0 } else { PI / 2.0 },
            ),
            extent: Vec3::new(0.75, 0.75, 0.75),
            mesh_asset: Some("meshes/cube.obj".to_owned()),
            binding: Some(Binding::Projector(projector.clone())),
        });
        projectors.push(Projector {
            projector_id: projector,
            target_surface_ids: vec![cube],
            slot: slot.clone(),
        });
        speakers.push(Speaker {
            speaker_id: format!("speaker_{n}"),
            position: Vec3::new(x, y + if y > 0.0 { 0.9 } else { -0.9 }, 1.8),
            source: SpeakerSource::Slot(slot),
            reference_gain: 1.0,
            reference_distance: 1.5,
        });
    }
    nodes.push(SceneNode {
        node_id: "menu_kiosk".to_owned(),
        kind: NodeKind::StaticMesh,
        pose: Pose::new(Vec3::new(1.5, 0.0, 0.0), PI),
        extent: Vec3::new(0.3, 0.4, 0.6),
        mesh_asset: Some("meshes/kiosk.obj".to_owned()),
        binding: None,
    });
    nodes.push(SceneNode {
        node_id: "floor".to_owned(),
        kind: NodeKind::StaticMesh,
        pose: Pose::new(Vec3::new(4.5, 0.0, 0.0), 0.0),
        extent: Vec3::new(4.0, 3.5, 0.01),
        mesh_asset: None,
        binding: None,
    });

    SceneManifest {
        scene_id: "mc".to_owned(),
        title: "10,000 Moving Cities - Same but Different".to_owned(),
        artist: "Marc Lee".to_owned(),
        environment: Environment::Panorama {
            asset: "environment/exhibition_space_panorama.jpg".to_owned(),
        },
        nodes,
        channels: vec![],
        projectors,
        speakers,
        widgets: vec![MenuWidget {
            widget_id: "city_menu".to_owned(),
            pose: Pose::new(Vec3::new(1.5, 0.0, 1.1), PI),
            options: MC_CITIES
                .iter()
                .map(|&(city_id, label)| CityOption {
                    city_id: city_id.to_owned(),
                    label: label.to_owned(),
                })
                .collect(),
            driven_slots: (1..=4).map(|n| format!("collage_{n}")).collect(),
        }],
    }
}
