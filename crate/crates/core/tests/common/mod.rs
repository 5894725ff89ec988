#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use einstall_core::capsule::{open_capsule, Capsule};
use einstall_core::harness::{Visit, VisitConfig};
use einstall_core::protocol::{replay_client, ClientLine, Hub};
use einstall_core::scene::builtin_scene;

pub const GOLDEN_SEED: u64 = 7;
pub const GOLDEN_TICKS: u64 = 60;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_fixture(rel: &str) -> String {
    let path = fixtures().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Compares `actual` with a stored fixture. With `UPDATE_GOLDEN=1` the
/// fixture is rewritten instead.
pub fn check_golden(rel: &str, actual: &str) {
    let path = fixtures().join(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).unwrap();
        }
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = read_fixture(rel);
    assert!(
        expected == actual,
        "{rel} differs from the generated output; rerun with UPDATE_GOLDEN=1 if intended"
    );
}

pub fn mc_capsule() -> Arc<Capsule> {
    Arc::new(open_capsule(fixtures().join("capsules/mc")).expect("mc capsule fixture"))
}

pub fn hub_for(scene: &str, capsule: Option<Arc<Capsule>>, seed: u64) -> Hub {
    let manifest = Arc::new(builtin_scene(scene).unwrap());
    Hub::new(Box::new(move || {
        Visit::new(
            manifest.clone(),
            capsule.clone(),
            VisitConfig::default(),
            seed,
        )
    }))
    .unwrap()
}

pub fn golden_client() -> Vec<ClientLine> {
    serde_json::from_str(&read_fixture("golden/vf_client.json")).unwrap()
}

/// Everything the scripted golden client receives from a VF server.
pub fn golden_transcript() -> String {
    let mut hub = hub_for("vf", None, GOLDEN_SEED);
    replay_client(&mut hub, &golden_client(), GOLDEN_TICKS).concat()
}

/// At least one message of every type plus FRAMEs taken from randomly
/// steered VF and MC visits.
pub fn message_corpus(random_frames: usize) -> Vec<einstall_core::protocol::Message> {
    use einstall_core::compression::VirtDelta;
    use einstall_core::harness::VisitInput;
    use einstall_core::protocol::*;
    use einstall_core::rng::SplitMix64;

    let mut corpus = vec![
        Message::Hello(Hello {
            client_name: "viewer \"one\"".into(),
            mode: ClientMode::Viewer,
            protocol: PROTOCOL_VERSION.into(),
        }),
        Message::Hello(Hello {
            client_name: "walker".into(),
            mode: ClientMode::Tracked,
            protocol: PROTOCOL_VERSION.into(),
        }),
        Message::PoseInput(PoseInput {
            seq: 1,
            movement: VirtDelta {
                ds: 0.1,
                dtheta: -0.3,
            },
        }),
        Message::SelectCity(SelectCity {
            seq: 2,
            city_id: "seoul".into(),
        }),
        Message::Bye(Bye { seq: u64::MAX }),
        Message::error(ErrorCode::BadVersion, "x"),
        Message::error(ErrorCode::HandshakeTimeout, "no HELLO received"),
        Message::error(ErrorCode::BadInput, "unknown city 'paris'"),
        Message::error(ErrorCode::Malformed, "line\twith\u{1}controls"),
    ];
    for scene in ["vf", "mc"] {
        let capsule = (scene == "mc").then(mc_capsule);
        let hub = hub_for(scene, capsule.clone(), 3);
        corpus.push(Message::Welcome(hub.welcome()));
    }

    let mut rng = SplitMix64::new(0x5eed);
    let mut visits = [
        Visit::new(
            Arc::new(builtin_scene("vf").unwrap()),
            None,
            VisitConfig::default(),
            11,
        )
        .unwrap(),
        Visit::new(
            Arc::new(builtin_scene("mc").unwrap()),
            Some(mc_capsule()),
            VisitConfig::default(),
            12,
        )
        .unwrap(),
    ];
    let cities = ["karlsruhe", "seoul", "shanghai"];
    for i in 0..random_frames {
        let visit = &mut visits[i % 2];
        let mut inputs = vec![VisitInput::Move(VirtDelta {
            ds: rng.next_f64() * 0.2,
            dtheta: (rng.next_f64() - 0.5) * 2.0,
        })];
        if i % 2 == 1 && rng.next_f64() < 0.3 {
            inputs.push(VisitInput::SelectCity(
                cities[rng.next_index(cities.len())].into(),
            ));
        }
        // skip a random number of ticks so frames differ in time too
        for _ in 0..rng.next_index(5) {
            visit.step(&[]).unwrap();
        }
        let record = visit.step(&inputs).unwrap();
        corpus.push(Message::Frame(frame_from_record(&record)));
    }
    corpus
}
