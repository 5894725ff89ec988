mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use einstall_core::capsule::{
    ingest_directory, open_capsule, resolve_playlist, CapsuleError, IndexFile, INDEX_FILE,
};
use einstall_core::engine::{EngineConfig, EngineError, EngineState};
use einstall_core::scene::builtin_scene;

fn write_media(dir: &Path, name: &str, meta: &str) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(name), name).unwrap();
    fs::write(dir.join(format!("{name}.meta.json")), meta).unwrap();
}

fn small_tree(root: &Path) {
    for city in ["oslo", "lima"] {
        for slot in 1..=4 {
            let dir = root.join(city).join(format!("collage_{slot}"));
            write_media(
                &dir,
                "a.mp4",
                r#"{"duration":2.0,"fps":25.0,"kind":"video"}"#,
            );
            write_media(&dir, "b.txt", r#"{"duration":5.0,"kind":"text"}"#);
        }
    }
}

#[test]
fn ingest_counts_and_is_reproducible() {
    let src = tempfile::tempdir().unwrap();
    small_tree(src.path());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let capsule = ingest_directory(src.path(), a.path()).unwrap();
    ingest_directory(src.path(), b.path()).unwrap();
    assert_eq!(capsule.item_count(), 16);
    let index_a = fs::read(a.path().join(INDEX_FILE)).unwrap();
    assert_eq!(index_a, fs::read(b.path().join(INDEX_FILE)).unwrap());

    let index: IndexFile = serde_json::from_slice(&index_a).unwrap();
    let keys: Vec<_> = index
        .entries
        .iter()
        .map(|e| (e.city_id.clone(), e.slot.clone(), e.media_id.clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let video = &index.entries[0];
    assert_eq!((video.media_id.as_str(), video.frame_count), ("a.mp4", 50));
    let text = &index.entries[1];
    assert_eq!((text.fps, text.frame_count), (1.0, 5));
}

#[test]
fn ingest_errors() {
    let src = tempfile::tempdir().unwrap();
    small_tree(src.path());
    let empty = src.path().join("lima/collage_9");
    fs::create_dir_all(&empty).unwrap();
    let out = tempfile::tempdir().unwrap();
    match ingest_directory(src.path(), out.path()) {
        Err(CapsuleError::EmptySlot(path)) => assert_eq!(path, empty),
        other => panic!("{other:?}"),
    }
    fs::remove_dir(&empty).unwrap();

    fs::write(src.path().join("oslo/collage_1/c.png"), "x").unwrap();
    assert!(matches!(
        ingest_directory(src.path(), out.path()),
        Err(CapsuleError::MissingSidecar(p)) if p.ends_with("oslo/collage_1/c.png")
    ));
    fs::write(
        src.path().join("oslo/collage_1/c.png.meta.json"),
        r#"{"duration":1.0,"kind":"video"}"#,
    )
    .unwrap();
    assert!(matches!(
        ingest_directory(src.path(), out.path()),
        Err(CapsuleError::BadSidecar { .. })
    ));
}

#[test]
fn open_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        open_capsule(dir.path()),
        Err(CapsuleError::MissingIndex(_))
    ));

    let src = tempfile::tempdir().unwrap();
    small_tree(src.path());
    ingest_directory(src.path(), dir.path()).unwrap();
    fs::remove_file(dir.path().join("assets/lima/collage_2/b.txt")).unwrap();
    match open_capsule(dir.path()) {
        Err(err @ CapsuleError::UnresolvableUri(_)) => {
            assert!(err.to_string().contains("assets/lima/collage_2/b.txt"));
        }
        other => panic!("{other:?}"),
    }

    fs::write(dir.path().join(INDEX_FILE), "{\"version\":\"capsule/1\"}").unwrap();
    assert!(matches!(
        open_capsule(dir.path()),
        Err(CapsuleError::MalformedIndex(_))
    ));
    fs::write(
        dir.path().join(INDEX_FILE),
        "{\"version\":\"capsule/2\",\"entries\":[]}",
    )
    .unwrap();
    assert!(matches!(
        open_capsule(dir.path()),
        Err(CapsuleError::MalformedIndex(_))
    ));
}

#[test]
fn playlists_are_seeded_permutations() {
    let capsule = common::mc_capsule();
    assert!(matches!(
        resolve_playlist(&capsule, "atlantis", "collage_1", 1),
        Err(CapsuleError::UnknownKey { .. })
    ));
    let order = |seed| {
        resolve_playlist(&capsule, "seoul", "collage_3", seed)
            .unwrap()
            .items()
            .iter()
            .map(|i| i.media_id.clone())
            .collect::<Vec<_>>()
    };
    let mut orders: Vec<_> = (0..8).map(order).collect();
    let mut first = orders[0].clone();
    first.sort();
    for o in &orders {
        let mut sorted = o.clone();
        sorted.sort();
        assert_eq!(sorted, first);
    }
    orders.sort();
    orders.dedup();
    assert!(orders.len() > 1, "seed never changed the order");
}

#[test]
fn engine_requires_every_widget_key() {
    let src = tempfile::tempdir().unwrap();
    let fixture = common::fixtures().join("capsules/mc_src");
    for city in ["karlsruhe", "seoul", "shanghai"] {
        for slot in 1..=4 {
            if city == "shanghai" && slot == 4 {
                continue;
            }
            let rel = format!("{city}/collage_{slot}");
            let to = src.path().join(&rel);
            fs::create_dir_all(&to).unwrap();
            for entry in fs::read_dir(fixture.join(&rel)).unwrap() {
                let entry = entry.unwrap();
                fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
            }
        }
    }
    let out = tempfile::tempdir().unwrap();
    let partial = ingest_directory(src.path(), out.path()).unwrap();
    let err = EngineState::init(
        Arc::new(builtin_scene("mc").unwrap()),
        Some(Arc::new(partial)),
        EngineConfig::default(),
    )
    .unwrap_err();
    assert_eq!(
        err,
        EngineError::MissingCapsuleKey {
            city_id: "shanghai".into(),
            slot: "collage_4".into()
        }
    );
    let err = EngineState::init(
        Arc::new(builtin_scene("mc").unwrap()),
        None,
        EngineConfig::default(),
    )
    .unwrap_err();
    assert_eq!(err.to_string(), "capsule required");
}
