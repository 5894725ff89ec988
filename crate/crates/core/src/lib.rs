//! Headless e-Installation engine.
//!
//! A virtualized media artwork is described by a [`scene::SceneManifest`],
//! its live web content is replaced by an offline [`capsule::Capsule`], and
//! [`engine::EngineState`] re-enacts its program logic tick by tick. A
//! visitor's walk is tracked by simulated sensors ([`tracking`]) and folded
//! into a small physical workspace ([`compression`]). [`harness`] wires these
//! together for scripted runs, and [`protocol`] streams the resulting frames
//! to clients.

pub mod capsule;
pub mod compression;
pub mod engine;
pub mod geometry;
pub mod harness;
pub mod protocol;
pub mod rng;
pub mod scene;
pub mod tracking;
