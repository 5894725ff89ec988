use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capsule::Capsule;
use crate::compression::{
    compress_step, reset_mapping, CompressionConfig, MappingSnapshot, MappingState, VirtDelta,
    Workspace,
};
use crate::engine::{EngineConfig, EngineError, EngineInput, EngineState, TickFrame};
use crate::geometry::Pose;
use crate::rng::SplitMix64;
use crate::scene::SceneManifest;
use crate::tracking::{default_ring, fuse, simulate_readings, FusedEstimate, SensorConfig};

/// Everything that parameterizes a visit apart from the scene and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitConfig {
    pub engine: EngineConfig,
    pub compression: CompressionConfig,
    pub workspace: Workspace,
    pub sensors: Vec<SensorConfig>,
    /// Virtual pose the visitor starts from.
    pub virt_start: Pose,
}

impl Default for VisitConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            compression: CompressionConfig::default(),
            workspace: Workspace::default(),
            sensors: default_ring(),
            virt_start: Pose::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VisitInput {
    Move(VirtDelta),
    SelectCity(String),
}

/// What one tick of a visit produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitRecord {
    pub frame: TickFrame,
    pub mapping: MappingSnapshot,
    /// Curvature injected by the last compression step of the tick.
    pub kappa_injected: f64,
    /// Arc length walked this tick.
    pub ds: f64,
    /// `None` when no sensor saw the visitor.
    pub estimate: Option<FusedEstimate>,
    /// Physical head pose the sensors observed.
    pub true_pose: Pose,
}

/// One visitor in one installation: tracking, motion compression and the
/// re-enactment engine stepped together.
#[derive(Debug, Clone)]
pub struct Visit {
    engine: EngineState,
    mapping: MappingState,
    config: VisitConfig,
    rng: SplitMix64,
}

impl Visit {
    /// `seed` drives both the sensor noise and the engine's playlist shuffles.
    pub fn new(
        manifest: Arc<SceneManifest>,
        capsule: Option<Arc<Capsule>>,
        config: VisitConfig,
        seed: u64,
    ) -> Result<Self, EngineError> {
        if !config.compression.is_valid() {
            return Err(EngineError::InvalidConfig(
                "compression config out of range".into(),
            ));
        }
        if !config.workspace.is_valid() {
            return Err(EngineError::InvalidConfig(
                "workspace must have positive size".into(),
            ));
        }
        let engine_config = EngineConfig {
            rng_seed: seed,
            ..config.engine.clone()
        };
        let mut engine = EngineState::init(manifest, capsule, engine_config)?;
        let mapping = reset_mapping(&config.workspace, config.virt_start);
        engine.handle_input(EngineInput::SetPose(mapping.virt_pose))?;
        Ok(Self {
            engine,
            mapping,
            config,
            rng: SplitMix64::new(seed),
        })
    }

    pub fn engine(&self) -> &EngineState {
        &self.engine
    }

    pub fn mapping(&self) -> &MappingState {
        &self.mapping
    }

    pub fn config(&self) -> &VisitConfig {
        &self.config
    }

    pub fn check_input(&self, input: &VisitInput) -> Result<(), String> {
        match input {
            VisitInput::Move(delta) => delta.check().map_err(|e| e.to_string()),
            VisitInput::SelectCity(city) => self
                .engine
                .check_input(&EngineInput::SelectCity(city.clone()))
                .map_err(|e| e.to_string()),
        }
    }

    /// Applies one batch of inputs and advances one tick.
    ///
    /// Order: city selections → sensor readings of the current physical pose
    /// → fusion → one compression step per move (an idle step when there is
    /// none) → engine tick. Moves are dropped while tracking is lost.
    pub fn step(&mut self, inputs: &[VisitInput]) -> Result<VisitRecord, EngineError> {
        let mut moves = Vec::new();
        for input in inputs {
            match input {
                VisitInput::SelectCity(city) => {
                    self.engine
                        .handle_input(EngineInput::SelectCity(city.clone()))?;
                }
                VisitInput::Move(delta) => moves.push(*delta),
            }
        }

        let true_pose = self.mapping.phys_pose;
        let t = (self.engine.t_ticks() + 1) as f64 / self.config.engine.tick_rate;
        let readings = simulate_readings(&true_pose, &self.config.sensors, &mut self.rng, t);
        let estimate = fuse(&readings).ok();
        if estimate.is_none() {
            moves.clear();
        }
        if moves.is_empty() {
            moves.push(VirtDelta::IDLE);
        }

        let mut kappa_injected = 0.0;
        let mut ds = 0.0;
        for delta in moves {
            let (next, kappa) = compress_step(
                &self.mapping,
                delta,
                &self.config.compression,
                &self.config.workspace,
            );
            self.mapping = next;
            kappa_injected = kappa;
            ds += delta.ds;
        }

        self.engine
            .handle_input(EngineInput::SetPose(self.mapping.virt_pose))?;
        let frame = self.engine.tick();
        Ok(VisitRecord {
            frame,
            mapping: self.mapping.snapshot(),
            kappa_injected,
            ds,
            estimate,
            true_pose,
        })
    }
}
