//! Deterministic scripted visits, their traces and the metrics computed
//! from them.
//!
//! A trace is NDJSON: one header line, then one record per tick. The trace
//! hash is FNV-1a 64 over the record lines exactly as written (each line
//! including its terminating LF, header excluded), so a persisted trace can
//! be re-hashed without re-running the visit.

mod visit;

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use visit::{Visit, VisitConfig, VisitInput, VisitRecord};

use crate::capsule::Capsule;
use crate::compression::VirtDelta;
use crate::engine::EngineError;
use crate::geometry::wrap_angle;
use crate::rng::Fnv1a64;
use crate::scene::SceneManifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptAction {
    Move(VirtDelta),
    SelectCity(String),
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    /// The action takes effect at the boundary after this tick, so it first
    /// shows in record `at_tick + 1`.
    pub at_tick: u64,
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkScript {
    pub steps: Vec<ScriptStep>,
}

impl WalkScript {
    /// A straight walk of `length` meters in steps of `step` (the last one
    /// possibly shorter), one step per tick starting at `first_tick`.
    pub fn straight(length: f64, step: f64, first_tick: u64) -> Self {
        let mut steps = Vec::new();
        let mut walked = 0.0;
        let mut tick = first_tick;
        while length - walked > 1e-12 {
            let ds = step.min(length - walked);
            steps.push(ScriptStep {
                at_tick: tick,
                action: ScriptAction::Move(VirtDelta { ds, dtheta: 0.0 }),
            });
            walked += ds;
            tick += 1;
        }
        Self { steps }
    }

    pub fn last_tick(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.at_tick)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("script step {index}: {message}")]
    BadScript { index: usize, message: String },
    #[error("script references city '{0}' absent from the menu widget")]
    UnknownCity(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("empty trace")]
    EmptyTrace,
    #[error("malformed trace line {line}: {message}")]
    MalformedTrace { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub scene_id: String,
    pub ticks: u64,
    pub seed: u64,
    pub config: VisitConfig,
}

/// One tick of a trace; the tick number is `frame.t_ticks`.
pub type TraceRecord = VisitRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn record_line(record: &TraceRecord) -> String {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        line
    }

    pub fn hash(&self) -> u64 {
        let mut h = Fnv1a64::new();
        for r in &self.records {
            h.update(Self::record_line(r).as_bytes());
        }
        h.finish()
    }

    pub fn write_ndjson<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            out.write_all(Self::record_line(r).as_bytes())?;
        }
        out.flush()
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self, HarnessError> {
        let mut lines = input.lines().enumerate();
        let malformed = |line: usize, e: &dyn std::fmt::Display| HarnessError::MalformedTrace {
            line: line + 1,
            message: e.to_string(),
        };
        let header = match lines.next() {
            None => return Err(HarnessError::EmptyTrace),
            Some((n, line)) => {
                let line = line?;
                serde_json::from_str::<TraceHeader>(&line).map_err(|e| malformed(n, &e))?
            }
        };
        let mut records = Vec::new();
        for (n, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| malformed(n, &e))?);
        }
        Ok(Self { header, records })
    }
}

/// Runs a scripted visit for `ticks` ticks.
pub fn run_scripted(
    manifest: Arc<SceneManifest>,
    capsule: Option<Arc<Capsule>>,
    script: &WalkScript,
    config: &VisitConfig,
    seed: u64,
    ticks: u64,
) -> Result<Trace, HarnessError> {
    check_script(&manifest, script, ticks)?;
    let mut visit = Visit::new(manifest.clone(), capsule, config.clone(), seed)?;

    let mut pending = script.steps.iter().peekable();
    let mut records = Vec::with_capacity(ticks as usize);
    for tick in 1..=ticks {
        let mut inputs = Vec::new();
        while let Some(step) = pending.next_if(|s| s.at_tick < tick) {
            match &step.action {
                ScriptAction::Move(delta) => inputs.push(VisitInput::Move(*delta)),
                ScriptAction::SelectCity(city) => inputs.push(VisitInput::SelectCity(city.clone())),
                ScriptAction::Idle => {}
            }
        }
        records.push(visit.step(&inputs)?);
    }

    Ok(Trace {
        header: TraceHeader {
            scene_id: manifest.scene_id.clone(),
            ticks,
            seed,
            config: config.clone(),
        },
        records,
    })
}

fn check_script(
    manifest: &SceneManifest,
    script: &WalkScript,
    ticks: u64,
) -> Result<(), HarnessError> {
    let mut previous = 0;
    for (index, step) in script.steps.iter().enumerate() {
        let bad = |message: String| HarnessError::BadScript { index, message };
        if step.at_tick < 1 {
            return Err(bad("at_tick must be >= 1".into()));
        }
        if step.at_tick <= previous {
            return Err(bad(format!(
                "at_tick {} not after previous step's {previous}",
                step.at_tick
            )));
        }
        if step.at_tick > ticks {
            return Err(bad(format!(
                "at_tick {} beyond the requested {ticks} ticks",
                step.at_tick
            )));
        }
        previous = step.at_tick;
        match &step.action {
            ScriptAction::Move(delta) => delta.check().map_err(|e| bad(e.to_string()))?,
            ScriptAction::SelectCity(city) => {
                let known = manifest
                    .menu()
                    .is_some_and(|m| m.options.iter().any(|o| &o.city_id == city));
                if !known {
                    return Err(HarnessError::UnknownCity(city.clone()));
                }
            }
            ScriptAction::Idle => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// m, over ticks with a fused estimate
    pub tracking_rmse_pos: f64,
    /// rad, wrapped differences
    pub tracking_rmse_yaw: f64,
    /// m, largest planar distance of the physical pose from the center
    pub max_phys_excursion: f64,
    /// Ticks whose physical pose lies outside the workspace.
    pub containment_violations: u64,
    /// Share of moving ticks whose injection hit ±kappa_max.
    pub kappa_saturation_fraction: f64,
    pub frames: u64,
    /// FNV-1a 64 of the record lines, 16 lowercase hex digits.
    pub trace_hash: String,
}

pub fn compute_metrics(trace: &Trace) -> Result<MetricsReport, HarnessError> {
    if trace.records.is_empty() {
        return Err(HarnessError::EmptyTrace);
    }
    let workspace = trace.header.config.workspace;
    let kappa_max = trace.header.config.compression.kappa_max;

    let (mut sq_pos, mut sq_yaw, mut tracked) = (0.0, 0.0, 0u64);
    let mut max_excursion: f64 = 0.0;
    let mut violations = 0;
    let (mut moving, mut saturated) = (0u64, 0u64);
    for r in &trace.records {
        if let Some(est) = &r.estimate {
            let err = est.pose.position.sub(&r.true_pose.position).norm();
            sq_pos += err * err;
            let yaw_err = wrap_angle(est.pose.yaw - r.true_pose.yaw);
            sq_yaw += yaw_err * yaw_err;
            tracked += 1;
        }
        let phys = r.mapping.phys_pose.position;
        max_excursion = max_excursion.max(phys.x.hypot(phys.y));
        if !workspace.contains(&phys) {
            violations += 1;
        }
        if r.ds > 0.0 {
            moving += 1;
            if r.kappa_injected.abs() >= kappa_max * (1.0 - 1e-12) {
                saturated += 1;
            }
        }
    }
    let rms = |sum: f64| {
        if tracked == 0 {
            0.0
        } else {
            (sum / tracked as f64).sqrt()
        }
    };

    Ok(MetricsReport {
        tracking_rmse_pos: rms(sq_pos),
        tracking_rmse_yaw: rms(sq_yaw),
        max_phys_excursion: max_excursion,
        containment_violations: violations,
        kappa_saturation_fraction: if moving == 0 {
            0.0
        } else {
            saturated as f64 / moving as f64
        },
        frames: trace.records.len() as u64,
        trace_hash: format!("{:016x}", trace.hash()),
    })
}
