//! Fits platform parameters to measured SMT/gateway speedups.
//!
//! Compass search in log-parameter space on the summed squared log error
//! of the simulated speedups. Evaluation runs without jitter and with one
//! message per cell, so the objective is deterministic.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{run_cell, GridCell};
use super::platform::PlatformModel;
use super::SimError;
use crate::graph::Domain;

fn default_max_rel_error() -> f64 {
    0.25
}

/// One measured speedup (SMT time over gateway time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub publisher: Domain,
    /// Domain of the subscribers whose transfer time is compared.
    pub path: Domain,
    pub hw_subscribers: usize,
    pub size_bytes: u64,
    pub speedup: f64,
}

impl Target {
    pub fn cell(&self) -> GridCell {
        GridCell {
            publisher: self.publisher,
            hw_subscribers: self.hw_subscribers,
            size_bytes: self.size_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub targets: Vec<Target>,
    #[serde(default = "default_max_rel_error")]
    pub max_rel_error: f64,
}

impl TargetSet {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let set: TargetSet = serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        for t in &set.targets {
            if !(t.speedup.is_finite() && t.speedup > 0.0) || t.size_bytes == 0 || t.hw_subscribers == 0 {
                return Err(SimError::InvalidScenario(format!("invalid calibration target {t:?}")));
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    MemifBandwidth,
    HmtBandwidth,
    HmtSetup,
    OsifRoundtrip,
    DelegatePublish,
    GatewayOverhead,
    DdsIntercept,
    DdsPerByte,
    SwCopyBandwidth,
}

impl Param {
    pub const ALL: [Param; 9] = [
        Param::MemifBandwidth,
        Param::HmtBandwidth,
        Param::HmtSetup,
        Param::OsifRoundtrip,
        Param::DelegatePublish,
        Param::GatewayOverhead,
        Param::DdsIntercept,
        Param::DdsPerByte,
        Param::SwCopyBandwidth,
    ];

    fn slot(self, p: &mut PlatformModel) -> &mut f64 {
        match self {
            Param::MemifBandwidth => &mut p.memif_bandwidth_bytes_per_s,
            Param::HmtBandwidth => &mut p.hmt_bandwidth_bytes_per_s,
            Param::HmtSetup => &mut p.hmt_setup_us,
            Param::OsifRoundtrip => &mut p.osif_roundtrip_us,
            Param::DelegatePublish => &mut p.delegate_publish_us,
            Param::GatewayOverhead => &mut p.gateway_overhead_us,
            Param::DdsIntercept => &mut p.sw_dds_latency.intercept_us,
            Param::DdsPerByte => &mut p.sw_dds_latency.us_per_byte,
            Param::SwCopyBandwidth => &mut p.sw_copy_bandwidth_bytes_per_s,
        }
    }

    pub fn get(self, p: &PlatformModel) -> f64 {
        let mut copy = *p;
        *self.slot(&mut copy)
    }

    pub fn set(self, p: &mut PlatformModel, v: f64) {
        *self.slot(p) = v;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    /// Parameters the search may move. The memory-port bandwidth is the
    /// reference scale and stays fixed by default.
    pub free: Vec<Param>,
    /// Each parameter stays within `[initial / range, initial * range]`
    /// unless `bounds` pins absolute limits for it.
    pub range: f64,
    pub bounds: BTreeMap<Param, (f64, f64)>,
    pub initial_factor: f64,
    /// Search stops once the step factor drops below `1 + min_step`.
    pub min_step: f64,
    pub max_evals: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            free: Param::ALL[1..].to_vec(),
            range: 1e4,
            // Below a microsecond the OSIF round trip stops being physical.
            bounds: [(Param::OsifRoundtrip, (1.0, 1e4))].into_iter().collect(),
            initial_factor: 4.0,
            min_step: 1e-7,
            max_evals: 40_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResidual {
    pub target: Target,
    pub simulated: f64,
    /// `|simulated - target| / target`
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub platform: PlatformModel,
    pub residuals: Vec<TargetResidual>,
    /// Sum of squared log errors.
    pub sse_log: f64,
    pub max_rel_error: f64,
    pub threshold: f64,
    pub attained: bool,
    pub evaluations: usize,
}

fn simulate_targets(p: &PlatformModel, targets: &[Target]) -> Result<Vec<f64>, SimError> {
    targets
        .par_iter()
        .map(|t| run_cell(p, t.cell(), 1, 0).map(|r| r.speedup(t.path)))
        .collect()
}

fn sse_log(sim: &[f64], targets: &[Target]) -> f64 {
    sim.iter().zip(targets).map(|(s, t)| (s / t.speedup).ln().powi(2)).sum()
}

pub fn calibrate(
    initial: &PlatformModel,
    targets: &TargetSet,
    options: &CalibrationOptions,
) -> Result<CalibrationReport, SimError> {
    if targets.targets.is_empty() {
        return Err(SimError::NoTargets);
    }
    initial.validate()?;
    let ts = &targets.targets;
    let start = initial.without_jitter();
    let mut best = start;
    let mut best_f = sse_log(&simulate_targets(&best, ts)?, ts);
    let mut evals = 1;
    let mut factor = options.initial_factor;
    let in_range = |param: Param, v: f64| {
        let (lo, hi) = options.bounds.get(&param).copied().unwrap_or_else(|| {
            let v0 = param.get(&start);
            (v0 / options.range, v0 * options.range)
        });
        v >= lo && v <= hi
    };

    'search: while factor > 1.0 + options.min_step && best_f > 0.0 {
        let mut improved = false;
        for &param in &options.free {
            for dir in [factor, 1.0 / factor] {
                if evals >= options.max_evals {
                    break 'search;
                }
                let v = param.get(&best) * dir;
                if !in_range(param, v) {
                    continue;
                }
                let mut cand = best;
                param.set(&mut cand, v);
                evals += 1;
                let f = sse_log(&simulate_targets(&cand, ts)?, ts);
                if f < best_f {
                    best = cand;
                    best_f = f;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            factor = factor.sqrt();
        }
    }

    let sim = simulate_targets(&best, ts)?;
    let residuals: Vec<_> = ts
        .iter()
        .zip(&sim)
        .map(|(t, &s)| TargetResidual {
            target: *t,
            simulated: s,
            rel_error: (s - t.speedup).abs() / t.speedup,
        })
        .collect();
    let max_rel_error = residuals.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let mut platform = best;
    platform.delegate_jitter = initial.delegate_jitter;
    Ok(CalibrationReport {
        platform,
        residuals,
        sse_log: sse_log(&sim, ts),
        max_rel_error,
        threshold: targets.max_rel_error,
        attained: max_rel_error <= targets.max_rel_error,
        evaluations: evals,
    })
}
