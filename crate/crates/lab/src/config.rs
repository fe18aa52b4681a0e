//! Experiment configuration: one JSON document with the sections
//! `model`, `grid`, `bands`, `epsilons`, `time`, `ensemble`, `output`
//! plus the `study` to run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use boa_core::effective::Quantization;
use boa_core::grid::GridSpec;
use boa_core::model::ModelSpec;

use crate::error::{field, LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub study: Study,
    pub model: ModelSpec,
    pub grid: GridSpec,
    #[serde(default = "default_bands")]
    pub bands: Vec<usize>,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub time: TimeSpec,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_bands() -> Vec<usize> {
    vec![0]
}

/// What to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Study {
    /// Sup-error curves `‖Ψ(T) − U*ψ(T)‖` for each order (density gaps are
    /// recorded alongside).
    ErrorCurve {
        orders: Vec<usize>,
        #[serde(default = "yes")]
        refine: bool,
    },
    /// Idempotency, commutator and unitarity defects of the first-order
    /// superadiabatic objects.
    Defects {
        #[serde(default = "yes")]
        refine: bool,
    },
    /// Upper- and lower-band conical comparison of `h` variants.
    ConicalCorrection(ConicalSpec),
}

fn yes() -> bool {
    true
}

/// Packet and regularization of the conical study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConicalSpec {
    pub center: [f64; 2],
    pub momentum: [f64; 2],
    pub width: f64,
    pub r_min: f64,
    #[serde(default = "sandwich")]
    pub quantization: Quantization,
    /// Radius and width of the zero-angular-momentum ring packet.
    #[serde(default = "ring")]
    pub ring: [f64; 2],
}

fn sandwich() -> Quantization {
    Quantization::Sandwich
}

fn ring() -> [f64; 2] {
    [2.0, 0.2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Final time in the rescaled units of `iε∂_t`.
    #[serde(rename = "final")]
    pub final_time: f64,
    /// Initial splitting step; `None` lets the step controller choose.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Recorded times per run.
    #[serde(default = "four")]
    pub samples: usize,
}

fn four() -> usize {
    4
}

/// Seeded Gaussian ensemble; ranges are sampled uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n: usize,
    pub kinetic_bound: f64,
    pub seed: u64,
    /// Per-axis `[lo, hi]` for the centers.
    pub center: Vec<[f64; 2]>,
    pub width: [f64; 2],
    /// Per-axis `[lo, hi]` for `p₀`.
    pub momentum: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File stem; defaults to the experiment name.
    #[serde(default)]
    pub stem: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("reports"), stem: None }
    }
}

/// Overrides of numerical tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Estimated final-state error of each propagation.
    pub propagation: f64,
    pub min_r_squared: f64,
    /// Allowed slope change under grid doubling.
    pub refinement: f64,
    pub gap_threshold: f64,
    pub krylov_dim: usize,
    pub max_dt_refinements: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            propagation: 1e-8,
            min_r_squared: 0.98,
            refinement: 0.15,
            gap_threshold: boa_core::model::DEFAULT_GAP_THRESHOLD,
            krylov_dim: 30,
            max_dt_refinements: 12,
        }
    }
}

/// Smallest ensemble accepted for scaling studies.
pub const MIN_ENSEMBLE: usize = 8;

impl ExperimentConfig {
    /// Parses JSON; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| LabError::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn is_scaling(&self) -> bool {
        !matches!(self.study, Study::ConicalCorrection(_))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.epsilons;
        let min_len = if self.is_scaling() { 4 } else { 1 };
        if e.len() < min_len {
            return Err(field("epsilons", format!("need at least {min_len} values, got {}", e.len())));
        }
        if e.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(field("epsilons", "values must be positive and finite"));
        }
        for (i, w) in e.windows(2).enumerate() {
            if w[1] >= w[0] {
                return Err(field(&format!("epsilons[{}]", i + 1), "list must be strictly decreasing"));
            }
            let r = w[1] / w[0];
            if !(0.3..=0.8).contains(&r) {
                return Err(field(&format!("epsilons[{}]", i + 1), format!("ratio {r:.3} outside [0.3, 0.8]")));
            }
        }
        if !(self.time.final_time >= 0.0 && self.time.final_time.is_finite()) {
            return Err(field("time.final", "must be a finite non-negative number"));
        }
        if self.time.dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(field("time.dt", "must be positive"));
        }
        if self.bands.is_empty() {
            return Err(field("bands", "select at least one band"));
        }
        let dim = self.grid.nodes.len();
        if self.is_scaling() {
            let ens = self.ensemble.as_ref().ok_or_else(|| field("ensemble", "required for scaling studies"))?;
            if ens.n < MIN_ENSEMBLE {
                return Err(field("ensemble.n", format!("need at least {MIN_ENSEMBLE} states, got {}", ens.n)));
            }
            if !(ens.kinetic_bound > 0.0) {
                return Err(field("ensemble.kinetic_bound", "must be positive"));
            }
            if ens.center.len() != dim || ens.momentum.len() != dim {
                return Err(field("ensemble", format!("center and momentum ranges need {dim} axes")));
            }
            let bad = |r: &[f64; 2]| !(r[0] <= r[1]);
            if ens.center.iter().any(bad) || ens.momentum.iter().any(bad) || bad(&ens.width) || !(ens.width[0] > 0.0) {
                return Err(field("ensemble", "ranges must be [lo, hi] with lo <= hi and positive widths"));
            }
        }
        match &self.study {
            Study::ErrorCurve { orders, .. } => {
                if orders.is_empty() || orders.iter().any(|o| *o > 2) {
                    return Err(field("study.orders", "orders must be a non-empty subset of {0, 1, 2}"));
                }
                if self.bands.len() > 1 && orders.contains(&2) {
                    return Err(field("study.orders", "order 2 needs a single band"));
                }
            }
            Study::Defects { .. } => {
                if self.bands.len() != 1 {
                    return Err(field("bands", "defects are measured for a single band"));
                }
            }
            Study::ConicalCorrection(c) => {
                if !matches!(self.model, ModelSpec::Conical { .. }) {
                    return Err(field("model", "the conical study needs the conical model"));
                }
                if !(c.r_min > 0.0 && c.width > 0.0) {
                    return Err(field("study", "r_min and width must be positive"));
                }
            }
        }
        self.grid.build::<f64>().map_err(|e| field("grid", e.to_string()))?;
        Ok(())
    }

    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| self.name.clone())
    }
}

/// Configs shipped with the lab, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("st1_order0", include_str!("../configs/st1_order0.json")),
    ("st2_order1", include_str!("../configs/st2_order1.json")),
    ("hbo_order2", include_str!("../configs/hbo_order2.json")),
    ("defects", include_str!("../configs/defects.json")),
    ("constant_frame_density", include_str!("../configs/constant_frame_density.json")),
    ("conical_sign", include_str!("../configs/conical_sign.json")),
];

/// Loads a bundled config by name or a file by path.
pub fn load(name_or_path: &str) -> Result<ExperimentConfig> {
    match BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
        Some((_, text)) => ExperimentConfig::from_json(text),
        None => ExperimentConfig::from_path(Path::new(name_or_path)),
    }
}
