//! Report assembly and output: a JSON document plus a flat CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use boa_core::grid::GridSpec;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::ConicalComparison;
use crate::fit::{fit_slope, SlopeFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Inconclusive,
}

/// The same series recomputed on the doubled grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub grid: GridSpec,
    pub sup: Vec<f64>,
    pub fit: Option<SlopeFit>,
    pub slope_change: Option<f64>,
    pub stable: bool,
}

/// One quantity across the `ε` list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// E.g. `error/order1`, `density_gap/order2`, `commutator`.
    pub label: String,
    pub eps: Vec<f64>,
    /// `per_state[k][i]`: state `i` at `eps[k]`; empty when only suprema exist.
    pub per_state: Vec<Vec<f64>>,
    pub sup: Vec<f64>,
    pub fit: Option<SlopeFit>,
    /// The slope, present only when the fit is conclusive.
    pub slope: Option<f64>,
    pub fit_error: Option<String>,
    /// Every supremum is below [`EXACT_FLOOR`]: the quantity vanishes up to
    /// round-off and no slope is expected.
    pub exact: bool,
    pub refinement: Option<Refinement>,
}

/// Errors below this are round-off; fitting a slope to them is meaningless.
pub const EXACT_FLOOR: f64 = 1e-10;

impl Series {
    pub fn new(label: impl Into<String>, eps: Vec<f64>, per_state: Vec<Vec<f64>>, sup: Vec<f64>, min_r2: f64) -> Self {
        let (fit, fit_error) = match fit_slope(&eps, &sup, min_r2) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let slope = fit.as_ref().filter(|f| f.inconclusive.is_none()).map(|f| f.slope);
        let exact = !sup.is_empty() && sup.iter().all(|v| *v <= EXACT_FLOOR);
        Series { label: label.into(), eps, per_state, sup, fit, slope, fit_error, exact, refinement: None }
    }

    /// Attaches the refined-grid suprema and checks slope stability.
    pub fn refine(&mut self, grid: GridSpec, sup: Vec<f64>, min_r2: f64, tolerance: f64) {
        let fit = fit_slope(&self.eps, &sup, min_r2).ok();
        let slope_change = match (&self.fit, &fit) {
            (Some(a), Some(b)) => Some((a.slope - b.slope).abs()),
            _ => None,
        };
        let stable = slope_change.is_some_and(|d| d <= tolerance);
        self.refinement = Some(Refinement { grid, sup, fit, slope_change, stable });
    }

    /// Reasons this series makes the report inconclusive.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.exact {
            return out;
        }
        match (&self.fit, &self.fit_error) {
            (_, Some(e)) => out.push(format!("{}: {e}", self.label)),
            (Some(f), None) => {
                if let Some(r) = &f.inconclusive {
                    out.push(format!("{}: {r}", self.label));
                }
            }
            _ => {}
        }
        if let Some(r) = &self.refinement {
            if !r.stable {
                let d = r.slope_change.map(|d| format!("{d:.3}")).unwrap_or_else(|| "n/a".into());
                out.push(format!("{}: slope changes by {d} under grid doubling", self.label));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: ExperimentConfig,
    pub status: Status,
    pub reasons: Vec<String>,
    /// Series that decide the status.
    pub series: Vec<Series>,
    /// Reported, never gating (e.g. the `P₀`-only commutator).
    pub diagnostics: Vec<Series>,
    pub conical: Option<ConicalComparison>,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    /// Excluded from determinism comparisons.
    pub wall_clock_seconds: f64,
}

impl ScalingReport {
    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().chain(&self.diagnostics).find(|s| s.label == label)
    }

    pub fn finalize(&mut self) {
        self.reasons = self.series.iter().flat_map(|s| s.problems()).collect();
        if let Some(c) = &self.conical {
            for b in [&c.upper, &c.lower] {
                if !b.expected_sign {
                    self.reasons.push(format!("band {}: mass term shifts <|x|> by {:.3e} against the predicted sign", b.band, b.mass_shift));
                }
            }
        }
        self.status = if self.reasons.is_empty() { Status::Ok } else { Status::Inconclusive };
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{stem}.json"));
        let csv_path = dir.join(format!("{stem}.csv"));
        let mut f = std::fs::File::create(&json)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        Ok((json, csv_path))
    }

    /// Scaling rows `series, eps, state_index, error` (empty state index for
    /// suprema-only series); the conical study writes `series, time, radius`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if let Some(c) = &self.conical {
            w.write_record(["series", "time", "radius"])?;
            for b in [&c.upper, &c.lower] {
                for t in [&b.order1, &b.phi_only, &b.order2] {
                    for (time, r) in t.times.iter().zip(&t.radius) {
                        w.write_record([format!("band{}/{}", b.band, t.label), num(*time), num(*r)])?;
                    }
                }
            }
        } else {
            w.write_record(["series", "eps", "state_index", "error"])?;
            for s in self.series.iter().chain(&self.diagnostics) {
                for (k, eps) in s.eps.iter().enumerate() {
                    match s.per_state.get(k) {
                        Some(row) if !row.is_empty() => {
                            for (i, v) in row.iter().enumerate() {
                                w.write_record([s.label.clone(), num(*eps), i.to_string(), num(*v)])?;
                            }
                        }
                        _ => w.write_record([s.label.clone(), num(*eps), String::new(), num(s.sup[k])])?,
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
