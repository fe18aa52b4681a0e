//! Slope fits with a 95% interval and the R² gate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use boa_core::fit::fit_loglog;

use crate::error::Result;

/// Outcome of [`fit_slope`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 95% confidence interval of the slope (Student t, `n − 2` dof).
    pub interval: [f64; 2],
    pub points: usize,
    /// Indices whose error was not a positive number.
    pub dropped: Vec<usize>,
    /// Set when the fit is too poor (or too short) to report a slope.
    pub inconclusive: Option<String>,
}

/// Least squares on `(ln ε, ln error)`.
pub fn fit_slope(eps: &[f64], err: &[f64], min_r_squared: f64) -> Result<SlopeFit> {
    let f = fit_loglog(eps, err)?;
    let dof = f.points as f64 - 2.0;
    let t = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
    let half = t * f.slope_stderr;
    let inconclusive = if f.points < 4 {
        Some(format!("only {} usable points", f.points))
    } else if f.r_squared < min_r_squared {
        Some(format!("R² = {:.4} below {min_r_squared}", f.r_squared))
    } else {
        None
    };
    Ok(SlopeFit {
        slope: f.slope,
        intercept: f.intercept,
        r_squared: f.r_squared,
        interval: [f.slope - half, f.slope + half],
        points: f.points,
        dropped: f.dropped,
        inconclusive,
    })
}
