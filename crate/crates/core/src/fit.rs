//! Least-squares fit of `log error` against `log ε`.

use crate::error::{Error, Result};

/// Result of [`fit_loglog`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope (zero for exact data).
    pub slope_stderr: f64,
    /// Points used (strictly positive errors only).
    pub points: usize,
    /// Indices dropped because the error was not a positive finite number.
    pub dropped: Vec<usize>,
}

/// Ordinary least squares on `(ln ε, ln e)`.
///
/// Non-positive or non-finite errors are dropped and listed; fewer than
/// three remaining points is a degenerate fit.
pub fn fit_loglog(eps: &[f64], err: &[f64]) -> Result<LogLogFit> {
    if eps.len() != err.len() {
        return Err(Error::Config("fit: ε and error lists differ in length".into()));
    }
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, (&e, &y)) in eps.iter().zip(err).enumerate() {
        if e > 0.0 && y > 0.0 && y.is_finite() && y > f64::MIN_POSITIVE {
            xs.push(e.ln());
            ys.push(y.ln());
        } else {
            dropped.push(i);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Accuracy(format!("degenerate fit: {n} usable points")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Accuracy("degenerate fit: all ε equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LogLogFit { slope, intercept, r_squared, slope_stderr, points: n, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let eps = [0.2, 0.1, 0.05, 0.025];
        let sq: Vec<f64> = eps.iter().map(|e| e * e).collect();
        let f = fit_loglog(&eps, &sq).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let lin: Vec<f64> = eps.iter().map(|e| 3.0 * e).collect();
        let f = fit_loglog(&eps, &lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zeros_are_dropped_and_reported() {
        let f = fit_loglog(&[0.4, 0.2, 0.1, 0.05], &[0.16, 0.04, 0.0, 0.0025]).unwrap();
        assert_eq!(f.dropped, vec![2]);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(fit_loglog(&[0.4, 0.2, 0.1], &[0.0, 0.0, 1.0]).is_err());
    }
}
