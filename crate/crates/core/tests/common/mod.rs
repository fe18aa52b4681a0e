#![allow(dead_code)]
//! Dense-matrix oracles and seeded random states shared by the integration tests.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use boa_core::f64::{Grid, State};
use boa_core::CMat;

pub type Dense = DMatrix<Complex64>;

/// `p = −iε∂` on a periodic 1D grid as `F⁻¹ diag(εk) F`, built entry by
/// entry from the DFT definition. The Nyquist mode carries `−N/2`.
pub fn momentum_1d(n: usize, length: f64, eps: f64) -> Dense {
    let k = |j: usize| {
        let s = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        2.0 * PI * s / length
    };
    let mut p = Dense::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let phase = 2.0 * PI * (j as f64) * (a as f64 - b as f64) / n as f64;
                acc += Complex64::from_polar(eps * k(j), phase);
            }
            p[(a, b)] = acc / n as f64;
        }
    }
    p
}

/// `A ⊗ 1_m` in node-major, component-fastest ordering.
pub fn lift(a: &Dense, m: usize) -> Dense {
    a.kronecker(&Dense::identity(m, m))
}

/// Block diagonal of per-node `out × in` matrices.
pub fn block_diag(mats: &[CMat<f64>]) -> Dense {
    let (r, c) = (mats[0].nrows(), mats[0].ncols());
    let mut d = Dense::zeros(mats.len() * r, mats.len() * c);
    for (n, m) in mats.iter().enumerate() {
        d.view_mut((n * r, n * c), (r, c)).copy_from(m);
    }
    d
}

/// Block diagonal of per-node scalars times `1_m`.
pub fn scalar_diag(v: &[f64], m: usize) -> Dense {
    let mats: Vec<CMat<f64>> = v.iter().map(|x| CMat::identity(m, m) * Complex64::new(*x, 0.0)).collect();
    block_diag(&mats)
}

pub fn apply(d: &Dense, psi: &State) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(psi.values());
    (d * v).iter().copied().collect()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unstructured complex state with entries uniform in the unit square.
pub fn random_state(grid: &Grid, comps: usize, eps: f64, rng: &mut ChaCha8Rng) -> State {
    let values = (0..grid.len() * comps).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    State::from_values(grid, comps, eps, values).unwrap()
}

/// Least-squares slope of `log err` against `log ε`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
