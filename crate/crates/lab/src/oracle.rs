//! Brute-force and closed-form checks behind `boa-lab oracle <name>`.
//! Each line carries the compared value, its tolerance and where the
//! reference comes from.

use serde::Serialize;

use boa_core::effective::adi_dia_pair;
use boa_core::f64::{Grid, State};
use boa_core::geometry::{
    berry_connection, born_huang, eigendecompose_smooth, mass_tensor, truncation_estimate, Derivative, FrameOptions, Gauge,
    GeometricForm,
};
use boa_core::kinetic::gaussian_packet;
use boa_core::model::{BandSelector, ConicalModel, HarmonicScalar};
use boa_core::num::{cexp, cplx, C};
use boa_core::propagate::{propagate_full, DtPolicy};

use crate::error::{field, Result};

#[derive(Clone, Debug, Serialize)]
pub struct OracleLine {
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub provenance: String,
    /// Informational lines are printed against a tolerance but never fail.
    pub gating: bool,
}

impl OracleLine {
    fn new(q: &str, value: f64, tolerance: f64, provenance: &str) -> Self {
        OracleLine { quantity: q.into(), value, tolerance, provenance: provenance.into(), gating: true }
    }

    fn info(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

pub const NAMES: &[&str] = &["conical-forms", "free-gaussian", "coherent-state", "adi-dia"];

pub fn run(name: &str) -> Result<Vec<OracleLine>> {
    match name {
        "conical-forms" => conical_forms(3.0),
        "free-gaussian" => free_gaussian(),
        "coherent-state" => coherent_state(),
        "adi-dia" => adi_dia(),
        other => Err(field("oracle", format!("unknown oracle `{other}`; known: {}", NAMES.join(", ")))),
    }
}

/// Upper-band `A`, `φ` and `𝔪` of the conical model against
/// `A = −e_φ/(2r)`, `φ = 1/(4r²)`, `𝔪 = −e_φ⊗e_φ/(8Cr³)`, node by node with
/// tolerance `max(1e−8, |q_h − q_2h|)` (fourth-order differences at stride 1
/// and 2). Nodes closer than `r_min_cells` cells to the origin are excluded.
pub fn conical_forms(r_min_cells: f64) -> Result<Vec<OracleLine>> {
    let c = 1.0;
    let grid = Grid::new_2d([-3.0, 3.0], [-3.0, 3.0], [128, 128], true)?;
    let model = ConicalModel::new(c)?;
    let opts = FrameOptions { r_min: Some(r_min_cells * grid.min_spacing()), ..Default::default() };
    let ef = eigendecompose_smooth(&model, &grid, &BandSelector::single(1), Gauge::Analytic, &opts)?;
    let fine = Derivative::fd4();
    let coarse = fine.coarsened();
    let (a, a2) = (berry_connection(&ef.frame, fine), berry_connection(&ef.frame, coarse));
    let (phi, phi2) = (born_huang(&ef.frame, GeometricForm::TraceForm, fine)?, born_huang(&ef.frame, GeometricForm::TraceForm, coarse)?);
    let m = mass_tensor(&model, &ef.frame, 1, GeometricForm::TraceForm, fine, opts.gap_threshold)?;
    let m2 = mass_tensor(&model, &ef.frame, 1, GeometricForm::TraceForm, coarse, opts.gap_threshold)?;
    let (ta, tp, tm) = (truncation_estimate(&a, &a2), truncation_estimate(&phi, &phi2), truncation_estimate(&m, &m2));
    let mut bad = [0usize; 3];
    let mut far = [0.0f64; 3];
    for n in 0..grid.len() {
        if ef.frame.is_excluded(n) {
            continue;
        }
        let x = grid.point(n);
        let r = x[0].hypot(x[1]);
        let e = [-x[1] / r, x[0] / r];
        let mut ea = 0.0f64;
        let mut em = 0.0f64;
        for k in 0..2 {
            ea = ea.max((a.samples()[n][k][(0, 0)] - C::new(-e[k] / (2.0 * r), 0.0)).norm());
            for l in 0..2 {
                em = em.max((m.samples()[n][(k, l)] - C::new(-e[k] * e[l] / (8.0 * c * r.powi(3)), 0.0)).norm());
            }
        }
        let ep = (phi.samples()[n] - 1.0 / (4.0 * r * r)).abs();
        for (k, (err, tr)) in [(ea, ta[n]), (ep, tp[n]), (em, tm[n])].into_iter().enumerate() {
            if err > tr.max(1e-8) {
                bad[k] += 1;
            }
            if r >= 1.0 {
                far[k] = far[k].max(err);
            }
        }
    }
    let src = format!("closed form in polar coordinates; 128x128 offset grid on [-3,3]^2, r >= {r_min_cells} cells");
    let mut out = Vec::new();
    for (k, name) in ["A", "phi", "m"].iter().enumerate() {
        out.push(OracleLine::new(&format!("{name}: nodes above max(1e-8, |q_h - q_2h|)"), bad[k] as f64, 0.0, &src));
        out.push(OracleLine::new(&format!("{name}: max error for r >= 1"), far[k], 1e-4, &src));
    }
    Ok(out)
}

/// Analytic dispersing Gaussian with `ħ = ε`, `m = 1`.
pub fn free_gaussian_exact(grid: &Grid, x0: f64, sigma: f64, p0: f64, eps: f64, t: f64) -> State {
    let a = C::new(1.0, eps * t / (2.0 * sigma * sigma));
    let mut s = State::from_fn(grid, 1, eps, |x| {
        let dx = x[0] - x0 - p0 * t;
        let z = -dx * dx / (4.0 * sigma * sigma) / a + C::new(0.0, p0 * x[0] / eps - p0 * p0 * t / (2.0 * eps));
        vec![cexp(z) / a.sqrt()]
    });
    s.normalize();
    s
}

fn free_gaussian() -> Result<Vec<OracleLine>> {
    let grid = Grid::new_1d([-20.0, 20.0], 1024, false)?;
    let (x0, sigma, p0, eps, t) = (-2.0, 0.5, 1.0, 0.1, 3.0);
    let psi = gaussian_packet(&grid, &[x0], sigma, &[p0], &[cplx(1.0, 0.0)], eps)?;
    let free = HarmonicScalar { dim: 1, components: 1, omega: 0.0 };
    let r = propagate_full(&free, &psi, t, &DtPolicy { tolerance: 1e-10, ..Default::default() })?;
    let exact = free_gaussian_exact(&grid, x0, sigma, p0, eps, t);
    Ok(vec![
        OracleLine::new("||psi(T) - exact||", r.state.distance(&exact)?, 1e-8, "closed-form free Gaussian"),
        OracleLine::new("norm drift", r.norm_drift, 1e-8, "unitarity"),
        OracleLine::new("energy drift", r.energy_drift, 1e-6, "energy conservation"),
    ])
}

/// Coherent state of `½p² + ½x²` with `ħ = ε`:
/// `exp(i[(x−q)p + γ]/ε − (x−q)²/(2ε))` with `(q, p)` on the classical orbit
/// and `γ̇ = ½(p² − q²) − ε/2`.
pub fn coherent_state_exact(grid: &Grid, q0: f64, p0: f64, eps: f64, t: f64) -> State {
    let (c, s) = (t.cos(), t.sin());
    let (q, p) = (q0 * c + p0 * s, p0 * c - q0 * s);
    let gamma = 0.25 * (p0 * p0 - q0 * q0) * (2.0 * t).sin() + 0.5 * q0 * p0 * ((2.0 * t).cos() - 1.0) - 0.5 * eps * t;
    let mut st = State::from_fn(grid, 1, eps, |x| {
        let d = x[0] - q;
        vec![cexp(C::new(-d * d / (2.0 * eps), (d * p + gamma) / eps))]
    });
    st.normalize();
    st
}

fn coherent_state() -> Result<Vec<OracleLine>> {
    let grid = Grid::new_1d([-8.0, 8.0], 512, false)?;
    let (q0, p0, eps) = (1.5, 0.5, 0.1);
    let osc = HarmonicScalar { dim: 1, components: 1, omega: 1.0 };
    let pol = DtPolicy { tolerance: 1e-9, ..Default::default() };
    let psi = coherent_state_exact(&grid, q0, p0, eps, 0.0);
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    let mut energy = 0.0f64;
    for t in [0.5, 1.0, std::f64::consts::PI, 2.0 * std::f64::consts::PI] {
        let r = propagate_full(&osc, &psi, t, &pol)?;
        worst = worst.max(r.state.distance(&coherent_state_exact(&grid, q0, p0, eps, t))?);
        drift = drift.max(r.norm_drift);
        energy = energy.max(r.energy_drift);
    }
    Ok(vec![
        OracleLine::new("max ||psi(t) - exact|| over one period", worst, 1e-4, "closed-form coherent state with phase"),
        OracleLine::new("norm drift", drift, 1e-8, "unitarity"),
        OracleLine::new("energy drift", energy, 1e-6, "energy conservation"),
    ])
}

fn adi_dia() -> Result<Vec<OracleLine>> {
    let mut out = Vec::new();
    for n in [128usize, 256] {
        let grid = Grid::new_2d([-4.0, 4.0], [-4.0, 4.0], [n, n], true)?;
        let eps = 0.05;
        let pair = adi_dia_pair(1.0, eps, &grid, 0.3)?;
        let mut psi = State::from_fn(&grid, 2, eps, |x| {
            let r = x[0].hypot(x[1]);
            let a = (-(r - 2.0).powi(2) / 0.08).exp();
            vec![cplx(a, 0.0), C::new(0.0, 0.5 * a * x[0] / r)]
        });
        psi.normalize();
        out.push(OracleLine::new(&format!("derived H_adi residual, {n}^2"), pair.residual(&psi, false)?, 1e-6, "S H_dia S^-1 applied numerically"));
        out.push(
            OracleLine::new(
                &format!("printed H_adi residual, {n}^2"),
                pair.residual(&psi, true)?,
                1e-6,
                "coefficients as printed (twice the derived ones)",
            )
            .info(),
        );
    }
    Ok(out)
}
