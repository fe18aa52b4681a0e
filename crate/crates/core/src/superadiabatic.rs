//! First-order superadiabatic objects for an isolated band `j`:
//! `B = −i P₀(∇P₀)R`, `P₁ = p·B + B*·p`, `U₀ = ⟨χ_j|`, `U₁ = U₀ p·B`,
//! and the projector / commutator / unitarity defects of the truncated
//! expansions.
//!
//! `R = (H_e − E_j)^{-1}(1 − P₀)` is the reduced resolvent. The exact
//! re-unitarizing `U₂` is never built; its absence shows up as the
//! `O(ε²)` unitarity defect that is measured here.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ensemble::PacketSpec;
use crate::error::{Error, Result};
use crate::fit::{fit_loglog, LogLogFit};
use crate::geometry::{
    eigendecompose_smooth, gradient, projector_field, resolvent_field, Derivative, FiberField, FieldKind, FrameOptions,
    Gauge,
};
use crate::grid::Grid;
use crate::model::{eval_electronic, BandSelector, ElectronicModel};
use crate::num::{imag_unit, lit, re, to_f64, CMat, Real};
use crate::state::State;
use crate::stencil::{Factor, OperatorStencil};

/// `B_a(x) = −i P₀ (∂_a P₀) R` for each axis.
///
/// Built from the projector field only, so the result does not depend on
/// the phase convention of `frame`.
pub fn build_b_field<T: Real>(
    model: &dyn ElectronicModel<T>,
    frame: &FiberField<T, CMat<T>>,
    band: usize,
    d: Derivative,
    gap_threshold: f64,
) -> Result<FiberField<T, Vec<CMat<T>>>> {
    if frame.samples()[0].ncols() != 1 {
        return Err(Error::Order("B is defined for a single isolated band".into()));
    }
    let grid = frame.grid();
    let p = projector_field(frame);
    let grad = gradient(grid, p.samples(), d);
    let res = resolvent_field(model, grid, band, frame.excluded(), gap_threshold)?;
    let mi = -imag_unit::<T>();
    let m = model.dim_electronic();
    let samples = (0..grid.len())
        .map(|n| {
            (0..grid.dim())
                .map(|a| if frame.is_excluded(n) { CMat::zeros(m, m) } else { (&p.samples()[n] * &grad[a][n] * &res[n]) * mi })
                .collect()
        })
        .collect();
    FiberField::new(grid, FieldKind::VectorOfMatrices(grid.dim(), m), samples, frame.gauge_id(), frame.excluded().to_vec())
}

fn axis_fiber<T: Real>(b: &FiberField<T, Vec<CMat<T>>>, axis: usize, dagger: bool) -> Factor<T> {
    Factor::Fiber(Arc::new(b.samples().iter().map(|v| if dagger { v[axis].adjoint() } else { v[axis].clone() }).collect()))
}

/// `P₁ = Σ_a (p_a B_a + B_a^† p_a)` as a stencil.
pub fn p1_stencil<T: Real>(b: &FiberField<T, Vec<CMat<T>>>, eps: T) -> OperatorStencil<T> {
    let grid = b.grid();
    let m = b.samples()[0][0].nrows();
    let mut op = OperatorStencil::zero(grid, eps, m, m);
    for a in 0..grid.dim() {
        let pb = OperatorStencil::single(grid, eps, m, m, vec![Factor::Momentum(a), axis_fiber(b, a, false)], "p·B");
        let bp = OperatorStencil::single(grid, eps, m, m, vec![axis_fiber(b, a, true), Factor::Momentum(a)], "B*·p");
        op = op.plus(&pb).and_then(|o| o.plus(&bp)).expect("same shape");
    }
    op.with_description("P1 = p·B + B*·p")
}

/// `(p·B + B*·p)ψ`.
pub fn apply_p1<T: Real>(b: &FiberField<T, Vec<CMat<T>>>, eps: T, psi: &State<T>) -> Result<State<T>> {
    p1_stencil(b, eps).apply(psi)
}

/// Nodewise `P₀ = χχ^†`.
pub fn p0_stencil<T: Real>(frame: &FiberField<T, CMat<T>>, eps: T) -> OperatorStencil<T> {
    let p = projector_field(frame);
    OperatorStencil::fiber(frame.grid(), eps, p.samples().to_vec(), "P0").expect("one matrix per node")
}

/// `P^ε_(1) = P₀ + εP₁`.
pub fn corrected_projector<T: Real>(frame: &FiberField<T, CMat<T>>, b: &FiberField<T, Vec<CMat<T>>>, eps: T) -> OperatorStencil<T> {
    p0_stencil(frame, eps).plus(&p1_stencil(b, eps).scaled(re(eps))).expect("same shape").with_description("P0 + eps P1")
}

/// `H^ε = ½p² + H_e(x)` on `m`-component states.
pub fn full_hamiltonian<T: Real>(model: &dyn ElectronicModel<T>, grid: &Grid<T>, eps: T) -> Result<OperatorStencil<T>> {
    let m = model.dim_electronic();
    let he = (0..grid.len()).map(|n| eval_electronic(model, &grid.point(n))).collect::<Result<Vec<_>>>()?;
    OperatorStencil::kinetic(grid, eps, m).plus(&OperatorStencil::fiber(grid, eps, he, "H_e")?).map(|o| o.with_description("p^2/2 + H_e"))
}

/// `U_(1) = U₀ + εU₁` with `U₀ = F^†` and `U₁ = U₀ p·B`, together with its
/// adjoint `U_(1)^* = F + ε B^*·p F`.
///
/// With `b = None` (or `ε = 0`) this is the plain `U₀` pair, which also
/// covers multiband frames.
pub fn build_u_first_order<T: Real>(
    frame: &FiberField<T, CMat<T>>,
    b: Option<&FiberField<T, Vec<CMat<T>>>>,
    eps: T,
) -> Result<(OperatorStencil<T>, OperatorStencil<T>)> {
    let grid = frame.grid();
    let m = frame.samples()[0].nrows();
    let fdag: Vec<CMat<T>> = frame.samples().iter().map(|f| f.adjoint()).collect();
    let u0 = OperatorStencil::fiber(grid, eps, fdag.clone(), "U0")?;
    let u = match b {
        Some(b) if eps != T::zero() => {
            if b.grid() != grid {
                return Err(Error::GridMismatch("B and frame grids differ".into()));
            }
            let fd = Factor::Fiber(Arc::new(fdag));
            let mut u1 = OperatorStencil::zero(grid, eps, m, frame.samples()[0].ncols());
            for a in 0..grid.dim() {
                let t = OperatorStencil::product(grid, eps, m, vec![fd.clone(), Factor::Momentum(a), axis_fiber(b, a, false)], "U0 p·B")?;
                u1 = u1.plus(&t)?;
            }
            u0.plus(&u1.scaled(re(eps)))?.with_description("U0 + eps U0 p·B")
        }
        _ => u0,
    };
    let ustar = u.adjoint();
    Ok((u, ustar))
}

/// Defect norms at one `ε`: suprema over the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSample {
    pub eps: f64,
    /// `sup ‖((P₀+εP₁)² − (P₀+εP₁))Ψ‖`.
    pub idempotency: f64,
    /// `sup ‖[P₀+εP₁, H^ε]Ψ‖`.
    pub commutator: f64,
    /// `sup ‖[P₀, H^ε]Ψ‖`, expected `O(ε)`.
    pub p0_commutator: f64,
    /// `sup ‖U_(1)U_(1)^*ψ − ψ‖` over nucleonic states.
    pub unitarity: f64,
}

/// A defect norm across an `ε` sweep with its log-log fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectMeasurement {
    pub name: String,
    /// Strictly increasing.
    pub eps: Vec<f64>,
    pub defects: Vec<f64>,
    pub states: usize,
    pub kinetic_bound: f64,
    pub seed: Option<u64>,
    pub fit: Option<LogLogFit>,
}

impl DefectMeasurement {
    fn from_samples(name: &str, samples: &[DefectSample], pick: impl Fn(&DefectSample) -> f64, states: usize, bound: f64, seed: Option<u64>) -> Self {
        let mut pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.eps, pick(s))).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let eps: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let defects: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let fit = fit_loglog(&eps, &defects).ok();
        DefectMeasurement { name: name.into(), eps, defects, states, kinetic_bound: bound, seed, fit }
    }
}

/// Defect norms at a single `ε` for band `band` of `model`.
///
/// Molecular test states are the packets as given (their spinors must have
/// `m` entries); nucleonic states use the same envelopes with a scalar spinor.
pub fn defects_at<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    band: usize,
    eps: T,
    ensemble: &[PacketSpec],
    kinetic_bound: T,
    d: Derivative,
) -> Result<DefectSample> {
    let opts = FrameOptions::default();
    let ef = eigendecompose_smooth(model, grid, &BandSelector::single(band), Gauge::ParallelTransport, &opts)?;
    let b = build_b_field(model, &ef.frame, band, d, opts.gap_threshold)?;
    let p0 = p0_stencil(&ef.frame, eps);
    let p = corrected_projector(&ef.frame, &b, eps);
    let h = full_hamiltonian(model, grid, eps)?;
    let (u, ustar) = build_u_first_order(&ef.frame, Some(&b), eps)?;
    let mut out = DefectSample { eps: to_f64(eps), idempotency: 0.0, commutator: 0.0, p0_commutator: 0.0, unitarity: 0.0 };
    for (i, spec) in ensemble.iter().enumerate() {
        let psi = spec.prepare(grid, eps, kinetic_bound, i)?;
        let ppsi = p.apply(&psi)?;
        let idem = p.apply(&ppsi)?.sub(&ppsi)?.norm();
        let comm = p.apply(&h.apply(&psi)?)?.sub(&h.apply(&ppsi)?)?.norm();
        let comm0 = p0.apply(&h.apply(&psi)?)?.sub(&h.apply(&p0.apply(&psi)?)?)?.norm();
        let chi = spec.as_scalar().prepare(grid, eps, kinetic_bound, i)?;
        let round = u.apply(&ustar.apply(&chi)?)?.sub(&chi)?.norm();
        out.idempotency = out.idempotency.max(to_f64(idem));
        out.commutator = out.commutator.max(to_f64(comm));
        out.p0_commutator = out.p0_commutator.max(to_f64(comm0));
        out.unitarity = out.unitarity.max(to_f64(round));
    }
    Ok(out)
}

/// Idempotency and commutator defects of `P₀ + εP₁` across an `ε` sweep.
pub fn projector_defect<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    band: usize,
    eps: &[f64],
    ensemble: &[PacketSpec],
    kinetic_bound: f64,
    seed: Option<u64>,
) -> Result<(DefectMeasurement, DefectMeasurement)> {
    let samples = defect_sweep(model, grid, band, eps, ensemble, kinetic_bound)?;
    Ok((
        DefectMeasurement::from_samples("idempotency", &samples, |s| s.idempotency, ensemble.len(), kinetic_bound, seed),
        DefectMeasurement::from_samples("commutator", &samples, |s| s.commutator, ensemble.len(), kinetic_bound, seed),
    ))
}

/// Round-trip unitarity defect of `U_(1)` across an `ε` sweep.
pub fn unitarity_defect<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    band: usize,
    eps: &[f64],
    ensemble: &[PacketSpec],
    kinetic_bound: f64,
    seed: Option<u64>,
) -> Result<DefectMeasurement> {
    let samples = defect_sweep(model, grid, band, eps, ensemble, kinetic_bound)?;
    Ok(DefectMeasurement::from_samples("unitarity", &samples, |s| s.unitarity, ensemble.len(), kinetic_bound, seed))
}

/// Every defect at every `ε`.
pub fn defect_sweep<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    band: usize,
    eps: &[f64],
    ensemble: &[PacketSpec],
    kinetic_bound: f64,
) -> Result<Vec<DefectSample>> {
    eps.iter().map(|&e| defects_at(model, grid, band, lit(e), ensemble, lit(kinetic_bound), Derivative::fd4())).collect()
}

/// Packages samples into the four named measurements.
pub fn measurements(samples: &[DefectSample], states: usize, bound: f64, seed: Option<u64>) -> Vec<DefectMeasurement> {
    vec![
        DefectMeasurement::from_samples("idempotency", samples, |s| s.idempotency, states, bound, seed),
        DefectMeasurement::from_samples("commutator", samples, |s| s.commutator, states, bound, seed),
        DefectMeasurement::from_samples("p0_commutator", samples, |s| s.p0_commutator, states, bound, seed),
        DefectMeasurement::from_samples("unitarity", samples, |s| s.unitarity, states, bound, seed),
    ]
}
