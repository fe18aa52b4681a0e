//! The studies: error curves (with density gaps), superadiabatic defects,
//! and the conical upper/lower band comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use boa_core::effective::{
    build_effective, intertwine, propagate_effective, Direction, EffectiveHamiltonian, EffectiveOptions, EffectiveTerms,
    Quantization,
};
use boa_core::ensemble::PacketSpec;
use boa_core::f64::{Grid, State};
use boa_core::grid::GridSpec;
use boa_core::kinetic::gaussian_packet;
use boa_core::model::{BandSelector, ConicalModel, ElectronicModel};
use boa_core::num::cplx;
use boa_core::propagate::{propagate_full, DtPolicy};
use boa_core::superadiabatic::{defect_sweep, DefectSample};

use crate::config::ConicalSpec;
use crate::error::{LabError, Result};

/// One `(order, ε, state)` comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub order: usize,
    pub eps: f64,
    pub state: usize,
    /// `‖Ψ_full(T) − U*ψ_eff(T)‖`.
    pub error: f64,
    /// `sup_x |fiber density of Ψ_full(T) − |ψ_eff(T, x)|²|`.
    pub density_gap: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    /// Final splitting step of the full propagation.
    pub full_dt: f64,
    pub effective_method: String,
}

/// Sup-errors of one order across the `ε` list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub order: usize,
    pub grid: GridSpec,
    pub eps: Vec<f64>,
    pub sup_error: Vec<f64>,
    pub sup_density_gap: Vec<f64>,
    pub cells: Vec<Cell>,
}

/// Inputs shared by every cell of an error-curve run.
pub struct CurveSetup<'a> {
    pub model: &'a dyn ElectronicModel<f64>,
    pub grid: &'a Grid,
    pub bands: &'a BandSelector,
    pub orders: &'a [usize],
    pub eps: &'a [f64],
    pub ensemble: &'a [PacketSpec],
    pub kinetic_bound: f64,
    pub final_time: f64,
    pub policy: DtPolicy,
    pub options: EffectiveOptions,
}

fn density_gap(full: &State, eff: &State) -> f64 {
    let a = full.fiber_density();
    let b = eff.fiber_density();
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Error curves for every requested order; cells run in parallel on the
/// current rayon pool and are collected in a fixed order.
///
/// Orders 0 and 1 share the initial state `U₀*ψ₀` and hence the full
/// propagation; order 2 starts from `U_(1)*ψ₀`.
pub fn error_curves(setup: &CurveSetup) -> Result<Vec<Curve>> {
    let s = setup;
    let mut hams: Vec<Vec<EffectiveHamiltonian<f64>>> = Vec::with_capacity(s.eps.len());
    for &eps in s.eps {
        let row = s
            .orders
            .iter()
            .map(|&o| build_effective(s.model, s.grid, s.bands, o, eps, &s.options))
            .collect::<boa_core::Result<Vec<_>>>()?;
        hams.push(row);
    }
    let jobs: Vec<(usize, usize)> = (0..s.eps.len()).flat_map(|e| (0..s.ensemble.len()).map(move |i| (e, i))).collect();
    let results: Vec<Result<Vec<Cell>>> = jobs
        .par_iter()
        .map(|&(ei, si)| {
            let eps = s.eps[ei];
            let wrap = |source| LabError::Cell { eps, state: si, source };
            let psi0 = s.ensemble[si].prepare(s.grid, eps, s.kinetic_bound, si).map_err(wrap)?;
            let mut shared_full: Option<State> = None;
            let mut cells = Vec::new();
            for (k, &order) in s.orders.iter().enumerate() {
                let h = &hams[ei][k];
                let (u, ustar) = h.intertwiner().map_err(wrap)?;
                let first_order = order >= 2;
                let reuse = !first_order && shared_full.is_some();
                let (full_state, full_nd, full_ed, full_dt) = if reuse {
                    (shared_full.clone().expect("checked"), 0.0, 0.0, f64::NAN)
                } else {
                    let big0 = intertwine(&u, Direction::ToMolecular, &psi0).map_err(wrap)?;
                    let r = propagate_full(s.model, &big0, s.final_time, &s.policy).map_err(wrap)?;
                    if !first_order {
                        shared_full = Some(r.state.clone());
                    }
                    (r.state, r.norm_drift, r.energy_drift, r.dt)
                };
                let eff = propagate_effective(h, &psi0, s.final_time, &s.policy).map_err(wrap)?;
                let back = ustar.apply(&eff.state).map_err(wrap)?;
                cells.push(Cell {
                    order,
                    eps,
                    state: si,
                    error: full_state.distance(&back).map_err(wrap)?,
                    density_gap: density_gap(&full_state, &eff.state),
                    norm_drift: full_nd.max(eff.norm_drift),
                    energy_drift: full_ed.max(eff.energy_drift),
                    full_dt,
                    effective_method: eff.method.to_string(),
                });
            }
            Ok(cells)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    Ok(s.orders
        .iter()
        .map(|&order| {
            let cells: Vec<Cell> = all.iter().filter(|c| c.order == order).cloned().collect();
            let sup = |f: &dyn Fn(&Cell) -> f64| -> Vec<f64> {
                s.eps.iter().map(|e| cells.iter().filter(|c| c.eps == *e).map(f).fold(0.0, f64::max)).collect()
            };
            Curve {
                order,
                grid: s.grid.spec(),
                eps: s.eps.to_vec(),
                sup_error: sup(&|c| c.error),
                sup_density_gap: sup(&|c| c.density_gap),
                cells,
            }
        })
        .collect())
}

/// Defect samples for each `ε` (parallel over `ε`).
pub fn defects(
    model: &dyn ElectronicModel<f64>,
    grid: &Grid,
    band: usize,
    eps: &[f64],
    ensemble: &[PacketSpec],
    kinetic_bound: f64,
) -> Result<Vec<DefectSample>> {
    let rows: Vec<Result<Vec<DefectSample>>> =
        eps.par_iter().map(|e| defect_sweep(model, grid, band, &[*e], ensemble, kinetic_bound).map_err(LabError::from)).collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// conical study

/// `⟨|x|⟩(t)` of one propagation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub label: String,
    pub times: Vec<f64>,
    pub radius: Vec<f64>,
    pub norm_drift: f64,
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn final_radius(&self) -> f64 {
        *self.radius.last().expect("at least the initial sample")
    }
}

/// The three variants on one band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandComparison {
    pub band: usize,
    pub order1: Trajectory,
    pub phi_only: Trajectory,
    pub order2: Trajectory,
    /// `⟨|x|⟩_order2(T) − ⟨|x|⟩_φonly(T)`.
    pub mass_shift: f64,
    /// Sign of `mass_shift` as predicted (≥ 0 upper, ≤ 0 lower).
    pub expected_sign: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalComparison {
    pub eps: f64,
    pub quantization: Quantization,
    pub upper: BandComparison,
    pub lower: BandComparison,
    /// `‖(h_order2 − h_φonly)ψ_ring‖` for a rotationally symmetric packet.
    pub ring_mass_action: f64,
    /// `‖(h_φonly − h_order1)ψ_ring‖`.
    pub ring_phi_action: f64,
}

impl ConicalComparison {
    pub fn ring_ratio(&self) -> f64 {
        self.ring_mass_action / self.ring_phi_action
    }
}

fn radius(psi: &State) -> f64 {
    psi.expectation_of(|x| x[0].hypot(x[1])) / psi.norm_sqr()
}

fn trajectory(h: &EffectiveHamiltonian<f64>, psi: &State, t: f64, samples: usize, policy: &DtPolicy, label: &str) -> Result<Trajectory> {
    let segments = samples.max(1);
    let mut cur = psi.clone();
    let mut tr = Trajectory { label: label.into(), times: vec![0.0], radius: vec![radius(psi)], norm_drift: 0.0, energy_drift: 0.0 };
    let n0 = psi.norm();
    let e0 = h.apply(psi)?.inner(psi)?.re;
    for k in 1..=segments {
        let r = propagate_effective(h, &cur, t / segments as f64, policy)?;
        cur = r.state;
        tr.times.push(t * k as f64 / segments as f64);
        tr.radius.push(radius(&cur));
        tr.norm_drift = tr.norm_drift.max((cur.norm() - n0).abs());
        tr.energy_drift = tr.energy_drift.max((h.apply(&cur)?.inner(&cur)?.re - e0).abs());
    }
    Ok(tr)
}

/// Propagates one packet under `{order 1, order 1 + φ, order 2}` on the upper
/// and lower conical bands and probes the mass term on a ring packet.
pub fn conical_correction_study(
    c: f64,
    eps: f64,
    grid: &Grid,
    spec: &ConicalSpec,
    final_time: f64,
    samples: usize,
    policy: &DtPolicy,
) -> Result<ConicalComparison> {
    let model = ConicalModel::new(c)?;
    let psi = gaussian_packet(grid, &spec.center, spec.width, &spec.momentum, &[cplx(1.0, 0.0)], eps)?;
    let [r0, w] = spec.ring;
    let mut ring = State::from_fn(grid, 1, eps, |x| {
        let r = x[0].hypot(x[1]);
        vec![cplx((-(r - r0).powi(2) / (2.0 * w * w)).exp(), 0.0)]
    });
    ring.normalize();
    let build = |band: usize, order: usize, mass: bool| {
        let o = EffectiveOptions {
            r_min: Some(spec.r_min),
            quantization: spec.quantization,
            terms: EffectiveTerms { berry: true, born_huang: true, mass },
            ..Default::default()
        };
        build_effective(&model, grid, &BandSelector::single(band), order, eps, &o)
    };
    let mut ring_mass = 0.0;
    let mut ring_phi = 0.0;
    let mut compare = |band: usize| -> Result<BandComparison> {
        let h1 = build(band, 1, true)?;
        let hp = build(band, 2, false)?;
        let h2 = build(band, 2, true)?;
        if band == 1 {
            let a2 = h2.apply(&ring)?;
            let ap = hp.apply(&ring)?;
            let a1 = h1.apply(&ring)?;
            ring_mass = a2.distance(&ap)?;
            ring_phi = ap.distance(&a1)?;
        }
        let order1 = trajectory(&h1, &psi, final_time, samples, policy, "order1")?;
        let phi_only = trajectory(&hp, &psi, final_time, samples, policy, "order1+phi")?;
        let order2 = trajectory(&h2, &psi, final_time, samples, policy, "order2")?;
        let mass_shift = order2.final_radius() - phi_only.final_radius();
        let expected_sign = if band == 1 { mass_shift >= 0.0 } else { mass_shift <= 0.0 };
        Ok(BandComparison { band, order1, phi_only, order2, mass_shift, expected_sign })
    };
    let upper = compare(1)?;
    let lower = compare(0)?;
    Ok(ConicalComparison { eps, quantization: spec.quantization, upper, lower, ring_mass_action: ring_mass, ring_phi_action: ring_phi })
}
