//! Propagators against closed-form solutions, step-size convergence, gauge
//! invariance of the effective dynamics and support checks.

use std::f64::consts::PI;

use num_complex::Complex64;

use boa_core::effective::{
    build_effective, build_effective_from_frame, intertwine, propagate_effective, Direction, EffectiveOptions,
};
use boa_core::f64::{Grid, State};
use boa_core::geometry::{eigendecompose_smooth, FieldKind, FrameOptions, Gauge};
use boa_core::kinetic::gaussian_packet;
use boa_core::model::{BandSelector, ConicalModel, ConstantFrame, HarmonicScalar};
use boa_core::propagate::{propagate_full, DtPolicy};
use boa_core::Error;

fn one() -> [Complex64; 1] {
    [Complex64::new(1.0, 0.0)]
}

/// Dispersing Gaussian for `iε∂_t ψ = ½p²ψ`: the variance parameter picks up
/// `a = 1 + iεt/(2σ²)` and the center moves with velocity `p₀`.
fn free_exact(grid: &Grid, x0: f64, sigma: f64, p0: f64, eps: f64, t: f64) -> State {
    let a = Complex64::new(1.0, eps * t / (2.0 * sigma * sigma));
    let mut s = State::from_fn(grid, 1, eps, |x| {
        let dx = x[0] - x0 - p0 * t;
        let z = -dx * dx / (4.0 * sigma * sigma) / a + Complex64::new(0.0, (p0 * x[0] - 0.5 * p0 * p0 * t) / eps);
        vec![z.exp() / a.sqrt()]
    });
    s.normalize();
    s
}

/// Coherent state of `½p² + ½x²` with `ħ = ε`:
/// `exp(i[(x−q)p + γ]/ε − (x−q)²/(2ε))`, `(q, p)` on the classical orbit and
/// `γ̇ = ½(p² − q²) − ε/2`.
fn coherent_exact(grid: &Grid, q0: f64, p0: f64, eps: f64, t: f64) -> State {
    let (c, s) = (t.cos(), t.sin());
    let (q, p) = (q0 * c + p0 * s, p0 * c - q0 * s);
    let gamma = 0.25 * (p0 * p0 - q0 * q0) * (2.0 * t).sin() + 0.5 * q0 * p0 * ((2.0 * t).cos() - 1.0) - 0.5 * eps * t;
    let mut st = State::from_fn(grid, 1, eps, |x| {
        let d = x[0] - q;
        vec![Complex64::new(-d * d / (2.0 * eps), (d * p + gamma) / eps).exp()]
    });
    st.normalize();
    st
}

#[test]
fn free_gaussian_matches_closed_form() {
    let grid = Grid::new_1d([-20.0, 20.0], 1024, false).unwrap();
    let (x0, sigma, p0, eps, t) = (-2.0, 0.5, 1.0, 0.1, 3.0);
    let psi = gaussian_packet(&grid, &[x0], sigma, &[p0], &one(), eps).unwrap();
    assert!(psi.distance(&free_exact(&grid, x0, sigma, p0, eps, 0.0)).unwrap() < 1e-12);
    let free = HarmonicScalar { dim: 1, components: 1, omega: 0.0 };
    let r = propagate_full(&free, &psi, t, &DtPolicy { tolerance: 1e-10, ..Default::default() }).unwrap();
    assert!(r.state.distance(&free_exact(&grid, x0, sigma, p0, eps, t)).unwrap() < 1e-8);
    assert!(r.norm_drift < 1e-8 && r.energy_drift < 1e-6);
}

#[test]
fn coherent_state_follows_the_classical_orbit() {
    let grid = Grid::new_1d([-8.0, 8.0], 512, false).unwrap();
    let (q0, p0, eps) = (1.5, 0.5, 0.1);
    let osc = HarmonicScalar { dim: 1, components: 1, omega: 1.0 };
    let psi = coherent_exact(&grid, q0, p0, eps, 0.0);
    let pol = DtPolicy { tolerance: 1e-9, ..Default::default() };
    for t in [0.7, 2.0 * PI] {
        let r = propagate_full(&osc, &psi, t, &pol).unwrap();
        let err = r.state.distance(&coherent_exact(&grid, q0, p0, eps, t)).unwrap();
        assert!(err < 1e-4, "t = {t}: {err:.3e}");
        assert!(r.norm_drift < 1e-8 && r.energy_drift < 1e-6);
    }
}

#[test]
fn order_zero_effective_dynamics_reproduces_the_coherent_state() {
    // E_0(x) = −1 + ½x², so the band phase adds e^{iT/ε}
    let grid = Grid::new_1d([-8.0, 8.0], 512, false).unwrap();
    let model = ConstantFrame::new(1, vec![-1.0, 1.0], 1.0).unwrap();
    let (q0, p0, eps, t) = (1.0, -0.5, 0.1, 1.3);
    let h = build_effective(&model, &grid, &BandSelector::single(0), 0, eps, &Default::default()).unwrap();
    let r = propagate_effective(&h, &coherent_exact(&grid, q0, p0, eps, 0.0), t, &DtPolicy::default()).unwrap();
    let want = coherent_exact(&grid, q0, p0, eps, t).scaled(Complex64::from_polar(1.0, t / eps));
    assert!(r.state.distance(&want).unwrap() < 1e-4);
}

#[test]
fn strang_splitting_is_second_order() {
    let grid = Grid::new_1d([-8.0, 8.0], 256, false).unwrap();
    let osc = HarmonicScalar { dim: 1, components: 1, omega: 1.0 };
    let eps = 0.2;
    let psi = gaussian_packet(&grid, &[1.0], 0.4, &[0.5], &one(), eps).unwrap();
    let t = 1.0;
    // with an infinite tolerance the controller returns the dt/2 run after one doubling
    let at = |dt: f64| {
        propagate_full(&osc, &psi, t, &DtPolicy { dt: Some(dt), tolerance: f64::INFINITY, ..Default::default() }).unwrap().state
    };
    let reference = at(t / 4096.0);
    let (e1, e2) = (at(t / 16.0).distance(&reference).unwrap(), at(t / 32.0).distance(&reference).unwrap());
    assert!(e1 / e2 >= 3.5, "{e1:.3e} / {e2:.3e}");
}

#[test]
fn unreachable_tolerance_is_an_accuracy_error() {
    let grid = Grid::new_1d([-8.0, 8.0], 128, false).unwrap();
    let osc = HarmonicScalar { dim: 1, components: 1, omega: 1.0 };
    let psi = gaussian_packet(&grid, &[0.0], 0.5, &[0.0], &one(), 0.1).unwrap();
    let pol = DtPolicy { tolerance: 1e-30, max_refinements: 1, ..Default::default() };
    assert!(matches!(propagate_full(&osc, &psi, 1.0, &pol), Err(Error::Accuracy(_))));
}

#[test]
fn pure_gauge_connection_only_rephases() {
    let grid = Grid::new_1d([-8.0, 8.0], 512, false).unwrap();
    let model = ConstantFrame::new(1, vec![-1.0, 1.0], 0.5).unwrap();
    let eps = 0.1;
    let theta = |x: f64| 0.6 * (2.0 * PI * x / 16.0).sin();
    let mut ef = eigendecompose_smooth(&model, &grid, &BandSelector::single(0), Gauge::Analytic, &FrameOptions::default()).unwrap();
    let pts = grid.points();
    ef.frame = ef.frame.map(FieldKind::Matrix(2, 1), |n, f| f * Complex64::from_polar(1.0, theta(pts[n][0])));
    let opts = EffectiveOptions::default();
    let gauged = build_effective_from_frame(&model, &ef, 1, eps, &opts).unwrap();
    let plain = build_effective(&model, &grid, &BandSelector::single(0), 0, eps, &opts).unwrap();
    assert!(!gauged.is_local() && plain.is_local());

    let psi0 = gaussian_packet(&grid, &[0.5], 0.5, &[0.8], &one(), eps).unwrap();
    // F ↦ F e^{iθ} turns the coefficient ψ into e^{−iθ}ψ
    let rephase = |s: &State, sign: f64| {
        let v = s.values().iter().zip(&pts).map(|(z, x)| z * Complex64::from_polar(1.0, sign * theta(x[0]))).collect();
        State::from_values(&grid, 1, eps, v).unwrap()
    };
    let pol = DtPolicy { tolerance: 1e-10, ..Default::default() };
    let a = propagate_effective(&plain, &psi0, 1.0, &pol).unwrap();
    let b = propagate_effective(&gauged, &rephase(&psi0, -1.0), 1.0, &pol).unwrap();
    let gap = a.state.fiber_density().iter().zip(b.state.fiber_density()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-8, "density gap {gap:.3e}");
    assert!(rephase(&b.state, 1.0).distance(&a.state).unwrap() < 1e-8);
    assert!(b.norm_drift < 1e-8 && b.energy_drift < 1e-6);

    // the molecular states agree as well
    let (u_plain, _) = plain.intertwiner().unwrap();
    let (u_gauged, _) = gauged.intertwiner().unwrap();
    let big_a = intertwine(&u_plain, Direction::ToMolecular, &a.state).unwrap();
    let big_b = intertwine(&u_gauged, Direction::ToMolecular, &b.state).unwrap();
    assert!(big_a.distance(&big_b).unwrap() < 1e-8);
}

#[test]
fn constant_frame_orders_coincide_with_full_dynamics() {
    let grid = Grid::new_1d([-10.0, 10.0], 512, false).unwrap();
    let model = ConstantFrame::new(1, vec![-1.0, 1.0], 0.5).unwrap();
    let eps = 0.05;
    let psi0 = gaussian_packet(&grid, &[0.3], 0.6, &[0.4], &one(), eps).unwrap();
    let pol = DtPolicy::default();
    let mut finals = Vec::new();
    for order in 0..=2 {
        let h = build_effective(&model, &grid, &BandSelector::single(0), order, eps, &Default::default()).unwrap();
        assert!(h.is_local());
        let (u, ustar) = h.intertwiner().unwrap();
        let full = propagate_full(&model, &intertwine(&u, Direction::ToMolecular, &psi0).unwrap(), 1.0, &pol).unwrap();
        let eff = propagate_effective(&h, &psi0, 1.0, &pol).unwrap();
        let back = ustar.apply(&eff.state).unwrap();
        assert!(full.state.distance(&back).unwrap() < 1e-10);
        finals.push(eff.state);
    }
    assert!(finals[0].distance(&finals[2]).unwrap() < 1e-12);
}

#[test]
fn effective_zero_time_is_identity() {
    let grid = Grid::new_1d([-8.0, 8.0], 128, false).unwrap();
    let model = ConstantFrame::new(1, vec![-1.0, 1.0], 0.5).unwrap();
    let h = build_effective(&model, &grid, &BandSelector::single(0), 2, 0.1, &Default::default()).unwrap();
    let psi = gaussian_packet(&grid, &[0.0], 0.5, &[0.3], &one(), 0.1).unwrap();
    let r = propagate_effective(&h, &psi, 0.0, &DtPolicy::default()).unwrap();
    assert_eq!(r.state.values(), psi.values());
}

#[test]
fn packet_on_the_excluded_core_is_rejected() {
    let grid = Grid::new_2d([-4.0, 4.0], [-4.0, 4.0], [64, 64], true).unwrap();
    let model = ConicalModel::new(1.0).unwrap();
    let opts = EffectiveOptions { r_min: Some(0.5), ..Default::default() };
    let h = build_effective(&model, &grid, &BandSelector::single(1), 1, 0.1, &opts).unwrap();
    let psi = gaussian_packet(&grid, &[0.4, 0.0], 0.3, &[0.0, 0.0], &one(), 0.1).unwrap();
    assert!(matches!(propagate_effective(&h, &psi, 0.1, &DtPolicy::default()), Err(Error::Support { .. })));
}
