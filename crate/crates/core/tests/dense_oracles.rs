//! Matrix-free operators against dense matrices assembled from their
//! defining formulas on small 1D grids.

mod common;

use common::*;
use num_complex::Complex64;

use boa_core::effective::{build_effective, build_effective_from_frame, EffectiveHamiltonian, EffectiveOptions, Quantization};
use boa_core::f64::Grid;
use boa_core::geometry::{eigendecompose_smooth, FieldKind, FrameOptions, Gauge};
use boa_core::model::{make_avoided_crossing_1d, BandSelector, ElectronicModel, Profile};
use boa_core::superadiabatic::{corrected_projector, full_hamiltonian, p1_stencil};
use boa_core::CMat;

const TOL: f64 = 1e-10;
const STATES: usize = 20;
const EXTENT: [f64; 2] = [-6.0, 6.0];

fn grid() -> Grid {
    Grid::new_1d(EXTENT, 32, false).unwrap()
}

fn model() -> impl ElectronicModel<f64> {
    make_avoided_crossing_1d(0.5, Profile::Tanh).unwrap()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Single band in a frame rephased by `e^{iθ(x)}` so that `A ≠ 0`.
fn rephased(order: usize, eps: f64, q: Quantization) -> EffectiveHamiltonian<f64> {
    let g = grid();
    let m = model();
    let mut ef = eigendecompose_smooth(&m, &g, &BandSelector::single(0), Gauge::Analytic, &FrameOptions::default()).unwrap();
    let pts = g.points();
    let theta = |x: f64| 0.8 * (2.0 * std::f64::consts::PI * x / 12.0).sin() + 0.3 * x.tanh();
    ef.frame = ef.frame.map(FieldKind::Matrix(2, 1), |n, f| f * Complex64::from_polar(1.0, theta(pts[n][0])));
    let opts = EffectiveOptions { quantization: q, ..Default::default() };
    build_effective_from_frame(&m, &ef, order, eps, &opts).unwrap()
}

/// Dense effective Hamiltonian from its ingredients.
fn dense_effective(h: &EffectiveHamiltonian<f64>) -> Dense {
    let g = h.grid();
    let eps = h.eps;
    let l = h.bands.len();
    let p = lift(&momentum_1d(g.len(), g.length(0), eps), l);
    let ing = &h.ingredients;
    let mut out = &p * &p * c(0.5) + block_diag(ing.potential.samples());
    if let Some(a) = &ing.berry {
        let ad = block_diag(&a.samples().iter().map(|v| v[0].clone()).collect::<Vec<CMat<f64>>>());
        out -= (&p * &ad + &ad * &p) * c(0.5 * eps);
        if l == 1 {
            out += &ad * &ad * c(0.5 * eps * eps);
        }
    }
    if let Some(phi) = &ing.born_huang {
        out += scalar_diag(phi.samples(), l) * c(0.5 * eps * eps);
    }
    if let Some(mt) = &ing.mass {
        let md = block_diag(&mt.samples().iter().map(|s| CMat::from_element(1, 1, s[(0, 0)])).collect::<Vec<_>>());
        let pp = &p * &p;
        out -= match h.quantization {
            Quantization::Symmetric => (&md * &pp + &pp * &md) * c(0.5 * eps * eps),
            Quantization::Sandwich => &p * &md * &p * c(eps * eps),
        };
    }
    out
}

fn check_effective(h: &EffectiveHamiltonian<f64>, seed: u64) -> f64 {
    let d = dense_effective(h);
    let mut r = rng(seed);
    (0..STATES)
        .map(|_| {
            let psi = random_state(h.grid(), h.bands.len(), h.eps, &mut r);
            max_diff(&apply(&d, &psi), h.apply(&psi).unwrap().values())
        })
        .fold(0.0, f64::max)
}

#[test]
fn dft_momentum_is_hermitian_and_differentiates_a_plane_wave() {
    let n = 32;
    let p = momentum_1d(n, 12.0, 0.3);
    assert!((&p - p.adjoint()).camax() < 1e-12);
    let g = grid();
    let k = 2.0 * std::f64::consts::PI * 3.0 / 12.0;
    let psi = boa_core::f64::State::from_fn(&g, 1, 0.3, |x| vec![Complex64::from_polar(1.0, k * x[0])]);
    let got = apply(&p, &psi);
    let want: Vec<Complex64> = psi.values().iter().map(|z| z * (0.3 * k)).collect();
    assert!(max_diff(&got, &want) < 1e-12);
}

#[test]
fn every_effective_hamiltonian_matches_dense() {
    let g = grid();
    let m = model();
    let eps = 0.1;
    let mut seed = 10;
    for order in 0..=2 {
        for q in [Quantization::Symmetric, Quantization::Sandwich] {
            let h = build_effective(&m, &g, &BandSelector::single(0), order, eps, &EffectiveOptions { quantization: q, ..Default::default() }).unwrap();
            let err = check_effective(&h, seed);
            assert!(err < TOL, "real frame, order {order}, {q:?}: {err:.3e}");
            let h = rephased(order, eps, q);
            if order >= 1 {
                assert!(h.ingredients.berry.is_some() && !h.is_local());
            }
            let err = check_effective(&h, seed + 1);
            assert!(err < TOL, "rephased frame, order {order}, {q:?}: {err:.3e}");
            seed += 2;
        }
    }
    for order in 0..=1 {
        let h = build_effective(&m, &g, &BandSelector::new(vec![0, 1]).unwrap(), order, eps, &Default::default()).unwrap();
        let err = check_effective(&h, 99 + order as u64);
        assert!(err < TOL, "two bands, order {order}: {err:.3e}");
    }
}

#[test]
fn superadiabatic_projector_and_intertwiner_match_dense() {
    let g = grid();
    let m = model();
    for eps in [0.05, 0.2] {
        let h = build_effective(&m, &g, &BandSelector::single(0), 2, eps, &Default::default()).unwrap();
        let b = h.b_field().unwrap();
        let p = lift(&momentum_1d(g.len(), g.length(0), eps), 2);
        let bd = block_diag(&b.samples().iter().map(|v| v[0].clone()).collect::<Vec<_>>());
        let p1 = &p * &bd + bd.adjoint() * &p;
        let fd = block_diag(&h.frame().samples().iter().map(|f| f.adjoint()).collect::<Vec<_>>());
        let p0 = fd.adjoint() * &fd;
        let u = &fd + &fd * &p * &bd * c(eps);
        let ustar = u.adjoint();

        let p1_op = p1_stencil(b, eps);
        let pe_op = corrected_projector(h.frame(), b, eps);
        let (u_op, ustar_op) = h.intertwiner().unwrap();
        let mut r = rng(7);
        for _ in 0..STATES {
            let big = random_state(&g, 2, eps, &mut r);
            let small = random_state(&g, 1, eps, &mut r);
            assert!(max_diff(&apply(&p1, &big), p1_op.apply(&big).unwrap().values()) < TOL);
            assert!(max_diff(&apply(&(&p0 + &p1 * c(eps)), &big), pe_op.apply(&big).unwrap().values()) < TOL);
            assert!(max_diff(&apply(&u, &big), u_op.apply(&big).unwrap().values()) < TOL);
            assert!(max_diff(&apply(&ustar, &small), ustar_op.apply(&small).unwrap().values()) < TOL);
        }
    }
}

#[test]
fn full_hamiltonian_and_adjoints_match_dense() {
    let g = grid();
    let m = model();
    let eps = 0.1;
    let p = lift(&momentum_1d(g.len(), g.length(0), eps), 2);
    let he: Vec<CMat<f64>> = g.points().iter().map(|x| m.evaluate(x)).collect();
    let dense = &p * &p * c(0.5) + block_diag(&he);
    let op = full_hamiltonian(&m, &g, eps).unwrap();
    let h = build_effective(&m, &g, &BandSelector::single(0), 2, eps, &Default::default()).unwrap();
    let (u_op, _) = h.intertwiner().unwrap();
    let ud = {
        let fd = block_diag(&h.frame().samples().iter().map(|f| f.adjoint()).collect::<Vec<_>>());
        let bd = block_diag(&h.b_field().unwrap().samples().iter().map(|v| v[0].clone()).collect::<Vec<_>>());
        &fd + &fd * &p * &bd * c(eps)
    };
    let mut r = rng(3);
    for _ in 0..STATES {
        let psi = random_state(&g, 2, eps, &mut r);
        assert!(max_diff(&apply(&dense, &psi), op.apply(&psi).unwrap().values()) < TOL);
        let phi = random_state(&g, 1, eps, &mut r);
        // adjoint() of a stencil is the conjugate transpose
        assert!(max_diff(&apply(&ud.adjoint(), &phi), u_op.adjoint().apply(&phi).unwrap().values()) < TOL);
    }
}
