//! Spectral kinetic and momentum operators, kinetic cutoffs and Gaussian initial data.
//!
//! Momentum is `p = -iε∇`, applied as multiplication by `εk` in Fourier space;
//! the kinetic energy `-½ε²Δ` becomes multiplication by `½ε²|k|²`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::num::{lit, norm_sqr, re, Real, C};
use crate::state::State;

/// `-½ε²Δψ`, exact for band-limited `ψ`.
pub fn kinetic_apply<T: Real>(eps: T, psi: &State<T>) -> State<T> {
    let grid = psi.grid();
    let half_eps2 = lit::<T>(0.5) * eps * eps;
    fourier_multiply(psi, |mode| re(half_eps2 * grid.wavenumber_sq(mode)))
}

/// `p_axis ψ = -iε ∂_axis ψ`.
pub fn momentum_apply<T: Real>(axis: usize, eps: T, psi: &State<T>) -> State<T> {
    let grid = psi.grid();
    fourier_multiply(psi, |mode| re(eps * grid.wavenumber(axis, grid.unflat(mode)[axis])))
}

/// All momentum components `(p_0 ψ, …, p_{d-1} ψ)` sharing one forward transform.
pub fn momentum_all<T: Real>(eps: T, psi: &State<T>) -> Vec<State<T>> {
    let grid = psi.grid();
    let m = psi.components();
    let mut hat = psi.values().to_vec();
    grid.fft_forward(&mut hat, m);
    (0..grid.dim())
        .map(|axis| {
            let mut out = hat.clone();
            for mode in 0..grid.len() {
                let k = eps * grid.wavenumber(axis, grid.unflat(mode)[axis]);
                for z in &mut out[mode * m..(mode + 1) * m] {
                    *z = *z * k;
                }
            }
            grid.fft_inverse(&mut out, m);
            State::from_values(grid, m, psi.eps(), out).expect("shape preserved")
        })
        .collect()
}

/// Sharp projection onto Fourier modes with `½ε²|k|² ≤ energy`.
pub fn kinetic_cutoff<T: Real>(energy: T, eps: T, psi: &State<T>) -> State<T> {
    let grid = psi.grid();
    let half_eps2 = lit::<T>(0.5) * eps * eps;
    fourier_multiply(psi, |mode| {
        if half_eps2 * grid.wavenumber_sq(mode) <= energy {
            re(T::one())
        } else {
            re(T::zero())
        }
    })
}

/// Multiplies every Fourier mode by `symbol(mode)`.
pub fn fourier_multiply<T: Real>(psi: &State<T>, symbol: impl Fn(usize) -> C<T>) -> State<T> {
    let grid = psi.grid();
    let m = psi.components();
    let mut hat = psi.values().to_vec();
    grid.fft_forward(&mut hat, m);
    for mode in 0..grid.len() {
        let s = symbol(mode);
        for z in &mut hat[mode * m..(mode + 1) * m] {
            *z = *z * s;
        }
    }
    grid.fft_inverse(&mut hat, m);
    State::from_values(grid, m, psi.eps(), hat).expect("shape preserved")
}

/// `⟨ψ, -½ε²Δ ψ⟩`, evaluated in Fourier space.
pub fn kinetic_expectation<T: Real>(eps: T, psi: &State<T>) -> T {
    let grid = psi.grid();
    let m = psi.components();
    let mut hat = psi.values().to_vec();
    grid.fft_forward(&mut hat, m);
    let half_eps2 = lit::<T>(0.5) * eps * eps;
    let mut acc = T::zero();
    for mode in 0..grid.len() {
        let w = half_eps2 * grid.wavenumber_sq(mode);
        for z in &hat[mode * m..(mode + 1) * m] {
            acc += w * norm_sqr(*z);
        }
    }
    acc * grid.cell_volume() / lit::<T>(grid.len() as f64)
}

/// `‖ψ‖` computed from Fourier coefficients (Parseval).
pub fn fourier_norm<T: Real>(psi: &State<T>) -> T {
    let grid = psi.grid();
    let mut hat = psi.values().to_vec();
    grid.fft_forward(&mut hat, psi.components());
    let s = hat.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b);
    (s * grid.cell_volume() / lit::<T>(grid.len() as f64)).sqrt()
}

/// Normalized Gaussian wavepacket times a constant spinor,
/// `ψ(x) ∝ exp(-|x-x₀|²/(4σ²) + i p₀·x/ε) χ`.
///
/// `momentum` is the classical momentum `p₀`, so the kinetic energy stays
/// `½|p₀|² + O(ε²)` as `ε → 0`. The packet must sit at least `5σ` away from
/// every boundary.
pub fn gaussian_packet<T: Real>(
    grid: &Grid<T>,
    center: &[T],
    width: T,
    momentum: &[T],
    spinor: &[C<T>],
    eps: T,
) -> Result<State<T>> {
    let d = grid.dim();
    if center.len() != d || momentum.len() != d {
        return Err(Error::GridMismatch(format!("packet data for dimension {} on a {d}-d grid", center.len())));
    }
    if !(width > T::zero()) {
        return Err(Error::Config("packet width must be positive".into()));
    }
    let five = lit::<T>(5.0) * width;
    for a in 0..d {
        if center[a] - five < grid.lower(a) || center[a] + five > grid.upper(a) {
            return Err(Error::Boundary(format!(
                "axis {a}: center {} ± 5σ leaves [{}, {}]",
                center[a],
                grid.lower(a),
                grid.upper(a)
            )));
        }
    }
    let spin_norm = spinor.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b).sqrt();
    if !(spin_norm > T::zero()) {
        return Err(Error::Config("packet spinor must be nonzero".into()));
    }
    let quarter = lit::<T>(0.25) / (width * width);
    let mut s = State::from_fn(grid, spinor.len(), eps, |x| {
        let mut r2 = T::zero();
        let mut phase = T::zero();
        for a in 0..d {
            let dx = x[a] - center[a];
            r2 += dx * dx;
            phase += momentum[a] * x[a] / eps;
        }
        let amp = (-(r2 * quarter)).exp();
        let w = C::new(amp * phase.cos(), amp * phase.sin());
        spinor.iter().map(|c| *c * w / spin_norm).collect()
    });
    s.normalize();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::cplx;

    fn line(n: usize) -> Grid<f64> {
        Grid::new_1d([-10.0, 10.0], n, false).unwrap()
    }

    #[test]
    fn plane_wave_is_kinetic_eigenfunction() {
        let g = line(128);
        let k = g.wavenumber(0, 5);
        let eps = 0.3;
        let psi = State::from_fn(&g, 1, eps, |x| vec![C::new((k * x[0]).cos(), (k * x[0]).sin())]);
        let t = kinetic_apply(eps, &psi);
        for (a, b) in t.values().iter().zip(psi.values()) {
            assert!((a - b * (0.5 * eps * eps * k * k)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_state_has_zero_kinetic_energy() {
        let g = line(64);
        let psi = State::from_fn(&g, 2, 0.1, |_| vec![cplx(1.0, 0.0), cplx(0.0, -2.0)]);
        let t = kinetic_apply(0.1, &psi);
        assert!(t.norm() < 1e-13);
    }

    #[test]
    fn cutoff_extremes() {
        let g = line(64);
        let eps = 0.2;
        let psi = gaussian_packet(&g, &[0.5], 0.7, &[0.3], &[cplx(1.0, 0.0)], eps).unwrap();
        let kmax = g.max_wavenumber();
        let all = kinetic_cutoff(0.5 * eps * eps * kmax * kmax * 1.01, eps, &psi);
        assert!(all.distance(&psi).unwrap() < 1e-13);
        let zero = kinetic_cutoff(0.0, eps, &psi);
        let mean = psi.values().iter().fold(C::new(0.0, 0.0), |a, b| a + b) / 64.0;
        for z in zero.values() {
            assert!((z - mean).norm() < 1e-13);
        }
    }

    #[test]
    fn cutoff_is_idempotent_bitwise() {
        let g = line(64);
        let psi = gaussian_packet(&g, &[0.0], 0.5, &[1.0], &[cplx(1.0, 0.0)], 0.1).unwrap();
        let once = kinetic_cutoff(0.3, 0.1, &psi);
        let twice = kinetic_cutoff(0.3, 0.1, &once);
        let mut a = once.values().to_vec();
        let mut b = twice.values().to_vec();
        g.fft_forward(&mut a, 1);
        g.fft_forward(&mut b, 1);
        for (x, y) in a.iter().zip(&b) {
            // zeroed modes stay exactly zero; kept modes agree to round-off of one FFT pair
            assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
            if x.norm() == 0.0 {
                assert_eq!(y.norm(), 0.0);
            }
        }
    }

    #[test]
    fn packet_too_close_to_boundary() {
        let g = line(64);
        let r = gaussian_packet(&g, &[8.0], 1.0, &[0.0], &[cplx(1.0, 0.0)], 0.1);
        assert!(matches!(r, Err(Error::Boundary(_))));
    }

    #[test]
    fn orthogonal_spinors_give_orthogonal_packets() {
        let g = line(128);
        let a = gaussian_packet(&g, &[0.0], 0.6, &[0.4], &[cplx(1.0, 0.0), cplx(0.0, 1.0)], 0.1).unwrap();
        let b = gaussian_packet(&g, &[1.0], 0.9, &[-0.2], &[cplx(0.0, 1.0), cplx(1.0, 0.0)], 0.1).unwrap();
        assert!(a.inner(&b).unwrap().norm() < 1e-12);
    }
}
