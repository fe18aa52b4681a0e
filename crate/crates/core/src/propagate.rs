//! Time evolution `iε∂_tψ = Hψ`, i.e. `ψ(t) = exp(−iHt/ε)ψ(0)`.
//!
//! Hamiltonians of the form `½p² + V(x)` (with `V` a nodewise Hermitian
//! matrix) are propagated by Strang splitting; everything else by a
//! short-iterative Lanczos exponential with full reorthogonalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic::kinetic_expectation;
use crate::linalg::{expm_hermitian, tridiagonal_eigh};
use crate::model::{eval_electronic, ElectronicModel};
use crate::num::{cexp, lit, re, to_f64, CMat, Real, C};
use crate::state::State;
use crate::stencil::OperatorStencil;

/// Step-size control shared by both integrators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtPolicy {
    /// Initial splitting step; `None` picks `ε/8` (capped by `T`).
    pub dt: Option<f64>,
    /// Tolerance on the estimated final-state error.
    pub tolerance: f64,
    /// How many times the splitting step may be halved.
    pub max_refinements: usize,
    /// Largest Krylov dimension.
    pub krylov_dim: usize,
    /// Number of evenly spaced times at which norm and energy are recorded.
    pub samples: usize,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy { dt: None, tolerance: 1e-8, max_refinements: 12, krylov_dim: 30, samples: 4 }
    }
}

/// Outcome of a propagation.
#[derive(Clone, Debug)]
pub struct PropagationResult<T: Real> {
    pub state: State<T>,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub energies: Vec<f64>,
    pub norm_drift: f64,
    pub energy_drift: f64,
    /// Final splitting step (Strang) or smallest accepted substep (Krylov).
    pub dt: f64,
    pub steps: usize,
    /// Estimated error of the returned state.
    pub error_estimate: f64,
    pub method: &'static str,
}

impl<T: Real> PropagationResult<T> {
    fn trivial(psi: &State<T>, energy: f64) -> Self {
        let n = to_f64(psi.norm());
        PropagationResult {
            state: psi.clone(),
            times: vec![0.0],
            norms: vec![n],
            energies: vec![energy],
            norm_drift: 0.0,
            energy_drift: 0.0,
            dt: 0.0,
            steps: 0,
            error_estimate: 0.0,
            method: "identity",
        }
    }

    fn finish(&mut self) {
        let n0 = self.norms[0];
        let e0 = self.energies[0];
        self.norm_drift = self.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max);
        self.energy_drift = self.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    }
}

// ---------------------------------------------------------------------------
// splitting

/// Precomputed Strang factors for `½p² + V(x)` at one `(ε, dt)`.
struct Strang<T: Real> {
    half: Vec<CMat<T>>,
    kinetic: Vec<C<T>>,
}

impl<T: Real> Strang<T> {
    fn new(potential: &[CMat<T>], grid: &crate::grid::Grid<T>, eps: T, dt: T) -> Self {
        let c = C::new(T::zero(), -dt / (eps + eps));
        let half = potential.iter().map(|v| expm_hermitian(v, c)).collect();
        let w = lit::<T>(0.5) * eps * dt;
        let kinetic = (0..grid.len()).map(|mode| cexp(C::new(T::zero(), -w * grid.wavenumber_sq(mode)))).collect();
        Strang { half, kinetic }
    }

    fn potential_half(&self, psi: &mut State<T>) {
        let m = psi.components();
        let mut buf = vec![C::new(T::zero(), T::zero()); m];
        for (node, u) in self.half.iter().enumerate() {
            let s = psi.spinor_mut(node);
            for i in 0..m {
                let mut acc = C::new(T::zero(), T::zero());
                for j in 0..m {
                    acc += u[(i, j)] * s[j];
                }
                buf[i] = acc;
            }
            s.copy_from_slice(&buf);
        }
    }

    fn kinetic_full(&self, psi: &mut State<T>) {
        let grid = psi.grid().clone();
        let m = psi.components();
        let v = psi.values_mut();
        grid.fft_forward(v, m);
        for (mode, k) in self.kinetic.iter().enumerate() {
            for z in &mut v[mode * m..(mode + 1) * m] {
                *z = *z * k;
            }
        }
        grid.fft_inverse(v, m);
    }

    /// `n` steps; consecutive half potential steps are fused.
    fn run(&self, psi: &State<T>, n: usize, mut observe: impl FnMut(usize, &State<T>)) -> State<T> {
        let mut s = psi.clone();
        for step in 0..n {
            self.potential_half(&mut s);
            self.kinetic_full(&mut s);
            self.potential_half(&mut s);
            observe(step + 1, &s);
        }
        s
    }
}

/// `⟨ψ, (½p² + V)ψ⟩`.
pub fn local_energy<T: Real>(potential: &[CMat<T>], eps: T, psi: &State<T>) -> f64 {
    let m = psi.components();
    let mut pot = T::zero();
    for (node, v) in potential.iter().enumerate() {
        let s = psi.spinor(node);
        for i in 0..m {
            for j in 0..m {
                pot += (s[i].conj() * v[(i, j)] * s[j]).re;
            }
        }
    }
    to_f64(kinetic_expectation(eps, psi) + pot * psi.grid().cell_volume())
}

fn sample_steps(n: usize, samples: usize) -> Vec<usize> {
    let k = samples.max(1);
    let mut v: Vec<usize> = (1..=k).map(|i| (i * n) / k).filter(|s| *s > 0).collect();
    v.dedup();
    v
}

/// Strang propagation of `½p² + V(x)` to time `t` with Richardson control:
/// the run is repeated with half the step until the estimated error of the
/// finer run, `‖ψ_dt − ψ_{dt/2}‖/3`, is below the tolerance.
pub fn propagate_split<T: Real>(potential: &[CMat<T>], psi0: &State<T>, t: f64, policy: &DtPolicy) -> Result<PropagationResult<T>> {
    let grid = psi0.grid().clone();
    let eps = psi0.eps();
    if potential.len() != grid.len() || potential[0].nrows() != psi0.components() {
        return Err(Error::GridMismatch("potential does not match the state".into()));
    }
    let e0 = local_energy(potential, eps, psi0);
    if t == 0.0 {
        return Ok(PropagationResult::trivial(psi0, e0));
    }
    let dt0 = policy.dt.unwrap_or(to_f64(eps) / 8.0).min(t.abs());
    let mut n = (t.abs() / dt0).ceil().max(1.0) as usize;
    let run = |n: usize, record: bool| {
        let dt = t / n as f64;
        let strang = Strang::new(potential, &grid, eps, lit(dt));
        let marks = sample_steps(n, policy.samples);
        let mut times = vec![0.0];
        let mut norms = vec![to_f64(psi0.norm())];
        let mut energies = vec![e0];
        let out = strang.run(psi0, n, |step, s| {
            if record && marks.contains(&step) {
                times.push(step as f64 * dt);
                norms.push(to_f64(s.norm()));
                energies.push(local_energy(potential, eps, s));
            }
        });
        (out, times, norms, energies)
    };
    let mut coarse = run(n, false).0;
    let mut total = n;
    for _ in 0..=policy.max_refinements {
        n *= 2;
        total += n;
        let (fine, times, norms, energies) = run(n, true);
        let err = to_f64(fine.distance(&coarse)?) / 3.0;
        if err <= policy.tolerance {
            let mut r = PropagationResult {
                state: fine,
                times,
                norms,
                energies,
                norm_drift: 0.0,
                energy_drift: 0.0,
                dt: t / n as f64,
                steps: total,
                error_estimate: err,
                method: "strang",
            };
            r.finish();
            return Ok(r);
        }
        coarse = fine;
    }
    Err(Error::Accuracy(format!("splitting did not reach {:.1e} with dt = {:.3e}", policy.tolerance, t / n as f64)))
}

/// Nodewise `H_e(x)` on the grid.
pub fn electronic_field<T: Real>(model: &dyn ElectronicModel<T>, grid: &crate::grid::Grid<T>) -> Result<Vec<CMat<T>>> {
    (0..grid.len()).map(|n| eval_electronic(model, &grid.point(n))).collect()
}

/// Full molecular dynamics `iε∂_tΨ = (½p² + H_e(x))Ψ`.
pub fn propagate_full<T: Real>(model: &dyn ElectronicModel<T>, psi0: &State<T>, t: f64, policy: &DtPolicy) -> Result<PropagationResult<T>> {
    if psi0.components() != model.dim_electronic() {
        return Err(Error::GridMismatch(format!("{}-component state for an m = {} model", psi0.components(), model.dim_electronic())));
    }
    let he = electronic_field(model, psi0.grid())?;
    propagate_split(&he, psi0, t, policy)
}

// ---------------------------------------------------------------------------
// Krylov

/// One Lanczos basis for `op` started from `v`.
struct Lanczos<T: Real> {
    basis: Vec<State<T>>,
    alpha: Vec<T>,
    beta: Vec<T>,
    beta0: T,
    /// `β_m` of the last vector; zero after a happy breakdown.
    residual: T,
}

fn lanczos<T: Real>(op: &OperatorStencil<T>, v: &State<T>, dim: usize) -> Result<Lanczos<T>> {
    let beta0 = v.norm();
    let mut q = v.scaled(re(T::one() / beta0));
    let mut basis = Vec::with_capacity(dim);
    let mut alpha = Vec::with_capacity(dim);
    let mut beta: Vec<T> = Vec::with_capacity(dim);
    let breakdown = lit::<T>(1e-13);
    let mut residual = T::zero();
    for j in 0..dim {
        let mut w = op.apply(&q)?;
        let a = q.inner(&w)?.re;
        basis.push(q.clone());
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = b.inner(&w)?;
                w.axpy(-c, b)?;
            }
        }
        let bn = w.norm();
        if bn <= breakdown * (T::one() + crate::num::abs(a)) {
            residual = T::zero();
            break;
        }
        if j + 1 == dim {
            residual = bn;
            break;
        }
        beta.push(bn);
        q = w.scaled(re(T::one() / bn));
    }
    Ok(Lanczos { basis, alpha, beta, beta0, residual })
}

impl<T: Real> Lanczos<T> {
    /// Coefficients of `exp(−iTτ)e₁ β₀` and the a-posteriori error estimate.
    fn coefficients(&self, tau: T) -> (Vec<C<T>>, T) {
        let m = self.alpha.len();
        let (vals, vecs) = tridiagonal_eigh(&self.alpha, &self.beta[..m - 1]);
        let mut c = vec![C::new(T::zero(), T::zero()); m];
        for (k, lam) in vals.iter().enumerate() {
            let ph = cexp(C::new(T::zero(), -*lam * tau)) * vecs[(0, k)];
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += ph * vecs[(i, k)];
            }
        }
        let last = crate::num::norm_sqr(c[m - 1]).sqrt();
        for ci in c.iter_mut() {
            *ci = *ci * self.beta0;
        }
        (c, self.residual * last * self.beta0)
    }

    fn combine(&self, c: &[C<T>]) -> State<T> {
        let mut out = self.basis[0].scaled(c[0]);
        for (b, ci) in self.basis.iter().zip(c).skip(1) {
            out.axpy(*ci, b).expect("same shape");
        }
        out
    }
}

/// `exp(−iHt/ε)ψ₀` for a general stencil `H` by adaptive Lanczos substeps.
pub fn propagate_krylov<T: Real>(op: &OperatorStencil<T>, psi0: &State<T>, t: f64, policy: &DtPolicy) -> Result<PropagationResult<T>> {
    let eps = to_f64(psi0.eps());
    let energy = |s: &State<T>| -> Result<f64> { Ok(to_f64(s.inner(&op.apply(s)?)?.re)) };
    let e0 = energy(psi0)?;
    if t == 0.0 {
        return Ok(PropagationResult::trivial(psi0, e0));
    }
    let total = t / eps;
    let marks: Vec<f64> = (1..=policy.samples.max(1)).map(|i| total * i as f64 / policy.samples.max(1) as f64).collect();
    let mut next_mark = 0;
    let mut psi = psi0.clone();
    let mut done = 0.0;
    let mut steps = 0;
    let mut smallest = f64::INFINITY;
    let mut err_total = 0.0;
    let mut res = PropagationResult {
        state: psi0.clone(),
        times: vec![0.0],
        norms: vec![to_f64(psi0.norm())],
        energies: vec![e0],
        norm_drift: 0.0,
        energy_drift: 0.0,
        dt: 0.0,
        steps: 0,
        error_estimate: 0.0,
        method: "krylov",
    };
    while done < total * (1.0 - 1e-14) {
        let lz = lanczos(op, &psi, policy.krylov_dim)?;
        // never step past the next sampling time
        let mut tau = (marks[next_mark] - done).min(total - done);
        let mut accepted = None;
        for _ in 0..60 {
            let (c, err) = lz.coefficients(lit(tau));
            let allowed = policy.tolerance * tau / total;
            if to_f64(err) <= allowed {
                accepted = Some((c, to_f64(err)));
                break;
            }
            tau *= 0.5;
        }
        let (c, err) = accepted.ok_or_else(|| Error::Accuracy("Krylov substep underflow".into()))?;
        psi = lz.combine(&c);
        done += tau;
        steps += 1;
        err_total += err;
        smallest = smallest.min(tau * eps);
        if done >= marks[next_mark] * (1.0 - 1e-12) {
            res.times.push(marks[next_mark] * eps);
            res.norms.push(to_f64(psi.norm()));
            res.energies.push(energy(&psi)?);
            next_mark = (next_mark + 1).min(marks.len() - 1);
        }
    }
    res.state = psi;
    res.steps = steps;
    res.dt = smallest;
    res.error_estimate = err_total;
    res.finish();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kinetic::gaussian_packet;
    use crate::model::HarmonicScalar;
    use crate::num::cplx;

    #[test]
    fn zero_time_is_identity() {
        let g = Grid::<f64>::new_1d([-8.0, 8.0], 64, false).unwrap();
        let m = HarmonicScalar { dim: 1, components: 1, omega: 1.0 };
        let psi = gaussian_packet(&g, &[0.5], 0.7, &[0.2], &[cplx(1.0, 0.0)], 0.3).unwrap();
        let r = propagate_full(&m, &psi, 0.0, &DtPolicy::default()).unwrap();
        assert_eq!(r.state.values(), psi.values());
    }

    #[test]
    fn krylov_matches_splitting_for_local_hamiltonian() {
        let g = Grid::<f64>::new_1d([-8.0, 8.0], 128, false).unwrap();
        let m = HarmonicScalar { dim: 1, components: 1, omega: 1.0 };
        let eps = 0.2;
        let psi = gaussian_packet(&g, &[1.0], 0.5, &[0.3], &[cplx(1.0, 0.0)], eps).unwrap();
        let he = electronic_field(&m, &g).unwrap();
        let split = propagate_split(&he, &psi, 0.5, &DtPolicy { tolerance: 1e-10, ..Default::default() }).unwrap();
        let op = OperatorStencil::kinetic(&g, eps, 1).plus(&OperatorStencil::fiber(&g, eps, he, "V").unwrap()).unwrap();
        let kry = propagate_krylov(&op, &psi, 0.5, &DtPolicy { tolerance: 1e-11, ..Default::default() }).unwrap();
        assert!(split.state.distance(&kry.state).unwrap() < 1e-9);
        assert!(kry.norm_drift < 1e-10 && split.norm_drift < 1e-10);
    }
}
