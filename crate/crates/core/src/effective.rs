//! Effective Born-Oppenheimer Hamiltonians, intertwiners between nucleonic
//! and molecular states, and the adiabatic/diabatic pair of the conical model.
//!
//! One band:
//!
//! ```text
//! order 0   ½p² + E_j
//! order 1   ½(p − εA)² + E_j
//! order 2   ½(p − εA)² + E_j + ε²φ/2 − ε²M
//! ```
//!
//! `ℓ` bands (orders 0 and 1 only): `½p² + W` and `½p² + W − (ε/2)(p·A + A·p)`.
//! `M` is a quantization of `Σ 𝔪_{lk} p_l p_k`, symmetric by default.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    berry_connection, born_huang, eigendecompose_smooth, mass_tensor, multiband_matrices, regularization_mask, Derivative,
    Eigenframe, FiberField, FieldKind, FrameOptions, Gauge, GeometricForm,
};
use crate::grid::Grid;
use crate::model::{BandSelector, ElectronicModel, DEFAULT_GAP_THRESHOLD};
use crate::num::{cplx, lit, max_abs, re, to_f64, CMat, Real, C};
use crate::propagate::{propagate_krylov, propagate_split, DtPolicy, PropagationResult};
use crate::state::State;
use crate::stencil::{Factor, OperatorStencil};
use crate::superadiabatic::{build_b_field, build_u_first_order};

/// Largest mass allowed inside the excluded region during a propagation.
pub const SUPPORT_LIMIT: f64 = 1e-6;

/// Operator ordering of the mass term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantization {
    /// `½ Σ (𝔪_{lk} p_l p_k + p_l p_k 𝔪_{lk})`.
    #[default]
    Symmetric,
    /// `Σ p_l 𝔪_{lk} p_k`.
    Sandwich,
}

/// Switches for the geometric terms; a term is present only if the order
/// includes it and its switch is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveTerms {
    pub berry: bool,
    pub born_huang: bool,
    pub mass: bool,
}

impl Default for EffectiveTerms {
    fn default() -> Self {
        EffectiveTerms { berry: true, born_huang: true, mass: true }
    }
}

/// Construction options for [`build_effective`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveOptions {
    /// `None` uses the model's analytic frame when it has one, parallel transport otherwise.
    pub gauge: Option<Gauge>,
    pub derivative: Derivative,
    pub form: GeometricForm,
    /// Exclusion radius around crossing points; `None` means two cells.
    pub r_min: Option<f64>,
    pub gap_threshold: f64,
    pub quantization: Quantization,
    pub terms: EffectiveTerms,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        EffectiveOptions {
            gauge: None,
            derivative: Derivative::fd4(),
            form: GeometricForm::TraceForm,
            r_min: None,
            gap_threshold: DEFAULT_GAP_THRESHOLD,
            quantization: Quantization::Symmetric,
            terms: EffectiveTerms::default(),
        }
    }
}

/// Fiber fields entering the operator, already multiplied by the mask.
#[derive(Clone, Debug)]
pub struct Ingredients<T: Real> {
    /// `E_j` (as `1×1`) or `W`.
    pub potential: FiberField<T, CMat<T>>,
    pub berry: Option<FiberField<T, Vec<CMat<T>>>>,
    pub born_huang: Option<FiberField<T, T>>,
    pub mass: Option<FiberField<T, CMat<T>>>,
}

/// An assembled effective Hamiltonian.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian<T: Real> {
    pub order: usize,
    pub bands: BandSelector,
    pub eps: T,
    pub quantization: Quantization,
    pub terms: EffectiveTerms,
    pub ingredients: Ingredients<T>,
    /// Smooth cutoff multiplying `A`, `φ`, `𝔪` (all ones without crossings).
    pub mask: Vec<T>,
    pub r_min: Option<f64>,
    frame: FiberField<T, CMat<T>>,
    b: Option<FiberField<T, Vec<CMat<T>>>>,
    stencil: OperatorStencil<T>,
    local: Option<Vec<CMat<T>>>,
}

fn default_gauge<T: Real>(model: &dyn ElectronicModel<T>, grid: &Grid<T>, bands: &BandSelector) -> Gauge {
    let probe = (0..grid.len()).map(|n| grid.point(n)).find(|x| model.crossing_points().iter().all(|c| c != x));
    match probe {
        Some(x) if model.analytic_frame(&x, bands.indices()).is_some() => Gauge::Analytic,
        _ => Gauge::ParallelTransport,
    }
}

/// Computes the eigenframe and assembles the effective Hamiltonian.
pub fn build_effective<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    bands: &BandSelector,
    order: usize,
    eps: T,
    opts: &EffectiveOptions,
) -> Result<EffectiveHamiltonian<T>> {
    check_order(order, bands)?;
    let gauge = opts.gauge.unwrap_or_else(|| default_gauge(model, grid, bands));
    let fopts = FrameOptions { gap_threshold: opts.gap_threshold, r_min: opts.r_min, ..Default::default() };
    let frame = eigendecompose_smooth(model, grid, bands, gauge, &fopts)?;
    build_effective_from_frame(model, &frame, order, eps, opts)
}

fn check_order(order: usize, bands: &BandSelector) -> Result<()> {
    match (order, bands.len()) {
        (0..=2, 1) | (0..=1, _) => Ok(()),
        (2, l) => Err(Error::Order(format!("order 2 is available for one band only (got {l})"))),
        (o, _) => Err(Error::Order(format!("order {o} is not one of 0, 1, 2"))),
    }
}

/// Round-off level below which a coefficient field is dropped, so that
/// e.g. finite differences of a constant frame do not force Krylov.
fn negligible<T: Real>() -> T {
    T::default_epsilon() * lit(1e4)
}

fn is_zero<T: Real>(mats: &[CMat<T>]) -> bool {
    mats.iter().all(|m| max_abs(m) <= negligible())
}

/// Assembles the effective Hamiltonian from a given frame (any gauge).
pub fn build_effective_from_frame<T: Real>(
    model: &dyn ElectronicModel<T>,
    ef: &Eigenframe<T>,
    order: usize,
    eps: T,
    opts: &EffectiveOptions,
) -> Result<EffectiveHamiltonian<T>> {
    let bands = ef.selector.clone();
    check_order(order, &bands)?;
    let frame = &ef.frame;
    let grid = frame.grid();
    let l = bands.len();
    let d = opts.derivative;
    let r_min = opts.r_min.unwrap_or_else(|| 2.0 * to_f64(grid.min_spacing()));
    let crossings = model.crossing_points();
    let mask: Vec<T> =
        if crossings.is_empty() { vec![T::one(); grid.len()] } else { regularization_mask(grid, &crossings, lit(r_min)) };

    let potential = if l == 1 {
        ef.energies.map(FieldKind::Matrix(1, 1), |_, e| CMat::from_element(1, 1, re(e[0])))
    } else {
        multiband_matrices(model, frame, &bands, d)?.0
    };
    let with_berry = order >= 1 && opts.terms.berry;
    let with_phi = order >= 2 && opts.terms.born_huang;
    let with_mass = order >= 2 && opts.terms.mass;
    let berry = with_berry.then(|| {
        let a = berry_connection(frame, d);
        a.map(a.kind().clone(), |n, v| v.iter().map(|m| m * re(mask[n])).collect::<Vec<_>>())
    });
    let phi = if with_phi {
        let f = born_huang(frame, opts.form, d)?;
        Some(f.map(FieldKind::Scalar, |n, v| *v * mask[n]))
    } else {
        None
    };
    let mass = if with_mass {
        let f = mass_tensor(model, frame, bands.indices()[0], opts.form, d, opts.gap_threshold)?;
        Some(f.map(f.kind().clone(), |n, v| v * re(mask[n])))
    } else {
        None
    };

    // nodewise part
    let half = lit::<T>(0.5);
    let mut v: Vec<CMat<T>> = potential.samples().to_vec();
    if let (Some(a), 1) = (&berry, l) {
        for (n, vn) in v.iter_mut().enumerate() {
            for am in &a.samples()[n] {
                *vn += am * am * re(half * eps * eps);
            }
        }
    }
    if let Some(f) = &phi {
        for (vn, p) in v.iter_mut().zip(f.samples()) {
            vn[(0, 0)] += re(half * eps * eps * *p);
        }
    }
    let mut stencil = OperatorStencil::kinetic(grid, eps, l).plus(&OperatorStencil::fiber(grid, eps, v.clone(), "V")?)?;
    let mut local = true;
    if let Some(a) = &berry {
        for axis in 0..grid.dim() {
            let comp: Vec<CMat<T>> = a.samples().iter().map(|s| s[axis].clone()).collect();
            if is_zero(&comp) {
                continue;
            }
            local = false;
            let f = Factor::Fiber(Arc::new(comp));
            let c = Factor::Scale(re(-half * eps));
            let pa = OperatorStencil::single(grid, eps, l, l, vec![c.clone(), Factor::Momentum(axis), f.clone()], "p·A");
            let ap = OperatorStencil::single(grid, eps, l, l, vec![c, f, Factor::Momentum(axis)], "A·p");
            stencil = stencil.plus(&pa)?.plus(&ap)?;
        }
    }
    if let Some(mt) = &mass {
        for lx in 0..grid.dim() {
            for kx in 0..grid.dim() {
                let comp: Vec<CMat<T>> = mt.samples().iter().map(|s| CMat::from_element(1, 1, s[(lx, kx)])).collect();
                if is_zero(&comp) {
                    continue;
                }
                local = false;
                let f = Factor::Fiber(Arc::new(comp));
                let terms = match opts.quantization {
                    Quantization::Symmetric => {
                        let c = Factor::Scale(re(-half * eps * eps));
                        vec![
                            vec![c.clone(), f.clone(), Factor::MomentumPair(lx, kx)],
                            vec![c, Factor::MomentumPair(lx, kx), f],
                        ]
                    }
                    Quantization::Sandwich => {
                        vec![vec![Factor::Scale(re(-eps * eps)), Factor::Momentum(lx), f, Factor::Momentum(kx)]]
                    }
                };
                for t in terms {
                    stencil = stencil.plus(&OperatorStencil::single(grid, eps, l, l, t, "M"))?;
                }
            }
        }
    }
    let stencil = stencil.with_description(format!("effective order {order}, bands {:?}", bands.indices()));
    let b = if order >= 2 { Some(build_b_field(model, frame, bands.indices()[0], d, opts.gap_threshold)?) } else { None };
    Ok(EffectiveHamiltonian {
        order,
        bands,
        eps,
        quantization: opts.quantization,
        terms: EffectiveTerms { berry: with_berry, born_huang: with_phi, mass: with_mass },
        ingredients: Ingredients { potential, berry, born_huang: phi, mass },
        mask,
        r_min: (!crossings.is_empty()).then_some(r_min),
        frame: frame.clone(),
        b,
        stencil,
        local: local.then_some(v),
    })
}

impl<T: Real> EffectiveHamiltonian<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.frame.grid()
    }

    pub fn stencil(&self) -> &OperatorStencil<T> {
        &self.stencil
    }

    pub fn frame(&self) -> &FiberField<T, CMat<T>> {
        &self.frame
    }

    /// `B` of the band (order 2 only).
    pub fn b_field(&self) -> Option<&FiberField<T, Vec<CMat<T>>>> {
        self.b.as_ref()
    }

    pub fn excluded(&self) -> &[bool] {
        self.frame.excluded()
    }

    /// Whether the operator is `½p² + V(x)` and can be split exactly.
    pub fn is_local(&self) -> bool {
        self.local.is_some()
    }

    pub fn apply(&self, psi: &State<T>) -> Result<State<T>> {
        self.stencil.apply(psi)
    }

    /// Mass of `psi` on excluded nodes.
    pub fn excluded_mass(&self, psi: &State<T>) -> f64 {
        to_f64(psi.mass_where(self.excluded()))
    }

    /// The intertwiner paired with this order: `U₀` for orders 0 and 1,
    /// `U_(1) = U₀ + εU₀ p·B` for order 2. Returns `(U, U*)`.
    pub fn intertwiner(&self) -> Result<(OperatorStencil<T>, OperatorStencil<T>)> {
        build_u_first_order(&self.frame, self.b.as_ref(), self.eps)
    }
}

/// `iε∂_tψ = H_eff ψ` to time `t`.
///
/// Operators of the form `½p² + V(x)` (order 0, and order 1 whenever the
/// connection vanishes identically) are split exactly like the full
/// dynamics; all others use the Lanczos exponential.
pub fn propagate_effective<T: Real>(
    h: &EffectiveHamiltonian<T>,
    psi0: &State<T>,
    t: f64,
    policy: &DtPolicy,
) -> Result<PropagationResult<T>> {
    if psi0.grid() != h.grid() || psi0.components() != h.bands.len() {
        return Err(Error::GridMismatch("nucleonic state does not match the effective Hamiltonian".into()));
    }
    let check = |s: &State<T>| -> Result<()> {
        let mass = h.excluded_mass(s);
        if mass > SUPPORT_LIMIT {
            return Err(Error::Support { mass, limit: SUPPORT_LIMIT });
        }
        Ok(())
    };
    check(psi0)?;
    let out = match &h.local {
        Some(v) => propagate_split(v, psi0, t, policy)?,
        None => propagate_krylov(&h.stencil, psi0, t, policy)?,
    };
    check(&out.state)?;
    Ok(out)
}

/// Direction of [`intertwine`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `ψ ↦ U*ψ`.
    ToMolecular,
    /// `Ψ ↦ UΨ`.
    ToNucleonic,
}

/// Applies `U*` or `U`, where `u` is the nucleonic-valued map `U`.
pub fn intertwine<T: Real>(u: &OperatorStencil<T>, direction: Direction, state: &State<T>) -> Result<State<T>> {
    match direction {
        Direction::ToNucleonic => u.apply(state),
        Direction::ToMolecular => u.adjoint().apply(state),
    }
}

// ---------------------------------------------------------------------------
// conical adiabatic / diabatic pair

/// Adiabatic (`ξ₊`, `ξ₋` ordering) and diabatic forms of the conical Hamiltonian.
#[derive(Clone, Debug)]
pub struct AdiDiaPair<T: Real> {
    /// `½p² + W(x)`.
    pub h_dia: OperatorStencil<T>,
    /// `½p² + diag(E₊, E₋) + (ε/2r) K ê·p + (ε²/4r²) K` (exact conjugate of `h_dia`).
    pub h_adi: OperatorStencil<T>,
    /// The same operator with the coefficients as printed in the source:
    /// `(ε/r) K ê·p + (ε²/2r²) K`.
    pub h_adi_printed: OperatorStencil<T>,
    /// `S = F^†`: diabatic to adiabatic components.
    pub s: OperatorStencil<T>,
    /// `S⁻¹ = F`.
    pub s_inv: OperatorStencil<T>,
    /// Nodes within `r_min` of the origin, where the singular terms are dropped.
    pub excluded: Vec<bool>,
}

impl<T: Real> AdiDiaPair<T> {
    /// `‖(S H_dia S⁻¹ − H_adi)ψ‖` for an adiabatic-representation state.
    pub fn residual(&self, psi: &State<T>, printed: bool) -> Result<T> {
        let lhs = self.s.apply(&self.h_dia.apply(&self.s_inv.apply(psi)?)?)?;
        let rhs = if printed { &self.h_adi_printed } else { &self.h_adi }.apply(psi)?;
        lhs.distance(&rhs)
    }
}

/// Builds the pair for the conical model with strength `c` on an
/// origin-avoiding grid; singular terms are dropped within `r_min`.
pub fn adi_dia_pair<T: Real>(c: T, eps: T, grid: &Grid<T>, r_min: f64) -> Result<AdiDiaPair<T>> {
    if grid.dim() != 2 {
        return Err(Error::GridMismatch("the conical model lives in two dimensions".into()));
    }
    let model = crate::model::ConicalModel::new(c)?;
    let k = CMat::from_row_slice(2, 2, &[cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(0.0, -1.0), cplx(1.0, 0.0)]);
    let n = grid.len();
    let mut f = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut radial_1 = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut radial_2 = Vec::with_capacity(n);
    let mut excluded = Vec::with_capacity(n);
    let zero = CMat::<T>::zeros(2, 2);
    for node in 0..n {
        let x = grid.point(node);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r == T::zero() {
            return Err(Error::SingularNode { node });
        }
        let full = crate::model::ConicalModel::frame_at_angle(x[1].atan2(x[0]));
        // (ξ₊, ξ₋)
        f.push(crate::linalg::select_columns(&full, &[1, 0]));
        w.push(crate::model::eval_electronic(&model, &x)?);
        let e = c * r;
        diag.push(CMat::from_row_slice(2, 2, &[re(e), C::new(T::zero(), T::zero()), C::new(T::zero(), T::zero()), re(-e)]));
        let out = to_f64(r) < r_min;
        excluded.push(out);
        let ephi = [-x[1] / r, x[0] / r];
        for a in 0..2 {
            radial_1[a].push(if out { zero.clone() } else { &k * re(ephi[a] / (r + r)) });
        }
        radial_2.push(if out { zero.clone() } else { &k * re(T::one() / (lit::<T>(4.0) * r * r)) });
    }
    let fdag: Vec<CMat<T>> = f.iter().map(|m| m.adjoint()).collect();
    let h_dia = OperatorStencil::kinetic(grid, eps, 2).plus(&OperatorStencil::fiber(grid, eps, w, "W")?)?.with_description("p^2/2 + W");
    let build = |scale: T| -> Result<OperatorStencil<T>> {
        let mut h = OperatorStencil::kinetic(grid, eps, 2).plus(&OperatorStencil::fiber(grid, eps, diag.clone(), "diag(E+, E-)")?)?;
        for (a, field) in radial_1.iter().enumerate() {
            let fac = Factor::Fiber(Arc::new(field.clone()));
            h = h.plus(&OperatorStencil::single(grid, eps, 2, 2, vec![Factor::Scale(re(scale * eps)), fac, Factor::Momentum(a)], "K e·p"))?;
        }
        let second: Vec<CMat<T>> = radial_2.iter().map(|m| m * re(scale * eps * eps)).collect();
        h.plus(&OperatorStencil::fiber(grid, eps, second, "K/r^2")?)
    };
    Ok(AdiDiaPair {
        h_dia,
        h_adi: build(T::one())?.with_description("derived H_adi"),
        h_adi_printed: build(lit(2.0))?.with_description("printed H_adi"),
        s: OperatorStencil::fiber(grid, eps, fdag, "S")?,
        s_inv: OperatorStencil::fiber(grid, eps, f, "S^-1")?,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_avoided_crossing_1d, ConstantFrame, Profile};

    #[test]
    fn order_two_multiband_is_rejected() {
        let g = Grid::<f64>::new_1d([-5.0, 5.0], 32, false).unwrap();
        let m = ConstantFrame::new(1, vec![0.0, 1.0, 3.0], 1.0).unwrap();
        let bands = BandSelector::new(vec![0, 1]).unwrap();
        assert!(matches!(build_effective(&m, &g, &bands, 2, 0.1, &Default::default()), Err(Error::Order(_))));
        assert!(build_effective(&m, &g, &bands, 1, 0.1, &Default::default()).is_ok());
    }

    #[test]
    fn real_one_dimensional_frame_gives_local_order_one() {
        let g = Grid::<f64>::new_1d([-8.0, 8.0], 128, false).unwrap();
        let m = make_avoided_crossing_1d(0.5, Profile::Tanh).unwrap();
        let b = BandSelector::single(0);
        assert!(build_effective(&m, &g, &b, 1, 0.1, &Default::default()).unwrap().is_local());
        assert!(!build_effective(&m, &g, &b, 2, 0.1, &Default::default()).unwrap().is_local());
    }
}
