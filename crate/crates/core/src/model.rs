//! Matrix-valued electronic Hamiltonians `x ↦ H_e(x)` and gap diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::num::{cplx, lit, re, to_f64, CMat, Real, C};

/// Gap below which adiabatic quantities are flagged as meaningless.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-6;

/// A smooth family of Hermitian `m×m` matrices over `R^d`.
pub trait ElectronicModel<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    /// Nuclear dimension `d ∈ {1, 2}`.
    fn dim_nuclear(&self) -> usize;

    /// Electronic dimension `m`.
    fn dim_electronic(&self) -> usize;

    /// `H_e(x)`; callers go through [`eval_electronic`] for domain checks.
    fn evaluate(&self, x: &[T]) -> CMat<T>;

    /// Declared domain as per-axis bounds; `None` means all of `R^d`.
    fn domain(&self) -> Option<Vec<[f64; 2]>> {
        None
    }

    /// Closed-form ascending bands, when known.
    fn analytic_bands(&self, _x: &[T]) -> Option<Vec<T>> {
        None
    }

    /// Closed-form smooth eigenvectors for the requested bands (one column per band).
    fn analytic_frame(&self, _x: &[T], _bands: &[usize]) -> Option<CMat<T>> {
        None
    }

    /// Points where the declared bands touch.
    fn crossing_points(&self) -> Vec<Vec<T>> {
        Vec::new()
    }
}

/// Evaluates `H_e(x)` after checking dimension and domain.
pub fn eval_electronic<T: Real>(model: &dyn ElectronicModel<T>, x: &[T]) -> Result<CMat<T>> {
    let out_of_domain = || Error::Domain { model: model.name().to_string(), point: x.iter().map(|v| to_f64(*v)).collect() };
    if x.len() != model.dim_nuclear() {
        return Err(out_of_domain());
    }
    if let Some(bounds) = model.domain() {
        for (v, b) in x.iter().zip(&bounds) {
            let v = to_f64(*v);
            if !(v >= b[0] && v <= b[1]) {
                return Err(out_of_domain());
            }
        }
    }
    Ok(model.evaluate(x))
}

/// Ordered set `I` of band labels (eigenvalues sorted ascending with multiplicity).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BandSelector {
    indices: Vec<usize>,
}

impl TryFrom<Vec<usize>> for BandSelector {
    type Error = Error;
    fn try_from(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("band selection is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("band indices {indices:?} must be strictly increasing")));
        }
        Ok(BandSelector { indices })
    }
}

impl From<BandSelector> for Vec<usize> {
    fn from(b: BandSelector) -> Self {
        b.indices
    }
}

impl BandSelector {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        Self::try_from(indices)
    }

    pub fn single(band: usize) -> Self {
        BandSelector { indices: vec![band] }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, band: usize) -> bool {
        self.indices.contains(&band)
    }

    /// Fails unless every index is below `m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= m) {
            Some(i) => Err(Error::Config(format!("band {i} out of range for {m} electronic levels"))),
            None => Ok(()),
        }
    }
}

/// Outcome of [`gap_profile`]: the violation is a flag, not an error.
#[derive(Clone, Debug)]
pub struct GapReport<T: Real> {
    pub min_gap: T,
    pub argmin: Vec<T>,
    pub violation: bool,
}

/// Smallest separation `|E_i − E_j|`, `j ∈ I`, `i ∉ I`, over the sampled region.
pub fn gap_profile<T: Real>(
    model: &dyn ElectronicModel<T>,
    region: &[Vec<T>],
    selector: &BandSelector,
    threshold: T,
) -> Result<GapReport<T>> {
    if region.is_empty() {
        return Err(Error::Config("gap_profile: empty region".into()));
    }
    selector.validate(model.dim_electronic())?;
    let mut best: Option<(T, &Vec<T>)> = None;
    for x in region {
        let (e, _) = eigh(&eval_electronic(model, x)?);
        let g = band_gap(&e, selector);
        if best.map_or(true, |(b, _)| g < b) {
            best = Some((g, x));
        }
    }
    let (min_gap, argmin) = best.expect("nonempty region");
    Ok(GapReport { min_gap, argmin: argmin.clone(), violation: min_gap < threshold })
}

/// Gap between the selected bands and the rest at a single point; `+∞`-like
/// (`T::max_value`) when every band is selected.
pub fn band_gap<T: Real>(energies: &[T], selector: &BandSelector) -> T {
    let mut g: Option<T> = None;
    for &j in selector.indices() {
        for (i, ei) in energies.iter().enumerate() {
            if selector.contains(i) {
                continue;
            }
            let d = crate::num::abs(*ei - energies[j]);
            g = Some(g.map_or(d, |v| if d < v { d } else { v }));
        }
    }
    g.unwrap_or_else(|| T::max_value().unwrap_or(lit(f64::MAX)))
}

/// Two-level conical crossing `W(x) = C [[x₁, x₂], [x₂, −x₁]]`, bands `∓C|x|`.
///
/// Band 0 is the lower surface `E₋`, band 1 the upper `E₊`. The analytic frame is
/// `ξ₊ = e^{iφ/2}(cos φ/2, sin φ/2)`, `ξ₋ = e^{iφ/2}(−sin φ/2, cos φ/2)`, which
/// is single valued and smooth away from the origin.
#[derive(Clone, Debug)]
pub struct ConicalModel<T: Real> {
    pub c: T,
}

impl<T: Real> ConicalModel<T> {
    pub fn new(c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::Config("conical model needs C > 0".into()));
        }
        Ok(ConicalModel { c })
    }

    /// `(ξ₋, ξ₊)` as columns at polar angle `phi`.
    pub fn frame_at_angle(phi: T) -> CMat<T> {
        let half = phi * lit(0.5);
        let w = C::new(half.cos(), half.sin());
        let (c, s) = (half.cos(), half.sin());
        CMat::from_row_slice(2, 2, &[w * (-s), w * c, w * c, w * s])
    }
}

impl<T: Real> ElectronicModel<T> for ConicalModel<T> {
    fn name(&self) -> &str {
        "conical"
    }
    fn dim_nuclear(&self) -> usize {
        2
    }
    fn dim_electronic(&self) -> usize {
        2
    }
    fn evaluate(&self, x: &[T]) -> CMat<T> {
        let (a, b) = (self.c * x[0], self.c * x[1]);
        CMat::from_row_slice(2, 2, &[re(a), re(b), re(b), re(-a)])
    }
    fn analytic_bands(&self, x: &[T]) -> Option<Vec<T>> {
        let r = self.c * (x[0] * x[0] + x[1] * x[1]).sqrt();
        Some(vec![-r, r])
    }
    fn analytic_frame(&self, x: &[T], bands: &[usize]) -> Option<CMat<T>> {
        if x[0] == T::zero() && x[1] == T::zero() {
            return None;
        }
        let full = Self::frame_at_angle(x[1].atan2(x[0]));
        Some(crate::linalg::select_columns(&full, bands))
    }
    fn crossing_points(&self) -> Vec<Vec<T>> {
        vec![vec![T::zero(), T::zero()]]
    }
}

/// Profile `f` of the avoided-crossing model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Tanh,
    Linear,
}

impl Profile {
    fn eval<T: Real>(self, x: T) -> T {
        match self {
            Profile::Tanh => x.tanh(),
            Profile::Linear => x,
        }
    }
}

/// One-dimensional avoided crossing `[[f(x), δ], [δ, −f(x)]]` with bands
/// `±√(f² + δ²)`, globally gapped by `2δ`.
#[derive(Clone, Debug)]
pub struct AvoidedCrossing<T: Real> {
    pub delta: T,
    pub profile: Profile,
}

/// Builds the avoided-crossing model; `δ` must be positive.
pub fn make_avoided_crossing_1d<T: Real>(delta: T, profile: Profile) -> Result<AvoidedCrossing<T>> {
    if !(delta > T::zero()) {
        return Err(Error::Config(format!("avoided crossing needs δ > 0, got {delta}")));
    }
    Ok(AvoidedCrossing { delta, profile })
}

impl<T: Real> ElectronicModel<T> for AvoidedCrossing<T> {
    fn name(&self) -> &str {
        "avoided_crossing"
    }
    fn dim_nuclear(&self) -> usize {
        1
    }
    fn dim_electronic(&self) -> usize {
        2
    }
    fn evaluate(&self, x: &[T]) -> CMat<T> {
        let f = self.profile.eval(x[0]);
        CMat::from_row_slice(2, 2, &[re(f), re(self.delta), re(self.delta), re(-f)])
    }
    fn analytic_bands(&self, x: &[T]) -> Option<Vec<T>> {
        let f = self.profile.eval(x[0]);
        let e = (f * f + self.delta * self.delta).sqrt();
        Some(vec![-e, e])
    }
    fn analytic_frame(&self, x: &[T], bands: &[usize]) -> Option<CMat<T>> {
        // mixing angle θ ∈ (0, π) since δ > 0
        let theta = self.delta.atan2(self.profile.eval(x[0])) * lit(0.5);
        let (c, s) = (theta.cos(), theta.sin());
        let full = CMat::from_row_slice(2, 2, &[re(-s), re(c), re(c), re(s)]);
        Some(crate::linalg::select_columns(&full, bands))
    }
}

/// `H_e(x) = U diag(E_j(x)) U^†` with a constant unitary `U`; every
/// geometric quantity (`A`, `φ`, `𝔪`, `B`) vanishes identically.
#[derive(Clone, Debug)]
pub struct ConstantFrame<T: Real> {
    dim: usize,
    levels: Vec<T>,
    curvature: T,
    frame: CMat<T>,
}

impl<T: Real> ConstantFrame<T> {
    /// Levels `E_j(x) = levels[j] + ½ κ|x|²` in a fixed complex two-level
    /// frame (for `m = 2`) or the canonical frame otherwise.
    pub fn new(dim: usize, levels: Vec<T>, curvature: T) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("nuclear dimension {dim} not in {{1, 2}}")));
        }
        if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("constant-frame levels must be strictly increasing, m >= 2".into()));
        }
        let m = levels.len();
        let frame = if m == 2 {
            let (c, s) = (lit::<T>(0.6), lit::<T>(0.8));
            let mix = cplx::<T>(0.0, -1.0) * s;
            CMat::from_row_slice(2, 2, &[re(c), mix, mix, re(c)])
        } else {
            CMat::identity(m, m)
        };
        Ok(ConstantFrame { dim, levels, curvature, frame })
    }

    pub fn frame(&self) -> &CMat<T> {
        &self.frame
    }
}

impl<T: Real> ElectronicModel<T> for ConstantFrame<T> {
    fn name(&self) -> &str {
        "constant_frame"
    }
    fn dim_nuclear(&self) -> usize {
        self.dim
    }
    fn dim_electronic(&self) -> usize {
        self.levels.len()
    }
    fn evaluate(&self, x: &[T]) -> CMat<T> {
        let r2 = x.iter().fold(T::zero(), |a, v| a + *v * *v);
        let shift = lit::<T>(0.5) * self.curvature * r2;
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.levels.len(),
            self.levels.iter().map(|l| re(*l + shift)),
        ));
        &self.frame * d * self.frame.adjoint()
    }
    fn analytic_bands(&self, x: &[T]) -> Option<Vec<T>> {
        let r2 = x.iter().fold(T::zero(), |a, v| a + *v * *v);
        Some(self.levels.iter().map(|l| *l + lit::<T>(0.5) * self.curvature * r2).collect())
    }
    fn analytic_frame(&self, _x: &[T], bands: &[usize]) -> Option<CMat<T>> {
        Some(crate::linalg::select_columns(&self.frame, bands))
    }
}

/// Scalar potential times the identity, `H_e(x) = ½ω²|x|² · 1_m`; `m = 1` allowed.
#[derive(Clone, Debug)]
pub struct HarmonicScalar<T: Real> {
    pub dim: usize,
    pub components: usize,
    pub omega: T,
}

impl<T: Real> ElectronicModel<T> for HarmonicScalar<T> {
    fn name(&self) -> &str {
        "harmonic_scalar"
    }
    fn dim_nuclear(&self) -> usize {
        self.dim
    }
    fn dim_electronic(&self) -> usize {
        self.components
    }
    fn evaluate(&self, x: &[T]) -> CMat<T> {
        let r2 = x.iter().fold(T::zero(), |a, v| a + *v * *v);
        CMat::identity(self.components, self.components) * re(lit::<T>(0.5) * self.omega * self.omega * r2)
    }
    fn analytic_bands(&self, x: &[T]) -> Option<Vec<T>> {
        let r2 = x.iter().fold(T::zero(), |a, v| a + *v * *v);
        Some(vec![lit::<T>(0.5) * self.omega * self.omega * r2; self.components])
    }
}

/// Real symmetric three-level model in two nuclear dimensions: a nearly
/// degenerate pair (bands 0, 1) separated by roughly `far` from band 2.
///
/// ```text
/// [[ tanh x₁,            δ + ½ tanh x₂,  η ],
///  [ δ + ½ tanh x₂,      −tanh x₁,       η ],
///  [ η,                  η,              far ]]
/// ```
#[derive(Clone, Debug)]
pub struct Triad<T: Real> {
    pub delta: T,
    pub eta: T,
    pub far: T,
}

impl<T: Real> ElectronicModel<T> for Triad<T> {
    fn name(&self) -> &str {
        "triad"
    }
    fn dim_nuclear(&self) -> usize {
        2
    }
    fn dim_electronic(&self) -> usize {
        3
    }
    fn evaluate(&self, x: &[T]) -> CMat<T> {
        let f = x[0].tanh();
        let g = self.delta + lit::<T>(0.5) * x[1].tanh();
        let (e, z) = (self.eta, self.far);
        CMat::from_row_slice(3, 3, &[re(f), re(g), re(e), re(g), re(-f), re(e), re(e), re(e), re(z)])
    }
}

/// Declarative model record used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Conical { c: f64 },
    AvoidedCrossing { delta: f64, #[serde(default = "default_profile")] profile: Profile },
    ConstantFrame { dim: usize, levels: Vec<f64>, #[serde(default)] curvature: f64 },
    HarmonicScalar { dim: usize, components: usize, omega: f64 },
    Triad { delta: f64, eta: f64, far: f64 },
}

fn default_profile() -> Profile {
    Profile::Tanh
}

impl ModelSpec {
    pub fn build<T: Real>(&self) -> Result<Box<dyn ElectronicModel<T>>> {
        Ok(match self {
            ModelSpec::Conical { c } => Box::new(ConicalModel::new(lit::<T>(*c))?),
            ModelSpec::AvoidedCrossing { delta, profile } => Box::new(make_avoided_crossing_1d(lit::<T>(*delta), *profile)?),
            ModelSpec::ConstantFrame { dim, levels, curvature } => {
                Box::new(ConstantFrame::new(*dim, levels.iter().map(|l| lit::<T>(*l)).collect(), lit(*curvature))?)
            }
            ModelSpec::HarmonicScalar { dim, components, omega } => {
                if !(1..=2).contains(dim) || *components == 0 {
                    return Err(Error::Config("harmonic_scalar: dim in {1,2}, components >= 1".into()));
                }
                Box::new(HarmonicScalar { dim: *dim, components: *components, omega: lit(*omega) })
            }
            ModelSpec::Triad { delta, eta, far } => Box::new(Triad { delta: lit(*delta), eta: lit(*eta), far: lit(*far) }),
        })
    }
}
