//! Eigenframes and the geometric fields built from them: Berry connection,
//! Born-Huang potential, mass tensor, curvature, multiband `(W, A)` and gauge
//! transformations.
//!
//! Fiber fields are known only node by node, so derivatives use centered
//! finite differences (one-sided near the box edges). A spectral option exists
//! for periodic, smooth fields.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{align_frame, eigh, orthonormality_defect, polar_unitary, select_columns};
use crate::model::{band_gap, eval_electronic, BandSelector, ElectronicModel};
use crate::num::{abs, hermitian_part, imag_unit, lit, max_abs, re, to_f64, CMat, Real, C};

/// Finite-difference family for fiber-field derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeScheme {
    CenteredFd2,
    CenteredFd4,
    Spectral,
}

/// A scheme together with a stencil stride. A stride of 2 evaluates the same
/// formula on the twice-coarser sub-lattice; comparing the two gives a
/// truncation estimate without building a second grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivative {
    pub scheme: DerivativeScheme,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Derivative {
    pub fn fd2() -> Self {
        Derivative { scheme: DerivativeScheme::CenteredFd2, stride: 1 }
    }

    pub fn fd4() -> Self {
        Derivative { scheme: DerivativeScheme::CenteredFd4, stride: 1 }
    }

    pub fn spectral() -> Self {
        Derivative { scheme: DerivativeScheme::Spectral, stride: 1 }
    }

    /// Same scheme at twice the stencil spacing.
    pub fn coarsened(self) -> Self {
        Derivative { stride: self.stride * 2, ..self }
    }
}

impl Default for Derivative {
    fn default() -> Self {
        Self::fd4()
    }
}

/// Shape tag of a [`FiberField`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    /// One real value per band.
    Bands(usize),
    /// `rows × cols` matrix per node (frames are `m × ℓ`).
    Matrix(usize, usize),
    /// `d` matrices of size `n × n` per node.
    VectorOfMatrices(usize, usize),
}

/// Values that can be written as a flat list of complex numbers.
pub trait FiberValue<T: Real>: Clone {
    fn flatten(&self) -> Vec<C<T>>;
}

impl<T: Real> FiberValue<T> for T {
    fn flatten(&self) -> Vec<C<T>> {
        vec![re(*self)]
    }
}

impl<T: Real> FiberValue<T> for Vec<T> {
    fn flatten(&self) -> Vec<C<T>> {
        self.iter().map(|v| re(*v)).collect()
    }
}

impl<T: Real> FiberValue<T> for CMat<T> {
    fn flatten(&self) -> Vec<C<T>> {
        // row-major
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                out.push(self[(i, j)]);
            }
        }
        out
    }
}

impl<T: Real> FiberValue<T> for Vec<CMat<T>> {
    fn flatten(&self) -> Vec<C<T>> {
        self.iter().flat_map(|m| m.flatten()).collect()
    }
}

/// Per-node samples of an `x`-dependent object with gauge bookkeeping.
#[derive(Clone, Debug)]
pub struct FiberField<T: Real, V> {
    grid: Grid<T>,
    kind: FieldKind,
    samples: Vec<V>,
    gauge_id: String,
    excluded: Vec<bool>,
}

impl<T: Real, V: FiberValue<T>> FiberField<T, V> {
    pub fn new(grid: &Grid<T>, kind: FieldKind, samples: Vec<V>, gauge_id: impl Into<String>, excluded: Vec<bool>) -> Result<Self> {
        if samples.len() != grid.len() || excluded.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} nodes", samples.len(), grid.len())));
        }
        Ok(FiberField { grid: grid.clone(), kind, samples, gauge_id: gauge_id.into(), excluded })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn gauge_id(&self) -> &str {
        &self.gauge_id
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn is_excluded(&self, node: usize) -> bool {
        self.excluded[node]
    }

    /// Raw samples, including the (meaningless) values stored at excluded nodes.
    pub fn samples(&self) -> &[V] {
        &self.samples
    }

    /// Sample at a non-excluded node.
    pub fn at(&self, node: usize) -> Result<&V> {
        if self.excluded[node] {
            return Err(Error::SingularNode { node });
        }
        Ok(&self.samples[node])
    }

    pub fn map<W: FiberValue<T>>(&self, kind: FieldKind, f: impl Fn(usize, &V) -> W) -> FiberField<T, W> {
        FiberField {
            grid: self.grid.clone(),
            kind,
            samples: self.samples.iter().enumerate().map(|(n, v)| f(n, v)).collect(),
            gauge_id: self.gauge_id.clone(),
            excluded: self.excluded.clone(),
        }
    }

    pub fn with_gauge_id(mut self, id: impl Into<String>) -> Self {
        self.gauge_id = id.into();
        self
    }

    /// Columnar text export: node index, coordinates, flattened `(re, im)`
    /// pairs and the gauge id, one row per node. Excluded nodes are kept with
    /// their flag so that plots can mask them.
    pub fn write_columns(&self, mut out: impl Write) -> Result<()> {
        let d = self.grid.dim();
        let width = self.samples.first().map_or(0, |s| s.flatten().len());
        let mut header = vec!["node".to_string()];
        header.extend((0..d).map(|a| format!("x{a}")));
        for k in 0..width {
            header.push(format!("re{k}"));
            header.push(format!("im{k}"));
        }
        header.push("excluded".into());
        header.push("gauge_id".into());
        writeln!(out, "{}", header.join(","))?;
        for (node, s) in self.samples.iter().enumerate() {
            let mut row = vec![node.to_string()];
            row.extend(self.grid.point(node).iter().map(|v| format!("{:.16e}", to_f64(*v))));
            for z in s.flatten() {
                row.push(format!("{:.16e}", to_f64(z.re)));
                row.push(format!("{:.16e}", to_f64(z.im)));
            }
            row.push((self.excluded[node] as u8).to_string());
            row.push(self.gauge_id.clone());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Per-node unitary `ℓ×ℓ` change of band basis.
#[derive(Clone, Debug)]
pub struct GaugeMap<T: Real> {
    field: FiberField<T, CMat<T>>,
}

impl<T: Real> GaugeMap<T> {
    /// Wraps a matrix field after checking `G^†G = 1` to `1e-10` at every
    /// non-excluded node.
    pub fn new(field: FiberField<T, CMat<T>>) -> Result<Self> {
        for (node, g) in field.samples.iter().enumerate() {
            if field.excluded[node] {
                continue;
            }
            let defect = if g.nrows() == g.ncols() { orthonormality_defect(g) } else { T::one() };
            if to_f64(defect) > 1e-10 {
                return Err(Error::NonOrthogonal { node, defect: to_f64(defect) });
            }
        }
        Ok(GaugeMap { field })
    }

    pub fn field(&self) -> &FiberField<T, CMat<T>> {
        &self.field
    }

    /// `G(x) = e^{iθ(x)}` for a single band.
    pub fn phase(grid: &Grid<T>, theta: impl Fn(&[T]) -> T) -> Self {
        let samples = (0..grid.len())
            .map(|n| {
                let t = theta(&grid.point(n));
                CMat::from_element(1, 1, C::new(t.cos(), t.sin()))
            })
            .collect();
        GaugeMap { field: FiberField::new(grid, FieldKind::Matrix(1, 1), samples, "phase", vec![false; grid.len()]).expect("sizes") }
    }
}

// ---------------------------------------------------------------------------
// derivatives

/// `∂_axis` of a matrix-valued field, node by node.
pub fn differentiate<T: Real>(grid: &Grid<T>, samples: &[CMat<T>], axis: usize, d: Derivative) -> Vec<CMat<T>> {
    match d.scheme {
        DerivativeScheme::Spectral => spectral_derivative(grid, samples, axis),
        DerivativeScheme::CenteredFd2 => fd_derivative(grid, samples, axis, d.stride, false),
        DerivativeScheme::CenteredFd4 => fd_derivative(grid, samples, axis, d.stride, true),
    }
}

/// All `d` partial derivatives.
pub fn gradient<T: Real>(grid: &Grid<T>, samples: &[CMat<T>], d: Derivative) -> Vec<Vec<CMat<T>>> {
    (0..grid.dim()).map(|a| differentiate(grid, samples, a, d)).collect()
}

fn fd_derivative<T: Real>(grid: &Grid<T>, f: &[CMat<T>], axis: usize, stride: usize, fourth: bool) -> Vec<CMat<T>> {
    let n = grid.count(axis);
    let s = stride.max(1) as isize;
    let h = grid.spacing(axis) * lit::<T>(stride.max(1) as f64);
    // (offsets, weights, denominator)
    let central: (&[isize], &[f64], f64) =
        if fourth { (&[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], 12.0) } else { (&[-1, 1], &[-1.0, 1.0], 2.0) };
    let lead: &[(&[isize], &[f64], f64)] = if fourth {
        &[
            (&[0, 1, 2, 3, 4], &[-25.0, 48.0, -36.0, 16.0, -3.0], 12.0),
            (&[-1, 0, 1, 2, 3], &[-3.0, -10.0, 18.0, -6.0, 1.0], 12.0),
        ]
    } else {
        &[(&[0, 1, 2], &[-3.0, 4.0, -1.0], 2.0)]
    };
    let reach = lead.len() as isize;
    let mut out = Vec::with_capacity(f.len());
    for node in 0..grid.len() {
        let idx = grid.unflat(node);
        let i = idx[axis] as isize;
        let at = |k: isize| {
            let mut j = idx;
            j[axis] = (i + k * s) as usize;
            &f[grid.flat(j)]
        };
        let (offs, w, den, sign): (Vec<isize>, &[f64], f64, f64) = if i - reach * s >= 0 && i + reach * s < n as isize {
            (central.0.to_vec(), central.1, central.2, 1.0)
        } else if i - reach * s < 0 {
            let row = (i / s).min(reach - 1) as usize;
            (lead[row].0.to_vec(), lead[row].1, lead[row].2, 1.0)
        } else {
            let back = ((n as isize - 1 - i) / s).min(reach - 1) as usize;
            (lead[back].0.iter().map(|o| -o).collect(), lead[back].1, lead[back].2, -1.0)
        };
        let mut acc = CMat::zeros(f[node].nrows(), f[node].ncols());
        for (o, wk) in offs.iter().zip(w) {
            acc += at(*o) * re(lit::<T>(sign * wk));
        }
        out.push(acc * re(T::one() / (lit::<T>(den) * h)));
    }
    out
}

fn spectral_derivative<T: Real>(grid: &Grid<T>, f: &[CMat<T>], axis: usize) -> Vec<CMat<T>> {
    let (r, c) = (f[0].nrows(), f[0].ncols());
    let comps = r * c;
    let mut data: Vec<C<T>> = f.iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect();
    grid.fft_forward(&mut data, comps);
    let i = imag_unit::<T>();
    for mode in 0..grid.len() {
        let k = grid.wavenumber(axis, grid.unflat(mode)[axis]);
        for z in &mut data[mode * comps..(mode + 1) * comps] {
            *z = *z * i * k;
        }
    }
    grid.fft_inverse(&mut data, comps);
    data.chunks(comps).map(|ch| CMat::from_column_slice(r, c, ch)).collect()
}

// ---------------------------------------------------------------------------
// eigenframes

/// Phase / basis convention for [`eigendecompose_smooth`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Polar alignment along a lexicographic comb sweep.
    ParallelTransport,
    /// Numerical eigenvectors aligned to the model's closed-form frame.
    Analytic,
    /// Eigenvectors exactly as returned by the eigensolver.
    Raw,
}

/// Plaquette whose transported holonomy is far from the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSeamWarning {
    /// Lower-left node of the plaquette.
    pub node: usize,
    pub defect: f64,
}

/// Options for [`eigendecompose_smooth`].
#[derive(Clone, Debug)]
pub struct FrameOptions {
    pub gap_threshold: f64,
    /// Exclusion radius around crossing points; `None` means two cells.
    pub r_min: Option<f64>,
    /// Holonomy defect above which a seam warning is raised.
    pub seam_tolerance: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { gap_threshold: crate::model::DEFAULT_GAP_THRESHOLD, r_min: None, seam_tolerance: 0.5 }
    }
}

/// Output of [`eigendecompose_smooth`].
#[derive(Clone, Debug)]
pub struct Eigenframe<T: Real> {
    pub energies: FiberField<T, Vec<T>>,
    pub frame: FiberField<T, CMat<T>>,
    pub selector: BandSelector,
    pub warnings: Vec<GaugeSeamWarning>,
}

/// Nodes within `r_min` of any crossing point.
pub fn exclusion_mask<T: Real>(grid: &Grid<T>, crossings: &[Vec<T>], r_min: T) -> Vec<bool> {
    (0..grid.len())
        .map(|n| {
            let x = grid.point(n);
            crossings.iter().any(|c| {
                let r2 = x.iter().zip(c).fold(T::zero(), |a, (u, v)| a + (*u - *v) * (*u - *v));
                r2 < r_min * r_min
            })
        })
        .collect()
}

/// Smooth mask: 0 inside `r_min`, cosine ramp to 1 at `2 r_min`.
pub fn regularization_mask<T: Real>(grid: &Grid<T>, crossings: &[Vec<T>], r_min: T) -> Vec<T> {
    let pi = T::pi();
    (0..grid.len())
        .map(|n| {
            let x = grid.point(n);
            crossings
                .iter()
                .map(|c| {
                    let r = x.iter().zip(c).fold(T::zero(), |a, (u, v)| a + (*u - *v) * (*u - *v)).sqrt();
                    if r < r_min {
                        T::zero()
                    } else if r >= r_min + r_min {
                        T::one()
                    } else {
                        lit::<T>(0.5) * (T::one() - (pi * (r - r_min) / r_min).cos())
                    }
                })
                .fold(T::one(), |a, b| a * b)
        })
        .collect()
}

/// Per-node eigenpairs for the selected bands in a chosen gauge.
///
/// Nodes within `r_min` of a declared crossing point are marked excluded; the
/// gap condition is enforced on every other node.
pub fn eigendecompose_smooth<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    selector: &BandSelector,
    gauge: Gauge,
    opts: &FrameOptions,
) -> Result<Eigenframe<T>> {
    selector.validate(model.dim_electronic())?;
    if model.dim_nuclear() != grid.dim() {
        return Err(Error::GridMismatch(format!("{}-d model on a {}-d grid", model.dim_nuclear(), grid.dim())));
    }
    let r_min = opts.r_min.map(lit::<T>).unwrap_or_else(|| grid.min_spacing() * lit(2.0));
    let excluded = exclusion_mask(grid, &model.crossing_points(), r_min);
    let threshold = lit::<T>(opts.gap_threshold);
    let mut energies = Vec::with_capacity(grid.len());
    let mut frames = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let x = grid.point(node);
        let (e, v) = eigh(&eval_electronic(model, &x)?);
        if !excluded[node] {
            let g = band_gap(&e, selector);
            if g < threshold {
                return Err(Error::GapViolation { node, gap: to_f64(g), threshold: opts.gap_threshold });
            }
        }
        energies.push(selector.indices().iter().map(|&j| e[j]).collect::<Vec<T>>());
        frames.push(select_columns(&v, selector.indices()));
    }
    let gauge_id = match gauge {
        Gauge::Raw => "raw".to_string(),
        Gauge::Analytic => {
            for (node, f) in frames.iter_mut().enumerate() {
                let x = grid.point(node);
                match model.analytic_frame(&x, selector.indices()) {
                    Some(reference) => *f = align_frame(&reference, f),
                    None if excluded[node] => {}
                    None => return Err(Error::Config(format!("model `{}` has no analytic frame at node {node}", model.name()))),
                }
            }
            format!("analytic:{}", model.name())
        }
        Gauge::ParallelTransport => {
            for node in 0..grid.len() {
                if let Some(prev) = sweep_predecessor(grid, node) {
                    let aligned = align_frame(&frames[prev], &frames[node]);
                    frames[node] = aligned;
                }
            }
            "parallel_transport:lexicographic".to_string()
        }
    };
    let warnings = if grid.dim() == 2 { seam_warnings(grid, &frames, opts.seam_tolerance) } else { Vec::new() };
    let l = selector.len();
    let m = model.dim_electronic();
    Ok(Eigenframe {
        energies: FiberField::new(grid, FieldKind::Bands(l), energies, gauge_id.clone(), excluded.clone())?,
        frame: FiberField::new(grid, FieldKind::Matrix(m, l), frames, gauge_id, excluded)?,
        selector: selector.clone(),
        warnings,
    })
}

/// Comb sweep: along axis 1 within a row, rows chained through their first node.
fn sweep_predecessor<T: Real>(grid: &Grid<T>, node: usize) -> Option<usize> {
    let [i0, i1] = grid.unflat(node);
    if grid.dim() == 1 {
        return if i0 > 0 { Some(node - 1) } else { None };
    }
    if i1 > 0 {
        Some(grid.flat([i0, i1 - 1]))
    } else if i0 > 0 {
        Some(grid.flat([i0 - 1, 0]))
    } else {
        None
    }
}

fn seam_warnings<T: Real>(grid: &Grid<T>, frames: &[CMat<T>], tol: f64) -> Vec<GaugeSeamWarning> {
    let mut out = Vec::new();
    for i0 in 0..grid.count(0) - 1 {
        for i1 in 0..grid.count(1) - 1 {
            let loop_nodes = [
                grid.flat([i0, i1]),
                grid.flat([i0 + 1, i1]),
                grid.flat([i0 + 1, i1 + 1]),
                grid.flat([i0, i1 + 1]),
            ];
            let l = frames[loop_nodes[0]].ncols();
            let mut hol = CMat::<T>::identity(l, l);
            for k in 0..4 {
                let a = &frames[loop_nodes[k]];
                let b = &frames[loop_nodes[(k + 1) % 4]];
                hol = hol * polar_unitary(&(a.adjoint() * b));
            }
            let defect = to_f64(max_abs(&(hol - CMat::identity(l, l))));
            if defect > tol {
                out.push(GaugeSeamWarning { node: loop_nodes[0], defect });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// geometric fields

fn zero_excluded<T: Real>(v: &mut [CMat<T>], excluded: &[bool]) {
    for (m, e) in v.iter_mut().zip(excluded) {
        if *e {
            m.fill(C::new(T::zero(), T::zero()));
        }
    }
}

/// Berry connection `A_a = i F^† ∂_a F` (Hermitian `ℓ×ℓ` per axis).
///
/// The finite-difference product is anti-Hermitian only up to truncation
/// error; the Hermitian part is returned.
pub fn berry_connection<T: Real>(frame: &FiberField<T, CMat<T>>, d: Derivative) -> FiberField<T, Vec<CMat<T>>> {
    let grid = frame.grid();
    let grad = gradient(grid, frame.samples(), d);
    let i = imag_unit::<T>();
    let l = frame.samples()[0].ncols();
    let samples = (0..grid.len())
        .map(|n| {
            (0..grid.dim())
                .map(|a| {
                    if frame.is_excluded(n) {
                        CMat::zeros(l, l)
                    } else {
                        hermitian_part(&((frame.samples()[n].adjoint() * &grad[a][n]) * i))
                    }
                })
                .collect()
        })
        .collect();
    FiberField {
        grid: grid.clone(),
        kind: FieldKind::VectorOfMatrices(grid.dim(), l),
        samples,
        gauge_id: frame.gauge_id().to_string(),
        excluded: frame.excluded().to_vec(),
    }
}

/// How [`born_huang`] and [`mass_tensor`] are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricForm {
    /// From eigenvector derivatives `∂χ` (gauge dependent intermediate).
    EigenvectorForm,
    /// From projector derivatives `∂P` only (gauge invariant throughout).
    TraceForm,
}

/// Projector field `P = F F^†`.
pub fn projector_field<T: Real>(frame: &FiberField<T, CMat<T>>) -> FiberField<T, CMat<T>> {
    let m = frame.samples()[0].nrows();
    frame.map(FieldKind::Matrix(m, m), |_, f| f * f.adjoint())
}

fn require_single_band<T: Real>(frame: &FiberField<T, CMat<T>>) -> Result<()> {
    if frame.samples()[0].ncols() != 1 {
        return Err(Error::Order(format!("one-band quantity requested for a {}-band frame", frame.samples()[0].ncols())));
    }
    Ok(())
}

/// Born-Huang potential `φ = Σ_a ⟨∂_a χ, (1−P) ∂_a χ⟩` (or `Tr(∂P ∂P (1−P))`).
pub fn born_huang<T: Real>(frame: &FiberField<T, CMat<T>>, form: GeometricForm, d: Derivative) -> Result<FiberField<T, T>> {
    require_single_band(frame)?;
    let grid = frame.grid();
    let m = frame.samples()[0].nrows();
    let id = CMat::<T>::identity(m, m);
    let samples: Vec<T> = match form {
        GeometricForm::EigenvectorForm => {
            let grad = gradient(grid, frame.samples(), d);
            (0..grid.len())
                .map(|n| {
                    let f = &frame.samples()[n];
                    let q = &id - f * f.adjoint();
                    (0..grid.dim()).fold(T::zero(), |acc, a| acc + (grad[a][n].adjoint() * &q * &grad[a][n])[(0, 0)].re)
                })
                .collect()
        }
        GeometricForm::TraceForm => {
            let p = projector_field(frame);
            let grad = gradient(grid, p.samples(), d);
            (0..grid.len())
                .map(|n| {
                    let q = &id - &p.samples()[n];
                    (0..grid.dim()).fold(T::zero(), |acc, a| acc + (&grad[a][n] * &grad[a][n] * &q).trace().re)
                })
                .collect()
        }
    };
    let samples = samples.into_iter().enumerate().map(|(n, v)| if frame.is_excluded(n) { T::zero() } else { v }).collect();
    FiberField::new(grid, FieldKind::Scalar, samples, frame.gauge_id(), frame.excluded().to_vec())
}

/// Reduced resolvent `R = Σ_{i≠j} |χ_i⟩⟨χ_i| / (E_i − E_j)` at one point.
pub fn reduced_resolvent<T: Real>(h: &CMat<T>, band: usize, threshold: T) -> std::result::Result<CMat<T>, T> {
    let (e, v) = eigh(h);
    let m = e.len();
    let mut r = CMat::zeros(m, m);
    for i in 0..m {
        if i == band {
            continue;
        }
        let gap = e[i] - e[band];
        if abs(gap) < threshold {
            return Err(abs(gap));
        }
        let col = v.column(i);
        r += (&col * col.adjoint()) * re(T::one() / gap);
    }
    Ok(r)
}

/// Reduced resolvents of `band` at every node (zero at excluded nodes).
pub fn resolvent_field<T: Real>(
    model: &dyn ElectronicModel<T>,
    grid: &Grid<T>,
    band: usize,
    excluded: &[bool],
    threshold: f64,
) -> Result<Vec<CMat<T>>> {
    let m = model.dim_electronic();
    (0..grid.len())
        .map(|node| {
            if excluded[node] {
                return Ok(CMat::zeros(m, m));
            }
            let h = eval_electronic(model, &grid.point(node))?;
            reduced_resolvent(&h, band, lit(threshold)).map_err(|g| Error::GapViolation { node, gap: to_f64(g), threshold })
        })
        .collect()
}

/// Mass tensor `𝔪_{lk} = ⟨∂_l χ, R ∂_k χ⟩` (Hermitian `d×d` per node).
///
/// The trace form evaluates `Tr(P ∂_l P R ∂_k P)`, which needs no phase
/// convention.
pub fn mass_tensor<T: Real>(
    model: &dyn ElectronicModel<T>,
    frame: &FiberField<T, CMat<T>>,
    band: usize,
    form: GeometricForm,
    d: Derivative,
    gap_threshold: f64,
) -> Result<FiberField<T, CMat<T>>> {
    require_single_band(frame)?;
    let grid = frame.grid();
    let dim = grid.dim();
    let res = resolvent_field(model, grid, band, frame.excluded(), gap_threshold)?;
    let mut samples: Vec<CMat<T>> = match form {
        GeometricForm::EigenvectorForm => {
            let grad = gradient(grid, frame.samples(), d);
            (0..grid.len())
                .map(|n| {
                    CMat::from_fn(dim, dim, |l, k| (grad[l][n].adjoint() * &res[n] * &grad[k][n])[(0, 0)])
                })
                .collect()
        }
        GeometricForm::TraceForm => {
            let p = projector_field(frame);
            let grad = gradient(grid, p.samples(), d);
            (0..grid.len())
                .map(|n| {
                    let pn = &p.samples()[n];
                    CMat::from_fn(dim, dim, |l, k| (pn * &grad[l][n] * &res[n] * &grad[k][n]).trace())
                })
                .collect()
        }
    };
    for s in samples.iter_mut() {
        *s = hermitian_part(s);
    }
    zero_excluded(&mut samples, frame.excluded());
    FiberField::new(grid, FieldKind::Matrix(dim, dim), samples, frame.gauge_id(), frame.excluded().to_vec())
}

/// Curvature `ω_{ij} = −i(∂_i A_j − ∂_j A_i) + A_j A_i − A_i A_j` for each pair
/// `i < j` (one pair in two dimensions, none in one).
pub fn curvature<T: Real>(a: &FiberField<T, Vec<CMat<T>>>, d: Derivative) -> FiberField<T, Vec<CMat<T>>> {
    let grid = a.grid();
    let dim = grid.dim();
    let l = a.samples()[0][0].nrows();
    let comp = |axis: usize| -> Vec<CMat<T>> { a.samples().iter().map(|v| v[axis].clone()).collect() };
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect();
    let i_unit = imag_unit::<T>();
    let mut per_pair: Vec<Vec<CMat<T>>> = Vec::new();
    for &(i, j) in &pairs {
        let di_aj = differentiate(grid, &comp(j), i, d);
        let dj_ai = differentiate(grid, &comp(i), j, d);
        per_pair.push(
            (0..grid.len())
                .map(|n| {
                    let ai = &a.samples()[n][i];
                    let aj = &a.samples()[n][j];
                    (&di_aj[n] - &dj_ai[n]) * (-i_unit) + aj * ai - ai * aj
                })
                .collect(),
        );
    }
    let samples = (0..grid.len())
        .map(|n| per_pair.iter().map(|p| if a.is_excluded(n) { CMat::zeros(l, l) } else { p[n].clone() }).collect())
        .collect();
    FiberField {
        grid: grid.clone(),
        kind: FieldKind::VectorOfMatrices(pairs.len(), l),
        samples,
        gauge_id: a.gauge_id().to_string(),
        excluded: a.excluded().to_vec(),
    }
}

/// Multiband potential `W = F^† H_e F` and connection `A = i F^† ∇F` for a basis
/// `F` of the range of the band projector.
pub fn multiband_matrices<T: Real>(
    model: &dyn ElectronicModel<T>,
    basis: &FiberField<T, CMat<T>>,
    selector: &BandSelector,
    d: Derivative,
) -> Result<(FiberField<T, CMat<T>>, FiberField<T, Vec<CMat<T>>>)> {
    let grid = basis.grid();
    let l = basis.samples()[0].ncols();
    if l != selector.len() {
        return Err(Error::Basis { node: 0, defect: f64::INFINITY });
    }
    let tol = 1e-8;
    let mut w = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let f = &basis.samples()[node];
        let h = eval_electronic(model, &grid.point(node))?;
        if basis.is_excluded(node) {
            w.push(CMat::zeros(l, l));
            continue;
        }
        let ortho = to_f64(orthonormality_defect(f));
        if ortho > tol {
            return Err(Error::Basis { node, defect: ortho });
        }
        let (_, v) = eigh(&h);
        let band = select_columns(&v, selector.indices());
        let leak = to_f64(max_abs(&(f - &band * (band.adjoint() * f))));
        if leak > tol {
            return Err(Error::Basis { node, defect: leak });
        }
        w.push(hermitian_part(&(f.adjoint() * h * f)));
    }
    let wf = FiberField::new(grid, FieldKind::Matrix(l, l), w, basis.gauge_id(), basis.excluded().to_vec())?;
    Ok((wf, berry_connection(basis, d)))
}

/// `W̃ = G^† W G`, `Ã = G^† A G + i G^† ∇G`.
///
/// The inhomogeneous term carries the factor `i` required by `A = i F^†∇F`
/// under `F ↦ F G`.
pub fn gauge_transform<T: Real>(
    w: &FiberField<T, CMat<T>>,
    a: &FiberField<T, Vec<CMat<T>>>,
    g: &GaugeMap<T>,
    d: Derivative,
) -> Result<(FiberField<T, CMat<T>>, FiberField<T, Vec<CMat<T>>>)> {
    let grid = w.grid();
    if g.field().grid() != grid || a.grid() != grid {
        return Err(Error::GridMismatch("gauge map and fields live on different grids".into()));
    }
    let gs = g.field().samples();
    let grad = gradient(grid, gs, d);
    let i = imag_unit::<T>();
    let excluded: Vec<bool> = (0..grid.len()).map(|n| w.is_excluded(n) || g.field().is_excluded(n)).collect();
    let l = gs[0].nrows();
    let wt = (0..grid.len())
        .map(|n| if excluded[n] { CMat::zeros(l, l) } else { gs[n].adjoint() * &w.samples()[n] * &gs[n] })
        .collect();
    let at = (0..grid.len())
        .map(|n| {
            (0..grid.dim())
                .map(|ax| {
                    if excluded[n] {
                        CMat::zeros(l, l)
                    } else {
                        gs[n].adjoint() * &a.samples()[n][ax] * &gs[n] + (gs[n].adjoint() * &grad[ax][n]) * i
                    }
                })
                .collect()
        })
        .collect();
    let id = format!("{}+{}", w.gauge_id(), g.field().gauge_id());
    Ok((
        FiberField::new(grid, FieldKind::Matrix(l, l), wt, id.clone(), excluded.clone())?,
        FiberField { grid: grid.clone(), kind: FieldKind::VectorOfMatrices(grid.dim(), l), samples: at, gauge_id: id, excluded },
    ))
}

/// Per-node truncation estimate `|q_h − q_2h|` for a field computed with
/// derivative `d` and with its coarsened counterpart. For a scheme of order
/// `p` the error of `q_h` is about `|q_h − q_2h| / (2^p − 1)`, so the raw
/// difference is a conservative bound.
pub fn truncation_estimate<T: Real, V: FiberValue<T>>(fine: &FiberField<T, V>, coarse: &FiberField<T, V>) -> Vec<f64> {
    fine.samples()
        .iter()
        .zip(coarse.samples())
        .map(|(a, b)| {
            a.flatten()
                .iter()
                .zip(b.flatten())
                .map(|(x, y)| to_f64((*x - y).norm_sqr().sqrt()))
                .fold(0.0, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_avoided_crossing_1d, ConicalModel, ConstantFrame, Profile};

    fn annulus_grid() -> Grid<f64> {
        Grid::new_2d([-3.0, 3.0], [-3.0, 3.0], [64, 64], true).unwrap()
    }

    #[test]
    fn fd_schemes_differentiate_polynomials_exactly() {
        let g = Grid::<f64>::new_1d([-1.0, 2.0], 32, false).unwrap();
        let f: Vec<CMat<f64>> = (0..32)
            .map(|n| {
                let x = g.point(n)[0];
                CMat::from_element(1, 1, re(x * x * x - 2.0 * x))
            })
            .collect();
        for (d, stride) in [(Derivative::fd4(), 1), (Derivative::fd4(), 2)] {
            let d = Derivative { stride, ..d };
            let df = differentiate(&g, &f, 0, d);
            for n in 0..32 {
                let x = g.point(n)[0];
                assert!((df[n][(0, 0)].re - (3.0 * x * x - 2.0)).abs() < 1e-11, "node {n}");
            }
        }
        let quad: Vec<CMat<f64>> = (0..32).map(|n| CMat::from_element(1, 1, re(g.point(n)[0].powi(2)))).collect();
        let dq = differentiate(&g, &quad, 0, Derivative::fd2());
        for n in 0..32 {
            assert!((dq[n][(0, 0)].re - 2.0 * g.point(n)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_of_periodic_field() {
        let g = Grid::<f64>::new_1d([0.0, 2.0 * std::f64::consts::PI], 32, false).unwrap();
        let f: Vec<CMat<f64>> = (0..32).map(|n| CMat::from_element(1, 1, re((3.0 * g.point(n)[0]).sin()))).collect();
        let df = differentiate(&g, &f, 0, Derivative::spectral());
        for n in 0..32 {
            assert!((df[n][(0, 0)].re - 3.0 * (3.0 * g.point(n)[0]).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_conical_frame_at_reference_angles() {
        let m = ConicalModel::new(1.0).unwrap();
        let g = annulus_grid();
        let ef = eigendecompose_smooth(&m, &g, &BandSelector::single(1), Gauge::Analytic, &FrameOptions::default()).unwrap();
        for n in 0..g.len() {
            if ef.frame.is_excluded(n) {
                continue;
            }
            let x = g.point(n);
            let reference = m.analytic_frame(&x, &[1]).unwrap();
            assert!(max_abs(&(&ef.frame.samples()[n] - reference)) < 1e-12);
        }
        let at = |x: &[f64]| m.analytic_frame(x, &[1]).unwrap();
        let xi = at(&[1.0, 0.0]);
        assert!((xi[(0, 0)] - re(1.0)).norm() < 1e-15 && xi[(1, 0)].norm() < 1e-15);
        let xi = at(&[0.0, 1.0]);
        let w = C::new(0.5f64.sqrt(), 0.5f64.sqrt());
        let h = 0.5f64.sqrt();
        assert!((xi[(0, 0)] - w * h).norm() < 1e-15 && (xi[(1, 0)] - w * h).norm() < 1e-15);
    }

    #[test]
    fn parallel_transport_raises_seam_warning_near_crossing() {
        let m = ConicalModel::new(1.0).unwrap();
        let g = annulus_grid();
        let ef = eigendecompose_smooth(&m, &g, &BandSelector::single(1), Gauge::ParallelTransport, &FrameOptions::default()).unwrap();
        assert!(!ef.warnings.is_empty());
        for w in &ef.warnings {
            let x = g.point(w.node);
            assert!(x[0].hypot(x[1]) < 0.5, "seam far from origin at {x:?}");
        }
    }

    #[test]
    fn avoided_crossing_raw_energies_at_origin() {
        let m = make_avoided_crossing_1d(0.5, Profile::Tanh).unwrap();
        let g = Grid::<f64>::new_1d([-1.0, 1.0], 16, true).unwrap();
        let ef = eigendecompose_smooth(&m, &g, &BandSelector::new(vec![0, 1]).unwrap(), Gauge::Raw, &FrameOptions::default()).unwrap();
        let h = eval_electronic(&m, &[0.0]).unwrap();
        let (e, _) = eigh(&h);
        assert!((e[0] + 0.5).abs() < 1e-15 && (e[1] - 0.5).abs() < 1e-15);
        assert_eq!(ef.energies.samples()[0].len(), 2);
    }

    #[test]
    fn gap_violation_on_unexcluded_crossing() {
        let m = ConicalModel::new(1.0).unwrap();
        // not offset: a node sits exactly on the origin; no exclusion radius
        let g = Grid::<f64>::new_2d([-1.0, 1.0], [-1.0, 1.0], [16, 16], false).unwrap();
        let opts = FrameOptions { r_min: Some(0.0), ..Default::default() };
        let r = eigendecompose_smooth(&m, &g, &BandSelector::single(1), Gauge::Raw, &opts);
        assert!(matches!(r, Err(Error::GapViolation { .. })));
    }

    #[test]
    fn constant_frame_has_no_geometry() {
        let m = ConstantFrame::new(1, vec![-1.0, 1.0], 0.3).unwrap();
        let g = Grid::<f64>::new_1d([-3.0, 3.0], 32, false).unwrap();
        let ef = eigendecompose_smooth(&m, &g, &BandSelector::single(0), Gauge::ParallelTransport, &FrameOptions::default()).unwrap();
        let phi = born_huang(&ef.frame, GeometricForm::TraceForm, Derivative::fd4()).unwrap();
        assert!(phi.samples().iter().all(|v| v.abs() < 1e-14));
        let mt = mass_tensor(&m, &ef.frame, 0, GeometricForm::EigenvectorForm, Derivative::fd4(), 1e-6).unwrap();
        assert!(mt.samples().iter().all(|v| max_abs(v) < 1e-14));
    }

    #[test]
    fn columns_have_one_row_per_node() {
        let g = Grid::<f64>::new_1d([-1.0, 1.0], 16, false).unwrap();
        let f = FiberField::new(&g, FieldKind::Scalar, vec![0.5f64; 16], "raw", vec![false; 16]).unwrap();
        let mut buf = Vec::new();
        f.write_columns(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.lines().next().unwrap().starts_with("node,x0,re0,im0,excluded,gauge_id"));
    }

    #[test]
    fn nonunitary_gauge_rejected() {
        let g = Grid::<f64>::new_1d([-1.0, 1.0], 16, false).unwrap();
        let f = FiberField::new(&g, FieldKind::Matrix(1, 1), vec![CMat::from_element(1, 1, re(1.1)); 16], "bad", vec![false; 16]).unwrap();
        assert!(matches!(GaugeMap::new(f), Err(Error::NonOrthogonal { .. })));
    }
}
