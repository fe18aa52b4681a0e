//! Matrix-free operators on grid states built from symbolic products.
//!
//! An [`OperatorStencil`] is a sum of terms; each term is an ordered product
//! of factors written left to right as in the formula and applied right to
//! left. Factors are nodewise fiber matrices, spectral momentum components,
//! or scalars, so `p·B + B*·p` is literally two terms per axis.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kinetic::fourier_multiply;
use crate::num::{lit, re, CMat, Real, C};
use crate::state::State;

/// One factor of a product.
#[derive(Clone, Debug)]
pub enum Factor<T: Real> {
    /// Per-node matrix (`out × in`); applied as `ψ(x) ↦ M(x)ψ(x)`.
    Fiber(Arc<Vec<CMat<T>>>),
    /// `p_a = −iε∂_a`, spectrally.
    Momentum(usize),
    /// `p_a p_b` in a single Fourier pass.
    MomentumPair(usize, usize),
    /// `½|p|²`.
    Kinetic,
    Scale(C<T>),
}

impl<T: Real> Factor<T> {
    fn adjoint(&self) -> Self {
        match self {
            Factor::Fiber(m) => Factor::Fiber(Arc::new(m.iter().map(|x| x.adjoint()).collect())),
            Factor::Scale(c) => Factor::Scale(c.conj()),
            other => other.clone(),
        }
    }

    fn dims(&self) -> Option<(usize, usize)> {
        match self {
            Factor::Fiber(m) => Some((m[0].nrows(), m[0].ncols())),
            _ => None,
        }
    }

    fn apply(&self, eps: T, psi: State<T>) -> State<T> {
        let grid = psi.grid().clone();
        match self {
            Factor::Scale(c) => {
                let mut s = psi;
                s.scale(*c);
                s
            }
            Factor::Momentum(a) => fourier_multiply(&psi, |mode| re(eps * grid.wavenumber(*a, grid.unflat(mode)[*a]))),
            Factor::MomentumPair(a, b) => fourier_multiply(&psi, |mode| {
                let idx = grid.unflat(mode);
                re(eps * eps * grid.wavenumber(*a, idx[*a]) * grid.wavenumber(*b, idx[*b]))
            }),
            Factor::Kinetic => {
                let h = lit::<T>(0.5) * eps * eps;
                fourier_multiply(&psi, |mode| re(h * grid.wavenumber_sq(mode)))
            }
            Factor::Fiber(mats) => {
                let rows = mats[0].nrows();
                let cols = mats[0].ncols();
                let mut out = Vec::with_capacity(grid.len() * rows);
                for (node, m) in mats.iter().enumerate() {
                    let v = psi.spinor(node);
                    for i in 0..rows {
                        let mut acc = C::new(T::zero(), T::zero());
                        for j in 0..cols {
                            acc += m[(i, j)] * v[j];
                        }
                        out.push(acc);
                    }
                }
                State::from_values(&grid, rows, psi.eps(), out).expect("fiber shape")
            }
        }
    }
}

/// Ordered product of factors.
#[derive(Clone, Debug)]
pub struct Term<T: Real> {
    pub factors: Vec<Factor<T>>,
}

/// Sum of products acting on states with `in_dim` components, producing
/// `out_dim` components.
#[derive(Clone, Debug)]
pub struct OperatorStencil<T: Real> {
    grid: Grid<T>,
    eps: T,
    in_dim: usize,
    out_dim: usize,
    terms: Vec<Term<T>>,
    description: String,
}

impl<T: Real> OperatorStencil<T> {
    /// The zero operator `C^in → C^out`.
    pub fn zero(grid: &Grid<T>, eps: T, in_dim: usize, out_dim: usize) -> Self {
        OperatorStencil { grid: grid.clone(), eps, in_dim, out_dim, terms: Vec::new(), description: "0".into() }
    }

    pub fn identity(grid: &Grid<T>, eps: T, dim: usize) -> Self {
        Self::single(grid, eps, dim, dim, vec![Factor::Scale(re(T::one()))], "1")
    }

    /// Nodewise multiplication by `mats` (one matrix per node).
    pub fn fiber(grid: &Grid<T>, eps: T, mats: Vec<CMat<T>>, description: &str) -> Result<Self> {
        if mats.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} fiber matrices for {} nodes", mats.len(), grid.len())));
        }
        let (r, c) = (mats[0].nrows(), mats[0].ncols());
        Ok(Self::single(grid, eps, c, r, vec![Factor::Fiber(Arc::new(mats))], description))
    }

    /// `½|p|²` on `dim`-component states.
    pub fn kinetic(grid: &Grid<T>, eps: T, dim: usize) -> Self {
        Self::single(grid, eps, dim, dim, vec![Factor::Kinetic], "p^2/2")
    }

    /// A single product term; the caller guarantees consistent shapes.
    pub fn single(grid: &Grid<T>, eps: T, in_dim: usize, out_dim: usize, factors: Vec<Factor<T>>, description: &str) -> Self {
        OperatorStencil { grid: grid.clone(), eps, in_dim, out_dim, terms: vec![Term { factors }], description: description.into() }
    }

    /// Builds a product term, inferring dimensions from the fiber factors.
    pub fn product(grid: &Grid<T>, eps: T, dim: usize, factors: Vec<Factor<T>>, description: &str) -> Result<Self> {
        let mut cur = dim;
        for f in factors.iter().rev() {
            if let Some((r, c)) = f.dims() {
                if c != cur {
                    return Err(Error::GridMismatch(format!("factor expects {c} components, got {cur}")));
                }
                cur = r;
            }
        }
        Ok(Self::single(grid, eps, dim, cur, factors, description))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.in_dim != other.in_dim || self.out_dim != other.out_dim {
            return Err(Error::GridMismatch(format!(
                "cannot add {}→{} and {}→{} operators",
                self.in_dim, self.out_dim, other.in_dim, other.out_dim
            )));
        }
        Ok(())
    }

    /// `self + other`.
    pub fn plus(mut self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        self.terms.extend(other.terms.iter().cloned());
        self.description = format!("{} + {}", self.description, other.description);
        Ok(self)
    }

    /// `c · self`.
    pub fn scaled(mut self, c: C<T>) -> Self {
        for t in &mut self.terms {
            t.factors.insert(0, Factor::Scale(c));
        }
        self.description = format!("({}){}", c, self.description);
        self
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.in_dim != other.out_dim {
            return Err(Error::GridMismatch(format!("cannot compose {}→{} after {}→{}", self.in_dim, self.out_dim, other.in_dim, other.out_dim)));
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut f = a.factors.clone();
                f.extend(b.factors.iter().cloned());
                terms.push(Term { factors: f });
            }
        }
        Ok(OperatorStencil {
            grid: self.grid.clone(),
            eps: self.eps,
            in_dim: other.in_dim,
            out_dim: self.out_dim,
            terms,
            description: format!("({})({})", self.description, other.description),
        })
    }

    /// Formal adjoint: reversed factor order, each factor daggered.
    pub fn adjoint(&self) -> Self {
        OperatorStencil {
            grid: self.grid.clone(),
            eps: self.eps,
            in_dim: self.out_dim,
            out_dim: self.in_dim,
            terms: self.terms.iter().map(|t| Term { factors: t.factors.iter().rev().map(|f| f.adjoint()).collect() }).collect(),
            description: format!("({})*", self.description),
        }
    }

    /// Applies the operator; fails on grid or component mismatch.
    pub fn apply(&self, psi: &State<T>) -> Result<State<T>> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch("state and operator grids differ".into()));
        }
        if psi.components() != self.in_dim {
            return Err(Error::GridMismatch(format!("operator expects {} components, state has {}", self.in_dim, psi.components())));
        }
        let mut out = State::zeros(&self.grid, self.out_dim, psi.eps());
        for t in &self.terms {
            let mut cur = psi.clone();
            for f in t.factors.iter().rev() {
                cur = f.apply(self.eps, cur);
            }
            out.axpy(re(T::one()), &cur)?;
        }
        Ok(out)
    }
}
