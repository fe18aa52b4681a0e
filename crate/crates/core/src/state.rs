//! Wavefunctions on `(nuclear grid) ⊗ C^m`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::num::{norm_sqr, Real, C};

/// Complex wavefunction sampled on a grid with `components` entries per node.
///
/// Values are stored node-major with the component index fastest. The same
/// type serves for full molecular states (`components = m`) and nucleonic
/// states (`components = ℓ`).
#[derive(Clone, Debug)]
pub struct State<T: Real> {
    grid: Grid<T>,
    components: usize,
    eps: T,
    values: Vec<C<T>>,
}

/// Full molecular state, one electronic spinor per nuclear node.
pub type MolecularState<T> = State<T>;
/// Effective nuclear wavefunction with `ℓ` band components.
pub type NucleonicState<T> = State<T>;

impl<T: Real> State<T> {
    pub fn zeros(grid: &Grid<T>, components: usize, eps: T) -> Self {
        State { grid: grid.clone(), components, eps, values: vec![C::new(T::zero(), T::zero()); grid.len() * components] }
    }

    pub fn from_values(grid: &Grid<T>, components: usize, eps: T, values: Vec<C<T>>) -> Result<Self> {
        if values.len() != grid.len() * components {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes x {} components",
                values.len(),
                grid.len(),
                components
            )));
        }
        Ok(State { grid: grid.clone(), components, eps, values })
    }

    /// Builds a state node by node from `f(x) -> spinor`.
    pub fn from_fn(grid: &Grid<T>, components: usize, eps: T, mut f: impl FnMut(&[T]) -> Vec<C<T>>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * components);
        for node in 0..grid.len() {
            let v = f(&grid.point(node));
            assert_eq!(v.len(), components, "spinor length");
            values.extend(v);
        }
        State { grid: grid.clone(), components, eps, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn with_eps(mut self, eps: T) -> Self {
        self.eps = eps;
        self
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C<T>> {
        self.values
    }

    /// Spinor at `node`.
    pub fn spinor(&self, node: usize) -> &[C<T>] {
        &self.values[node * self.components..(node + 1) * self.components]
    }

    pub fn spinor_mut(&mut self, node: usize) -> &mut [C<T>] {
        let m = self.components;
        &mut self.values[node * m..(node + 1) * m]
    }

    /// Same grid and component count.
    pub fn check_compatible(&self, other: &State<T>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("states live on different grids".into()));
        }
        if self.components != other.components {
            return Err(Error::GridMismatch(format!(
                "{} vs {} components",
                self.components, other.components
            )));
        }
        Ok(())
    }

    /// `⟨self, other⟩ = Σ conj(self)·other · cell volume`.
    pub fn inner(&self, other: &State<T>) -> Result<C<T>> {
        self.check_compatible(other)?;
        let s = self
            .values
            .iter()
            .zip(&other.values)
            .fold(C::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
        Ok(s * self.grid.cell_volume())
    }

    pub fn norm_sqr(&self) -> T {
        self.values.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b) * self.grid.cell_volume()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm; a zero state is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > T::zero() {
            self.scale(C::new(T::one() / n, T::zero()));
        }
    }

    pub fn scale(&mut self, a: C<T>) {
        for z in &mut self.values {
            *z = *z * a;
        }
    }

    pub fn scaled(&self, a: C<T>) -> Self {
        let mut s = self.clone();
        s.scale(a);
        s
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: C<T>, other: &State<T>) -> Result<()> {
        self.check_compatible(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x = *x + a * y;
        }
        Ok(())
    }

    pub fn add(&self, other: &State<T>) -> Result<Self> {
        let mut s = self.clone();
        s.axpy(C::new(T::one(), T::zero()), other)?;
        Ok(s)
    }

    pub fn sub(&self, other: &State<T>) -> Result<Self> {
        let mut s = self.clone();
        s.axpy(C::new(-T::one(), T::zero()), other)?;
        Ok(s)
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &State<T>) -> Result<T> {
        Ok(self.sub(other)?.norm())
    }

    /// Per-node density `Σ_a |Ψ_a(x)|²`.
    pub fn fiber_density(&self) -> Vec<T> {
        self.values
            .chunks(self.components)
            .map(|s| s.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b))
            .collect()
    }

    /// `∫ ρ(x) dx` restricted to nodes where `mask` is set.
    pub fn mass_where(&self, mask: &[bool]) -> T {
        self.fiber_density()
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(r, _)| *r)
            .fold(T::zero(), |a, b| a + b)
            * self.grid.cell_volume()
    }

    /// Expectation of a scalar multiplication operator.
    pub fn expectation_of(&self, f: impl Fn(&[T]) -> T) -> T {
        let rho = self.fiber_density();
        (0..self.grid.len())
            .map(|n| rho[n] * f(&self.grid.point(n)))
            .fold(T::zero(), |a, b| a + b)
            * self.grid.cell_volume()
    }
}

/// Integral of a per-node scalar field.
pub fn integrate<T: Real>(grid: &Grid<T>, field: &[T]) -> T {
    field.iter().fold(T::zero(), |a, b| a + *b) * grid.cell_volume()
}
