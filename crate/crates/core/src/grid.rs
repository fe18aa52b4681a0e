//! Uniform periodic nuclear grids in one or two dimensions, with cached FFT plans.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{lit, Real, C};

/// Declarative grid description, as found in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Per-axis `[min, max]`; the number of entries is the nuclear dimension.
    pub extents: Vec<[f64; 2]>,
    /// Per-axis node counts (powers of two, at least 16).
    pub nodes: Vec<usize>,
    /// Shift every node by half a cell.
    #[serde(default)]
    pub offset: bool,
}

impl GridSpec {
    pub fn build<T: Real>(&self) -> Result<Grid<T>> {
        if self.extents.len() != self.nodes.len() {
            return Err(Error::Config(format!(
                "grid: {} extents but {} node counts",
                self.extents.len(),
                self.nodes.len()
            )));
        }
        match self.nodes.len() {
            1 => Grid::new_1d(self.extents[0], self.nodes[0], self.offset),
            2 => Grid::new_2d(self.extents[0], self.extents[1], [self.nodes[0], self.nodes[1]], self.offset),
            d => Err(Error::Config(format!("grid: nuclear dimension {d} not in {{1, 2}}"))),
        }
    }

    /// Same extents with every node count doubled.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            extents: self.extents.clone(),
            nodes: self.nodes.iter().map(|n| n * 2).collect(),
            offset: self.offset,
        }
    }
}

struct Plans<T: Real> {
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
}

/// Uniform periodic grid over a box in `R^d`, `d ∈ {1, 2}`.
///
/// Nodes are stored row-major with axis 0 slowest. For `d = 1` the second
/// axis has a single node and is ignored everywhere.
#[derive(Clone)]
pub struct Grid<T: Real> {
    dim: usize,
    lower: [T; 2],
    upper: [T; 2],
    counts: [usize; 2],
    offset: bool,
    plans: Arc<Plans<T>>,
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("lower", &&self.lower[..self.dim])
            .field("upper", &&self.upper[..self.dim])
            .field("counts", &&self.counts[..self.dim])
            .field("offset", &self.offset)
            .finish()
    }
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.lower == other.lower
            && self.upper == other.upper
            && self.counts == other.counts
            && self.offset == other.offset
    }
}

fn check_axis(min: f64, max: f64, n: usize) -> Result<()> {
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Config(format!("grid: empty axis [{min}, {max}]")));
    }
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::Config(format!("grid: node count {n} must be a power of two >= 16")));
    }
    Ok(())
}

impl<T: Real> Grid<T> {
    pub fn new_1d(extent: [f64; 2], nodes: usize, offset: bool) -> Result<Self> {
        check_axis(extent[0], extent[1], nodes)?;
        Ok(Self::assemble(1, [extent, [0.0, 1.0]], [nodes, 1], offset))
    }

    pub fn new_2d(x: [f64; 2], y: [f64; 2], nodes: [usize; 2], offset: bool) -> Result<Self> {
        check_axis(x[0], x[1], nodes[0])?;
        check_axis(y[0], y[1], nodes[1])?;
        Ok(Self::assemble(2, [x, y], nodes, offset))
    }

    fn assemble(dim: usize, ext: [[f64; 2]; 2], counts: [usize; 2], offset: bool) -> Self {
        let mut planner = FftPlanner::<T>::new();
        let forward = (0..dim).map(|a| planner.plan_fft_forward(counts[a])).collect();
        let inverse = (0..dim).map(|a| planner.plan_fft_inverse(counts[a])).collect();
        Grid {
            dim,
            lower: [lit(ext[0][0]), lit(ext[1][0])],
            upper: [lit(ext[0][1]), lit(ext[1][1])],
            counts,
            offset,
            plans: Arc::new(Plans { forward, inverse }),
        }
    }

    pub fn spec(&self) -> GridSpec {
        use crate::num::to_f64;
        GridSpec {
            extents: (0..self.dim).map(|a| [to_f64(self.lower[a]), to_f64(self.upper[a])]).collect(),
            nodes: self.counts[..self.dim].to_vec(),
            offset: self.offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self) -> bool {
        self.offset
    }

    /// Node count along `axis`.
    pub fn count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self, axis: usize) -> T {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> T {
        self.upper[axis]
    }

    /// Period of `axis`.
    pub fn length(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    /// Cell spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> T {
        self.length(axis) / lit::<T>(self.counts[axis] as f64)
    }

    pub fn min_spacing(&self) -> T {
        (0..self.dim).map(|a| self.spacing(a)).fold(self.spacing(0), |a, b| if b < a { b } else { a })
    }

    /// Volume element of one cell.
    pub fn cell_volume(&self) -> T {
        (0..self.dim).map(|a| self.spacing(a)).fold(T::one(), |a, b| a * b)
    }

    /// Coordinate of index `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> T {
        let shift = if self.offset { lit(0.5) } else { T::zero() };
        self.lower[axis] + (lit::<T>(i as f64) + shift) * self.spacing(axis)
    }

    /// Flat node index from per-axis indices.
    pub fn flat(&self, idx: [usize; 2]) -> usize {
        idx[0] * self.counts[1] + idx[1]
    }

    /// Per-axis indices of a flat node index.
    pub fn unflat(&self, node: usize) -> [usize; 2] {
        [node / self.counts[1], node % self.counts[1]]
    }

    /// Cartesian coordinates of a node (length `dim`).
    pub fn point(&self, node: usize) -> Vec<T> {
        let idx = self.unflat(node);
        (0..self.dim).map(|a| self.coordinate(a, idx[a])).collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|n| self.point(n)).collect()
    }

    /// Angular wavenumber of FFT mode `j` along `axis`; the Nyquist mode
    /// carries the negative frequency.
    pub fn wavenumber(&self, axis: usize, j: usize) -> T {
        let n = self.counts[axis] as isize;
        let j = j as isize;
        let signed = if j < n / 2 { j } else { j - n };
        lit::<T>(2.0 * std::f64::consts::PI) * lit::<T>(signed as f64) / self.length(axis)
    }

    /// `|k|^2` of the flat Fourier mode index.
    pub fn wavenumber_sq(&self, mode: usize) -> T {
        let idx = self.unflat(mode);
        (0..self.dim).map(|a| {
            let k = self.wavenumber(a, idx[a]);
            k * k
        })
        .fold(T::zero(), |a, b| a + b)
    }

    /// Largest `|k|` along any axis.
    pub fn max_wavenumber(&self) -> T {
        lit::<T>(std::f64::consts::PI) / self.min_spacing()
    }

    /// In-place forward DFT over all nuclear axes of interleaved data with
    /// `comps` entries per node. Unnormalized.
    pub fn fft_forward(&self, data: &mut [C<T>], comps: usize) {
        self.transform(data, comps, true);
    }

    /// In-place inverse DFT, normalized so that `inverse(forward(u)) = u`.
    pub fn fft_inverse(&self, data: &mut [C<T>], comps: usize) {
        self.transform(data, comps, false);
        let scale = T::one() / lit::<T>(self.len() as f64);
        for z in data.iter_mut() {
            *z = *z * scale;
        }
    }

    fn transform(&self, data: &mut [C<T>], comps: usize, forward: bool) {
        debug_assert_eq!(data.len(), self.len() * comps);
        let plans = if forward { &self.plans.forward } else { &self.plans.inverse };
        let [n0, n1] = self.counts;
        // axis with unit node stride first
        if self.dim == 1 {
            let fft = &plans[0];
            let mut line = vec![C::new(T::zero(), T::zero()); n0];
            let mut scratch = vec![C::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
            for c in 0..comps {
                for i in 0..n0 {
                    line[i] = data[i * comps + c];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n0 {
                    data[i * comps + c] = line[i];
                }
            }
            return;
        }
        for (axis, fft) in plans.iter().enumerate() {
            let n = self.counts[axis];
            let mut line = vec![C::new(T::zero(), T::zero()); n];
            let mut scratch = vec![C::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
            let (outer, stride) = if axis == 0 { (n1, n1) } else { (n0, 1) };
            for o in 0..outer {
                let base = if axis == 0 { o } else { o * n1 };
                for c in 0..comps {
                    for i in 0..n {
                        line[i] = data[(base + i * stride) * comps + c];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..n {
                        data[(base + i * stride) * comps + c] = line[i];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_non_power_of_two_counts() {
        assert!(Grid::<f64>::new_1d([-1.0, 1.0], 8, false).is_err());
        assert!(Grid::<f64>::new_1d([-1.0, 1.0], 48, false).is_err());
        assert!(Grid::<f64>::new_1d([1.0, 1.0], 16, false).is_err());
        assert!(GridSpec { extents: vec![[0.0, 1.0]; 3], nodes: vec![16; 3], offset: false }
            .build::<f64>()
            .is_err());
    }

    #[test]
    fn offset_grid_avoids_origin() {
        let g = Grid::<f64>::new_2d([-3.0, 3.0], [-3.0, 3.0], [16, 16], true).unwrap();
        assert!(g.points().iter().all(|p| p[0].hypot(p[1]) > 0.1));
        let h = Grid::<f64>::new_2d([-3.0, 3.0], [-3.0, 3.0], [16, 16], false).unwrap();
        assert!(h.points().iter().any(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid::<f64>::new_2d([0.0, 1.0], [0.0, 2.0], [16, 32], false).unwrap();
        for n in [0, 1, 31, 32, 511] {
            assert_eq!(g.flat(g.unflat(n)), n);
        }
        assert_eq!(g.point(33), vec![1.0 / 16.0, 2.0 / 32.0]);
    }

    #[test]
    fn fft_round_trip_2d_multi_component() {
        let g = Grid::<f64>::new_2d([0.0, 1.0], [0.0, 1.0], [16, 32], false).unwrap();
        let data: Vec<C<f64>> =
            (0..g.len() * 2).map(|i| C::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut work = data.clone();
        g.fft_forward(&mut work, 2);
        g.fft_inverse(&mut work, 2);
        for (a, b) in work.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
