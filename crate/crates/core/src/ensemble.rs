//! Bounded-kinetic-energy test states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kinetic::{gaussian_packet, kinetic_cutoff};
use crate::num::{cplx, lit, to_f64, Real, C};
use crate::state::State;

/// Mass a packet may lose to the kinetic cutoff before it is rejected.
pub const MAX_CUTOFF_LOSS: f64 = 1e-8;

/// Parameters of one Gaussian wavepacket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: Vec<f64>,
    pub width: f64,
    /// Classical momentum `p₀` (the phase is `p₀·x/ε`).
    pub momentum: Vec<f64>,
    /// Constant spinor as `(re, im)` pairs; normalized on use.
    pub spinor: Vec<[f64; 2]>,
}

impl PacketSpec {
    pub fn scalar(center: Vec<f64>, width: f64, momentum: Vec<f64>) -> Self {
        PacketSpec { center, width, momentum, spinor: vec![[1.0, 0.0]] }
    }

    /// Same packet with a one-component spinor.
    pub fn as_scalar(&self) -> Self {
        PacketSpec { spinor: vec![[1.0, 0.0]], ..self.clone() }
    }

    pub fn with_spinor(&self, spinor: Vec<[f64; 2]>) -> Self {
        PacketSpec { spinor, ..self.clone() }
    }

    /// Gaussian packet projected onto `½ε²|k|² ≤ bound` and renormalized.
    ///
    /// Fails with an ensemble error when the cutoff removes more than
    /// [`MAX_CUTOFF_LOSS`] of the mass, i.e. when the packet itself violates
    /// the kinetic bound.
    pub fn prepare<T: Real>(&self, grid: &Grid<T>, eps: T, bound: T, index: usize) -> Result<State<T>> {
        let center: Vec<T> = self.center.iter().map(|v| lit(*v)).collect();
        let momentum: Vec<T> = self.momentum.iter().map(|v| lit(*v)).collect();
        let spinor: Vec<C<T>> = self.spinor.iter().map(|z| cplx(z[0], z[1])).collect();
        let psi = gaussian_packet(grid, &center, lit(self.width), &momentum, &spinor, eps)?;
        let mut cut = kinetic_cutoff(bound, eps, &psi);
        let loss = 1.0 - to_f64(cut.norm_sqr());
        if loss > MAX_CUTOFF_LOSS {
            return Err(Error::Ensemble { index, detail: format!("kinetic cutoff removes {loss:.3e} of the mass") });
        }
        cut.normalize();
        Ok(cut)
    }
}

/// Prepares every packet of an ensemble at one `ε`.
pub fn prepare_all<T: Real>(specs: &[PacketSpec], grid: &Grid<T>, eps: T, bound: T) -> Result<Vec<State<T>>> {
    specs.iter().enumerate().map(|(i, s)| s.prepare(grid, eps, bound, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_packet_violates_bound() {
        let g = Grid::<f64>::new_1d([-10.0, 10.0], 256, false).unwrap();
        let spec = PacketSpec::scalar(vec![0.0], 0.5, vec![4.0]);
        assert!(matches!(spec.prepare(&g, 0.1, 2.0, 3), Err(Error::Ensemble { index: 3, .. })));
        let ok = spec.prepare(&g, 0.1, 50.0, 0).unwrap();
        assert!((ok.norm() - 1.0).abs() < 1e-12);
    }
}
