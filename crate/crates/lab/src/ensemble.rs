//! Seeded Gaussian ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use boa_core::ensemble::PacketSpec;

use crate::config::EnsembleSpec;

/// Draws `spec.n` packets. With `components > 1` each packet carries a
/// random unit spinor; the draw order is fixed, so the result depends only
/// on the spec.
pub fn generate(spec: &EnsembleSpec, components: usize) -> Vec<PacketSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.random_range(r[0]..r[1]) };
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let center: Vec<f64> = spec.center.iter().map(|r| draw(*r)).collect();
        let width = draw(spec.width);
        let momentum: Vec<f64> = spec.momentum.iter().map(|r| draw(*r)).collect();
        let spinor = if components == 1 {
            vec![[1.0, 0.0]]
        } else {
            let raw: Vec<[f64; 2]> = (0..components).map(|_| [draw([-1.0, 1.0]), draw([-1.0, 1.0])]).collect();
            let norm = raw.iter().map(|z| z[0] * z[0] + z[1] * z[1]).sum::<f64>().sqrt().max(1e-12);
            raw.iter().map(|z| [z[0] / norm, z[1] / norm]).collect()
        };
        out.push(PacketSpec { center, width, momentum, spinor });
    }
    out
}
