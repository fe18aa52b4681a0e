//! Adiabatic geometry and effective Born-Oppenheimer dynamics for
//! matrix-valued electronic Hamiltonians on one- and two-dimensional nuclear grids.

pub mod effective;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod kinetic;
pub mod linalg;
pub mod model;
pub mod num;
pub mod propagate;
pub mod state;
pub mod stencil;
pub mod superadiabatic;

pub use error::{Error, Result};
pub use num::{Real, C, CMat};

/// Double-precision aliases used by the lab and the tests.
pub mod f64 {
    pub type Grid = crate::grid::Grid<f64>;
    pub type State = crate::state::State<f64>;
    pub type OperatorStencil = crate::stencil::OperatorStencil<f64>;
    pub type EffectiveHamiltonian = crate::effective::EffectiveHamiltonian<f64>;
    pub type PropagationResult = crate::propagate::PropagationResult<f64>;
    pub type Eigenframe = crate::geometry::Eigenframe<f64>;
    pub type ConicalModel = crate::model::ConicalModel<f64>;
}

/// Single-precision aliases for quick scans.
pub mod f32 {
    pub type Grid = crate::grid::Grid<f32>;
    pub type State = crate::state::State<f32>;
    pub type OperatorStencil = crate::stencil::OperatorStencil<f32>;
}
