//! Small polaron chain with nondiagonal, Grassmann-valued open boundaries.
//!
//! Builds the graded transfer matrix over a nine-dimensional Grassmann
//! algebra, diagonalizes it exactly for short chains, and checks the fusion
//! hierarchy, the TQ relations and Bethe equations, the closed-form `M = 0`
//! eigenstate, and the Jordan-Wigner map to XXZ.

pub mod bethe;
pub mod error;
pub mod fusion;
pub mod grassmann;
pub mod model;
pub mod spinmap;
pub mod states;
pub mod superlinalg;
pub mod trig;

pub use bethe::BetheRoots;
pub use error::{Error, Result};
pub use grassmann::{g_component, grassmann_g, AlgebraElement, Amplitudes, Monomial, Parity, C64};
pub use model::ModelParams;
pub use superlinalg::{CMat, EigOptions, GradedEigenSystem, GradedEigenpair, GradedSpace, Layout, SuperMatrix};
