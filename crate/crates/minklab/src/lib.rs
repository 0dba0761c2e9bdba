//! minklab: a geometry-of-numbers library and experiment toolkit.
//!
//! Exact small-dimension lattice computations (successive minima, reduced
//! bases, duals), samplers of the Haar measure on the space of unimodular
//! lattices, and seeded Monte-Carlo experiments probing the distribution of
//! the minima, the primitive-tuple mean-value identity, and logarithm laws
//! of diagonal flows.

pub mod distribution;
pub mod error;
pub mod flows;
pub mod haar;
pub mod intmat;
pub mod lattice;
pub mod mat;
pub mod minima;
pub mod parallel;
pub mod reduction;
pub mod siegel;
pub mod special;

pub use error::{Error, Result};
pub use lattice::{GramMatrix, LatticeBasis, LatticeVector};
pub use mat::Mat;
pub use minima::MinimaProfile;
