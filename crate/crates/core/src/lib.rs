//! Smooth functions invariant under crystallographic groups: quotient metrics, orbit
//! graphs, invariant Fourier bases, orbifold embeddings and invariant kernel machines.

pub mod embed;
pub mod error;
pub mod geometry;
pub mod group;
pub mod ml;
pub mod polytope;
pub mod orbitgraph;
pub mod quotient;
pub mod registry;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use group::{CrystalGroup, Isometry, LocalGroup};
pub use polytope::ConvexPolytope;
pub use quotient::QuotientContext;
