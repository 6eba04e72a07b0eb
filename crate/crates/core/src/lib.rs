//! Annealed entropies of invariant colorings of regular and unimodular
//! Galton-Watson trees, Markov extensions, typicality certificates, and
//! micro-state counting on random regular graphs.

#![forbid(unsafe_code)]

pub mod alphabet;
pub mod canon;
pub mod certify;
pub mod energy;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod law;
pub mod markov;
pub mod scalar;
pub mod shape;
pub mod table;
pub mod ugw;

pub use alphabet::ColorAlphabet;
pub use canon::{canonicalize, tv_distance, CanonicalBallClass, ClassDistribution, RootedColoredGraph};
pub use entropy::{
    conditional_entropy, exchangeable_entropy_identity, shannon, sigma_e, sigma_r, sigma_unlabeled, EntropyReport,
    ExchangeableLaw, Formula, Joint2,
};
pub use error::{Error, Result};
pub use law::{couple, diagonal_coupling, independent_coupling, CouplingLaw, LocalLaw, Violation, ViolationKind};
pub use scalar::Real;
pub use shape::{BallShape, Coder, ShapeKind};
pub use table::Table;

/// Double-precision law, the default used by the command line.
pub type LocalLaw64 = LocalLaw<f64>;
/// Single-precision law.
pub type LocalLaw32 = LocalLaw<f32>;
