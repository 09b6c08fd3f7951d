//! Kernel-based random graphs on the torus and the spectra of their
//! adjacency matrices in the dense regime.

pub mod acceptance;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod law;
pub mod model;
pub mod nc_moments;
pub mod oracle;
pub mod rng;
pub mod spectra;
pub mod stieltjes;

pub use error::{Error, Result};
pub use law::{truncated_pareto_moment, DiscreteLaw, KernelOperator, LawVariant, WeightLaw};
pub use model::*;
pub use rng::{trial_seeds, Seeds};

/// Float formatted with 17 significant digits, so it parses back bit-exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
