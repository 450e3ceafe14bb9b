//! Observation processes: forward noising and generative samplers.
//!
//! Every sampler takes its own random stream, so chains driven through
//! [`crate::rng::run_chains`] are independent and reproducible.

pub mod combine;
pub mod discrete;
pub mod gaussian;
pub mod mixture;
pub mod percolation;

use serde::Serialize;

pub use combine::{combine_processes, combined_posterior_mean, simulate_combined, CombinedObservation, ObservationProcess};
pub use discrete::{
    binary_flip_rate, forward_binary_noise, forward_qary_noise, qary_jump_rate, simulate_binary_symmetric, simulate_erasure,
    simulate_poisson_observation, simulate_qary_symmetric, BinaryChainResult, EnumeratedLaw,
    NoisePath, PoissonChainResult, QaryChainResult, RevealOrder, StateSnapshot, ThinningOptions,
};
pub use gaussian::{
    channel_average_operator, forward_observation_path, simulate_anisotropic, simulate_isotropic,
    simulate_isotropic_from, simulate_linear_observation, simulate_reverse_ou, QSchedule,
};
pub use mixture::{estimate_split, simulate_halfspace_mixture, Split};
pub use percolation::{simulate_information_percolation, EdgeSchedule, PercolationResult};

/// State of one chain at a grid node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub observation: Vec<f64>,
    /// Denoised estimate at this node.
    pub sample: Vec<f64>,
}

/// Output of a continuous-state chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainResult {
    /// Final observation `Y_T`.
    pub observation: Vec<f64>,
    /// Final sample `m(Y_T; T)`.
    pub sample: Vec<f64>,
    /// Pseudoinverse decode `A^+ Y_T / T`, linear observation only.
    pub decode: Option<Vec<f64>>,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
}
