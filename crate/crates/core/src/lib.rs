//! Quantum Koopman evolution engine.
//!
//! Observables of a dynamical system are split into modulus and phase,
//! grouped into `h` subsystems of power-of-two size, and advanced by
//! block-diagonal unitary operators `exp(i H_j t)` generated by diagonal
//! Hamiltonians `H_j = -1/2 sum_k alpha_jk Z_k`. Each block is a single
//! layer of `R_z` gates, so a `k`-step prediction costs the same circuit as
//! a one-step one.
//!
//! Modules:
//! - [`bench`]: gate-count and timing scaling table
//! - [`layout`]: subsystem hierarchy and modulus-phase observables
//! - [`unitary`]: Hamiltonians, circuits, phase-encoded states, dense oracle
//! - [`fit`]: least-squares recovery of `alpha_jk` from phase trajectories
//! - [`model`]: fitted block-diagonal models and the `.qkham` format
//! - [`encoders`]: analytic observable maps and latent-trajectory loading
//! - [`systems`]: torus rotation, advection and Gray-Scott generators
//! - [`dataset`]: the `QKTRAJ` binary trajectory format and CSV import
//! - [`metrics`]: losses, relative error, spectra, PDFs, structure functions
//! - [`report`]: CSV, summary and gnuplot writers

pub mod bench;
pub mod dataset;
pub mod encoders;
pub mod error;
pub mod fit;
pub mod layout;
pub mod metrics;
pub mod model;
pub mod report;
mod spectral;
pub mod systems;
pub mod unitary;

pub use dataset::{read_trajectory, write_trajectory, PayloadKind, TrajectoryDataset};
pub use encoders::{
    encode_trajectory, fit_latent, FourierEncoder, IdentityPhaseEncoder, LatentTrajectory, ObservableEncoder,
};
pub use error::{Error, Result};
pub use fit::{FitResult, PhaseTrajectory, SystemFit};
pub use layout::{assemble_observable, ObservableState, SubsystemLayout};
pub use metrics::{predict_state, relative_l2, ErrorMode};
pub use model::KoopmanModel;
pub use spectral::wavenumber;
pub use unitary::{
    basis_parity, block_evolve, dense_operator, evolve_phase, multi_step_operator, wrap_phase,
    CircuitDescription, DiagonalHamiltonian, PhaseEncodedState, RzGate,
};
