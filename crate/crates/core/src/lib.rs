//! Integration-enhanced (IE-RNN) and zeroing (Z-RNN) neural dynamics for
//! time-varying equality-constrained QPs, with redundant-manipulator
//! tracking schemes built on top.

pub mod activation;
pub mod error;
pub mod expr;
pub mod harness;
pub mod integrate;
pub mod noise;
pub mod paths;
pub mod qp;
pub mod robot;
pub mod schemes;
pub mod solver;

pub use activation::{power_sigmoid, ActivationKind, ActivationSpec};
pub use error::{Error, Result};
pub use integrate::Integrator;
pub use noise::NoiseModel;
pub use qp::{
    assemble_augmented, kkt_residual, solve_kkt, theoretical_solution, AugmentedSystem, FnQp, KktSample, QpSample,
    SolutionVector, TimeVaryingQp, TimeVaryingSystem,
};
pub use solver::{
    ie_rnn_derivative, solve_trajectory, z_rnn_derivative, NeuralConfig, NeuralState, TrajectoryAbort,
    TrajectorySample, Variant,
};
