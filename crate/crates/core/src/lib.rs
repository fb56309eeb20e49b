//! Solvers for mixed-integer programs whose objective and constraints
//! reference the output of a trained feedforward ReLU network.
//!
//! The main entry point is [`dd::dd_solve`], an augmented-Lagrangian dual
//! decomposition that splits the problem on a continuous copy `u` of the
//! integer decision vector `x`. The integer block is handled by the
//! branch-and-bound solver in [`milp`]; the network block by one of the
//! interchangeable routines in [`subsolver`]. [`bigm`] compiles the whole
//! problem into a single MILP and serves as the exact reference, and
//! [`ssg`] is the dual-free gradient baseline.

pub mod benchgen;
pub mod bigm;
pub mod dd;
pub mod error;
pub mod harness;
pub mod milp;
pub mod model;
pub mod nn;
pub mod ssg;
pub mod subsolver;

pub use error::{Error, Result};
pub use model::{
    load_instance, save_instance, validate, Activation, InstanceMeta, Layer, NnModel,
    ProblemInstance, Sense, SolveReport, Violation,
};
