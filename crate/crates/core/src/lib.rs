//! Distributed proximal L-BFGS for regularized empirical risk minimization.
//!
//! The crate solves problems of the form `min_x f(x) + Ψ(x)` where `Ψ` is
//! block-separable over a partition of the variables across `K` workers.
//! Workers are simulated in-process by [`cluster::ClusterSim`], and every
//! allreduce is metered in a [`cluster::CommLedger`] so communication
//! complexity can be measured and asserted on.
//!
//! Module map:
//!
//! * [`linalg`]: sparse column storage and small symmetric solves.
//! * [`cluster`]: the simulated workers, partitions and the ledger.
//! * [`datasets`]: LIBSVM parsing, instance splits and synthetic data.
//! * [`problems`]: ℓ1-logistic regression (primal) and the squared-hinge
//!   SVM dual, plus a dense quadratic used for testing.
//! * [`lbfgs`]: the compact limited-memory Hessian approximation.
//! * [`subsolver`]: distributed SpaRSA and block-diagonal coordinate descent.
//! * [`solver`]: the outer loop (line search or trust region), the
//!   baselines and the Catalyst wrapper.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cluster;
pub mod datasets;
mod error;
pub mod lbfgs;
pub mod linalg;
pub mod problems;
pub mod solver;
pub mod subsolver;

pub use error::{Error, Result};
