//! Sparse-Group Lasso regression with GAP safe screening.
//!
//! The solver minimizes `½‖y − Xβ‖² + λ(τ‖β‖₁ + (1−τ)Σ_g w_g‖β_g‖)` by
//! block-coordinate proximal gradient, discarding groups and features that a
//! safe sphere around the dual optimum proves to be zero.
//!
//! ```
//! use sgl_core::{generate_synthetic, PenaltyParams, SyntheticConfig, SolverConfig, solve, lambda_max};
//!
//! let cfg = SyntheticConfig { n: 30, p: 60, group_size: 6, gamma1: 2, gamma2: 2, ..Default::default() };
//! let (problem, partition, _) = generate_synthetic(&cfg).unwrap();
//! let penalty = PenaltyParams::for_partition(0.2, &partition).unwrap();
//! let lambda = 0.3 * lambda_max(&problem, &penalty, &partition);
//! let zeros = vec![0.0; problem.n_features()];
//! let res = solve(&problem, &penalty, &partition, lambda, &zeros, &SolverConfig::default()).unwrap();
//! assert!(res.converged && res.final_gap.gap <= 1e-8);
//! ```

// parameter checks are written `!(x >= 0.0)` so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod penalty;
pub mod problem;
pub mod screening;
pub mod solver;

pub use data::{
    elastic_net_augment, generate_synthetic, load_problem, read_groups, read_matrix_binary, read_matrix_csv,
    read_vector_csv, write_problem, SyntheticConfig,
};
pub use error::{Error, Result};
pub use groups::GroupPartition;
pub use linalg::DesignMatrix;
pub use penalty::{
    epsilon_dual_norm, epsilon_norm, lambda_solver, sgl_dual_norm, sgl_norm, soft_threshold, PenaltyParams,
};
pub use problem::Problem;
pub use screening::{lambda_max, ActiveSet, SafeSphere, SphereKind};
pub use solver::{solve, solve_path, solve_path_with, PathConfig, PathResult, Rule, SolveResult, SolverConfig};
