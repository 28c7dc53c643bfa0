//! Gaussian belief propagation for distributed linear Gaussian models.
//!
//! Agents hold scalar unknowns `x_i ~ N(0, W_i)` and produce local linear
//! observations `y_n = Σ_i A_{n,i} x_i + z_n`. The crate builds the
//! corresponding factor graph, runs GBP on it, certifies convergence of the
//! message recursion, and provides a dense oracle plus an agent-level
//! network simulator.
//!
//! ```
//! use gbp_core::{analyzer, engine, generate, graph, oracle};
//!
//! let model = generate::four_variable_example([1.0, 2.0, 3.0]);
//! let graph = graph::build_factor_graph(&model);
//! let cert = analyzer::certify(&graph, &model, 1e-12).unwrap();
//! assert!(cert.verdict.converges());
//!
//! let out = engine::run(&graph, &model, &engine::InitStrategy::Zero, &Default::default()).unwrap();
//! let exact = oracle::dense_posterior(&model).unwrap();
//! assert!((out.beliefs.means[0] - exact.mean[0]).abs() < 1e-8);
//! ```

pub mod analyzer;
pub mod engine;
pub mod exec;
pub mod generate;
pub mod gmrf;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod simulator;
pub mod topology;

pub use analyzer::{certify, ConvergenceCertificate, Verdict};
pub use engine::{run, BeliefSet, InitStrategy, MessageState, RunConfig, RunStatus};
pub use exec::Execution;
pub use graph::{build_factor_graph, FactorGraph};
pub use model::{validate_model, LinearGaussianModel, ModelError, ModelSpec};
