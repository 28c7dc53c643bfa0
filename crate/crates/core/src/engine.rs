//! Gaussian belief propagation on the factor graph of a linear Gaussian model.
//!
//! Messages are univariate Gaussians carried as `(precision, mean)`. One
//! [`sweep`] computes every variable→factor message from the previous
//! factor→variable messages, then every factor→variable message from those,
//! all synchronously. The edge updates inside a sweep are independent and are
//! mapped through [`Execution`], so the parallel path yields the same bits as
//! the serial one.

use std::fmt;
use std::str::FromStr;

use crate::analyzer::bounds_l_u;
use crate::exec::Execution;
use crate::graph::FactorGraph;
use crate::model::LinearGaussianModel;

/// Precision / mean pair of a Gaussian message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub precision: f64,
    pub mean: f64,
}

/// Local update rules shared by the engine and the agent simulator.
///
/// Both call exactly these functions with neighbours in ascending index
/// order, which is what makes the synchronous simulation bitwise equal to
/// [`run`].
pub mod kernel {
    use super::Message;

    /// Outgoing `x_j → f_n`: prior precision plus all incoming factor messages
    /// except the one from `f_n`.
    pub fn variable_message(prior_precision: f64, incoming: impl IntoIterator<Item = Message>) -> Message {
        let mut precision = prior_precision;
        let mut info = 0.0;
        for m in incoming {
            precision += m.precision;
            info += m.precision * m.mean;
        }
        Message {
            precision,
            mean: info / precision,
        }
    }

    /// Outgoing `f_n → x_i` given `A_{n,i}`, `R_n`, `y_n` and the
    /// `(A_{n,j}, x_j → f_n)` pairs of the other neighbours.
    pub fn factor_message(
        coeff: f64,
        noise_var: f64,
        obs: f64,
        others: impl IntoIterator<Item = (f64, Message)>,
    ) -> Message {
        let mut variance = noise_var;
        let mut residual = obs;
        for (a, m) in others {
            variance += a * a / m.precision;
            residual -= a * m.mean;
        }
        Message {
            precision: coeff * coeff / variance,
            mean: residual / coeff,
        }
    }

    /// Belief `(P_i, μ_i)` from the prior and all incoming factor messages.
    pub fn belief(prior_precision: f64, incoming: impl IntoIterator<Item = Message>) -> (f64, f64) {
        let mut precision = prior_precision;
        let mut info = 0.0;
        for m in incoming {
            precision += m.precision;
            info += m.precision * m.mean;
        }
        let variance = 1.0 / precision;
        (variance, variance * info)
    }
}

/// Factor→variable messages at iteration `ℓ`, indexed by `graph.fv_edges()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub precisions: Vec<f64>,
    pub means: Vec<f64>,
    pub iteration: usize,
}

impl MessageState {
    pub fn message(&self, fv: usize) -> Message {
        Message {
            precision: self.precisions[fv],
            mean: self.means[fv],
        }
    }

    pub fn len(&self) -> usize {
        self.precisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precisions.is_empty()
    }
}

/// Variable→factor messages, indexed by `graph.vf_edges()`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMessages {
    pub precisions: Vec<f64>,
    pub means: Vec<f64>,
}

impl VariableMessages {
    pub fn message(&self, vf: usize) -> Message {
        Message {
            precision: self.precisions[vf],
            mean: self.means[vf],
        }
    }
}

/// Initial factor→variable messages.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    Zero,
    /// Precisions at the lower bound `L`, means zero.
    LowerBound,
    /// Precisions at the upper bound `U`, means zero.
    UpperBound,
    Explicit {
        precisions: Vec<f64>,
        means: Vec<f64>,
    },
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::Zero => "zero",
            InitStrategy::LowerBound => "L",
            InitStrategy::UpperBound => "U",
            InitStrategy::Explicit { .. } => "explicit",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" | "0" => Ok(InitStrategy::Zero),
            "L" | "l" | "lower" => Ok(InitStrategy::LowerBound),
            "U" | "u" | "upper" => Ok(InitStrategy::UpperBound),
            other => Err(format!("unknown init strategy {other:?} (expected zero, L or U)")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error("initial precision on edge {edge} is {value}; must be finite and nonnegative")]
    InvalidPrecision { edge: usize, value: f64 },
    #[error("initial mean on edge {edge} is not finite")]
    InvalidMean { edge: usize },
    #[error("explicit init has {got} entries, graph has {expected} factor-to-variable edges")]
    Length { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
}

pub fn init_messages(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    strategy: &InitStrategy,
) -> Result<MessageState, EngineError> {
    let len = graph.num_edges();
    let (precisions, means) = match strategy {
        InitStrategy::Zero => (vec![0.0; len], vec![0.0; len]),
        InitStrategy::LowerBound => (bounds_l_u(graph, model).lower, vec![0.0; len]),
        InitStrategy::UpperBound => (bounds_l_u(graph, model).upper, vec![0.0; len]),
        InitStrategy::Explicit { precisions, means } => {
            for got in [precisions.len(), means.len()] {
                if got != len {
                    return Err(EngineError::Length { expected: len, got });
                }
            }
            if let Some((edge, &value)) = precisions.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
                return Err(EngineError::InvalidPrecision { edge, value });
            }
            if let Some(edge) = means.iter().position(|m| !m.is_finite()) {
                return Err(EngineError::InvalidMean { edge });
            }
            (precisions.clone(), means.clone())
        }
    };
    Ok(MessageState {
        precisions,
        means,
        iteration: 0,
    })
}

/// `x_j → f_n` for the vf edge with index `vf`, from iteration `ℓ−1` messages.
pub fn variable_to_factor(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    state: &MessageState,
    vf: usize,
) -> Message {
    let j = graph.vf_edges()[vf].variable;
    let incoming = graph
        .vf_range(j)
        .filter(|&r| r != vf)
        .map(|r| state.message(graph.vf_reverse(r)));
    kernel::variable_message(model.variables()[j].prior_precision(), incoming)
}

/// All variable→factor messages computed from `state`.
pub fn variable_messages(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    state: &MessageState,
    exec: Execution,
) -> VariableMessages {
    let msgs = exec.map(graph.vf_edges().len(), |vf| variable_to_factor(graph, model, state, vf));
    let (precisions, means) = msgs.into_iter().map(|m| (m.precision, m.mean)).unzip();
    VariableMessages { precisions, means }
}

/// `f_n → x_i` for the fv edge with index `fv`, from iteration-`ℓ`
/// variable→factor messages.
pub fn factor_to_variable(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    vf_msgs: &VariableMessages,
    fv: usize,
) -> Message {
    let n = graph.fv_edges()[fv].factor;
    let factor = &model.factors()[n];
    let range = graph.fv_range(n);
    let start = range.start;
    let coeffs = factor.coeffs();
    let others = range
        .filter(|&q| q != fv)
        .map(|q| (coeffs[q - start].1, vf_msgs.message(graph.fv_reverse(q))));
    kernel::factor_message(coeffs[fv - start].1, factor.noise_var(), factor.obs(), others)
}

/// One synchronous iteration; also returns the intermediate variable→factor
/// messages.
pub fn sweep_full(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    state: &MessageState,
    exec: Execution,
) -> (MessageState, VariableMessages) {
    debug_assert_eq!(state.len(), graph.num_edges());
    let vf_msgs = variable_messages(graph, model, state, exec);
    let msgs = exec.map(graph.num_edges(), |fv| factor_to_variable(graph, model, &vf_msgs, fv));
    let (precisions, means) = msgs.into_iter().map(|m| (m.precision, m.mean)).unzip();
    (
        MessageState {
            precisions,
            means,
            iteration: state.iteration + 1,
        },
        vf_msgs,
    )
}

pub fn sweep(graph: &FactorGraph, model: &LinearGaussianModel, state: &MessageState, exec: Execution) -> MessageState {
    sweep_full(graph, model, state, exec).0
}

/// Per-variable beliefs `(P_i, μ_i)` at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSet {
    pub variances: Vec<f64>,
    pub means: Vec<f64>,
    pub iteration: usize,
}

pub fn compute_beliefs(graph: &FactorGraph, model: &LinearGaussianModel, state: &MessageState) -> BeliefSet {
    let (variances, means) = (0..graph.num_variables())
        .map(|i| {
            let incoming = graph.vf_range(i).map(|r| state.message(graph.vf_reverse(r)));
            kernel::belief(model.variables()[i].prior_precision(), incoming)
        })
        .unzip();
    BeliefSet {
        variances,
        means,
        iteration: state.iteration,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIters,
    Diverged,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max-iters",
            RunStatus::Diverged => "diverged",
        })
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tolerance: DEFAULT_TOLERANCE,
            max_iters: DEFAULT_MAX_ITERS,
            execution: Execution::default(),
        }
    }
}

/// Largest edge-wise change between two consecutive states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Deltas {
    pub precision: f64,
    pub mean: f64,
}

pub fn deltas(prev: &MessageState, next: &MessageState) -> Deltas {
    let max_abs_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Deltas {
        precision: max_abs_diff(&prev.precisions, &next.precisions),
        mean: max_abs_diff(&prev.means, &next.means),
    }
}

/// True when any message parameter is non-finite or a mean exceeds the guard.
pub fn is_diverged(state: &MessageState) -> bool {
    state.means.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_GUARD)
        || state.precisions.iter().any(|p| !p.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub beliefs: BeliefSet,
    pub state: MessageState,
    pub status: RunStatus,
    pub last_deltas: Deltas,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.state.iteration
    }
}

pub fn run(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    strategy: &InitStrategy,
    config: &RunConfig,
) -> Result<RunOutcome, EngineError> {
    run_observed(graph, model, strategy, config, |_, _| {})
}

/// [`run`], calling `observer` after every sweep with the new state and its
/// deltas against the previous one.
pub fn run_observed(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    strategy: &InitStrategy,
    config: &RunConfig,
    mut observer: impl FnMut(&MessageState, &Deltas),
) -> Result<RunOutcome, EngineError> {
    if config.tolerance.is_nan() || config.tolerance <= 0.0 {
        return Err(EngineError::Tolerance(config.tolerance));
    }
    let mut state = init_messages(graph, model, strategy)?;
    let mut status = RunStatus::MaxIters;
    let mut last = Deltas::default();
    for _ in 0..config.max_iters {
        let next = sweep(graph, model, &state, config.execution);
        last = deltas(&state, &next);
        observer(&next, &last);
        state = next;
        if is_diverged(&state) {
            status = RunStatus::Diverged;
            break;
        }
        if last.precision < config.tolerance && last.mean < config.tolerance {
            status = RunStatus::Converged;
            break;
        }
    }
    Ok(RunOutcome {
        beliefs: compute_beliefs(graph, model, &state),
        state,
        status,
        last_deltas: last,
    })
}
