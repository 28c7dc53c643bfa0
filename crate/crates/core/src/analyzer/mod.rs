//! Convergence certificates for linear-Gaussian GBP.
//!
//! The precision recursion is a self-map of the positive orthant that does
//! not involve the observations. It is monotone, sub-homogeneous and, after
//! one step, confined to the box `[L, U]`, so it has a unique fixed point
//! `J*` reached from any nonnegative start. With precisions frozen at `J*`
//! the variable→factor means follow the affine map `v ← b − Q v`, which
//! converges iff `ρ(Q) < 1`. Factor graphs whose cycle space has dimension at
//! most one always satisfy that.

mod mean_system;
mod part_metric;
mod rate;
mod spectral;
mod walksum;

use std::fmt;

pub use mean_system::{build_mean_system, MeanUpdateSystem};
pub use part_metric::part_metric;
pub use rate::{rate_trace, write_rate_csv, RateSample, DISTANCE_FLOOR};
pub use spectral::spectral_radius;
pub use walksum::{walk_summability, WalkSummability};

use crate::engine::EngineError;
use crate::gmrf::lingauss_to_gmrf;
use crate::graph::FactorGraph;
use crate::model::LinearGaussianModel;
use crate::topology::{classify_topology, Topology, TopologyClass};

/// Iteration budget for the precision fixed point.
pub const FIXED_POINT_BUDGET: usize = 100_000;

/// Half-width of the inconclusive band around `ρ(Q) = 1`.
pub const SPECTRAL_MARGIN: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("matrix is {rows}x{cols}; expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("eigenvalue iteration did not converge on a {0}x{0} block")]
    EigenNoConvergence(usize),
    #[error("entry {index} is {value}; part metric needs strictly positive entries")]
    NonPositive { index: usize, value: f64 },
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("diagonal entry {index} of J is {value}; must be positive")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("precision iteration did not reach tolerance within {0} iterations")]
    BudgetExceeded(usize),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Per fv-edge bounds `L ≤ J^{(ℓ)} ≤ U` valid for every `ℓ ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `U_{n→i} = A_{n,i}²/R_n` and `L_{n→i} = A_{n,i}²/(R_n + Σ_{j∈B(f_n)\i} A_{n,j}² W_j)`.
pub fn bounds_l_u(graph: &FactorGraph, model: &LinearGaussianModel) -> Bounds {
    let mut lower = Vec::with_capacity(graph.num_edges());
    let mut upper = Vec::with_capacity(graph.num_edges());
    for (n, factor) in model.factors().iter().enumerate() {
        debug_assert_eq!(graph.factor_neighbors(n).len(), factor.coeffs().len());
        let r = factor.noise_var();
        for &(i, a) in factor.coeffs() {
            let spread: f64 = factor
                .coeffs()
                .iter()
                .filter(|&&(j, _)| j != i)
                .map(|&(j, aj)| aj * aj * model.variables()[j].prior_var())
                .sum();
            upper.push(a * a / r);
            lower.push(a * a / (r + spread));
        }
    }
    Bounds { lower, upper }
}

/// The combined precision map: one application of the
/// variable→factor-then-factor→variable precision recursion, written out in
/// closed form per fv-edge.
pub fn combined_update(graph: &FactorGraph, model: &LinearGaussianModel, precisions: &[f64]) -> Vec<f64> {
    assert_eq!(precisions.len(), graph.num_edges());
    graph
        .fv_edges()
        .iter()
        .map(|edge| {
            let factor = &model.factors()[edge.factor];
            let a_i = factor
                .coeffs()
                .iter()
                .find(|&&(j, _)| j == edge.variable)
                .map(|&(_, a)| a)
                .expect("edge has a coefficient");
            let mut bracket = factor.noise_var();
            for &(j, a_j) in factor.coeffs() {
                if j == edge.variable {
                    continue;
                }
                let mut var_precision = model.variables()[j].prior_precision();
                for &k in graph.variable_neighbors(j) {
                    if k != edge.factor {
                        var_precision += precisions[graph.fv_index(k, j).expect("adjacent")];
                    }
                }
                bracket += a_j * a_j / var_precision;
            }
            a_i * a_i / bracket
        })
        .collect()
}

/// Variable→factor precisions `J_{j→f_n} = W_j⁻¹ + Σ_{f_k∈B(j)\f_n} J_{f_k→j}`.
pub fn variable_precisions(graph: &FactorGraph, model: &LinearGaussianModel, fv_precisions: &[f64]) -> Vec<f64> {
    graph
        .vf_edges()
        .iter()
        .map(|edge| {
            let j = edge.variable;
            graph
                .variable_neighbors(j)
                .iter()
                .filter(|&&k| k != edge.factor)
                .fold(model.variables()[j].prior_precision(), |acc, &k| {
                    acc + fv_precisions[graph.fv_index(k, j).expect("adjacent")]
                })
        })
        .collect()
}

/// Applies [`combined_update`] from `init` until the largest edge change is
/// below `tolerance`. Returns the final precisions and the number of
/// applications.
pub fn iterate_precisions(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    init: &[f64],
    tolerance: f64,
    budget: usize,
) -> Result<(Vec<f64>, usize), AnalysisError> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(AnalysisError::Tolerance(tolerance));
    }
    let mut current = init.to_vec();
    for iteration in 1..=budget {
        let next = combined_update(graph, model, &current);
        let delta = max_abs_diff(&current, &next);
        current = next;
        if delta < tolerance {
            return Ok((current, iteration));
        }
    }
    Err(AnalysisError::BudgetExceeded(budget))
}

/// Converged precisions on both edge directions.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    /// `J*_{f_n→i}`, indexed by `graph.fv_edges()`.
    pub fv: Vec<f64>,
    /// `J*_{j→f_n}`, indexed by `graph.vf_edges()`.
    pub vf: Vec<f64>,
    pub iterations: usize,
}

/// `J*` by iterating from the lower bound `L`, which approaches monotonically
/// from below.
pub fn fixed_point_precisions(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    tolerance: f64,
) -> Result<FixedPoint, AnalysisError> {
    let lower = bounds_l_u(graph, model).lower;
    let (fv, iterations) = iterate_precisions(graph, model, &lower, tolerance, FIXED_POINT_BUDGET)?;
    let vf = variable_precisions(graph, model, &fv);
    Ok(FixedPoint { fv, vf, iterations })
}

/// `J*` driven to floating-point stationarity: stops once no edge moves by
/// more than a few ulps relative.
pub(crate) fn refined_fixed_point(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
) -> Result<FixedPoint, AnalysisError> {
    let mut current = bounds_l_u(graph, model).lower;
    for iteration in 1..=FIXED_POINT_BUDGET {
        let next = combined_update(graph, model, &current);
        let rel = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max);
        current = next;
        if rel <= 4.0 * f64::EPSILON {
            let vf = variable_precisions(graph, model, &current);
            return Ok(FixedPoint {
                fv: current,
                vf,
                iterations: iteration,
            });
        }
    }
    Err(AnalysisError::BudgetExceeded(FIXED_POINT_BUDGET))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Forest or forest plus a single loop.
    ConvergesTopology,
    /// `ρ(Q) < 1 − margin`.
    ConvergesSpectral,
    /// `ρ(Q) > 1 + margin`.
    Diverges,
    Inconclusive,
}

impl Verdict {
    pub fn converges(self) -> bool {
        matches!(self, Verdict::ConvergesTopology | Verdict::ConvergesSpectral)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConvergesTopology => "certified-converges (topology)",
            Verdict::ConvergesSpectral => "certified-converges (spectral)",
            Verdict::Diverges => "certified-diverges",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCertificate {
    pub topology: Topology,
    pub bounds: Bounds,
    pub fixed_point: FixedPoint,
    pub mean_system: MeanUpdateSystem,
    /// `ρ(Q)`.
    pub mean_radius: f64,
    pub walk_sum: WalkSummability,
    pub verdict: Verdict,
}

pub fn certify(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    tolerance: f64,
) -> Result<ConvergenceCertificate, AnalysisError> {
    let topology = classify_topology(graph);
    let bounds = bounds_l_u(graph, model);
    let fixed_point = fixed_point_precisions(graph, model, tolerance)?;
    let mean_system = build_mean_system(graph, model, &fixed_point);
    let mean_radius = spectral_radius(&mean_system.q)?;
    let walk_sum = walk_summability(&lingauss_to_gmrf(model))?;
    let verdict = match topology.class {
        TopologyClass::Forest | TopologyClass::ForestPlusSingleLoop => Verdict::ConvergesTopology,
        TopologyClass::MultiLoop if mean_radius < 1.0 - SPECTRAL_MARGIN => Verdict::ConvergesSpectral,
        TopologyClass::MultiLoop if mean_radius > 1.0 + SPECTRAL_MARGIN => Verdict::Diverges,
        TopologyClass::MultiLoop => Verdict::Inconclusive,
    };
    Ok(ConvergenceCertificate {
        topology,
        bounds,
        fixed_point,
        mean_system,
        mean_radius,
        walk_sum,
        verdict,
    })
}
