use std::io::{self, Write};

use super::{part_metric, refined_fixed_point, AnalysisError, FIXED_POINT_BUDGET};
use crate::engine::{deltas, init_messages, sweep, InitStrategy};
use crate::exec::Execution;
use crate::graph::FactorGraph;
use crate::model::LinearGaussianModel;

/// Distances below this are indistinguishable from rounding noise in `J*`.
pub const DISTANCE_FLOOR: f64 = 1e-14;

/// One sweep's distance to the precision fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub iter: usize,
    /// `d(J^{(ℓ)}, J*)` in the part metric.
    pub distance: f64,
    /// Largest change of a factor→variable mean in this sweep.
    pub mean_delta: f64,
}

/// Runs the engine from `strategy` and records the part-metric distance to
/// `J*` after every sweep, starting at `ℓ = 1`. Stops when both edge deltas
/// fall below `tolerance` or the distance drops under [`DISTANCE_FLOOR`].
pub fn rate_trace(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    strategy: &InitStrategy,
    tolerance: f64,
) -> Result<Vec<RateSample>, AnalysisError> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(AnalysisError::Tolerance(tolerance));
    }
    let target = refined_fixed_point(graph, model)?;
    let mut state = init_messages(graph, model, strategy)?;
    let mut trace = Vec::new();
    for _ in 0..FIXED_POINT_BUDGET {
        let next = sweep(graph, model, &state, Execution::Serial);
        let d = deltas(&state, &next);
        let distance = part_metric(&next.precisions, &target.fv)?;
        trace.push(RateSample {
            iter: next.iteration,
            distance,
            mean_delta: d.mean,
        });
        state = next;
        if distance < DISTANCE_FLOOR || (d.precision < tolerance && d.mean < tolerance) {
            return Ok(trace);
        }
    }
    Err(AnalysisError::BudgetExceeded(FIXED_POINT_BUDGET))
}

/// CSV with header `iter,part_metric_distance,mean_delta`, floats at 17
/// significant digits.
pub fn write_rate_csv(samples: &[RateSample], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "iter,part_metric_distance,mean_delta")?;
    for s in samples {
        writeln!(out, "{},{:.16e},{:.16e}", s.iter, s.distance, s.mean_delta)?;
    }
    Ok(())
}
