//! Acceptance checks. One line per criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use gbp_core::analyzer::{
    bounds_l_u, fixed_point_precisions, iterate_precisions, part_metric, rate_trace, walk_summability,
    FIXED_POINT_BUDGET,
};
use gbp_core::engine::{init_messages, sweep, variable_messages};
use gbp_core::generate::{find_divergent, four_variable_example, GeneratorKind};
use gbp_core::gmrf::lingauss_to_gmrf;
use gbp_core::oracle::dense_posterior;
use gbp_core::simulator::{simulate, Schedule, SimConfig};
use gbp_core::topology::{classify_topology, TopologyClass};
use gbp_core::{build_factor_graph, certify, run, Execution, InitStrategy, LinearGaussianModel, RunConfig, RunStatus};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn example() -> LinearGaussianModel {
    four_variable_example([1.0, 2.0, 3.0])
}

fn mixed_instance(i: u64) -> LinearGaussianModel {
    let kind = [
        GeneratorKind::Tree,
        GeneratorKind::SingleLoopPlusForest,
        GeneratorKind::RandomLoopy,
    ][i as usize % 3];
    common::random_kind(kind, 3 + (i as usize * 7) % 18, 7000 + i)
}

fn golden_information_matrix() -> Result<String, String> {
    let j = lingauss_to_gmrf(&example());
    let err = (j.information() - common::example_information_matrix()).amax();
    ensure(err <= 1e-12, || format!("max |dJ| = {err:.3e}"))?;
    Ok(format!("max |dJ| = {err:.3e} (tol 1e-12)"))
}

fn walk_sum_number() -> Result<String, String> {
    let w = walk_summability(&lingauss_to_gmrf(&example())).map_err(|e| e.to_string())?;
    ensure((w.radius - 1.0754).abs() <= 1e-3 && !w.summable, || format!("{w:?}"))?;
    Ok(format!(
        "rho(|I-J|) = {:.6}, summable = {} (want 1.0754 +- 1e-3, false)",
        w.radius, w.summable
    ))
}

fn single_loop_example() -> Result<String, String> {
    let model = example();
    let graph = build_factor_graph(&model);
    let class = classify_topology(&graph).class;
    ensure(class == TopologyClass::ForestPlusSingleLoop, || {
        format!("topology {class}")
    })?;
    let cert = certify(&graph, &model, 1e-12).map_err(|e| e.to_string())?;
    ensure(cert.verdict.converges(), || format!("verdict {}", cert.verdict))?;

    let mut rng = common::rng(3);
    let mut obs_sets = vec![[1.0, 2.0, 3.0]];
    obs_sets.extend((0..10).map(|_| [0; 3].map(|_| rng.random_range(-10.0..10.0))));
    let mut worst = 0.0_f64;
    for y in &obs_sets {
        let m = four_variable_example(*y);
        let out = run(&graph, &m, &InitStrategy::Zero, &RunConfig::default()).map_err(|e| e.to_string())?;
        ensure(out.status == RunStatus::Converged, || {
            format!("y = {y:?}: {}", out.status)
        })?;
        let exact = dense_posterior(&m).map_err(|e| e.to_string())?;
        worst = worst.max(common::max_abs_diff(&out.beliefs.means, exact.mean.as_slice()));
    }
    ensure(worst <= 1e-8, || format!("max mean error {worst:.3e}"))?;
    Ok(format!(
        "{class}, {}, max mean error {worst:.3e} over {} observation vectors (tol 1e-8)",
        cert.verdict,
        obs_sets.len()
    ))
}

fn uniqueness() -> Result<String, String> {
    let mut models = vec![example()];
    models.extend((0..50).map(|i| common::random_loopy(3 + i % 10, 100 + i as u64)));
    let tol = 1e-13;
    let mut worst = 0.0_f64;
    let mut rng = common::rng(4);
    for (k, model) in models.iter().enumerate() {
        let graph = build_factor_graph(model);
        let bounds = bounds_l_u(&graph, model);
        let e = graph.num_edges();
        let inits = [
            vec![0.0; e],
            bounds.lower.clone(),
            bounds.upper.clone(),
            common::positive_vec(&mut rng, e, 0.0, 100.0),
        ];
        let points: Vec<Vec<f64>> = inits
            .iter()
            .map(|init| iterate_precisions(&graph, model, init, tol, FIXED_POINT_BUDGET).map(|r| r.0))
            .collect::<Result<_, _>>()
            .map_err(|err| format!("instance {k}: {err}"))?;
        for p in &points[1..] {
            worst = worst.max(common::max_abs_diff(p, &points[0]));
        }
    }
    ensure(worst <= 1e-9, || format!("max edge disagreement {worst:.3e}"))?;
    Ok(format!(
        "{} instances x 4 inits, max edge disagreement {worst:.3e} (tol 1e-9)",
        models.len()
    ))
}

fn geometric_rate() -> Result<String, String> {
    let model = example();
    let graph = build_factor_graph(&model);
    let mut report = Vec::new();
    for init in [InitStrategy::Zero, InitStrategy::LowerBound, InitStrategy::UpperBound] {
        let trace = rate_trace(&graph, &model, &init, 1e-300).map_err(|e| e.to_string())?;
        let c = trace
            .windows(2)
            .filter(|w| w[0].iter >= 2 && w[0].distance >= gbp_core::analyzer::DISTANCE_FLOOR)
            .map(|w| w[1].distance / w[0].distance)
            .fold(0.0_f64, f64::max);
        ensure(trace.len() >= 3, || format!("init {init}: trace too short"))?;
        ensure(c < 1.0, || format!("init {init}: fitted c = {c:.4}"))?;
        report.push(format!("{init}: c = {c:.4} over {} sweeps", trace.len()));
    }
    Ok(report.join(", "))
}

fn monotone_sandwich() -> Result<String, String> {
    let slack = 1e-12;
    let mut sweeps = 0;
    for i in 0..50 {
        let model = mixed_instance(i);
        let graph = build_factor_graph(&model);
        let bounds = bounds_l_u(&graph, &model);
        for (init, direction) in [(InitStrategy::Zero, 1.0), (InitStrategy::UpperBound, -1.0)] {
            let mut state = init_messages(&graph, &model, &init).map_err(|e| e.to_string())?;
            for ell in 1..=500 {
                let next = sweep(&graph, &model, &state, Execution::Serial);
                sweeps += 1;
                for e in 0..graph.num_edges() {
                    let (prev, p) = (state.precisions[e], next.precisions[e]);
                    ensure(direction * (p - prev) >= -slack, || {
                        format!("instance {i}, init {init}, sweep {ell}, edge {e}: {prev} -> {p}")
                    })?;
                    ensure(bounds.lower[e] - slack <= p && p <= bounds.upper[e] + slack, || {
                        format!("instance {i}, init {init}, sweep {ell}, edge {e}: {p} outside bounds")
                    })?;
                }
                let moved = common::max_abs_diff(&state.precisions, &next.precisions);
                state = next;
                if moved < 1e-14 {
                    break;
                }
            }
        }
    }
    Ok(format!("50 instances, {sweeps} sweeps checked (tol 1e-12)"))
}

/// First sweep at which the part-metric distance to `J*` drops below `tol`.
fn sweeps_to_tolerance(
    graph: &gbp_core::FactorGraph,
    model: &LinearGaussianModel,
    precisions: Vec<f64>,
    tol: f64,
) -> Result<usize, String> {
    let n = precisions.len();
    let trace = rate_trace(
        graph,
        model,
        &InitStrategy::Explicit {
            precisions,
            means: vec![0.0; n],
        },
        1e-300,
    )
    .map_err(|e| e.to_string())?;
    trace
        .iter()
        .find(|s| s.distance < tol)
        .map(|s| s.iter)
        .ok_or_else(|| "tolerance never reached".to_string())
}

fn initialization_order() -> Result<String, String> {
    let tol = 1e-10;
    let (mut sum_l, mut sum_0, mut sum_u, mut sum_big) = (0, 0, 0, 0);
    for i in 0..50 {
        let model = mixed_instance(100 + i);
        let graph = build_factor_graph(&model);
        let b = bounds_l_u(&graph, &model);
        let e = graph.num_edges();
        let from_0 = sweeps_to_tolerance(&graph, &model, vec![0.0; e], tol)?;
        let from_l = sweeps_to_tolerance(&graph, &model, b.lower.clone(), tol)?;
        ensure(from_l <= from_0, || format!("instance {i}: L {from_l} > 0 {from_0}"))?;
        let from_u = sweeps_to_tolerance(&graph, &model, b.upper.clone(), tol)?;
        let above: [(&str, Vec<f64>); 4] = [
            ("2U", b.upper.iter().map(|u| 2.0 * u).collect()),
            ("10U", b.upper.iter().map(|u| 10.0 * u).collect()),
            ("U+1", b.upper.iter().map(|u| u + 1.0).collect()),
            ("1e6U", b.upper.iter().map(|u| 1e6 * u).collect()),
        ];
        for (name, init) in above {
            let n = sweeps_to_tolerance(&graph, &model, init, tol)?;
            ensure(from_u <= n, || format!("instance {i}: U {from_u} > {name} {n}"))?;
            sum_big += n;
        }
        sum_l += from_l;
        sum_0 += from_0;
        sum_u += from_u;
    }
    Ok(format!(
        "50 instances, total sweeps L {sum_l} <= 0 {sum_0}; U {sum_u} <= each of 2U,10U,U+1,1e6U (sum {sum_big})"
    ))
}

fn tree_exactness() -> Result<String, String> {
    let (mut worst_mu, mut worst_p, mut worst_rho) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..50u64 {
        let size = 2 + (i as usize * 48) / 49;
        let model = common::random_kind(GeneratorKind::Tree, size, 9000 + i);
        let graph = build_factor_graph(&model);
        let config = RunConfig {
            max_iters: graph.diameter(),
            ..RunConfig::default()
        };
        let out = run(&graph, &model, &InitStrategy::Zero, &config).map_err(|e| e.to_string())?;
        let exact = dense_posterior(&model).map_err(|e| e.to_string())?;
        worst_mu = worst_mu.max(common::max_abs_diff(&out.beliefs.means, exact.mean.as_slice()));
        worst_p = worst_p.max(common::max_abs_diff(&out.beliefs.variances, &exact.variances()));
        let cert = certify(&graph, &model, 1e-12).map_err(|e| e.to_string())?;
        worst_rho = worst_rho.max(cert.mean_radius);
    }
    ensure(worst_mu <= 1e-10 && worst_p <= 1e-10 && worst_rho <= 1e-10, || {
        format!("mean {worst_mu:.3e}, variance {worst_p:.3e}, rho(Q) {worst_rho:.3e}")
    })?;
    Ok(format!(
        "50 trees after diameter sweeps: mean err {worst_mu:.3e}, variance err {worst_p:.3e}, max rho(Q) {worst_rho:.3e} (tol 1e-10)"
    ))
}

fn mean_fixed_point() -> Result<String, String> {
    let (mut checked, mut worst_v, mut worst_mu) = (0, 0.0_f64, 0.0_f64);
    for i in 0..40u64 {
        let model = common::random_loopy(3 + i as usize % 9, 300 + i);
        let graph = build_factor_graph(&model);
        let cert = certify(&graph, &model, 1e-13).map_err(|e| e.to_string())?;
        if cert.mean_radius >= 1.0 {
            continue;
        }
        let out = run(&graph, &model, &InitStrategy::Zero, &RunConfig::default()).map_err(|e| e.to_string())?;
        ensure(out.status == RunStatus::Converged, || {
            format!("instance {i}: {}", out.status)
        })?;
        let vf = variable_messages(&graph, &model, &out.state, Execution::Serial).means;
        let solved = cert
            .mean_system
            .fixed_point()
            .ok_or_else(|| format!("instance {i}: I+Q singular"))?;
        worst_v = worst_v.max(common::max_abs_diff(&vf, solved.as_slice()));
        let exact = dense_posterior(&model).map_err(|e| e.to_string())?;
        worst_mu = worst_mu.max(common::max_abs_diff(&out.beliefs.means, exact.mean.as_slice()));
        checked += 1;
    }
    ensure(worst_v <= 1e-8 && worst_mu <= 1e-8, || {
        format!("vf mean err {worst_v:.3e}, belief mean err {worst_mu:.3e}")
    })?;

    let (_, model, rho) = find_divergent(1, 5000, 1.0).ok_or("no divergent instance found")?;
    let graph = build_factor_graph(&model);
    let out = run(&graph, &model, &InitStrategy::Zero, &RunConfig::default()).map_err(|e| e.to_string())?;
    ensure(out.status != RunStatus::Converged, || {
        "divergent instance converged".into()
    })?;
    let fp = fixed_point_precisions(&graph, &model, 1e-13).map_err(|e| e.to_string())?;
    let drift = common::max_abs_diff(&out.state.precisions, &fp.fv);
    ensure(drift <= 1e-8, || {
        format!("precisions off J* by {drift:.3e} when stopped")
    })?;
    Ok(format!(
        "{checked} instances with rho(Q)<1: vf err {worst_v:.3e}, mean err {worst_mu:.3e}; rho(Q)={rho:.4} instance: {} after {} sweeps, precisions within {drift:.1e} of J*",
        out.status,
        out.iterations()
    ))
}

fn simulator_equivalence() -> Result<String, String> {
    let model = example();
    let graph = build_factor_graph(&model);
    let engine = run(&graph, &model, &InitStrategy::Zero, &RunConfig::default()).map_err(|e| e.to_string())?;
    let sim = simulate(&model, &SimConfig::default()).map_err(|e| e.to_string())?;
    let bitwise = sim.ticks == engine.iterations()
        && sim.status == engine.status
        && sim
            .beliefs
            .means
            .iter()
            .chain(&sim.beliefs.variances)
            .zip(engine.beliefs.means.iter().chain(&engine.beliefs.variances))
            .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(bitwise, || "synchronous simulation differs from engine".into())?;

    let (mut certified, mut worst) = (0, 0.0_f64);
    let mut seed = 500;
    while certified < 20 {
        seed += 1;
        let model = common::random_loopy(3 + seed as usize % 8, seed);
        let graph = build_factor_graph(&model);
        let cert = certify(&graph, &model, 1e-12).map_err(|e| e.to_string())?;
        if !cert.verdict.converges() {
            continue;
        }
        let engine = run(&graph, &model, &InitStrategy::Zero, &RunConfig::default()).map_err(|e| e.to_string())?;
        let cfg = SimConfig {
            schedule: Schedule::RandomSequential { seed },
            max_ticks: 1_000_000,
            ..SimConfig::default()
        };
        let sim = simulate(&model, &cfg).map_err(|e| e.to_string())?;
        ensure(sim.status == RunStatus::Converged, || {
            format!("seed {seed}: {}", sim.status)
        })?;
        worst = worst.max(common::max_abs_diff(&sim.beliefs.means, &engine.beliefs.means));
        certified += 1;
    }
    ensure(worst <= 1e-8, || format!("random-sequential mean gap {worst:.3e}"))?;
    Ok(format!(
        "sync bitwise equal ({} ticks); random-sequential on {certified} certified instances within {worst:.3e} (tol 1e-8, empirical)",
        sim.ticks
    ))
}

fn part_metric_axioms() -> Result<String, String> {
    let mut rng = common::rng(11);
    let (mut worst_sym, mut worst_tri, mut worst_scan) = (0.0_f64, f64::NEG_INFINITY, 0.0_f64);
    for _ in 0..200 {
        let n = rng.random_range(1..=30);
        let mut draw = || -> Vec<f64> { (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect() };
        let (x, y, z) = (draw(), draw(), draw());
        let d = |a: &[f64], b: &[f64]| part_metric(a, b).unwrap();
        worst_sym = worst_sym.max((d(&x, &y) - d(&y, &x)).abs());
        worst_tri = worst_tri.max(d(&x, &y) - d(&x, &z) - d(&z, &y));
        worst_scan = worst_scan.max((d(&x, &y) - common::alpha_scan_part_metric(&x, &y)).abs());
    }
    ensure(worst_sym <= 1e-12 && worst_tri <= 1e-12 && worst_scan <= 1e-9, || {
        format!("symmetry {worst_sym:.3e}, triangle excess {worst_tri:.3e}, scan {worst_scan:.3e}")
    })?;
    Ok(format!(
        "200 triples: symmetry gap {worst_sym:.1e}, max triangle excess {worst_tri:.1e} (tol 1e-12), alpha-scan gap {worst_scan:.1e} (tol 1e-9)"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("golden information matrix", golden_information_matrix),
        ("walk-sum number", walk_sum_number),
        ("single-loop example converges to the optimum", single_loop_example),
        ("precision fixed point is unique", uniqueness),
        ("geometric precision rate", geometric_rate),
        ("monotone sandwich", monotone_sandwich),
        ("initialization order", initialization_order),
        ("tree exactness", tree_exactness),
        ("mean fixed point and divergence", mean_fixed_point),
        ("simulator equivalence", simulator_equivalence),
        ("part-metric axioms", part_metric_axioms),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let total = Instant::now();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        total.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
