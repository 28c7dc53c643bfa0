use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use gbp_core::analyzer::{rate_trace, write_rate_csv};
use gbp_core::generate::{generate, GeneratorConfig, GeneratorKind};
use gbp_core::oracle::dense_posterior;
use gbp_core::simulator::{simulate, write_event_csv, Schedule, SimConfig};
use gbp_core::{build_factor_graph, certify, run, InitStrategy, LinearGaussianModel, RunConfig, Verdict};

#[derive(Parser, Debug)]
#[command(
    name = "gbp",
    version,
    about = "Gaussian belief propagation on linear Gaussian models"
)]
struct Cli {
    /// Model file (JSON).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 10_000)]
    max_iters: usize,
    /// Initial factor→variable precisions: zero, L or U.
    #[arg(long, global = true, default_value = "zero")]
    init: InitStrategy,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Append dense-solver values and deviations to the solve report.
    #[arg(long, global = true)]
    oracle: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run GBP and print beliefs.
    Solve,
    /// Certify convergence or divergence. Exit 0 converges, 2 diverges, 3 inconclusive.
    Analyze,
    /// Write the part-metric rate trace as CSV.
    Trace {
        /// One trace per init in {zero, L, U}, written to <out>_zero.csv etc.
        #[arg(long)]
        compare_inits: bool,
    },
    /// Emit a random model file.
    Generate {
        #[arg(long)]
        kind: GeneratorKind,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        coeff_min: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        coeff_max: f64,
        /// Factor count (random-loopy only; defaults to size).
        #[arg(long)]
        factors: Option<usize>,
    },
    /// Run GBP as a network of agents. `--out` writes the message log.
    Simulate {
        #[arg(long, value_enum, default_value_t = ScheduleArg::Sync)]
        schedule: ScheduleArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Sync,
    Random,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if cli.tol.is_nan() || cli.tol <= 0.0 {
        bail!("--tol must be positive, got {}", cli.tol);
    }
    match &cli.command {
        Command::Solve => solve(cli).map(|_| ExitCode::SUCCESS),
        Command::Analyze => analyze(cli),
        Command::Trace { compare_inits } => trace(cli, *compare_inits).map(|_| ExitCode::SUCCESS),
        Command::Generate {
            kind,
            size,
            coeff_min,
            coeff_max,
            factors,
        } => {
            let seed = cli.seed.context("generate needs --seed")?;
            let cfg = GeneratorConfig {
                coeff_range: (*coeff_min, *coeff_max),
                factors: *factors,
                ..GeneratorConfig::new(*kind, *size, seed)
            };
            let model = generate(&cfg)?;
            emit(cli.out.as_deref(), &format!("{}\n", model.to_json_string()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { schedule } => simulate_cmd(cli, *schedule).map(|_| ExitCode::SUCCESS),
    }
}

fn load(cli: &Cli) -> Result<LinearGaussianModel> {
    let path = cli.model.as_ref().context("missing --model")?;
    LinearGaussianModel::read_file(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn solve(cli: &Cli) -> Result<()> {
    let model = load(cli)?;
    let graph = build_factor_graph(&model);
    let config = RunConfig {
        tolerance: cli.tol,
        max_iters: cli.max_iters,
        ..RunConfig::default()
    };
    let outcome = run(&graph, &model, &cli.init, &config)?;
    let b = &outcome.beliefs;

    let mut r = String::new();
    writeln!(r, "status: {}", outcome.status)?;
    writeln!(r, "iterations: {}", outcome.iterations())?;
    if cli.oracle {
        let exact = dense_posterior(&model)?;
        writeln!(
            r,
            "{:<12} {:>24} {:>24} {:>24} {:>24} {:>10} {:>10}",
            "variable", "mean", "variance", "oracle_mean", "oracle_variance", "dev_mean", "dev_var"
        )?;
        let (mut dm, mut dv) = (0.0_f64, 0.0_f64);
        for (j, v) in model.variables().iter().enumerate() {
            let (em, ev) = (exact.mean[j], exact.covariance[(j, j)]);
            let (m, p) = (b.means[j], b.variances[j]);
            dm = dm.max((m - em).abs());
            dv = dv.max((p - ev).abs());
            writeln!(
                r,
                "{:<12} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e} {:>10.3e} {:>10.3e}",
                v.id(),
                m,
                p,
                em,
                ev,
                (m - em).abs(),
                (p - ev).abs()
            )?;
        }
        writeln!(r, "max mean deviation: {dm:.3e}")?;
        writeln!(r, "max variance deviation: {dv:.3e}")?;
    } else {
        writeln!(r, "{:<12} {:>24} {:>24}", "variable", "mean", "variance")?;
        for (j, v) in model.variables().iter().enumerate() {
            writeln!(r, "{:<12} {:>24.16e} {:>24.16e}", v.id(), b.means[j], b.variances[j])?;
        }
    }
    emit(cli.out.as_deref(), &r)
}

fn analyze(cli: &Cli) -> Result<ExitCode> {
    let model = load(cli)?;
    let graph = build_factor_graph(&model);
    let cert = certify(&graph, &model, cli.tol)?;

    let mut r = String::new();
    writeln!(
        r,
        "topology: {} (cycles {}, components {})",
        cert.topology.class,
        cert.topology.total_cycles(),
        cert.topology.components.len()
    )?;
    writeln!(r, "rho(Q): {:.6e}", cert.mean_radius)?;
    writeln!(
        r,
        "rho(|I-J|): {:.6} ({})",
        cert.walk_sum.radius,
        if cert.walk_sum.summable {
            "walk-summable"
        } else {
            "NOT walk-summable"
        }
    )?;
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (l0, l1) = range(&cert.bounds.lower);
    let (u0, u1) = range(&cert.bounds.upper);
    let (j0, j1) = range(&cert.fixed_point.fv);
    writeln!(r, "edges: {}", graph.num_edges())?;
    writeln!(r, "L range: [{l0:.6e}, {l1:.6e}]")?;
    writeln!(r, "U range: [{u0:.6e}, {u1:.6e}]")?;
    writeln!(
        r,
        "J* range: [{j0:.6e}, {j1:.6e}] after {} iterations from L",
        cert.fixed_point.iterations
    )?;
    writeln!(r, "verdict: {}", cert.verdict)?;
    emit(cli.out.as_deref(), &r)?;

    Ok(match cert.verdict {
        Verdict::ConvergesTopology | Verdict::ConvergesSpectral => ExitCode::SUCCESS,
        Verdict::Diverges => ExitCode::from(2),
        Verdict::Inconclusive => ExitCode::from(3),
    })
}

fn trace(cli: &Cli, compare_inits: bool) -> Result<()> {
    let model = load(cli)?;
    let graph = build_factor_graph(&model);
    if compare_inits {
        let out = cli.out.as_ref().context("--compare-inits needs --out")?;
        let stem = out.with_extension("");
        for (tag, init) in [
            ("zero", InitStrategy::Zero),
            ("L", InitStrategy::LowerBound),
            ("U", InitStrategy::UpperBound),
        ] {
            let samples = rate_trace(&graph, &model, &init, cli.tol)?;
            let path = PathBuf::from(format!("{}_{tag}.csv", stem.display()));
            let mut w = create(&path)?;
            write_rate_csv(&samples, &mut w)?;
            w.flush()?;
        }
        return Ok(());
    }
    let samples = rate_trace(&graph, &model, &cli.init, cli.tol)?;
    match &cli.out {
        Some(path) => {
            let mut w = create(path)?;
            write_rate_csv(&samples, &mut w)?;
            w.flush()?;
        }
        None => write_rate_csv(&samples, io::stdout().lock())?,
    }
    Ok(())
}

fn simulate_cmd(cli: &Cli, schedule: ScheduleArg) -> Result<()> {
    let model = load(cli)?;
    let schedule = match schedule {
        ScheduleArg::Sync => Schedule::Synchronous,
        ScheduleArg::Random => Schedule::RandomSequential {
            seed: cli.seed.context("--schedule random needs --seed")?,
        },
    };
    let config = SimConfig {
        schedule,
        tolerance: cli.tol,
        max_ticks: cli.max_iters,
        init: cli.init.clone(),
        record_events: cli.out.is_some(),
        ..SimConfig::default()
    };
    let outcome = simulate(&model, &config)?;
    if let Some(path) = &cli.out {
        let mut w = create(path)?;
        write_event_csv(&outcome.events, &model, &mut w)?;
        w.flush()?;
    }
    let mut out = io::stdout().lock();
    writeln!(out, "status: {}", outcome.status)?;
    writeln!(out, "ticks: {}", outcome.ticks)?;
    writeln!(out, "messages: {}", outcome.messages_sent)?;
    writeln!(out, "{:<12} {:>24} {:>24}", "variable", "mean", "variance")?;
    for (j, v) in model.variables().iter().enumerate() {
        writeln!(
            out,
            "{:<12} {:>24.16e} {:>24.16e}",
            v.id(),
            outcome.beliefs.means[j],
            outcome.beliefs.variances[j]
        )?;
    }
    Ok(())
}
