//! Seeded instance generators and a reference fixture.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analyzer::{build_mean_system, fixed_point_precisions, spectral_radius};
use crate::graph::build_factor_graph;
use crate::model::{validate_model, FactorSpec, LinearGaussianModel, ModelSpec, VariableSpec};

/// Coefficients with `|A| <` this are never generated.
pub const COEFF_DEAD_ZONE: f64 = 0.1;
/// Prior and noise variances are drawn uniformly from this range.
pub const VARIANCE_RANGE: (f64, f64) = (0.5, 2.0);

/// Four agents, three observations, `R = I`, `W = diag(6, 3, 2, 3)`:
///
/// ```text
///     [ 2/√6    0    1/√2  1/√3 ]
/// A = [ 1/√6  1/√3    0     0   ]
///     [  0    1/√3    0    1/√3 ]
/// ```
///
/// Its information matrix `AᵀA + W⁻¹` has unit diagonal and is not
/// walk-summable, while the factor graph is a single loop with one pendant
/// variable.
pub fn four_variable_example(obs: [f64; 3]) -> LinearGaussianModel {
    let s = f64::sqrt;
    let a = vec![
        vec![2.0 / s(6.0), 0.0, 1.0 / s(2.0), 1.0 / s(3.0)],
        vec![1.0 / s(6.0), 1.0 / s(3.0), 0.0, 0.0],
        vec![0.0, 1.0 / s(3.0), 0.0, 1.0 / s(3.0)],
    ];
    LinearGaussianModel::from_dense(&a, &[6.0, 3.0, 2.0, 3.0], &[1.0; 3], &obs).expect("fixture is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Tree,
    SingleLoopPlusForest,
    RandomLoopy,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::Tree => "tree",
            GeneratorKind::SingleLoopPlusForest => "single-loop-plus-forest",
            GeneratorKind::RandomLoopy => "random-loopy",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(GeneratorKind::Tree),
            "single-loop-plus-forest" | "single-loop" => Ok(GeneratorKind::SingleLoopPlusForest),
            "random-loopy" => Ok(GeneratorKind::RandomLoopy),
            other => Err(format!(
                "unknown generator kind {other:?} (expected tree, single-loop-plus-forest or random-loopy)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    /// Number of variables.
    pub size: usize,
    pub seed: u64,
    /// Coefficients are uniform on this interval minus the dead zone.
    pub coeff_range: (f64, f64),
    /// Factor count for `random-loopy`; defaults to `size`.
    pub factors: Option<usize>,
}

impl GeneratorConfig {
    pub fn new(kind: GeneratorKind, size: usize, seed: u64) -> Self {
        GeneratorConfig {
            kind,
            size,
            seed,
            coeff_range: (-1.0, 1.0),
            factors: None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenerateError {
    #[error("size must be at least {min} for {kind}, got {got}")]
    Size {
        kind: GeneratorKind,
        min: usize,
        got: usize,
    },
    #[error("coefficient range [{0}, {1}] has no values with |A| >= {COEFF_DEAD_ZONE}")]
    Range(f64, f64),
    #[error("factor count must be at least 1")]
    Factors,
}

/// Uniform sampler on `[lo, hi] \ (−dead, dead)`.
struct CoeffSampler {
    negative: Option<(f64, f64)>,
    positive: Option<(f64, f64)>,
}

impl CoeffSampler {
    fn new(lo: f64, hi: f64) -> Result<Self, GenerateError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GenerateError::Range(lo, hi));
        }
        let negative = (lo < -COEFF_DEAD_ZONE).then(|| (lo, hi.min(-COEFF_DEAD_ZONE)));
        let positive = (hi > COEFF_DEAD_ZONE).then(|| (lo.max(COEFF_DEAD_ZONE), hi));
        if negative.is_none() && positive.is_none() {
            return Err(GenerateError::Range(lo, hi));
        }
        Ok(CoeffSampler { negative, positive })
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let len = |iv: Option<(f64, f64)>| iv.map_or(0.0, |(a, b)| b - a);
        let (ln, lp) = (len(self.negative), len(self.positive));
        let (a, b) = if rng.random::<f64>() * (ln + lp) < ln {
            self.negative.unwrap()
        } else {
            self.positive.unwrap()
        };
        let x = rng.random_range(a..=b);
        // the closed upper end can land exactly on ±dead zone, which is allowed
        debug_assert!(x.abs() >= COEFF_DEAD_ZONE);
        x
    }
}

pub fn generate(cfg: &GeneratorConfig) -> Result<LinearGaussianModel, GenerateError> {
    let min = match cfg.kind {
        GeneratorKind::SingleLoopPlusForest => 2,
        _ => 1,
    };
    if cfg.size < min {
        return Err(GenerateError::Size {
            kind: cfg.kind,
            min,
            got: cfg.size,
        });
    }
    if cfg.factors == Some(0) {
        return Err(GenerateError::Factors);
    }
    let sampler = CoeffSampler::new(cfg.coeff_range.0, cfg.coeff_range.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let scopes = match cfg.kind {
        GeneratorKind::Tree => tree_scopes(cfg.size, &mut rng),
        GeneratorKind::SingleLoopPlusForest => single_loop_scopes(cfg.size, &mut rng),
        GeneratorKind::RandomLoopy => loopy_scopes(cfg.size, cfg.factors.unwrap_or(cfg.size), &mut rng),
    };
    Ok(assemble(cfg.size, &scopes, &sampler, &mut rng))
}

/// Grows factors out of the already-connected variables `0..next` until all
/// `size` variables are attached. Each factor touches exactly one connected
/// variable plus one or two fresh ones, so no cycle is created.
fn grow_forest(scopes: &mut Vec<Vec<usize>>, mut next: usize, size: usize, rng: &mut impl Rng) {
    while next < size {
        let anchor = rng.random_range(0..next);
        let fresh = if next + 1 < size && rng.random_bool(0.5) { 2 } else { 1 };
        scopes.push(
            (0..=fresh)
                .map(|k| if k == 0 { anchor } else { next + k - 1 })
                .collect(),
        );
        next += fresh;
    }
}

/// Unary factors keep the cycle count unchanged; pad to one factor per agent.
fn pad_unary(scopes: &mut Vec<Vec<usize>>, size: usize, rng: &mut impl Rng) {
    while scopes.len() < size {
        scopes.push(vec![rng.random_range(0..size)]);
    }
}

fn tree_scopes(size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut scopes = Vec::new();
    grow_forest(&mut scopes, 1, size, rng);
    pad_unary(&mut scopes, size, rng);
    relabel(scopes, size, rng)
}

fn single_loop_scopes(size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let loop_len = rng.random_range(2..=size.min(8));
    let mut scopes: Vec<Vec<usize>> = (0..loop_len).map(|t| vec![t, (t + 1) % loop_len]).collect();
    let mut next = loop_len;
    // A fresh pendant variable on a loop factor keeps exactly one cycle.
    if next < size && rng.random_bool(0.5) {
        let t = rng.random_range(0..loop_len);
        scopes[t].push(next);
        next += 1;
    }
    grow_forest(&mut scopes, next, size, rng);
    pad_unary(&mut scopes, size, rng);
    relabel(scopes, size, rng)
}

/// Factor `n` observes variable `n mod size` plus one or two others.
fn loopy_scopes(size: usize, factors: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..factors)
        .map(|n| {
            let own = n % size;
            let extent = rng.random_range(2..=3).min(size);
            let mut others: Vec<usize> = (0..size).filter(|&i| i != own).collect();
            others.shuffle(rng);
            let mut scope = vec![own];
            scope.extend(others.into_iter().take(extent - 1));
            scope
        })
        .collect()
}

fn relabel(mut scopes: Vec<Vec<usize>>, size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..size).collect();
    perm.shuffle(rng);
    for scope in &mut scopes {
        scope.iter_mut().for_each(|i| *i = perm[*i]);
    }
    scopes.shuffle(rng);
    scopes
}

fn assemble(size: usize, scopes: &[Vec<usize>], sampler: &CoeffSampler, rng: &mut impl Rng) -> LinearGaussianModel {
    let (vlo, vhi) = VARIANCE_RANGE;
    let prior_vars: Vec<f64> = (0..size).map(|_| rng.random_range(vlo..=vhi)).collect();
    let truth: Vec<f64> = prior_vars
        .iter()
        .map(|&w| Normal::new(0.0, w.sqrt()).unwrap().sample(rng))
        .collect();
    let factors = scopes
        .iter()
        .enumerate()
        .map(|(n, scope)| {
            let mut sorted = scope.clone();
            sorted.sort_unstable();
            let coeffs: Vec<(usize, f64)> = sorted.iter().map(|&i| (i, sampler.sample(rng))).collect();
            let noise_var = rng.random_range(vlo..=vhi);
            let clean: f64 = coeffs.iter().map(|&(i, a)| a * truth[i]).sum();
            let obs = clean + Normal::new(0.0, noise_var.sqrt()).unwrap().sample(rng);
            FactorSpec {
                id: format!("f{}", n + 1),
                coeffs: coeffs.into_iter().map(|(i, a)| (format!("x{}", i + 1), a)).collect(),
                noise_var,
                obs,
            }
        })
        .collect();
    let variables = prior_vars
        .into_iter()
        .enumerate()
        .map(|(i, prior_var)| VariableSpec {
            id: format!("x{}", i + 1),
            prior_var,
        })
        .collect();
    validate_model(ModelSpec { variables, factors }).expect("generated model is valid")
}

/// Large coefficients relative to unit-scale noise make loops strongly
/// coupled; with the default range divergent instances are vanishingly rare.
pub const DIVERGENT_COEFF_RANGE: f64 = 20.0;

/// Scans seeded dense `random-loopy` instances (twice as many factors as
/// variables, coefficients in `±DIVERGENT_COEFF_RANGE`) for one whose
/// mean-update matrix has `ρ(Q) > min_radius`.
/// Returns the first hit with its generator config and radius.
pub fn find_divergent(
    seed: u64,
    attempts: usize,
    min_radius: f64,
) -> Option<(GeneratorConfig, LinearGaussianModel, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        let size = *[3usize, 4].choose(&mut rng).unwrap();
        let cfg = GeneratorConfig {
            factors: Some(2 * size),
            coeff_range: (-DIVERGENT_COEFF_RANGE, DIVERGENT_COEFF_RANGE),
            ..GeneratorConfig::new(GeneratorKind::RandomLoopy, size, rng.random())
        };
        let model = generate(&cfg).expect("valid config");
        let graph = build_factor_graph(&model);
        let Ok(fp) = fixed_point_precisions(&graph, &model, 1e-13) else {
            continue;
        };
        let q = build_mean_system(&graph, &model, &fp).q;
        if let Ok(rho) = spectral_radius(&q) {
            if rho > min_radius {
                return Some((cfg, model, rho));
            }
        }
    }
    None
}
