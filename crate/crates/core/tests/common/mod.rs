//! Reference computations used only by the test suites. Each one takes a
//! different route from the library code it checks.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gbp_core::generate::{generate, GeneratorConfig, GeneratorKind};
use gbp_core::LinearGaussianModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Information matrix of the four-variable example as printed in closed form.
pub fn example_information_matrix() -> DMatrix<f64> {
    let s = f64::sqrt;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0,
            1.0 / (3.0 * s(2.0)),
            1.0 / s(3.0),
            s(2.0) / 3.0,
            1.0 / (3.0 * s(2.0)),
            1.0,
            0.0,
            1.0 / 3.0,
            1.0 / s(3.0),
            0.0,
            1.0,
            1.0 / s(6.0),
            s(2.0) / 3.0,
            1.0 / 3.0,
            1.0 / s(6.0),
            1.0,
        ],
    )
}

/// `AᵀR⁻¹A + W⁻¹` accumulated entry by entry from the factor list.
pub fn information_by_outer_products(model: &LinearGaussianModel) -> DMatrix<f64> {
    let m = model.num_variables();
    let mut j = DMatrix::zeros(m, m);
    for (i, v) in model.variables().iter().enumerate() {
        j[(i, i)] += 1.0 / v.prior_var();
    }
    for f in model.factors() {
        for &(a, ca) in f.coeffs() {
            for &(b, cb) in f.coeffs() {
                j[(a, b)] += ca * cb / f.noise_var();
            }
        }
    }
    j
}

/// Characteristic polynomial by Faddeev–LeVerrier, roots by Durand–Kerner.
/// Meant for small matrices with simple eigenvalues.
pub fn charpoly_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // monic coefficients c[0] = 1, c[k] multiplies λ^{n-k}
    let mut c = vec![1.0; n + 1];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        mk = m * (&mk + &id * c[k - 1]);
        c[k] = -mk.trace() / k as f64;
    }
    let eval = |z: Complex64| c.iter().fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck);

    let bound = 1.0 + c[1..].iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..5000 {
        let mut moved = 0.0_f64;
        for i in 0..n {
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-16 {
            break;
        }
    }
    roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Gelfand's formula `ρ = lim ‖M^k‖^{1/k}` with `k = 2^60`, renormalizing
/// after every squaring.
pub fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut current = m.clone();
    let mut log_rho = 0.0;
    let mut weight = 1.0;
    for _ in 0..60 {
        let norm = current.norm();
        if norm == 0.0 {
            return 0.0;
        }
        current /= norm;
        log_rho += weight * norm.ln();
        current = &current * &current;
        weight /= 2.0;
    }
    log_rho.exp()
}

/// Definition of the part metric: `ln` of the smallest `α ≥ 1` with
/// `αX ⪰ Y ⪰ α⁻¹X`, located by bisection on `ln α` using only the order test.
pub fn alpha_scan_part_metric(x: &[f64], y: &[f64]) -> f64 {
    let feasible = |ln_alpha: f64| {
        let a = ln_alpha.exp();
        x.iter().zip(y).all(|(&xe, &ye)| a * xe >= ye && ye >= xe / a)
    };
    if feasible(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn random_loopy(size: usize, seed: u64) -> LinearGaussianModel {
    generate(&GeneratorConfig::new(GeneratorKind::RandomLoopy, size, seed)).unwrap()
}

pub fn random_kind(kind: GeneratorKind, size: usize, seed: u64) -> LinearGaussianModel {
    generate(&GeneratorConfig::new(kind, size, seed)).unwrap()
}

pub fn positive_vec(rng: &mut impl Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn read_matrix_fixture(name: &str) -> DMatrix<f64> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name);
    let rows: Vec<Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let n = rows.len();
    DMatrix::from_fn(n, rows[0].len(), |r, c| rows[r][c])
}
