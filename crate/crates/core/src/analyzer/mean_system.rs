use nalgebra::{DMatrix, DVector};

use super::FixedPoint;
use crate::graph::FactorGraph;
use crate::model::LinearGaussianModel;

/// Affine map `v ← b − Q v` followed by the variable→factor means once the
/// precisions sit at `J*`. Rows and columns follow `graph.vf_edges()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanUpdateSystem {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl MeanUpdateSystem {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// One application of `v ↦ b − Q v`.
    pub fn step(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.q * v
    }

    /// Solution of `(I + Q) v = b`, if `I + Q` is nonsingular.
    pub fn fixed_point(&self) -> Option<DVector<f64>> {
        let n = self.dim();
        (DMatrix::identity(n, n) + &self.q).lu().solve(&self.b)
    }
}

/// Builds `Q` and `b` from the precision fixed point.
///
/// With `M_{k,j} = R_k + Σ_{z∈B(f_k)\j} A_{k,z}² / J*_{z→f_k}`, row `(j→f_n)`
/// has entry `A_{k,j} A_{k,z} / (J*_{j→f_n} M_{k,j})` in column `(z→f_k)` for
/// every `f_k ∈ B(j)\f_n`, `z ∈ B(f_k)\j`, and
/// `b_{j→f_n} = Σ_{f_k∈B(j)\f_n} A_{k,j} y_k / (J*_{j→f_n} M_{k,j})`.
pub fn build_mean_system(
    graph: &FactorGraph,
    model: &LinearGaussianModel,
    fixed_point: &FixedPoint,
) -> MeanUpdateSystem {
    let dim = graph.vf_edges().len();
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    let vf_prec = &fixed_point.vf;

    for (row, edge) in graph.vf_edges().iter().enumerate() {
        let j = edge.variable;
        let inv_own = 1.0 / vf_prec[row];
        for &k in graph.variable_neighbors(j) {
            if k == edge.factor {
                continue;
            }
            let factor = &model.factors()[k];
            let coeff = |z: usize| {
                factor
                    .coeffs()
                    .iter()
                    .find(|&&(v, _)| v == z)
                    .map(|&(_, a)| a)
                    .expect("adjacent")
            };
            let a_kj = coeff(j);
            let mut m_kj = factor.noise_var();
            for &(z, a_kz) in factor.coeffs() {
                if z != j {
                    m_kj += a_kz * a_kz / vf_prec[graph.vf_index(z, k).expect("adjacent")];
                }
            }
            let scale = inv_own * a_kj / m_kj;
            b[row] += scale * factor.obs();
            for &(z, a_kz) in factor.coeffs() {
                if z != j {
                    q[(row, graph.vf_index(z, k).expect("adjacent"))] = scale * a_kz;
                }
            }
        }
    }
    MeanUpdateSystem { q, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::fixed_point_precisions;
    use crate::generate::four_variable_example;
    use crate::graph::build_factor_graph;

    #[test]
    fn unary_only_system_is_zero() {
        let m =
            LinearGaussianModel::from_dense(&[vec![2.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], &[1.0, 1.0], &[1.0, 2.0])
                .unwrap();
        let g = build_factor_graph(&m);
        let fp = fixed_point_precisions(&g, &m, 1e-12).unwrap();
        let sys = build_mean_system(&g, &m, &fp);
        assert!(sys.q.iter().all(|&x| x == 0.0));
        // leaves send their prior: b is zero too, v* = b after one step
        assert_eq!(sys.step(&DVector::from_element(2, 5.0)), sys.b);
    }

    #[test]
    fn example_zero_pattern_follows_non_backtracking_adjacency() {
        let m = four_variable_example([1.0, 2.0, 3.0]);
        let g = build_factor_graph(&m);
        let fp = fixed_point_precisions(&g, &m, 1e-12).unwrap();
        let sys = build_mean_system(&g, &m, &fp);
        assert_eq!(sys.q.shape(), (7, 7));
        for (r, re) in g.vf_edges().iter().enumerate() {
            for (c, ce) in g.vf_edges().iter().enumerate() {
                // (j→f_n) depends on (z→f_k) iff f_k ∈ B(j)\f_n and z ∈ B(f_k)\j
                let linked = ce.factor != re.factor
                    && g.variable_neighbors(re.variable).contains(&ce.factor)
                    && ce.variable != re.variable;
                assert_eq!(sys.q[(r, c)] != 0.0, linked, "({r},{c})");
            }
        }
    }
}
