use std::collections::VecDeque;

use crate::model::LinearGaussianModel;

/// Directed factor→variable edge `(f_n → x_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FvEdge {
    pub factor: usize,
    pub variable: usize,
}

/// Directed variable→factor edge `(x_j → f_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VfEdge {
    pub variable: usize,
    pub factor: usize,
}

/// A node of the bipartite factor graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Variable(usize),
    Factor(usize),
}

/// Bipartite factor graph of a linear Gaussian model.
///
/// Factor→variable edges are ordered ascending on factor then variable, and
/// variable→factor edges ascending on variable then factor. Every per-edge
/// vector in the crate (messages, bounds, fixed points, rows of the mean
/// system) uses these two orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    factor_neighbors: Vec<Vec<usize>>,
    variable_neighbors: Vec<Vec<usize>>,
    fv_edges: Vec<FvEdge>,
    vf_edges: Vec<VfEdge>,
    fv_offsets: Vec<usize>,
    vf_offsets: Vec<usize>,
    // index of the opposite-direction edge
    fv_reverse: Vec<usize>,
    vf_reverse: Vec<usize>,
}

impl FactorGraph {
    pub fn num_variables(&self) -> usize {
        self.variable_neighbors.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factor_neighbors.len()
    }

    /// Number of undirected edges, equal to the number of stored coefficients.
    pub fn num_edges(&self) -> usize {
        self.fv_edges.len()
    }

    /// `B(f_n)`, ascending variable indices.
    pub fn factor_neighbors(&self, factor: usize) -> &[usize] {
        &self.factor_neighbors[factor]
    }

    /// `B(j)`, ascending factor indices.
    pub fn variable_neighbors(&self, variable: usize) -> &[usize] {
        &self.variable_neighbors[variable]
    }

    pub fn fv_edges(&self) -> &[FvEdge] {
        &self.fv_edges
    }

    pub fn vf_edges(&self) -> &[VfEdge] {
        &self.vf_edges
    }

    /// Index range of the edges leaving factor `n`, aligned with `factor_neighbors(n)`.
    pub fn fv_range(&self, factor: usize) -> std::ops::Range<usize> {
        self.fv_offsets[factor]..self.fv_offsets[factor + 1]
    }

    /// Index range of the edges leaving variable `j`, aligned with `variable_neighbors(j)`.
    pub fn vf_range(&self, variable: usize) -> std::ops::Range<usize> {
        self.vf_offsets[variable]..self.vf_offsets[variable + 1]
    }

    /// Index of the vf edge `(i → f_n)` for the fv edge `(f_n → i)`.
    pub fn fv_reverse(&self, fv: usize) -> usize {
        self.fv_reverse[fv]
    }

    /// Index of the fv edge `(f_n → j)` for the vf edge `(j → f_n)`.
    pub fn vf_reverse(&self, vf: usize) -> usize {
        self.vf_reverse[vf]
    }

    pub fn fv_index(&self, factor: usize, variable: usize) -> Option<usize> {
        let nbrs = self.factor_neighbors.get(factor)?;
        nbrs.binary_search(&variable).ok().map(|p| self.fv_offsets[factor] + p)
    }

    pub fn vf_index(&self, variable: usize, factor: usize) -> Option<usize> {
        let nbrs = self.variable_neighbors.get(variable)?;
        nbrs.binary_search(&factor).ok().map(|p| self.vf_offsets[variable] + p)
    }

    pub fn is_adjacent(&self, a: Node, b: Node) -> bool {
        match (a, b) {
            (Node::Variable(j), Node::Factor(n)) | (Node::Factor(n), Node::Variable(j)) => {
                self.fv_index(n, j).is_some()
            }
            _ => false,
        }
    }

    /// Node index in a combined numbering: variables first, then factors.
    pub(crate) fn flat_node(&self, node: Node) -> usize {
        match node {
            Node::Variable(j) => j,
            Node::Factor(n) => self.num_variables() + n,
        }
    }

    fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.num_variables())
            .map(Node::Variable)
            .chain((0..self.num_factors()).map(Node::Factor))
    }

    fn neighbors(&self, node: Node) -> Box<dyn Iterator<Item = Node> + '_> {
        match node {
            Node::Variable(j) => Box::new(self.variable_neighbors[j].iter().map(|&n| Node::Factor(n))),
            Node::Factor(n) => Box::new(self.factor_neighbors[n].iter().map(|&i| Node::Variable(i))),
        }
    }

    /// Longest shortest path (in bipartite edges) within any connected component.
    pub fn diameter(&self) -> usize {
        let total = self.num_variables() + self.num_factors();
        let mut dist = vec![usize::MAX; total];
        let mut best = 0;
        let mut queue = VecDeque::new();
        for start in self.nodes() {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[self.flat_node(start)] = 0;
            queue.push_back(start);
            while let Some(node) = queue.pop_front() {
                let d = dist[self.flat_node(node)];
                best = best.max(d);
                for next in self.neighbors(node) {
                    let slot = &mut dist[self.flat_node(next)];
                    if *slot == usize::MAX {
                        *slot = d + 1;
                        queue.push_back(next);
                    }
                }
            }
        }
        best
    }
}

/// One variable node per variable, one factor node per factor, and an edge
/// `(f_n, x_i)` for every stored coefficient `A_{n,i}`.
pub fn build_factor_graph(model: &LinearGaussianModel) -> FactorGraph {
    let num_vars = model.num_variables();
    let factor_neighbors: Vec<Vec<usize>> = model
        .factors()
        .iter()
        .map(|f| f.coeffs().iter().map(|&(i, _)| i).collect())
        .collect();
    let mut variable_neighbors = vec![Vec::new(); num_vars];
    for (n, nbrs) in factor_neighbors.iter().enumerate() {
        for &i in nbrs {
            variable_neighbors[i].push(n);
        }
    }

    let fv_offsets = offsets(&factor_neighbors);
    let vf_offsets = offsets(&variable_neighbors);
    let fv_edges: Vec<FvEdge> = factor_neighbors
        .iter()
        .enumerate()
        .flat_map(|(factor, nbrs)| nbrs.iter().map(move |&variable| FvEdge { factor, variable }))
        .collect();
    let vf_edges: Vec<VfEdge> = variable_neighbors
        .iter()
        .enumerate()
        .flat_map(|(variable, nbrs)| nbrs.iter().map(move |&factor| VfEdge { variable, factor }))
        .collect();

    let position = |list: &[usize], x: usize| list.binary_search(&x).expect("adjacency is symmetric");
    let fv_reverse = fv_edges
        .iter()
        .map(|e| vf_offsets[e.variable] + position(&variable_neighbors[e.variable], e.factor))
        .collect();
    let vf_reverse = vf_edges
        .iter()
        .map(|e| fv_offsets[e.factor] + position(&factor_neighbors[e.factor], e.variable))
        .collect();

    FactorGraph {
        factor_neighbors,
        variable_neighbors,
        fv_edges,
        vf_edges,
        fv_offsets,
        vf_offsets,
        fv_reverse,
        vf_reverse,
    }
}

fn offsets(lists: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::with_capacity(lists.len() + 1);
    out.push(0);
    for l in lists {
        out.push(out.last().unwrap() + l.len());
    }
    out
}
