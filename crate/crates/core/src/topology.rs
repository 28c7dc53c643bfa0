use std::fmt;

use petgraph::unionfind::UnionFind;

use crate::graph::FactorGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyClass {
    Forest,
    ForestPlusSingleLoop,
    MultiLoop,
}

impl fmt::Display for TopologyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyClass::Forest => "forest",
            TopologyClass::ForestPlusSingleLoop => "forest-plus-single-loop",
            TopologyClass::MultiLoop => "multi-loop",
        })
    }
}

/// Size and cycle count of one connected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentCycles {
    pub variables: usize,
    pub factors: usize,
    pub edges: usize,
    /// `E − V + 1`.
    pub cyclomatic: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub class: TopologyClass,
    /// Components ordered by their lowest-indexed node.
    pub components: Vec<ComponentCycles>,
}

impl Topology {
    pub fn total_cycles(&self) -> usize {
        self.components.iter().map(|c| c.cyclomatic).sum()
    }
}

pub fn classify_topology(graph: &FactorGraph) -> Topology {
    let nv = graph.num_variables();
    let total = nv + graph.num_factors();
    let mut uf = UnionFind::<usize>::new(total);
    for e in graph.fv_edges() {
        uf.union(e.variable, nv + e.factor);
    }

    let mut slot_of_root = vec![usize::MAX; total];
    let mut components: Vec<ComponentCycles> = Vec::new();
    for node in 0..total {
        let root = uf.find(node);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = components.len();
            components.push(ComponentCycles {
                variables: 0,
                factors: 0,
                edges: 0,
                cyclomatic: 0,
            });
        }
        let c = &mut components[slot_of_root[root]];
        if node < nv {
            c.variables += 1;
        } else {
            c.factors += 1;
        }
    }
    for e in graph.fv_edges() {
        components[slot_of_root[uf.find(e.variable)]].edges += 1;
    }
    for c in &mut components {
        // connected: E ≥ V − 1
        c.cyclomatic = c.edges + 1 - (c.variables + c.factors);
    }

    let cycles: usize = components.iter().map(|c| c.cyclomatic).sum();
    let class = match cycles {
        0 => TopologyClass::Forest,
        1 => TopologyClass::ForestPlusSingleLoop,
        _ => TopologyClass::MultiLoop,
    };
    Topology { class, components }
}
