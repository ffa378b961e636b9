//! Graph data model, dataset ingestion, propagation operators, corruption
//! functions and neighbourhood subsampling.

mod corrupt;
mod io;
pub(crate) mod normalize;
mod sampling;

pub use corrupt::{
    apply_edge_flips, corrupt, corrupt_cross_graph, sample_edge_flips, shuffle_permutation,
    CorruptionConfig, CorruptionKind,
};
pub use io::{load_dataset, parse_dataset, write_dataset};
pub use normalize::{normalize, spmm, NormKind, NormalizedAdjacency};
pub use sampling::subsample_patch;

use crate::error::{DgiError, Result};
use crate::tensor::DenseMatrix;

/// Per-node supervision.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// One class id per node; `None` for unlabeled nodes.
    Single {
        num_classes: usize,
        ids: Vec<Option<usize>>,
    },
    /// A sorted set of label ids per node.
    Multi {
        num_classes: usize,
        sets: Vec<Vec<usize>>,
    },
}

impl Labels {
    pub fn num_classes(&self) -> usize {
        match self {
            Labels::Single { num_classes, .. } | Labels::Multi { num_classes, .. } => *num_classes,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Single { ids, .. } => ids.len(),
            Labels::Multi { sets, .. } => sets.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, nodes: &[usize]) -> Labels {
        match self {
            Labels::Single { num_classes, ids } => Labels::Single {
                num_classes: *num_classes,
                ids: nodes.iter().map(|&i| ids[i]).collect(),
            },
            Labels::Multi { num_classes, sets } => Labels::Multi {
                num_classes: *num_classes,
                sets: nodes.iter().map(|&i| sets[i].clone()).collect(),
            },
        }
    }
}

/// Disjoint train/validation/test node sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        let mut seen = vec![false; node_count];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= node_count {
                return Err(DgiError::IndexOutOfRange {
                    index: i,
                    len: node_count,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(DgiError::invalid(format!("node {i} appears in more than one split set")));
            }
        }
        Ok(())
    }
}

/// Unweighted undirected graph with dense node features.
///
/// Adjacency is stored as sorted, deduplicated neighbour lists, mirrored in
/// both directions and without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    features: DenseMatrix,
    labels: Option<Labels>,
    split: Option<Split>,
}

impl Graph {
    /// Builds a graph from features and an undirected edge list. Edges are
    /// symmetrized and deduplicated; self-loops are dropped.
    pub fn new(features: DenseMatrix, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = features.rows();
        let mut neighbors = vec![Vec::new(); n];
        for (a, b) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(DgiError::IndexOutOfRange { index: idx, len: n });
                }
            }
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            neighbors,
            features,
            labels: None,
            split: None,
        })
    }

    /// Builds a graph from already sorted, symmetric neighbour lists.
    pub(crate) fn from_neighbors_unchecked(neighbors: Vec<Vec<usize>>, features: DenseMatrix) -> Self {
        debug_assert_eq!(neighbors.len(), features.rows());
        Self {
            neighbors,
            features,
            labels: None,
            split: None,
        }
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(DgiError::dims(
                "Graph::with_labels",
                format!("{} labels for {} nodes", labels.len(), self.node_count()),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        split.validate(self.node_count())?;
        self.split = Some(split);
        Ok(self)
    }

    pub fn with_features(mut self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.node_count() {
            return Err(DgiError::dims(
                "Graph::with_features",
                format!("{} feature rows for {} nodes", features.rows(), self.node_count()),
            ));
        }
        self.features = features;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    /// Same structure and features, without labels or split.
    pub fn unlabeled(&self) -> Graph {
        Graph::from_neighbors_unchecked(self.neighbors.clone(), self.features.clone())
    }

    /// Scales every feature row to sum to 1 (rows summing to 0 are left alone).
    pub fn row_normalized_features(&self) -> DenseMatrix {
        let mut x = self.features.clone();
        for i in 0..x.rows() {
            let row = x.row_mut(i);
            let sum: f64 = row.iter().sum();
            if sum != 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        x
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`. Labels are
    /// carried along; the split is remapped.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let mut inverse = vec![usize::MAX; n];
        if perm.len() != n {
            return Err(DgiError::dims("Graph::relabel", format!("{} entries for {n} nodes", perm.len())));
        }
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(DgiError::invalid("relabel expects a permutation"));
            }
            inverse[old] = new;
        }
        let neighbors = perm
            .iter()
            .map(|&old| {
                let mut list: Vec<usize> = self.neighbors[old].iter().map(|&j| inverse[j]).collect();
                list.sort_unstable();
                list
            })
            .collect();
        let mut g = Graph::from_neighbors_unchecked(neighbors, self.features.select_rows(perm)?);
        g.labels = self.labels.as_ref().map(|l| l.select(perm));
        g.split = self.split.as_ref().map(|s| {
            let map = |v: &Vec<usize>| v.iter().map(|&i| inverse[i]).collect();
            Split {
                train: map(&s.train),
                val: map(&s.val),
                test: map(&s.test),
            }
        });
        Ok(g)
    }

    /// Subgraph induced by `nodes` (new node `k` is `nodes[k]`); labels and split are dropped.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let n = self.node_count();
        let mut local = std::collections::HashMap::with_capacity(nodes.len());
        for (k, &v) in nodes.iter().enumerate() {
            if v >= n {
                return Err(DgiError::IndexOutOfRange { index: v, len: n });
            }
            if local.insert(v, k).is_some() {
                return Err(DgiError::invalid(format!("node {v} listed twice in subgraph")));
            }
        }
        let neighbors = nodes
            .iter()
            .map(|&v| {
                let mut list: Vec<usize> =
                    self.neighbors[v].iter().filter_map(|u| local.get(u).copied()).collect();
                list.sort_unstable();
                list
            })
            .collect();
        Ok(Graph::from_neighbors_unchecked(neighbors, self.features.select_rows(nodes)?))
    }

    /// Checks every structural invariant; used by tests and after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if self.features.rows() != n {
            return Err(DgiError::dims("Graph", "feature rows differ from node count"));
        }
        for (i, list) in self.neighbors.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DgiError::invalid(format!("neighbour list of {i} not strictly sorted")));
            }
            for &j in list {
                if j >= n {
                    return Err(DgiError::IndexOutOfRange { index: j, len: n });
                }
                if j == i {
                    return Err(DgiError::invalid(format!("self-loop at {i}")));
                }
                if self.neighbors[j].binary_search(&i).is_err() {
                    return Err(DgiError::invalid(format!("edge {i}->{j} is not mirrored")));
                }
            }
        }
        if let Some(split) = &self.split {
            split.validate(n)?;
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(DgiError::dims("Graph", "label count differs from node count"));
            }
        }
        Ok(())
    }
}
