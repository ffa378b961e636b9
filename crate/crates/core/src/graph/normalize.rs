use super::Graph;
use crate::error::{DgiError, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}`
    Symmetric,
    /// `D̂^{-1} (A + I)`
    Row,
}

impl std::str::FromStr for NormKind {
    type Err = DgiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" | "sym" => Ok(NormKind::Symmetric),
            "row" => Ok(NormKind::Row),
            other => Err(DgiError::invalid(format!("unknown normalization `{other}`"))),
        }
    }
}

/// Propagation operator over `A + I`, written as `Dl (A + I) Dr` with
/// diagonal scalings `Dl`, `Dr`.
///
/// Graphs denser than half of all pairs (as produced by edge-XOR at large
/// flip rates) are stored through their complement `C = J - (A + I)`, so
/// products cost `O(nnz(C))` instead of `O(N²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    kind: NormKind,
    nnz: usize,
    repr: Repr,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Sparse {
        matrix: CsrMatrix,
        transpose: Option<CsrMatrix>,
    },
    Complement {
        complement: CsrMatrix,
        left: Vec<f64>,
        right: Vec<f64>,
    },
}

impl NormalizedAdjacency {
    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        match &self.repr {
            Repr::Sparse { matrix, .. } => matrix.rows(),
            Repr::Complement { left, .. } => left.len(),
        }
    }

    /// Number of structural nonzeros of `A + I`.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn is_complement(&self) -> bool {
        matches!(self.repr, Repr::Complement { .. })
    }

    /// `op · dense`
    pub fn apply(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.repr {
            Repr::Sparse { matrix, .. } => matrix.spmm(dense),
            Repr::Complement {
                complement,
                left,
                right,
            } => complement_apply(complement, left, right, dense),
        }
    }

    /// `opᵀ · dense`
    pub fn apply_transpose(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.repr {
            Repr::Sparse { matrix, transpose } => transpose.as_ref().unwrap_or(matrix).spmm(dense),
            Repr::Complement {
                complement,
                left,
                right,
            } => complement_apply(complement, right, left, dense),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.node_count();
        self.apply(&DenseMatrix::identity(n)).expect("square operator")
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let ones = DenseMatrix::filled(self.node_count(), 1, 1.0);
        self.apply(&ones).expect("square operator").into_vec()
    }
}

fn complement_apply(c: &CsrMatrix, left: &[f64], right: &[f64], dense: &DenseMatrix) -> Result<DenseMatrix> {
    if dense.rows() != left.len() {
        return Err(DgiError::dims(
            "spmm",
            format!("operator over {} nodes x {:?}", left.len(), dense.shape()),
        ));
    }
    let mut scaled = dense.clone();
    for (i, &r) in right.iter().enumerate() {
        scaled.row_mut(i).iter_mut().for_each(|v| *v *= r);
    }
    let total = scaled.matvec_t(&vec![1.0; left.len()])?;
    let mut out = c.spmm(&scaled)?;
    for (i, &l) in left.iter().enumerate() {
        for (o, t) in out.row_mut(i).iter_mut().zip(&total) {
            *o = l * (t - *o);
        }
    }
    Ok(out)
}

pub fn normalize(graph: &Graph, kind: NormKind) -> NormalizedAdjacency {
    normalize_lists(graph.adjacency(), kind)
}

/// Normalizes sorted, symmetric, loop-free neighbour lists.
pub(crate) fn normalize_lists(adjacency: &[Vec<usize>], kind: NormKind) -> NormalizedAdjacency {
    let n = adjacency.len();
    let inv_deg: Vec<f64> = adjacency.iter().map(|l| 1.0 / (l.len() + 1) as f64).collect();
    let inv_sqrt: Vec<f64> = inv_deg.iter().map(|d| d.sqrt()).collect();
    let nnz = adjacency.iter().map(Vec::len).sum::<usize>() + n;
    if nnz > n * n / 2 + 1 {
        let (left, right) = match kind {
            NormKind::Symmetric => (inv_sqrt.clone(), inv_sqrt),
            NormKind::Row => (inv_deg, vec![1.0; n]),
        };
        return NormalizedAdjacency {
            kind,
            nnz,
            repr: Repr::Complement {
                complement: complement_pattern(adjacency),
                left,
                right,
            },
        };
    }
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    indptr.push(0);
    for (i, neigh) in adjacency.iter().enumerate() {
        let split = neigh.partition_point(|&j| j < i);
        let cols = neigh[..split].iter().chain(std::iter::once(&i)).chain(&neigh[split..]);
        for &j in cols {
            indices.push(j);
            values.push(match kind {
                NormKind::Symmetric => inv_sqrt[i] * inv_sqrt[j],
                NormKind::Row => inv_deg[i],
            });
        }
        indptr.push(indices.len());
    }
    let matrix = CsrMatrix::new(n, n, indptr, indices, values).expect("pattern of A + I is valid CSR");
    let transpose = match kind {
        NormKind::Symmetric => None,
        NormKind::Row => Some(matrix.transpose()),
    };
    NormalizedAdjacency {
        kind,
        nnz,
        repr: Repr::Sparse { matrix, transpose },
    }
}

/// 0/1 pattern of node pairs `i != j` that are not adjacent.
fn complement_pattern(adjacency: &[Vec<usize>]) -> CsrMatrix {
    let n = adjacency.len();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    indptr.push(0);
    for (i, neigh) in adjacency.iter().enumerate() {
        let mut next = neigh.iter().peekable();
        for j in 0..n {
            if next.peek() == Some(&&j) {
                next.next();
            } else if j != i {
                indices.push(j);
            }
        }
        indptr.push(indices.len());
    }
    let values = vec![1.0; indices.len()];
    CsrMatrix::new(n, n, indptr, indices, values).expect("complement pattern is valid CSR")
}

/// Sparse-dense product `op · dense`; rows are accumulated in column order.
pub fn spmm(op: &NormalizedAdjacency, dense: &DenseMatrix) -> Result<DenseMatrix> {
    op.apply(dense)
}
