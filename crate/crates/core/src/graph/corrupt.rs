use rand::seq::SliceRandom;
use rand::Rng;

use super::Graph;
use crate::error::{DgiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    FeatureShuffle,
    EdgeXor,
    /// Edge-XOR followed by a feature shuffle.
    Both,
    CrossGraph,
}

impl CorruptionKind {
    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::FeatureShuffle => "feature-shuffle",
            CorruptionKind::EdgeXor => "edge-xor",
            CorruptionKind::Both => "both",
            CorruptionKind::CrossGraph => "cross-graph",
        }
    }
}

impl std::str::FromStr for CorruptionKind {
    type Err = DgiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature-shuffle" | "shuffle" => Ok(CorruptionKind::FeatureShuffle),
            "edge-xor" | "xor" => Ok(CorruptionKind::EdgeXor),
            "both" => Ok(CorruptionKind::Both),
            "cross-graph" => Ok(CorruptionKind::CrossGraph),
            other => Err(DgiError::invalid(format!("unknown corruption `{other}`"))),
        }
    }
}

impl std::fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionConfig {
    pub kind: CorruptionKind,
    /// Edge flip probability; read by `EdgeXor` and `Both`.
    pub rho: f64,
    /// Feature dropout; read by `CrossGraph`.
    pub dropout_p: f64,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn feature_shuffle(seed: u64) -> Self {
        Self {
            kind: CorruptionKind::FeatureShuffle,
            rho: 0.0,
            dropout_p: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(DgiError::Config {
                field: "rho".into(),
                message: format!("must lie in [0, 1], got {}", self.rho),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(DgiError::Config {
                field: "dropout_p".into(),
                message: format!("must lie in [0, 1), got {}", self.dropout_p),
            });
        }
        Ok(())
    }
}

/// Uniform random permutation of `0..n`.
pub fn shuffle_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Unordered pairs `i < j` selected independently with probability `rho`,
/// in increasing lexicographic order. Uses geometric gaps so the cost is
/// proportional to the number of selected pairs.
pub fn sample_edge_flips<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if rho <= 0.0 || total == 0 {
        return Vec::new();
    }
    let mut flips = Vec::with_capacity(((total as f64) * rho * 1.05) as usize + 16);
    // pair index k maps to row i with row_start(i) <= k < row_start(i + 1)
    let mut i = 0usize;
    let mut row_start = 0usize;
    let mut row_end = n - 1;
    let mut advance = |k: usize, flips: &mut Vec<(usize, usize)>| {
        while k >= row_end {
            i += 1;
            row_start = row_end;
            row_end += n - 1 - i;
        }
        flips.push((i, i + 1 + (k - row_start)));
    };
    if rho >= 1.0 {
        for k in 0..total {
            advance(k, &mut flips);
        }
        return flips;
    }
    let log_q = (-rho).ln_1p();
    let mut k = 0usize;
    loop {
        let u: f64 = rng.gen();
        // 1 - u lies in (0, 1]
        let gap = ((1.0 - u).ln() / log_q).floor();
        if !gap.is_finite() || gap >= (total - k) as f64 {
            break;
        }
        k += gap as usize;
        advance(k, &mut flips);
        k += 1;
        if k >= total {
            break;
        }
    }
    flips
}

/// XORs the sorted, symmetric adjacency with the given unordered pairs.
pub fn apply_edge_flips(adjacency: &[Vec<usize>], flips: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut per_node: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in flips {
        per_node[i].push(j);
        per_node[j].push(i);
    }
    adjacency
        .iter()
        .zip(per_node)
        .map(|(neigh, mut toggles)| {
            toggles.sort_unstable();
            symmetric_difference(neigh, &toggles)
        })
        .collect()
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
    out
}

/// Produces a negative graph. Labels and split are dropped.
pub fn corrupt<R: Rng + ?Sized>(graph: &Graph, cfg: &CorruptionConfig, rng: &mut R) -> Result<Graph> {
    cfg.validate()?;
    let n = graph.node_count();
    let xor = |g: &Graph, rng: &mut R| {
        let flips = sample_edge_flips(n, cfg.rho, rng);
        Graph::from_neighbors_unchecked(apply_edge_flips(g.adjacency(), &flips), g.features().clone())
    };
    let shuffle = |g: Graph, rng: &mut R| -> Result<Graph> {
        let perm = shuffle_permutation(n, rng);
        let x = g.features().select_rows(&perm)?;
        g.with_features(x)
    };
    match cfg.kind {
        CorruptionKind::FeatureShuffle => shuffle(graph.unlabeled(), rng),
        CorruptionKind::EdgeXor => Ok(xor(graph, rng)),
        CorruptionKind::Both => {
            let g = xor(graph, rng);
            shuffle(g, rng)
        }
        CorruptionKind::CrossGraph => Err(DgiError::invalid(
            "cross-graph corruption needs a graph pool; use corrupt_cross_graph",
        )),
    }
}

/// Picks a graph uniformly from `pool` and applies inverted dropout to its features.
pub fn corrupt_cross_graph<R: Rng + ?Sized>(pool: &[Graph], dropout_p: f64, rng: &mut R) -> Result<Graph> {
    if pool.is_empty() {
        return Err(DgiError::invalid("cross-graph corruption needs a non-empty pool"));
    }
    if !(0.0..1.0).contains(&dropout_p) {
        return Err(DgiError::Config {
            field: "dropout_p".into(),
            message: format!("must lie in [0, 1), got {dropout_p}"),
        });
    }
    let picked = &pool[rng.gen_range(0..pool.len())];
    let mut x = picked.features().clone();
    if dropout_p > 0.0 {
        let keep_scale = 1.0 / (1.0 - dropout_p);
        for v in x.as_mut_slice() {
            if rng.gen::<f64>() < dropout_p {
                *v = 0.0;
            } else {
                *v *= keep_scale;
            }
        }
    }
    picked.unlabeled().with_features(x)
}

#[cfg(test)]
mod tests {
    use super::super::test_graphs::{random_graph, triangle};
    use super::*;
    use crate::tensor::DenseMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(kind: CorruptionKind, rho: f64) -> CorruptionConfig {
        CorruptionConfig {
            kind,
            rho,
            dropout_p: 0.0,
            seed: 0,
        }
    }

    fn sorted_rows(m: &DenseMatrix) -> Vec<Vec<u64>> {
        let mut rows: Vec<Vec<u64>> = m.iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        rows.sort();
        rows
    }

    #[test]
    fn identity_permutation_keeps_features() {
        let g = random_graph(5, 3, 0.5, 0);
        let x = g.features().select_rows(&[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(&x, g.features());
    }

    #[test]
    fn xor_rho_zero_is_identity() {
        let g = random_graph(12, 2, 0.3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = corrupt(&g, &cfg(CorruptionKind::EdgeXor, 0.0), &mut rng).unwrap();
        assert_eq!(c, g.unlabeled());
    }

    #[test]
    fn xor_rho_one_complements_triangle() {
        let g = triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = corrupt(&g, &cfg(CorruptionKind::EdgeXor, 1.0), &mut rng).unwrap();
        assert_eq!(c.edge_count(), 0);
        let empty = Graph::new(DenseMatrix::identity(3), []).unwrap();
        let back = corrupt(&empty, &cfg(CorruptionKind::EdgeXor, 1.0), &mut rng).unwrap();
        assert_eq!(back.edge_count(), 3);
    }

    #[test]
    fn flip_pairs_enumerate_every_pair_at_rho_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let flips = sample_edge_flips(5, 1.0, &mut rng);
        let expect: Vec<_> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        assert_eq!(flips, expect);
    }

    #[test]
    fn flip_rate_matches_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let total = (n * (n - 1) / 2) as f64;
        for rho in [0.001, 0.05, 0.5, 0.9] {
            let flips = sample_edge_flips(n, rho, &mut rng);
            let rate = flips.len() as f64 / total;
            assert!((rate - rho).abs() < 4.0 * (rho * (1.0 - rho) / total).sqrt() + 1e-4, "{rho} {rate}");
            assert!(flips.windows(2).all(|w| w[0] < w[1]));
            assert!(flips.iter().all(|&(i, j)| i < j && j < n));
        }
    }

    #[test]
    fn flip_marginals_are_uniform_over_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let mut counts = vec![vec![0u32; n]; n];
        let trials = 20_000;
        for _ in 0..trials {
            for (i, j) in sample_edge_flips(n, 0.3, &mut rng) {
                counts[i][j] += 1;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let f = counts[i][j] as f64 / trials as f64;
                assert!((f - 0.3).abs() < 0.015, "pair ({i},{j}) freq {f}");
            }
        }
    }

    #[test]
    fn cross_graph_rejected_by_corrupt() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(corrupt(&triangle(), &cfg(CorruptionKind::CrossGraph, 0.0), &mut rng).is_err());
        assert!(corrupt(&triangle(), &cfg(CorruptionKind::EdgeXor, 1.5), &mut rng).is_err());
    }

    #[test]
    fn cross_graph_single_pool_no_dropout() {
        let g = random_graph(4, 3, 0.5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = corrupt_cross_graph(std::slice::from_ref(&g), 0.0, &mut rng).unwrap();
        assert_eq!(c, g.unlabeled());
        assert!(corrupt_cross_graph(&[], 0.0, &mut rng).is_err());
    }

    #[test]
    fn inverted_dropout_scaling_and_rate() {
        let g = Graph::new(DenseMatrix::filled(50, 40, 1.0), []).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut zeros = 0usize;
        let mut total = 0usize;
        for _ in 0..50 {
            let c = corrupt_cross_graph(std::slice::from_ref(&g), 0.5, &mut rng).unwrap();
            for &v in c.features().as_slice() {
                assert!(v == 0.0 || v == 2.0);
                zeros += (v == 0.0) as usize;
                total += 1;
            }
        }
        let frac = zeros as f64 / total as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn cross_graph_picks_uniformly() {
        let pool: Vec<Graph> = (0..4).map(|k| random_graph(k + 1, 1, 0.0, k as u64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut hits = [0u32; 4];
        for _ in 0..8000 {
            hits[corrupt_cross_graph(&pool, 0.0, &mut rng).unwrap().node_count() - 1] += 1;
        }
        for h in hits {
            assert!((h as f64 / 8000.0 - 0.25).abs() < 0.02);
        }
    }

    proptest! {
        #[test]
        fn shuffle_preserves_row_multiset_and_adjacency(n in 1usize..25, seed in any::<u64>()) {
            let g = random_graph(n, 3, 0.3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let c = corrupt(&g, &CorruptionConfig::feature_shuffle(0), &mut rng).unwrap();
            prop_assert_eq!(c.adjacency(), g.adjacency());
            prop_assert_eq!(sorted_rows(c.features()), sorted_rows(g.features()));
            prop_assert!(c.labels().is_none() && c.split().is_none());
        }

        #[test]
        fn xor_output_is_valid(n in 1usize..25, rho in 0.0f64..=1.0, p in 0.0f64..1.0, seed in any::<u64>()) {
            let g = random_graph(n, 1, p, seed);
            for kind in [CorruptionKind::EdgeXor, CorruptionKind::Both] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c = corrupt(&g, &cfg(kind, rho), &mut rng).unwrap();
                prop_assert!(c.validate().is_ok());
            }
        }

        #[test]
        fn corruption_is_reproducible(seed in any::<u64>(), rho in 0.0f64..=1.0) {
            let g = random_graph(15, 2, 0.3, 1);
            for kind in [CorruptionKind::FeatureShuffle, CorruptionKind::EdgeXor, CorruptionKind::Both] {
                let a = corrupt(&g, &cfg(kind, rho), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let b = corrupt(&g, &cfg(kind, rho), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
