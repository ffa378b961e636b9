use std::collections::HashMap;

use rand::Rng;

use super::Graph;
use crate::error::{DgiError, Result};

/// Layered neighbourhood sampling with replacement around `center`.
///
/// Layer `k` draws `fanouts[k]` neighbours for every node sampled in layer
/// `k - 1` (counting repeats). The returned patch is the subgraph induced by
/// the distinct sampled nodes, with the center at index 0.
pub fn subsample_patch<R: Rng + ?Sized>(
    graph: &Graph,
    center: usize,
    fanouts: &[usize],
    rng: &mut R,
) -> Result<(Graph, usize)> {
    let n = graph.node_count();
    if center >= n {
        return Err(DgiError::IndexOutOfRange { index: center, len: n });
    }
    if fanouts.is_empty() {
        return Err(DgiError::invalid("fanouts must be non-empty"));
    }
    let mut order = vec![center];
    let mut seen = HashMap::from([(center, 0usize)]);
    let mut frontier = vec![center];
    for &fanout in fanouts {
        let mut next = Vec::with_capacity(frontier.len() * fanout);
        for &u in &frontier {
            let neigh = graph.neighbors(u);
            if neigh.is_empty() {
                continue;
            }
            for _ in 0..fanout {
                let v = neigh[rng.gen_range(0..neigh.len())];
                next.push(v);
                seen.entry(v).or_insert_with(|| {
                    order.push(v);
                    order.len() - 1
                });
            }
        }
        frontier = next;
    }
    Ok((graph.induced_subgraph(&order)?, 0))
}

#[cfg(test)]
mod tests {
    use super::super::test_graphs::{path2, random_graph};
    use super::*;
    use crate::tensor::DenseMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_center_is_alone() {
        let g = Graph::new(DenseMatrix::identity(3), [(1, 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (patch, c) = subsample_patch(&g, 0, &[10, 10, 25], &mut rng).unwrap();
        assert_eq!((patch.node_count(), c), (1, 0));
        assert_eq!(patch.features().row(0), g.features().row(0));
    }

    #[test]
    fn forced_sample_on_path() {
        let g = path2(&[1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (patch, c) = subsample_patch(&g, 0, &[1], &mut rng).unwrap();
        assert_eq!(patch.node_count(), 2);
        assert_eq!(c, 0);
        assert!(patch.has_edge(0, 1));
        assert_eq!(patch.features().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn star_leaves_sampled_uniformly() {
        let x = DenseMatrix::new(6, 1, (0..6).map(f64::from).collect()).unwrap();
        let g = Graph::new(x, (1..6).map(|l| (0, l))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut hits = [0usize; 6];
        let trials = 10_000;
        for _ in 0..trials {
            let (patch, _) = subsample_patch(&g, 0, &[1], &mut rng).unwrap();
            assert_eq!(patch.node_count(), 2);
            hits[patch.features()[(1, 0)] as usize] += 1;
        }
        for h in &hits[1..] {
            let f = *h as f64 / trials as f64;
            assert!((f - 0.2).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn maximum_patch_size_for_default_fanouts() {
        let g = Graph::new(DenseMatrix::zeros(3000, 1), (1..3000).map(|v| (0, v))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (patch, _) = subsample_patch(&g, 0, &[10, 10, 25], &mut rng).unwrap();
        assert!(patch.node_count() <= 1 + 10 + 100 + 2500);
    }

    #[test]
    fn center_out_of_range() {
        let g = path2(&[0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(subsample_patch(&g, 2, &[1], &mut rng).is_err());
        assert!(subsample_patch(&g, 0, &[], &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn patch_is_valid_and_contains_center(n in 1usize..40, p in 0.0f64..0.5, seed in any::<u64>(), c in any::<prop::sample::Index>()) {
            let g = random_graph(n, 2, p, seed);
            let center = c.index(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (patch, pc) = subsample_patch(&g, center, &[3, 2], &mut rng).unwrap();
            prop_assert!(pc < patch.node_count());
            prop_assert_eq!(patch.features().row(pc), g.features().row(center));
            prop_assert!(patch.validate().is_ok());
            prop_assert!(patch.node_count() <= 1 + 3 + 6);
        }
    }
}
