use std::sync::Arc;

use log::{debug, info};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoder::{encode_prepared, encode_with_cache, encoder_backward, PreparedGraph};
use super::objective::{contrast_and_grad, objective_and_grad};
use super::{DgiParams, TrainConfig};
use crate::error::{DgiError, Result};
use crate::graph::normalize::normalize_lists;
use crate::graph::{
    apply_edge_flips, corrupt_cross_graph, sample_edge_flips, shuffle_permutation, subsample_patch,
    CorruptionConfig, CorruptionKind, Graph, NormKind,
};
use crate::tensor::{adam_step, AdamState, DenseMatrix};

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: DgiParams,
    /// Patch representations of the training graph under the returned
    /// parameters (empty for multi-graph training).
    pub embeddings: DenseMatrix,
    /// Objective `L` recorded at every step, before its update.
    pub losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// Random stream for the negative sample of `epoch`.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Corrupts a prepared graph, drawing from `rng` in the same order as
/// [`crate::graph::corrupt`] and sharing untouched components.
pub fn corrupt_prepared<R: Rng + ?Sized>(
    graph: &PreparedGraph,
    cfg: &CorruptionConfig,
    rng: &mut R,
) -> Result<PreparedGraph> {
    cfg.validate()?;
    let n = graph.node_count();
    let kind = graph.adjacency.kind();
    let xor = |g: &PreparedGraph, rng: &mut R| {
        let flips = sample_edge_flips(n, cfg.rho, rng);
        let lists = apply_edge_flips(&g.neighbors, &flips);
        let adjacency = normalize_lists(&lists, kind);
        PreparedGraph {
            neighbors: Arc::new(lists),
            features: Arc::clone(&g.features),
            perm: g.perm.clone(),
            adjacency: Arc::new(adjacency),
        }
    };
    let shuffle = |g: PreparedGraph, rng: &mut R| -> Result<PreparedGraph> {
        Ok(g.with_rows_permuted(shuffle_permutation(n, rng)))
    };
    match cfg.kind {
        CorruptionKind::FeatureShuffle => shuffle(graph.clone(), rng),
        CorruptionKind::EdgeXor => Ok(xor(graph, rng)),
        CorruptionKind::Both => {
            let g = xor(graph, rng);
            shuffle(g, rng)
        }
        CorruptionKind::CrossGraph => Err(DgiError::invalid(
            "cross-graph corruption needs a graph pool; use train_multigraph",
        )),
    }
}

/// One step: corrupt, encode both graphs, score, and take an Adam step
/// ascending the objective. Returns `L` before the update.
pub fn train_step<R: Rng + ?Sized>(
    params: &mut DgiParams,
    adam: &mut AdamState,
    graph: &PreparedGraph,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let neg = corrupt_prepared(graph, &cfg.corruption, rng)?;
    params.zero_grad();
    let loss = objective_and_grad(params, graph, &neg)?;
    if !loss.is_finite() {
        return Err(DgiError::NonFinite("training objective"));
    }
    adam_step(&mut params.params_mut(), adam, cfg.lr);
    Ok(loss)
}

fn check_graph(graph: &Graph, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if graph.feature_dim() != cfg.encoder.input_dim {
        return Err(DgiError::dims(
            "train",
            format!("graph has {} features, encoder expects {}", graph.feature_dim(), cfg.encoder.input_dim),
        ));
    }
    if graph.node_count() == 0 {
        return Err(DgiError::invalid("cannot train on an empty graph"));
    }
    Ok(())
}

/// Full-graph training: one step per epoch, early stopping on the
/// objective, best parameters restored.
pub fn train(graph: &Graph, cfg: &TrainConfig) -> Result<TrainReport> {
    check_graph(graph, cfg)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = DgiParams::init(cfg.encoder, &mut init_rng)?;
    let prepared = PreparedGraph::new(graph, cfg.encoder.variant.norm_kind());
    let mut adam = AdamState::new(params.params());

    let mut losses = Vec::new();
    let mut best_loss = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_values = params.values();
    let mut waited = 0;
    for epoch in 0..cfg.max_epochs {
        let neg = corrupt_prepared(&prepared, &cfg.corruption, &mut epoch_rng(cfg.corruption.seed, epoch))?;
        params.zero_grad();
        let loss = objective_and_grad(&mut params, &prepared, &neg)?;
        if !loss.is_finite() {
            return Err(DgiError::NonFinite("training objective"));
        }
        losses.push(loss);
        debug!("epoch {epoch} objective {loss:.6}");
        if loss > best_loss {
            best_loss = loss;
            best_epoch = epoch;
            best_values = params.values();
            waited = 0;
        } else {
            waited += 1;
            if cfg.patience.is_some_and(|p| waited >= p) {
                info!("early stop at epoch {epoch}; best epoch {best_epoch} objective {best_loss:.6}");
                break;
            }
        }
        adam_step(&mut params.params_mut(), &mut adam, cfg.lr);
    }
    params.set_values(&best_values)?;
    params.zero_grad();
    let embeddings = encode_prepared(&params, &prepared)?;
    Ok(TrainReport {
        params,
        embeddings,
        losses,
        best_epoch,
        best_loss,
    })
}

/// Minibatch training on sampled patches for `cfg.max_epochs` steps.
///
/// Each step samples `batch_size` distinct centers, subsamples a patch
/// around each, and corrupts every patch by shuffling its feature rows. The
/// summary is the readout over the positive central representations and
/// only central nodes are scored.
pub fn train_minibatch<R: Rng + ?Sized>(
    graph: &Graph,
    cfg: &TrainConfig,
    fanouts: &[usize],
    batch_size: usize,
    rng: &mut R,
) -> Result<TrainReport> {
    check_graph(graph, cfg)?;
    if batch_size == 0 {
        return Err(DgiError::Config {
            field: "batch_size".into(),
            message: "must be at least 1".into(),
        });
    }
    let norm = cfg.encoder.variant.norm_kind();
    let mut params = DgiParams::init(cfg.encoder, rng)?;
    let mut adam = AdamState::new(params.params());
    let shuffle = CorruptionConfig::feature_shuffle(cfg.corruption.seed);
    let width = cfg.encoder.hidden_dim;
    let mut losses = Vec::with_capacity(cfg.max_epochs);
    let n = graph.node_count();
    for step in 0..cfg.max_epochs {
        let centers = sample(rng, n, batch_size.min(n)).into_vec();
        let mut patches = Vec::with_capacity(centers.len());
        let mut h_pos = DenseMatrix::zeros(centers.len(), width);
        let mut h_neg = DenseMatrix::zeros(centers.len(), width);
        for (b, &center) in centers.iter().enumerate() {
            let (patch, c) = subsample_patch(graph, center, fanouts, rng)?;
            let pos = PreparedGraph::new(&patch, norm);
            let neg = corrupt_prepared(&pos, &shuffle, rng)?;
            let (hp, cache_p) = encode_with_cache(&params, &pos)?;
            let (hn, cache_n) = encode_with_cache(&params, &neg)?;
            h_pos.row_mut(b).copy_from_slice(hp.row(c));
            h_neg.row_mut(b).copy_from_slice(hn.row(c));
            patches.push((pos, neg, c, cache_p, cache_n));
        }
        params.zero_grad();
        let (loss, dh_pos, dh_neg) = contrast_and_grad(&mut params.disc, &h_pos, &h_neg)?;
        if !loss.is_finite() {
            return Err(DgiError::NonFinite("training objective"));
        }
        for (b, (pos, neg, c, cache_p, cache_n)) in patches.iter().enumerate() {
            let mut d = DenseMatrix::zeros(pos.node_count(), width);
            d.row_mut(*c).copy_from_slice(dh_pos.row(b));
            encoder_backward(&mut params, pos, cache_p, &d)?;
            d.fill(0.0);
            d.row_mut(*c).copy_from_slice(dh_neg.row(b));
            encoder_backward(&mut params, neg, cache_n, &d)?;
        }
        adam_step(&mut params.params_mut(), &mut adam, cfg.lr);
        debug!("minibatch step {step} objective {loss:.6}");
        losses.push(loss);
    }
    let embeddings = encode_prepared(&params, &PreparedGraph::new(graph, norm))?;
    let (best_epoch, best_loss) = best_of(&losses);
    Ok(TrainReport {
        params,
        embeddings,
        losses,
        best_epoch,
        best_loss,
    })
}

/// Training over a set of graphs for `cfg.max_epochs` epochs, one step per
/// graph. With cross-graph corruption the negative is another (or the same)
/// training graph with feature dropout; otherwise each graph is corrupted
/// on its own. The recorded loss is the per-epoch mean.
pub fn train_multigraph(graphs: &[Graph], cfg: &TrainConfig) -> Result<TrainReport> {
    let first = graphs
        .first()
        .ok_or_else(|| DgiError::invalid("multi-graph training needs at least one graph"))?;
    for g in graphs {
        check_graph(g, cfg)?;
    }
    let norm: NormKind = cfg.encoder.variant.norm_kind();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = DgiParams::init(cfg.encoder, &mut rng)?;
    let mut adam = AdamState::new(params.params());
    let prepared: Vec<PreparedGraph> = graphs.iter().map(|g| PreparedGraph::new(g, norm)).collect();
    let mut neg_rng = ChaCha8Rng::seed_from_u64(cfg.corruption.seed);
    let mut losses = Vec::with_capacity(cfg.max_epochs);
    for epoch in 0..cfg.max_epochs {
        let mut total = 0.0;
        for pos in &prepared {
            let neg = if cfg.is_cross_graph() {
                PreparedGraph::new(&corrupt_cross_graph(graphs, cfg.corruption.dropout_p, &mut neg_rng)?, norm)
            } else {
                corrupt_prepared(pos, &cfg.corruption, &mut neg_rng)?
            };
            params.zero_grad();
            let loss = objective_and_grad(&mut params, pos, &neg)?;
            if !loss.is_finite() {
                return Err(DgiError::NonFinite("training objective"));
            }
            adam_step(&mut params.params_mut(), &mut adam, cfg.lr);
            total += loss;
        }
        let mean = total / prepared.len() as f64;
        debug!("epoch {epoch} mean objective {mean:.6}");
        losses.push(mean);
    }
    let embeddings = encode_prepared(&params, &PreparedGraph::new(first, norm))?;
    let (best_epoch, best_loss) = best_of(&losses);
    Ok(TrainReport {
        params,
        embeddings,
        losses,
        best_epoch,
        best_loss,
    })
}

fn best_of(losses: &[f64]) -> (usize, f64) {
    losses
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, l)| if l > best.1 { (i, l) } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_graphs::random_graph;
    use crate::graph::{corrupt, CorruptionKind};
    use crate::model::objective::objective;
    use crate::model::{EncoderSpec, EncoderVariant};

    fn config(variant: EncoderVariant, f: usize, h: usize, seed: u64) -> TrainConfig {
        TrainConfig::new(EncoderSpec::new(variant, f, h).unwrap(), seed)
    }

    #[test]
    fn prepared_corruption_matches_graph_corruption() {
        let g = random_graph(12, 3, 0.3, 1);
        for kind in [CorruptionKind::FeatureShuffle, CorruptionKind::EdgeXor, CorruptionKind::Both] {
            for rho in [0.0, 0.2, 0.9] {
                let cfg = CorruptionConfig {
                    kind,
                    rho,
                    dropout_p: 0.0,
                    seed: 0,
                };
                let pos = PreparedGraph::new(&g, NormKind::Symmetric);
                let a = corrupt_prepared(&pos, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
                let b = PreparedGraph::new(
                    &corrupt(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap(),
                    NormKind::Symmetric,
                );
                assert_eq!(a.neighbors, b.neighbors);
                assert_eq!(a.features(), b.features());
                assert_eq!(a.adjacency, b.adjacency);
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let g = random_graph(10, 4, 0.3, 0);
        let mut cfg = config(EncoderVariant::Gcn1, 4, 8, 0);
        cfg.lr = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = DgiParams::init(cfg.encoder, &mut rng).unwrap();
        let before = params.values();
        let mut adam = AdamState::new(params.params());
        let pos = PreparedGraph::new(&g, NormKind::Symmetric);
        let l = train_step(&mut params, &mut adam, &pos, &cfg, &mut rng).unwrap();
        assert!(l.is_finite());
        assert_eq!(params.values(), before);
    }

    #[test]
    fn small_graph_objective_improves() {
        // two communities with distinct feature profiles
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = DenseMatrix::zeros(10, 6);
        let mut edges = Vec::new();
        for i in 0..10 {
            let block = i / 5;
            for k in 0..3 {
                x[(i, 3 * block + k)] = rng.gen_range(0.5..1.5);
            }
            for j in i + 1..10 {
                if j / 5 == block {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(x, edges).unwrap();
        let mut finals = Vec::new();
        for seed in 0..3 {
            let mut cfg = config(EncoderVariant::Gcn1, 6, 16, seed);
            cfg.lr = 0.01;
            cfg.max_epochs = 200;
            cfg.patience = None;
            let report = train(&g, &cfg).unwrap();
            assert_eq!(report.losses.len(), 200);
            let head: f64 = report.losses[..20].iter().sum::<f64>() / 20.0;
            let tail: f64 = report.losses[180..].iter().sum::<f64>() / 20.0;
            assert!(tail > head, "seed {seed}: {head} -> {tail}");
            finals.push(report.best_loss);
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!(mean > -0.3, "best objectives {finals:?}");
    }

    #[test]
    fn training_is_bit_reproducible() {
        let g = random_graph(15, 5, 0.2, 7);
        let mut cfg = config(EncoderVariant::Gcn1, 5, 8, 11);
        cfg.max_epochs = 30;
        cfg.corruption.kind = CorruptionKind::Both;
        cfg.corruption.rho = 0.05;
        let a = train(&g, &cfg).unwrap();
        let b = train(&g, &cfg).unwrap();
        assert_eq!(
            a.losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>(),
            b.losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.embeddings, b.embeddings);
    }

    #[test]
    fn single_epoch_runs_one_step() {
        let g = random_graph(6, 3, 0.4, 0);
        let mut cfg = config(EncoderVariant::Gcn1, 3, 4, 0);
        cfg.max_epochs = 1;
        let r = train(&g, &cfg).unwrap();
        assert_eq!(r.losses.len(), 1);
        assert_eq!(r.best_epoch, 0);
    }

    #[test]
    fn best_parameters_reproduce_best_objective() {
        let g = random_graph(20, 5, 0.2, 4);
        let mut cfg = config(EncoderVariant::Gcn1, 5, 8, 2);
        cfg.lr = 0.05;
        cfg.max_epochs = 60;
        cfg.patience = Some(5);
        let r = train(&g, &cfg).unwrap();
        let pos = PreparedGraph::new(&g, NormKind::Symmetric);
        let neg = corrupt_prepared(&pos, &cfg.corruption, &mut epoch_rng(cfg.corruption.seed, r.best_epoch)).unwrap();
        let l = objective(&r.params, &pos, &neg).unwrap();
        assert_eq!(l, r.best_loss);
        assert_eq!(r.best_loss, r.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn rejects_cross_graph_for_single_graph_training() {
        let g = random_graph(6, 3, 0.4, 0);
        let mut cfg = config(EncoderVariant::Gcn1, 3, 4, 0);
        cfg.corruption.kind = CorruptionKind::CrossGraph;
        assert!(train(&g, &cfg).is_err());
    }

    #[test]
    fn minibatch_degenerate_patch() {
        let g = random_graph(5, 3, 0.5, 0);
        let mut cfg = config(EncoderVariant::MeanpoolSkip3, 3, 4, 0);
        cfg.max_epochs = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = train_minibatch(&g, &cfg, &[0], 1, &mut rng).unwrap();
        assert_eq!(r.losses.len(), 3);
        assert!(r.losses.iter().all(|l| l.is_finite()));
    }

    fn community_graph(n: usize, f: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = 4;
        let mut x = DenseMatrix::zeros(n, f);
        for i in 0..n {
            let b = i % blocks;
            for k in 0..f {
                let mean = if k % blocks == b { 1.0 } else { 0.0 };
                x[(i, k)] = mean + rng.gen_range(-0.3..0.3);
            }
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if i % blocks == j % blocks { 0.08 } else { 0.005 };
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(x, edges).unwrap()
    }

    #[test]
    fn minibatch_improves_over_chance() {
        let g = community_graph(200, 8, 1);
        let mut cfg = config(EncoderVariant::MeanpoolSkip3, 8, 16, 0);
        cfg.max_epochs = 50;
        cfg.lr = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = train_minibatch(&g, &cfg, &[5, 5], 16, &mut rng).unwrap();
        let head: f64 = r.losses[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = r.losses[40..].iter().sum::<f64>() / 10.0;
        assert!(tail > 0.5f64.ln() + 0.02 && tail > head, "objective {head} -> {tail}");

        let mut again = ChaCha8Rng::seed_from_u64(9);
        let r2 = train_minibatch(&g, &cfg, &[5, 5], 16, &mut again).unwrap();
        assert_eq!(r.losses, r2.losses);
    }

    #[test]
    fn multigraph_cross_graph_training_runs() {
        let graphs: Vec<Graph> = (0..3).map(|s| community_graph(30 + 5 * s as usize, 8, s)).collect();
        let mut cfg = config(EncoderVariant::MeanpoolDenseSkip3, 8, 8, 0);
        cfg.corruption.kind = CorruptionKind::CrossGraph;
        cfg.corruption.dropout_p = 0.2;
        cfg.max_epochs = 30;
        cfg.lr = 0.005;
        let r = train_multigraph(&graphs, &cfg).unwrap();
        assert_eq!(r.losses.len(), 30);
        assert!(r.losses.iter().all(|l| l.is_finite() && *l <= 0.0));
        assert_eq!(r.embeddings.rows(), 30);
        assert!(train_multigraph(&[], &cfg).is_err());
    }
}
