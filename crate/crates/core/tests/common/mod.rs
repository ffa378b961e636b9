//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use dgi::graph::{
    corrupt, normalize, CorruptionConfig, CorruptionKind, Graph, Labels, NormKind, Split,
};
use dgi::model::{
    dgi_loss, encode, encoder_backward, encode_with_cache, objective, objective_and_grad, readout, readout_backward,
    DgiParams, EncoderSpec, EncoderVariant, PreparedGraph,
};
use dgi::tensor::ops::{
    concat_cols_backward, matmul_backward, mean_rows_backward, prelu, prelu_backward, sigmoid_backward, sigmoid_vec,
};
use dgi::tensor::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// Erdős–Rényi graph with uniform features in [0.1, 1).
pub fn random_graph(n: usize, f: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let x = DenseMatrix::new(n, f, (0..n * f).map(|_| rng.gen_range(0.1..1.0)).collect()).unwrap();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(x, edges).unwrap()
}

/// Planted partition: `classes` communities of `per_class` nodes, dense
/// inside, sparse across, with class-dependent noisy features. Every node is
/// labeled; the split puts `train_per_class` nodes of each class in train,
/// the rest alternate between val and test.
pub fn planted_graph(classes: usize, per_class: usize, f: usize, train_per_class: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = classes * per_class;
    let class = |i: usize| i / per_class;
    let mut x = DenseMatrix::zeros(n, f);
    for i in 0..n {
        for j in 0..f {
            let signal = if j % classes == class(i) { 0.6 } else { 0.0 };
            x.row_mut(i)[j] = if rng.gen_bool(0.15 + signal) { 1.0 } else { 0.0 };
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if class(i) == class(j) { 0.3 } else { 0.01 };
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let mut split = Split::default();
    for i in 0..n {
        let within = i % per_class;
        if within < train_per_class {
            split.train.push(i);
        } else if within % 2 == 0 {
            split.val.push(i);
        } else {
            split.test.push(i);
        }
    }
    Graph::new(x, edges)
        .unwrap()
        .with_labels(Labels::Single {
            num_classes: classes,
            ids: (0..n).map(|i| Some(class(i))).collect(),
        })
        .unwrap()
        .with_split(split)
        .unwrap()
}

/// One gradient comparison: a name and its worst relative error.
pub type GradResult = (String, f64);

const STEP: f64 = 1e-5;
/// Central differences at `STEP` carry roughly 1e-11 of cancellation noise
/// on losses of order one, so coordinates are compared relative to at least
/// this magnitude.
const GRAD_FLOOR: f64 = 1e-6;
/// Instances whose PReLU inputs come this close to the kink are resampled.
const KINK_MARGIN: f64 = 1e-3;

/// Worst `|a - n| / max(|a| + |n|, GRAD_FLOOR)` over all coordinates.
fn grad_check<F>(mut eval: F, params: &[DenseMatrix], h: f64) -> Result<f64, String>
where
    F: FnMut(&[DenseMatrix]) -> (f64, Vec<DenseMatrix>),
{
    let (loss, analytic) = eval(params);
    if !loss.is_finite() {
        return Err("non-finite loss".into());
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for p in 0..work.len() {
        for i in 0..work[p].len() {
            let orig = work[p].as_slice()[i];
            work[p].as_mut_slice()[i] = orig + h;
            let plus = eval(&work).0;
            work[p].as_mut_slice()[i] = orig - h;
            let minus = eval(&work).0;
            work[p].as_mut_slice()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[p].as_slice()[i];
            worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(GRAD_FLOOR));
        }
    }
    Ok(worst)
}

fn near_kink(params: &DgiParams, graphs: &[&PreparedGraph]) -> bool {
    graphs.iter().any(|g| {
        let (_, cache) = encode_with_cache(params, g).unwrap();
        cache
            .pre_activations()
            .iter()
            .any(|m| m.as_slice().iter().any(|v| v.abs() < KINK_MARGIN))
    })
}

/// Every composite backward plus the end-to-end objective gradient for
/// every encoder and corruption, over `cases` random instances each.
pub fn gradient_suite(cases: usize, seed: u64) -> Vec<GradResult> {
    let step = STEP;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for case in 0..cases {
        let n = rng.gen_range(2..=7);
        let k = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=5);

        // PReLU
        let mut x = random_matrix(n, m, &mut rng);
        while x.as_slice().iter().any(|v| v.abs() < KINK_MARGIN) {
            x = random_matrix(n, m, &mut rng);
        }
        let up = random_matrix(n, m, &mut rng);
        let slope = DenseMatrix::scalar(rng.gen_range(0.05..0.5));
        let err = grad_check(
            |p| {
                let y = prelu(&p[0], p[1].scalar_value());
                let loss = y.hadamard(&up).unwrap().as_slice().iter().sum();
                let (dx, ds) = prelu_backward(&p[0], p[1].scalar_value(), &up).unwrap();
                (loss, vec![dx, DenseMatrix::scalar(ds)])
            },
            &[x, slope],
            step,
        )
        .unwrap();
        out.push((format!("prelu #{case}"), err));

        // w · σ(mean_rows([a·b ‖ c]))
        let a = random_matrix(n, k, &mut rng);
        let b = random_matrix(k, m, &mut rng);
        let c = random_matrix(n, m, &mut rng);
        let w = random_matrix(1, 2 * m, &mut rng);
        let err = grad_check(
            |p| {
                let ab = p[0].matmul(&p[1]).unwrap();
                let cat = ab.concat_cols(&p[2]).unwrap();
                let s = sigmoid_vec(&cat.mean_rows().unwrap());
                let loss = s.iter().zip(w.as_slice()).map(|(x, y)| x * y).sum();
                let dcat = mean_rows_backward(n, &sigmoid_backward(&s, w.as_slice()));
                let (dab, dc) = concat_cols_backward(m, &dcat).unwrap();
                let (da, db) = matmul_backward(&p[0], &p[1], &dab).unwrap();
                (loss, vec![da, db, dc])
            },
            &[a, b, c],
            step,
        )
        .unwrap();
        out.push((format!("matmul-concat-mean-sigmoid #{case}"), err));

        // readout
        let h = random_matrix(n, m, &mut rng);
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = grad_check(
            |p| {
                let s = readout(&p[0]).unwrap();
                let loss = s.iter().zip(&v).map(|(a, b)| a * b).sum();
                (loss, vec![readout_backward(&s, n, &v)])
            },
            &[h],
            step,
        )
        .unwrap();
        out.push((format!("readout #{case}"), err));

        // normalized propagation and its transpose
        let g = random_graph(n, 1, 0.4, &mut rng);
        for kind in [NormKind::Symmetric, NormKind::Row] {
            let op = normalize(&g, kind);
            let z = random_matrix(n, m, &mut rng);
            let up = random_matrix(n, m, &mut rng);
            let err = grad_check(
                |p| {
                    let y = op.apply(&p[0]).unwrap();
                    let loss = y.hadamard(&up).unwrap().as_slice().iter().sum();
                    (loss, vec![op.apply_transpose(&up).unwrap()])
                },
                &[z],
                step,
            )
            .unwrap();
            out.push((format!("propagation {kind:?} #{case}"), err));
        }

        // full objective, every encoder and corruption
        for variant in [EncoderVariant::Gcn1, EncoderVariant::MeanpoolSkip3, EncoderVariant::MeanpoolDenseSkip3] {
            for kind in [CorruptionKind::FeatureShuffle, CorruptionKind::EdgeXor, CorruptionKind::Both] {
                let f = rng.gen_range(1..=4);
                let hidden = 2 * rng.gen_range(1..=2);
                let g = random_graph(n.max(3), f, 0.4, &mut rng);
                let cfg = CorruptionConfig {
                    kind,
                    rho: 0.3,
                    dropout_p: 0.0,
                    seed: case as u64,
                };
                let neg_graph = corrupt(&g, &cfg, &mut rng).unwrap();
                let spec = EncoderSpec::new(variant, f, hidden).unwrap();
                let pos = PreparedGraph::new(&g, variant.norm_kind());
                let neg = PreparedGraph::new(&neg_graph, variant.norm_kind());
                let mut params = DgiParams::init(spec, &mut rng).unwrap();
                while near_kink(&params, &[&pos, &neg]) {
                    params = DgiParams::init(spec, &mut rng).unwrap();
                }
                let start = params.values();
                let err = grad_check(
                    |values| {
                        params.set_values(values).unwrap();
                        params.zero_grad();
                        let l = objective_and_grad(&mut params, &pos, &neg).unwrap();
                        (-l, params.grads())
                    },
                    &start,
                    step,
                )
                .unwrap();
                out.push((format!("objective {variant} {kind} #{case}"), err));

                // encoder backward alone against a random upstream gradient
                let up = random_matrix(g.node_count(), hidden, &mut rng);
                let err = grad_check(
                    |values| {
                        params.set_values(values).unwrap();
                        params.zero_grad();
                        let (h, cache) = encode_with_cache(&params, &pos).unwrap();
                        encoder_backward(&mut params, &pos, &cache, &up).unwrap();
                        (h.hadamard(&up).unwrap().as_slice().iter().sum(), params.grads())
                    },
                    &start,
                    step,
                )
                .unwrap();
                out.push((format!("encoder {variant} #{case}"), err));
            }
        }
    }
    out
}

pub type PropertyResult = (String, Result<(), String>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

fn normalization_invariants(g: &Graph) -> Result<(), String> {
    let n = g.node_count();
    let sym = normalize(g, NormKind::Symmetric).to_dense();
    let row = normalize(g, NormKind::Row).to_dense();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    for i in 0..n {
        let sum: f64 = row.row(i).iter().sum();
        ensure((sum - 1.0).abs() < 1e-12, || format!("row {i} of the row-normalized operator sums to {sum}"))?;
        for j in 0..n {
            let linked = i == j || g.has_edge(i, j);
            let expect = if linked { 1.0 / (deg[i] * deg[j]).sqrt() } else { 0.0 };
            ensure((sym.row(i)[j] - expect).abs() < 1e-12, || format!("symmetric entry ({i},{j})"))?;
            ensure((sym.row(i)[j] - sym.row(j)[i]).abs() < 1e-15, || format!("asymmetry at ({i},{j})"))?;
        }
    }
    // D^{1/2}·1 is an eigenvector with eigenvalue 1
    let d: Vec<f64> = deg.iter().map(|x| x.sqrt()).collect();
    let ad = sym.matvec(&d).unwrap();
    ensure(ad.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-12), || "D^1/2·1 is not fixed".into())
}

fn corruption_properties(g: &Graph, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = g.node_count();
    for kind in [CorruptionKind::FeatureShuffle, CorruptionKind::EdgeXor, CorruptionKind::Both] {
        let cfg = CorruptionConfig {
            kind,
            rho: rng.gen_range(0.0..1.0),
            dropout_p: 0.0,
            seed: 0,
        };
        let s: u64 = rng.gen();
        let a = corrupt(g, &cfg, &mut ChaCha8Rng::seed_from_u64(s)).map_err(|e| e.to_string())?;
        let b = corrupt(g, &cfg, &mut ChaCha8Rng::seed_from_u64(s)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{kind} is not deterministic for a fixed seed"))?;
        for i in 0..n {
            ensure(!a.has_edge(i, i), || format!("{kind} produced a self loop"))?;
            for &j in a.neighbors(i) {
                ensure(a.has_edge(j, i), || format!("{kind} produced a one-way edge {i}->{j}"))?;
            }
        }
        let mut rows_before: Vec<Vec<u64>> = g.features().iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        let mut rows_after: Vec<Vec<u64>> = a.features().iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        rows_before.sort();
        rows_after.sort();
        ensure(rows_before == rows_after, || format!("{kind} changed the multiset of feature rows"))?;
        if kind == CorruptionKind::FeatureShuffle {
            ensure(a.adjacency() == g.adjacency(), || "shuffle changed the adjacency".into())?;
        }
        if kind == CorruptionKind::EdgeXor {
            ensure(a.features() == g.features(), || "edge-xor changed the features".into())?;
        }
    }
    let zero = CorruptionConfig {
        kind: CorruptionKind::EdgeXor,
        rho: 0.0,
        dropout_p: 0.0,
        seed: 0,
    };
    let same = corrupt(g, &zero, rng).map_err(|e| e.to_string())?;
    ensure(same.adjacency() == g.adjacency(), || "rho = 0 changed the graph".into())
}

fn encode_equivariance(g: &Graph, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let perm = random_perm(g.node_count(), rng);
    let moved = g.relabel(&perm).map_err(|e| e.to_string())?;
    for variant in [EncoderVariant::Gcn1, EncoderVariant::MeanpoolSkip3, EncoderVariant::MeanpoolDenseSkip3] {
        let spec = EncoderSpec::new(variant, g.feature_dim(), 4).unwrap();
        let params = DgiParams::init(spec, rng).unwrap();
        let h = encode(g, &params).unwrap();
        let hp = encode(&moved, &params).unwrap();
        let diff = hp.max_abs_diff(&h.select_rows(&perm).unwrap());
        ensure(diff < 1e-12, || format!("{variant} is not permutation equivariant (diff {diff})"))?;
    }
    Ok(())
}

fn readout_invariance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..30);
    let h = random_matrix(n, 6, rng);
    let perm = random_perm(n, rng);
    let a = readout(&h).unwrap();
    let b = readout(&h.select_rows(&perm).unwrap()).unwrap();
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(diff < 1e-14, || format!("readout changed under permutation by {diff}"))
}

fn loss_fixed_point(g: &Graph, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..50);
    let m = rng.gen_range(1..50);
    let l = dgi_loss(&vec![0.0; n], &vec![0.0; m]).unwrap();
    ensure((l - 0.5f64.ln()).abs() < 1e-15, || format!("zero logits give {l}"))?;
    let spec = EncoderSpec::new(EncoderVariant::Gcn1, g.feature_dim(), 4).unwrap();
    let mut params = DgiParams::init(spec, rng).unwrap();
    params.disc.value.fill(0.0);
    let p = PreparedGraph::new(g, NormKind::Symmetric);
    let l = objective(&params, &p, &p).unwrap();
    ensure((l - 0.5f64.ln()).abs() < 1e-15, || format!("zero discriminator gives {l}"))
}

/// Properties that need no trained model, each over `cases` random graphs.
pub fn property_suite(cases: usize, seed: u64) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<PropertyResult> = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Some(slot) = results.iter_mut().find(|(n, _)| n == name) {
            if slot.1.is_ok() {
                slot.1 = r;
            }
        } else {
            results.push((name.to_string(), r));
        }
    };
    for _ in 0..cases {
        let n = rng.gen_range(1..=14);
        let f = rng.gen_range(1..=4);
        let p = rng.gen_range(0.0..0.8);
        let g = random_graph(n, f, p, &mut rng);
        record("normalization invariants", normalization_invariants(&g));
        record("corruption determinism and symmetry", corruption_properties(&g, &mut rng));
        record("encoder permutation equivariance", encode_equivariance(&g, &mut rng));
        record("readout permutation invariance", readout_invariance(&mut rng));
        record("loss fixed point at zero logits", loss_fixed_point(&g, &mut rng));
    }
    results
}
