use std::borrow::Cow;
use std::cell::RefCell;
use std::sync::Arc;

use super::params::Layer;
use super::{DgiParams, EncoderVariant};
use crate::error::{DgiError, Result};
use crate::graph::{normalize, Graph, NormKind, NormalizedAdjacency};
use crate::sparse::CsrMatrix;
use crate::tensor::ops::{prelu, prelu_backward};
use crate::tensor::{DenseMatrix, Param};

/// A graph in the form the encoders consume: sparse features, the
/// propagation operator, and the neighbour lists it was built from.
/// Components are shared so negatives can reuse whatever they leave intact;
/// a feature shuffle is kept as a row permutation of the shared matrix.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub(crate) neighbors: Arc<Vec<Vec<usize>>>,
    pub(crate) features: Arc<CsrMatrix>,
    /// Row `i` of the feature matrix is row `perm[i]` of `features`.
    pub(crate) perm: Option<Arc<Vec<usize>>>,
    pub(crate) adjacency: Arc<NormalizedAdjacency>,
}

impl PreparedGraph {
    pub fn new(graph: &Graph, kind: NormKind) -> Self {
        Self {
            neighbors: Arc::new(graph.adjacency().to_vec()),
            features: Arc::new(CsrMatrix::from_dense(graph.features())),
            perm: None,
            adjacency: Arc::new(normalize(graph, kind)),
        }
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> Cow<'_, CsrMatrix> {
        match &self.perm {
            None => Cow::Borrowed(&*self.features),
            Some(p) => Cow::Owned(self.features.select_rows(p).expect("permutation within bounds")),
        }
    }

    /// Same graph with feature row `i` replaced by current row `perm[i]`.
    pub(crate) fn with_rows_permuted(mut self, perm: Vec<usize>) -> Self {
        let composed = match &self.perm {
            None => perm,
            Some(old) => perm.iter().map(|&i| old[i]).collect(),
        };
        self.perm = Some(Arc::new(composed));
        self
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adjacency
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Weight,
    SelfWeight,
    Skip,
}

impl Slot {
    fn index(self) -> usize {
        self as usize
    }
}

/// Products of the shared feature matrix with the first-layer weights, and
/// pending gradients `Xᵀ·D` accumulated in the unpermuted row order. Graphs
/// that share a feature matrix pay for one sparse product per weight.
#[derive(Default)]
pub(crate) struct FeatureMemo {
    base: RefCell<Option<Arc<CsrMatrix>>>,
    products: RefCell<[Option<DenseMatrix>; 3]>,
    pending: RefCell<[Option<DenseMatrix>; 3]>,
}

impl FeatureMemo {
    fn shares(&self, x: &Arc<CsrMatrix>) -> bool {
        let mut base = self.base.borrow_mut();
        match base.as_ref() {
            Some(b) => Arc::ptr_eq(b, x),
            None => {
                *base = Some(Arc::clone(x));
                true
            }
        }
    }

    /// Adds every pending gradient into its parameter.
    pub(crate) fn flush(&self, params: &mut DgiParams) -> Result<()> {
        let Some(x) = self.base.borrow().clone() else {
            return Ok(());
        };
        let mut pending = self.pending.borrow_mut();
        for (slot, acc) in pending.iter_mut().enumerate() {
            if let Some(d) = acc.take() {
                let g = x.spmm_tn(&d)?;
                let target = match slot {
                    0 => &mut params.layers[0].weight,
                    1 => params.layers[0].self_weight.as_mut().expect("self weight"),
                    _ => params.skip.as_mut().expect("skip projection"),
                };
                target.grad.add_assign(&g)?;
            }
        }
        Ok(())
    }
}

enum Input<'a> {
    Sparse {
        x: &'a Arc<CsrMatrix>,
        perm: Option<&'a [usize]>,
        memo: &'a FeatureMemo,
    },
    Dense(&'a DenseMatrix),
}

impl<'a> Input<'a> {
    fn features(graph: &'a PreparedGraph, memo: &'a FeatureMemo) -> Self {
        Input::Sparse {
            x: &graph.features,
            perm: graph.perm.as_deref().map(Vec::as_slice),
            memo,
        }
    }

    fn times(&self, w: &DenseMatrix, slot: Slot) -> Result<DenseMatrix> {
        match self {
            Input::Sparse { x, perm, memo } => {
                let owned;
                let mut products = memo.products.borrow_mut();
                let product = if memo.shares(x) {
                    let entry = &mut products[slot.index()];
                    if entry.is_none() {
                        *entry = Some(x.spmm(w)?);
                    }
                    entry.as_ref().expect("filled above")
                } else {
                    owned = x.spmm(w)?;
                    &owned
                };
                match perm {
                    None => Ok(product.clone()),
                    Some(p) => product.select_rows(p),
                }
            }
            Input::Dense(x) => x.matmul(w),
        }
    }

    /// Returns `inputᵀ · d`, or `None` when the product was deferred to the memo.
    fn t_times(&self, d: &DenseMatrix, slot: Slot) -> Result<Option<DenseMatrix>> {
        match self {
            Input::Sparse { x, perm, memo } => {
                let unpermuted;
                let d = match perm {
                    None => d,
                    Some(p) => {
                        unpermuted = scatter_rows(d, p);
                        &unpermuted
                    }
                };
                if memo.shares(x) {
                    let mut pending = memo.pending.borrow_mut();
                    match &mut pending[slot.index()] {
                        Some(acc) => acc.add_assign(d)?,
                        entry => *entry = Some(d.clone()),
                    }
                    Ok(None)
                } else {
                    Ok(Some(x.spmm_tn(d)?))
                }
            }
            Input::Dense(x) => Ok(Some(x.matmul_tn(d)?)),
        }
    }
}

/// Inverse of `select_rows(perm)` for a permutation.
fn scatter_rows(d: &DenseMatrix, perm: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(d.rows(), d.cols());
    for (i, &p) in perm.iter().enumerate() {
        out.row_mut(p).copy_from_slice(d.row(i));
    }
    out
}

fn accumulate(param: &mut Param, g: Option<DenseMatrix>) -> Result<()> {
    match g {
        Some(g) => param.grad.add_assign(&g),
        None => Ok(()),
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    /// Inputs of layers after the first (the first consumes the features).
    inputs: Vec<DenseMatrix>,
    /// Pre-activations per layer.
    pre: Vec<DenseMatrix>,
}

impl EncoderCache {
    /// Pre-activations per layer.
    pub fn pre_activations(&self) -> &[DenseMatrix] {
        &self.pre
    }
}

fn layer_forward(layer: &Layer, input: &Input, adj: &NormalizedAdjacency) -> Result<DenseMatrix> {
    let propagated = adj.apply(&input.times(&layer.weight.value, Slot::Weight)?)?;
    match &layer.self_weight {
        Some(sw) => input.times(&sw.value, Slot::SelfWeight)?.concat_cols(&propagated),
        None => Ok(propagated),
    }
}

/// Accumulates layer gradients; returns the gradient of the layer input when requested.
fn layer_backward(
    layer: &mut Layer,
    input: &Input,
    adj: &NormalizedAdjacency,
    pre: &DenseMatrix,
    dout: &DenseMatrix,
    want_input_grad: bool,
) -> Result<Option<DenseMatrix>> {
    let slope = layer.slope.value.scalar_value();
    let (dpre, dslope) = prelu_backward(pre, slope, dout)?;
    layer.slope.grad.as_mut_slice()[0] += dslope;
    let (dself, dprop) = match &layer.self_weight {
        Some(sw) => {
            let (a, b) = dpre.split_cols(sw.value.cols())?;
            (Some(a), b)
        }
        None => (None, dpre),
    };
    let dxw = adj.apply_transpose(&dprop)?;
    accumulate(&mut layer.weight, input.t_times(&dxw, Slot::Weight)?)?;
    if let (Some(sw), Some(ds)) = (layer.self_weight.as_mut(), dself.as_ref()) {
        accumulate(sw, input.t_times(ds, Slot::SelfWeight)?)?;
    }
    if !want_input_grad {
        return Ok(None);
    }
    let mut din = dxw.matmul_nt(&layer.weight.value)?;
    if let (Some(sw), Some(ds)) = (layer.self_weight.as_ref(), dself.as_ref()) {
        din.add_assign(&ds.matmul_nt(&sw.value)?)?;
    }
    Ok(Some(din))
}

fn check_input(params: &DgiParams, graph: &PreparedGraph) -> Result<()> {
    if graph.feature_dim() != params.spec().input_dim {
        return Err(DgiError::dims(
            "encode",
            format!(
                "graph has {} features, encoder expects {}",
                graph.feature_dim(),
                params.spec().input_dim
            ),
        ));
    }
    if graph.adjacency.node_count() != graph.node_count() {
        return Err(DgiError::dims("encode", "adjacency and features disagree on node count"));
    }
    Ok(())
}

/// Forward pass returning the patch representations and the backward cache.
pub fn encode_with_cache(params: &DgiParams, graph: &PreparedGraph) -> Result<(DenseMatrix, EncoderCache)> {
    encode_memo(params, graph, &FeatureMemo::default())
}

pub(crate) fn encode_memo(
    params: &DgiParams,
    graph: &PreparedGraph,
    memo: &FeatureMemo,
) -> Result<(DenseMatrix, EncoderCache)> {
    check_input(params, graph)?;
    let adj = graph.adjacency();
    let x = Input::features(graph, memo);
    let act = |layer: &Layer, z: &DenseMatrix| prelu(z, layer.slope.value.scalar_value());
    let mut cache = EncoderCache {
        inputs: Vec::new(),
        pre: Vec::new(),
    };
    let out = match params.spec().variant {
        EncoderVariant::Gcn1 => {
            let z = layer_forward(&params.layers[0], &x, adj)?;
            let h = act(&params.layers[0], &z);
            cache.pre.push(z);
            h
        }
        EncoderVariant::MeanpoolSkip3 => {
            let z = layer_forward(&params.layers[0], &x, adj)?;
            let mut h = act(&params.layers[0], &z);
            cache.pre.push(z);
            for layer in &params.layers[1..] {
                let z = layer_forward(layer, &Input::Dense(&h), adj)?;
                let next = act(layer, &z);
                cache.inputs.push(std::mem::replace(&mut h, next));
                cache.pre.push(z);
            }
            h
        }
        EncoderVariant::MeanpoolDenseSkip3 => {
            let skip = params
                .skip
                .as_ref()
                .ok_or_else(|| DgiError::invalid("dense-skip encoder without skip projection"))?;
            let s = x.times(&skip.value, Slot::Skip)?;
            let [l1, l2, l3] = &params.layers[..] else {
                return Err(DgiError::invalid("dense-skip encoder needs three layers"));
            };
            let z1 = layer_forward(l1, &x, adj)?;
            let h1 = act(l1, &z1);
            let u2 = h1.add(&s)?;
            let z2 = layer_forward(l2, &Input::Dense(&u2), adj)?;
            let h2 = act(l2, &z2);
            let u3 = h2.add(&u2)?;
            let z3 = layer_forward(l3, &Input::Dense(&u3), adj)?;
            let h3 = act(l3, &z3);
            cache.inputs = vec![u2, u3];
            cache.pre = vec![z1, z2, z3];
            h3
        }
    };
    Ok((out, cache))
}

/// Patch representations for a prepared graph.
pub fn encode_prepared(params: &DgiParams, graph: &PreparedGraph) -> Result<DenseMatrix> {
    Ok(encode_with_cache(params, graph)?.0)
}

/// Patch representations, normalizing the adjacency as the variant requires.
pub fn encode(graph: &Graph, params: &DgiParams) -> Result<DenseMatrix> {
    encode_prepared(params, &PreparedGraph::new(graph, params.spec().variant.norm_kind()))
}

/// Backpropagates `dh` (gradient w.r.t. the encoder output), accumulating
/// into the parameter gradients.
pub fn encoder_backward(
    params: &mut DgiParams,
    graph: &PreparedGraph,
    cache: &EncoderCache,
    dh: &DenseMatrix,
) -> Result<()> {
    let memo = FeatureMemo::default();
    backward_memo(params, graph, cache, dh, &memo)?;
    memo.flush(params)
}

/// Like [`encoder_backward`] but leaves feature-matrix gradients pending in
/// `memo`; call [`FeatureMemo::flush`] once all passes are done.
pub(crate) fn backward_memo(
    params: &mut DgiParams,
    graph: &PreparedGraph,
    cache: &EncoderCache,
    dh: &DenseMatrix,
    memo: &FeatureMemo,
) -> Result<()> {
    let adj = graph.adjacency();
    let x = Input::features(graph, memo);
    match params.spec().variant {
        EncoderVariant::Gcn1 => {
            layer_backward(&mut params.layers[0], &x, adj, &cache.pre[0], dh, false)?;
        }
        EncoderVariant::MeanpoolSkip3 => {
            let mut grad = dh.clone();
            for l in (0..params.layers.len()).rev() {
                let input = if l == 0 { Input::features(graph, memo) } else { Input::Dense(&cache.inputs[l - 1]) };
                match layer_backward(&mut params.layers[l], &input, adj, &cache.pre[l], &grad, l > 0)? {
                    Some(g) => grad = g,
                    None => break,
                }
            }
        }
        EncoderVariant::MeanpoolDenseSkip3 => {
            // u2 = h1 + s; u3 = h2 + u2
            let du3 = layer_backward(
                &mut params.layers[2],
                &Input::Dense(&cache.inputs[1]),
                adj,
                &cache.pre[2],
                dh,
                true,
            )?
            .expect("input gradient requested");
            let mut du2 = layer_backward(
                &mut params.layers[1],
                &Input::Dense(&cache.inputs[0]),
                adj,
                &cache.pre[1],
                &du3,
                true,
            )?
            .expect("input gradient requested");
            du2.add_assign(&du3)?;
            layer_backward(&mut params.layers[0], &x, adj, &cache.pre[0], &du2, false)?;
            let skip: &mut Param = params
                .skip
                .as_mut()
                .ok_or_else(|| DgiError::invalid("dense-skip encoder without skip projection"))?;
            accumulate(skip, x.t_times(&du2, Slot::Skip)?)?;
        }
    }
    Ok(())
}
