use rand::Rng;

use super::{EncoderSpec, EncoderVariant};
use crate::error::{DgiError, Result};
use crate::tensor::{glorot_init, DenseMatrix, Param};

pub(crate) const INITIAL_SLOPE: f64 = 0.25;

/// One propagation layer: `prelu([U Θ' ‖ P U Θ])`, or `prelu(P U Θ)` when
/// there is no self projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Param,
    pub self_weight: Option<Param>,
    /// 1x1 PReLU slope.
    pub slope: Param,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgiParams {
    spec: EncoderSpec,
    pub layers: Vec<Layer>,
    /// Input projection shared by the dense skip connections.
    pub skip: Option<Param>,
    /// Bilinear discriminator matrix, F′×F′.
    pub disc: Param,
}

impl DgiParams {
    /// Glorot-initialized weights, slopes at 0.25.
    pub fn init<R: Rng + ?Sized>(spec: EncoderSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let f = spec.input_dim;
        let h = spec.hidden_dim;
        let mut layers = Vec::with_capacity(spec.variant.layer_count());
        for l in 0..spec.variant.layer_count() {
            let input = if l == 0 { f } else { h };
            let layer = match spec.variant {
                EncoderVariant::Gcn1 | EncoderVariant::MeanpoolDenseSkip3 => Layer {
                    weight: Param::new(glorot_init(input, h, rng)),
                    self_weight: None,
                    slope: Param::new(DenseMatrix::scalar(INITIAL_SLOPE)),
                },
                EncoderVariant::MeanpoolSkip3 => Layer {
                    weight: Param::new(glorot_init(input, h / 2, rng)),
                    self_weight: Some(Param::new(glorot_init(input, h / 2, rng))),
                    slope: Param::new(DenseMatrix::scalar(INITIAL_SLOPE)),
                },
            };
            layers.push(layer);
        }
        let skip = (spec.variant == EncoderVariant::MeanpoolDenseSkip3).then(|| Param::new(glorot_init(f, h, rng)));
        let disc = Param::new(glorot_init(h, h, rng));
        Ok(Self {
            spec,
            layers,
            skip,
            disc,
        })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    /// Tensor names in canonical order, matching [`params`](Self::params).
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(format!("layer{l}.weight"));
            if layer.self_weight.is_some() {
                out.push(format!("layer{l}.self_weight"));
            }
            out.push(format!("layer{l}.slope"));
        }
        if self.skip.is_some() {
            out.push("skip".into());
        }
        out.push("disc".into());
        out
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.weight);
            out.extend(layer.self_weight.as_ref());
            out.push(&layer.slope);
        }
        out.extend(self.skip.as_ref());
        out.push(&self.disc);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            out.extend(layer.self_weight.as_mut());
            out.push(&mut layer.slope);
        }
        out.extend(self.skip.as_mut());
        out.push(&mut self.disc);
        out
    }

    pub fn values(&self) -> Vec<DenseMatrix> {
        self.params().into_iter().map(|p| p.value.clone()).collect()
    }

    pub fn grads(&self) -> Vec<DenseMatrix> {
        self.params().into_iter().map(|p| p.grad.clone()).collect()
    }

    pub fn set_values(&mut self, values: &[DenseMatrix]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(DgiError::dims(
                "DgiParams::set_values",
                format!("{} tensors for {} parameters", values.len(), params.len()),
            ));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.shape() != v.shape() {
                return Err(DgiError::dims(
                    "DgiParams::set_values",
                    format!("{:?} vs {:?}", p.shape(), v.shape()),
                ));
            }
            p.value = v.clone();
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.value.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_spec() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = DgiParams::init(EncoderSpec::new(EncoderVariant::Gcn1, 5, 4).unwrap(), &mut rng).unwrap();
        assert_eq!(p.names(), ["layer0.weight", "layer0.slope", "disc"]);
        assert_eq!(p.layers[0].weight.shape(), (5, 4));
        assert_eq!(p.disc.shape(), (4, 4));
        assert_eq!(p.layers[0].slope.value.scalar_value(), 0.25);

        let p = DgiParams::init(EncoderSpec::new(EncoderVariant::MeanpoolSkip3, 5, 4).unwrap(), &mut rng).unwrap();
        assert_eq!(p.params().len(), 3 * 3 + 1);
        assert_eq!(p.layers[0].self_weight.as_ref().unwrap().shape(), (5, 2));
        assert_eq!(p.layers[2].weight.shape(), (4, 2));

        let p = DgiParams::init(EncoderSpec::new(EncoderVariant::MeanpoolDenseSkip3, 5, 4).unwrap(), &mut rng)
            .unwrap();
        assert_eq!(p.skip.as_ref().unwrap().shape(), (5, 4));
        assert_eq!(p.layers[1].weight.shape(), (4, 4));
        assert_eq!(p.names().len(), p.params().len());
    }

    #[test]
    fn odd_width_rejected_for_split_layers() {
        assert!(EncoderSpec::new(EncoderVariant::MeanpoolSkip3, 3, 5).is_err());
        assert!(EncoderSpec::new(EncoderVariant::Gcn1, 0, 5).is_err());
    }

    #[test]
    fn set_values_checks_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = DgiParams::init(EncoderSpec::new(EncoderVariant::Gcn1, 2, 2).unwrap(), &mut rng).unwrap();
        let mut v = p.values();
        v[0] = DenseMatrix::zeros(2, 2);
        p.set_values(&v).unwrap();
        assert_eq!(p.layers[0].weight.value, DenseMatrix::zeros(2, 2));
        v[0] = DenseMatrix::zeros(3, 2);
        assert!(p.set_values(&v).is_err());
        assert!(p.set_values(&v[..1]).is_err());
    }
}
