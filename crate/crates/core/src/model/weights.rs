use super::{MagicNetConfig, ModelError};
use crate::features::FeatureNormalizer;
use crate::nn::init::{kaiming_uniform, seeded_rng, uniform};
use crate::nn::{BatchNorm, Conv1d, Conv1dGrad, BnGrad, Gru, GruGrad, Linear, LinearGrad};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Trainable,
    /// Batch-norm running mean/variance: state, not optimized.
    RunningStat,
    /// Feature normalization statistics shipped with the weights.
    FeatureStat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub dims: Vec<usize>,
    pub kind: TensorKind,
    /// Layer the tensor belongs to, for per-layer reporting.
    pub layer: String,
}

impl TensorInfo {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

impl MagicNetConfig {
    /// Names, shapes and roles of every tensor of a model with this config,
    /// in canonical order.
    pub fn tensor_layout(&self) -> Result<Vec<TensorInfo>, ModelError> {
        let mut out = Vec::new();
        let mut push = |layer: &str, suffix: &str, dims: Vec<usize>, kind| {
            out.push(TensorInfo {
                name: format!("{layer}.{suffix}"),
                dims,
                kind,
                layer: layer.to_string(),
            })
        };
        for u in self.units()? {
            let c = u.spec.out_ch;
            push(&u.name, "weight", u.spec.weight_dims().to_vec(), TensorKind::Trainable);
            push(&u.name, "bias", vec![c], TensorKind::Trainable);
            push(&u.name, "bn.gamma", vec![c], TensorKind::Trainable);
            push(&u.name, "bn.beta", vec![c], TensorKind::Trainable);
            push(&u.name, "bn.running_mean", vec![c], TensorKind::RunningStat);
            push(&u.name, "bn.running_var", vec![c], TensorKind::RunningStat);
        }
        let gru = self.gru_spec()?;
        for l in 0..gru.layers {
            let layer = format!("gru.l{l}");
            let h = gru.hidden;
            push(&layer, "w_ih", vec![3 * h, gru.layer_input(l)], TensorKind::Trainable);
            push(&layer, "w_hh", vec![3 * h, h], TensorKind::Trainable);
            push(&layer, "b_ih", vec![3 * h], TensorKind::Trainable);
            push(&layer, "b_hh", vec![3 * h], TensorKind::Trainable);
        }
        push("fc", "weight", vec![1, self.gru_hidden], TensorKind::Trainable);
        push("fc", "bias", vec![1], TensorKind::Trainable);
        push("feat", "mean", vec![self.n_mels], TensorKind::FeatureStat);
        push("feat", "std", vec![self.n_mels], TensorKind::FeatureStat);
        Ok(out)
    }
}

/// Conv, batch norm and optional ReLU, applied in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvUnit<T> {
    pub name: String,
    pub conv: Conv1d<T>,
    pub bn: BatchNorm<T>,
    pub relu: bool,
    pub skip_from: Option<usize>,
}

/// Complete parameter bundle. Immutable during inference and safe to share
/// between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T> {
    pub config: MagicNetConfig,
    pub units: Vec<ConvUnit<T>>,
    pub gru: Gru<T>,
    pub fc: Linear<T>,
    pub norm: FeatureNormalizer<T>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub layer: String,
    pub trainable: usize,
    pub running: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamReport {
    pub layers: Vec<LayerParams>,
    pub trainable: usize,
    /// Batch-norm running statistics.
    pub running: usize,
    /// Feature normalization statistics, excluded from both totals above.
    pub feature_stats: usize,
}

/// Gradients for every trainable tensor of a [`ModelWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub units: Vec<(Conv1dGrad<T>, BnGrad<T>)>,
    pub gru: GruGrad<T>,
    pub fc: LinearGrad<T>,
}

impl<T: Real> ModelGrads<T> {
    /// Flat views in the order of the trainable entries of the tensor layout.
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for (c, b) in &self.units {
            out.extend([&c.weight[..], &c.bias[..], &b.gamma[..], &b.beta[..]]);
        }
        for l in &self.gru.layers {
            out.extend([&l.w_ih[..], &l.w_hh[..], &l.b_ih[..], &l.b_hh[..]]);
        }
        out.extend([&self.fc.weight[..], &self.fc.bias[..]]);
        out
    }
}

impl<T: Real> ModelWeights<T> {
    /// All-zero conv/GRU/FC weights, identity batch norm and normalizer.
    pub fn zeros(config: MagicNetConfig) -> Result<Self, ModelError> {
        let units = config
            .units()?
            .into_iter()
            .map(|u| ConvUnit {
                conv: Conv1d::zeros(u.spec),
                bn: BatchNorm::new(u.spec.out_ch),
                name: u.name,
                relu: u.relu,
                skip_from: u.skip_from,
            })
            .collect();
        Ok(Self {
            gru: Gru::zeros(config.gru_spec()?),
            fc: Linear::zeros(config.gru_hidden, 1),
            norm: FeatureNormalizer::identity(config.n_mels),
            units,
            config,
        })
    }

    /// Fresh randomly initialized model; deterministic in `seed`.
    pub fn build(config: MagicNetConfig, seed: u64) -> Result<Self, ModelError> {
        let mut w = Self::zeros(config)?;
        let mut rng = seeded_rng(seed, 0);
        for u in &mut w.units {
            let spec = u.conv.spec;
            u.conv.weight = kaiming_uniform(spec.weight_len(), spec.in_per_group() * spec.kernel, &mut rng);
        }
        let bound = 1.0 / (w.gru.spec.hidden as f64).sqrt();
        for l in &mut w.gru.layers {
            l.w_ih = uniform(l.w_ih.len(), bound, &mut rng);
            l.w_hh = uniform(l.w_hh.len(), bound, &mut rng);
            l.b_ih = uniform(l.b_ih.len(), bound, &mut rng);
            l.b_hh = uniform(l.b_hh.len(), bound, &mut rng);
        }
        let fan_in = w.fc.in_dim;
        w.fc.weight = kaiming_uniform(w.fc.weight.len(), fan_in, &mut rng);
        w.fc.bias = uniform(1, 1.0 / (fan_in as f64).sqrt(), &mut rng);
        Ok(w)
    }

    pub fn layout(&self) -> Vec<TensorInfo> {
        self.config.tensor_layout().expect("weights exist only for valid configs")
    }

    /// Every tensor's data, in layout order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for u in &self.units {
            out.extend([
                &u.conv.weight[..],
                &u.conv.bias[..],
                &u.bn.gamma[..],
                &u.bn.beta[..],
                &u.bn.running_mean[..],
                &u.bn.running_var[..],
            ]);
        }
        for l in &self.gru.layers {
            out.extend([&l.w_ih[..], &l.w_hh[..], &l.b_ih[..], &l.b_hh[..]]);
        }
        out.extend([&self.fc.weight[..], &self.fc.bias[..], &self.norm.mean[..], &self.norm.std[..]]);
        out
    }

    /// Mutable counterpart of [`ModelWeights::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out: Vec<&mut Vec<T>> = Vec::new();
        for u in &mut self.units {
            out.extend([
                &mut u.conv.weight,
                &mut u.conv.bias,
                &mut u.bn.gamma,
                &mut u.bn.beta,
                &mut u.bn.running_mean,
                &mut u.bn.running_var,
            ]);
        }
        for l in &mut self.gru.layers {
            out.extend([&mut l.w_ih, &mut l.w_hh, &mut l.b_ih, &mut l.b_hh]);
        }
        out.extend([&mut self.fc.weight, &mut self.fc.bias, &mut self.norm.mean, &mut self.norm.std]);
        out
    }

    /// Trainable tensors in the order of [`ModelGrads::slices`].
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let kinds: Vec<TensorKind> = self.layout().into_iter().map(|t| t.kind).collect();
        self.tensors_mut()
            .into_iter()
            .zip(kinds)
            .filter(|(_, k)| *k == TensorKind::Trainable)
            .map(|(t, _)| t.as_mut_slice())
            .collect()
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.layout()
            .into_iter()
            .filter(|t| t.kind == TensorKind::Trainable)
            .map(|t| t.name)
            .collect()
    }

    pub fn param_count(&self) -> ParamReport {
        let layout = self.layout();
        let mut layers: Vec<LayerParams> = Vec::new();
        let mut feature_stats = 0;
        for (info, data) in layout.iter().zip(self.tensors()) {
            let n = data.len();
            if info.kind == TensorKind::FeatureStat {
                feature_stats += n;
                continue;
            }
            if layers.last().map(|l| l.layer != info.layer).unwrap_or(true) {
                layers.push(LayerParams {
                    layer: info.layer.clone(),
                    trainable: 0,
                    running: 0,
                });
            }
            let entry = layers.last_mut().unwrap();
            match info.kind {
                TensorKind::Trainable => entry.trainable += n,
                _ => entry.running += n,
            }
        }
        ParamReport {
            trainable: layers.iter().map(|l| l.trainable).sum(),
            running: layers.iter().map(|l| l.running).sum(),
            layers,
            feature_stats,
        }
    }

    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        let mut out = ModelWeights::<U>::zeros(self.config.clone()).expect("config already validated");
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.iter().map(|v| U::lit(v.as_f64())).collect();
        }
        out
    }
}
