use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use super::{load_manifest, prepare_clip, segment, EvalError, LabeledClip, Segment};
use crate::audio::{MixSpec, SnrSpec};
use crate::features::{fit_normalizer, FeatureConfig};
use crate::model::{MagicNetConfig, ModelWeights};
use crate::nn::{bce_with_logits, Adam, AdamConfig, BnMode};
use crate::rng::seeded_rng;
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_segments: usize,
    pub segment_len_s: f64,
    /// SNR range of the synthetic corpora this config trains on.
    pub snr_range_db: (f64, f64),
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub seed: u64,
    pub model: MagicNetConfig,
    pub features: FeatureConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_segments: 8,
            segment_len_s: 20.0,
            snr_range_db: (5.0, 30.0),
            max_epochs: 200,
            patience_epochs: 50,
            seed: 0,
            model: MagicNetConfig::default(),
            features: FeatureConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Argument(m));
        let (lo, hi) = self.snr_range_db;
        if !(lo <= hi) {
            return bad(format!("SNR range {lo}..{hi} is empty"));
        }
        if self.patience_epochs == 0 {
            return bad("patience must be at least 1 epoch".into());
        }
        if self.batch_segments == 0 || self.max_epochs == 0 {
            return bad("batch size and epoch count must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.segment_len_s > 0.0) {
            return bad(format!("segment length {} s must be positive", self.segment_len_s));
        }
        self.model.validate()?;
        self.features.validate()?;
        Ok(())
    }

    /// Corpus recipe matching this config's segment length and SNR range.
    pub fn mix_spec(&self) -> MixSpec {
        MixSpec {
            snr: SnrSpec::Uniform {
                low: self.snr_range_db.0,
                high: self.snr_range_db.1,
            },
            segment_len_s: self.segment_len_s,
            seed: self.seed,
            ..MixSpec::default()
        }
    }

    fn segment_frames(&self) -> usize {
        (self.segment_len_s * 1000.0 / self.features.hop_ms).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Weights from the epoch with the lowest validation loss.
    pub weights: ModelWeights<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl<T> TrainOutcome<T> {
    /// Loss history as CSV `epoch,train_loss,val_loss`.
    pub fn write_history_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss")?;
        for r in &self.history {
            writeln!(w, "{},{:.9e},{:.9e}", r.epoch, r.train_loss, r.val_loss)?;
        }
        Ok(())
    }
}

/// Trains from two manifests (training and validation).
pub fn train_manifests<T: Real>(
    config: &TrainConfig,
    train_manifest: impl AsRef<Path>,
    val_manifest: impl AsRef<Path>,
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>, EvalError> {
    let tr = load_manifest(train_manifest)?;
    let va = load_manifest(val_manifest)?;
    train(config, &tr, &va, progress)
}

/// Computes features, fits the normalizer on the training clips, segments
/// both sets and runs [`train_segments`] from a fresh model.
pub fn train<T: Real>(
    config: &TrainConfig,
    train_clips: &[LabeledClip],
    val_clips: &[LabeledClip],
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>, EvalError> {
    config.validate()?;
    if train_clips.is_empty() || val_clips.is_empty() {
        return Err(EvalError::Argument("training and validation sets must be non-empty".into()));
    }
    let prep = |clips: &[LabeledClip]| {
        clips
            .iter()
            .map(|c| prepare_clip::<T>(c, &config.features))
            .collect::<Result<Vec<_>, _>>()
    };
    let tr = prep(train_clips)?;
    let va = prep(val_clips)?;
    let feats: Vec<_> = tr.iter().map(|p| p.features.clone()).collect();
    let mut weights = ModelWeights::<T>::build(config.model.clone(), config.seed)?;
    weights.norm = fit_normalizer(&feats)?;
    let factor = config.model.downsample();
    let cut = |clips: &[super::PreparedClip<T>]| -> Result<Vec<Segment<T>>, EvalError> {
        let mut out = Vec::new();
        for c in clips {
            out.extend(segment(c, &weights.norm, config.segment_frames(), factor)?);
        }
        Ok(out)
    };
    let tr_segs = cut(&tr)?;
    let va_segs = cut(&va)?;
    train_segments(config, weights, &tr_segs, &va_segs, progress)
}

/// Mean BCE over every step of `segments`, with inference-mode batch norm.
pub fn validation_loss<T: Real>(weights: &ModelWeights<T>, segments: &[Segment<T>]) -> Result<f64, EvalError> {
    let mut logits = Vec::new();
    let mut targets = Vec::new();
    for s in segments {
        logits.extend(weights.forward_logits(&s.x, BnMode::Infer)?);
        targets.extend_from_slice(&s.targets);
    }
    Ok(bce_with_logits(&logits, &targets)?.0.as_f64())
}

/// Adam on shuffled mini-batches of segments, with early stopping on the
/// validation loss. Deterministic in `config.seed`.
pub fn train_segments<T: Real>(
    config: &TrainConfig,
    mut weights: ModelWeights<T>,
    train: &[Segment<T>],
    val: &[Segment<T>],
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>, EvalError> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(EvalError::Argument("training and validation sets must be non-empty".into()));
    }
    let mut adam = Adam::<T>::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let names = weights.trainable_names();
    let mut rng = seeded_rng(config.seed, 1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ModelWeights<T>)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut steps) = (0.0, 0usize);
        for (batch, idx) in order.chunks(config.batch_segments).enumerate() {
            let xs: Vec<_> = idx.iter().map(|&i| train[i].x.clone()).collect();
            let targets: Vec<T> = idx.iter().flat_map(|&i| train[i].targets.iter().copied()).collect();
            let (logits, cache) = weights.forward_train(&xs)?;
            let lens: Vec<usize> = logits.iter().map(Vec::len).collect();
            let (loss, grad) = bce_with_logits(&logits.concat(), &targets)?;
            if !loss.is_finite() {
                return Err(EvalError::NonFinite { tensor: "loss".into(), epoch, batch });
            }
            let mut split = Vec::with_capacity(lens.len());
            let mut off = 0;
            for n in lens {
                split.push(grad[off..off + n].to_vec());
                off += n;
            }
            let grads = weights.backward(&cache, &split)?;
            let slices = grads.slices();
            if let Some(k) = slices.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(EvalError::NonFinite { tensor: names[k].clone(), epoch, batch });
            }
            adam.step(&mut weights.trainable_mut(), &slices)?;
            weights.update_running_stats(&cache);
            loss_sum += loss.as_f64() * targets.len() as f64;
            steps += targets.len();
        }
        let val_loss = validation_loss(&weights, val)?;
        if !val_loss.is_finite() {
            return Err(EvalError::NonFinite { tensor: "validation loss".into(), epoch, batch: 0 });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / steps as f64,
            val_loss,
        };
        progress(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, weights.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience_epochs {
                break;
            }
        }
    }
    let (_, best_epoch, weights) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        weights,
        history,
        best_epoch,
    })
}
