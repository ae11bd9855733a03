use std::fmt::Write as _;

use super::{f1_score, prepare_clip, roc_auc, threshold_sweep, EvalError, F1Result, LabeledClip};
use crate::features::FeatureConfig;
use crate::model::{step_labels, ModelWeights};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    Fixed(f64),
    /// Best-F1 threshold on the evaluated data itself (optimistic).
    Sweep,
    /// Best-F1 threshold on the leading `dev_fraction` of the clips; the
    /// remaining clips are scored with it.
    DevSweep { dev_fraction: f64 },
}

/// Model scores and reference labels of one clip, one entry per output step.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipScores {
    pub probs: Vec<f64>,
    pub labels: Vec<bool>,
    pub condition: Option<crate::audio::Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub key: String,
    pub steps: usize,
    pub f1: F1Result,
    /// `None` when the subset has a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub clips: usize,
    pub steps: usize,
    pub threshold: f64,
    pub threshold_source: String,
    pub f1: F1Result,
    pub auc: f64,
    pub conditions: Vec<ConditionReport>,
}

impl EvalReport {
    /// Line-oriented `key=value` text.
    pub fn to_kv(&self) -> String {
        let c = &self.f1.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "clips={}", self.clips);
        let _ = writeln!(s, "steps={}", self.steps);
        let _ = writeln!(s, "threshold={:.6}", self.threshold);
        let _ = writeln!(s, "threshold_source={}", self.threshold_source);
        let _ = writeln!(s, "f1={:.6}", self.f1.f1);
        let _ = writeln!(s, "f1_degenerate={}", self.f1.degenerate);
        let _ = writeln!(s, "precision={:.6}", c.precision());
        let _ = writeln!(s, "recall={:.6}", c.recall());
        let _ = writeln!(s, "auc={:.6}", self.auc);
        let _ = writeln!(s, "tp={}\nfp={}\ntn={}\nfn={}", c.tp, c.fp, c.tn, c.fn_);
        s
    }

    /// One CSV row per condition.
    pub fn conditions_csv(&self) -> String {
        let mut s = String::from("condition,steps,tp,fp,tn,fn,f1,auc\n");
        for r in &self.conditions {
            let c = &r.f1.confusion;
            let auc = r.auc.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{},{:.6},{}", r.key, r.steps, c.tp, c.fp, c.tn, c.fn_, r.f1.f1, auc);
        }
        s
    }
}

fn score_clip<T: Real>(weights: &ModelWeights<T>, clip: &LabeledClip, features: &FeatureConfig) -> Result<ClipScores, EvalError> {
    let prep = prepare_clip::<T>(clip, features)?;
    let probs = weights.predict(&prep.features)?.into_iter().map(|p| p.as_f64()).collect();
    Ok(ClipScores {
        probs,
        labels: step_labels(&prep.frame_labels, weights.config.downsample()),
        condition: prep.condition,
    })
}

/// Batch inference over every clip, fanned out over `threads` workers.
/// Results keep the input order.
pub fn predict_clips<T: Real>(
    weights: &ModelWeights<T>,
    clips: &[LabeledClip],
    features: &FeatureConfig,
    threads: usize,
) -> Result<Vec<ClipScores>, EvalError> {
    let threads = threads.clamp(1, clips.len().max(1));
    if threads == 1 {
        return clips.iter().map(|c| score_clip(weights, c, features)).collect();
    }
    let chunk = clips.len().div_ceil(threads);
    let parts: Vec<Result<Vec<ClipScores>, EvalError>> = std::thread::scope(|s| {
        let handles: Vec<_> = clips
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|c| score_clip(weights, c, features)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(clips.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn flatten<'a>(scores: impl IntoIterator<Item = &'a ClipScores>) -> (Vec<f64>, Vec<bool>) {
    let mut p = Vec::new();
    let mut l = Vec::new();
    for s in scores {
        p.extend_from_slice(&s.probs);
        l.extend_from_slice(&s.labels);
    }
    (p, l)
}

fn snr_bucket(snr: f64) -> String {
    let lo = (snr / 5.0).floor() * 5.0;
    format!("snr={}..{}", lo, lo + 5.0)
}

/// Scores every clip and aggregates F1/AUC overall and per noise kind and
/// 5 dB SNR bucket.
pub fn evaluate<T: Real>(
    weights: &ModelWeights<T>,
    clips: &[LabeledClip],
    features: &FeatureConfig,
    policy: ThresholdPolicy,
    threads: usize,
) -> Result<EvalReport, EvalError> {
    if clips.is_empty() {
        return Err(EvalError::Argument("nothing to evaluate".into()));
    }
    let scores = predict_clips(weights, clips, features, threads)?;
    let (threshold, source, eval_set): (f64, String, &[ClipScores]) = match policy {
        ThresholdPolicy::Fixed(t) => (t, "fixed".into(), &scores),
        ThresholdPolicy::Sweep => {
            let (p, l) = flatten(&scores);
            (threshold_sweep(&p, &l)?.threshold, "sweep".into(), &scores)
        }
        ThresholdPolicy::DevSweep { dev_fraction } => {
            if scores.len() < 2 || !(dev_fraction > 0.0 && dev_fraction < 1.0) {
                return Err(EvalError::Argument(format!(
                    "a dev split of {dev_fraction} needs a fraction in (0, 1) and at least 2 clips, got {}",
                    scores.len()
                )));
            }
            let n_dev = ((scores.len() as f64 * dev_fraction).round() as usize).clamp(1, scores.len() - 1);
            let (p, l) = flatten(&scores[..n_dev]);
            let t = threshold_sweep(&p, &l)?.threshold;
            (t, format!("dev_sweep:{n_dev}_clips"), &scores[n_dev..])
        }
    };
    let (p, l) = flatten(eval_set);
    let f1 = f1_score(&p, &l, threshold)?;
    let auc = roc_auc(&p, &l)?;

    let mut keys: Vec<String> = Vec::new();
    for s in eval_set {
        if let Some(c) = &s.condition {
            for k in [format!("noise={}", c.noise), snr_bucket(c.snr_db)] {
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
        }
    }
    keys.sort();
    let mut conditions = Vec::with_capacity(keys.len());
    for key in keys {
        let subset = eval_set.iter().filter(|s| {
            s.condition
                .as_ref()
                .is_some_and(|c| format!("noise={}", c.noise) == key || snr_bucket(c.snr_db) == key)
        });
        let (p, l) = flatten(subset);
        conditions.push(ConditionReport {
            steps: p.len(),
            f1: f1_score(&p, &l, threshold)?,
            auc: roc_auc(&p, &l).ok(),
            key,
        });
    }
    Ok(EvalReport {
        clips: eval_set.len(),
        steps: p.len(),
        threshold,
        threshold_source: source,
        f1,
        auc,
        conditions,
    })
}
