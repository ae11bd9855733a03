use std::fmt::Write as _;
use std::time::{Duration, Instant};

use super::EvalError;
use crate::audio::AudioClip;
use crate::features::{FbankStream, FeatureConfig};
use crate::model::{ModelWeights, StreamState};
use crate::Real;

/// Timing of streaming inference over one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct RtfReport {
    pub audio_s: f64,
    /// Median wall time over the repetitions.
    pub wall_s: f64,
    pub rtf: f64,
    /// Feature extraction time within the median run.
    pub features_s: f64,
    /// Network time within the median run.
    pub network_s: f64,
    /// Wall time of every repetition, in run order.
    pub runs_s: Vec<f64>,
}

impl RtfReport {
    /// Real-time factor of the network alone, excluding features.
    pub fn network_rtf(&self) -> f64 {
        self.network_s / self.audio_s
    }

    /// Spread of the repetitions relative to their median.
    pub fn spread(&self) -> f64 {
        let max = self.runs_s.iter().copied().fold(f64::MIN, f64::max);
        let min = self.runs_s.iter().copied().fold(f64::MAX, f64::min);
        (max - min) / self.wall_s
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "audio_s={:.3}", self.audio_s);
        let _ = writeln!(s, "wall_s={:.6}", self.wall_s);
        let _ = writeln!(s, "rtf={:.6}", self.rtf);
        let _ = writeln!(s, "features_s={:.6}", self.features_s);
        let _ = writeln!(s, "network_s={:.6}", self.network_s);
        let _ = writeln!(s, "rtf_network_only={:.6}", self.network_rtf());
        let _ = writeln!(s, "repetitions={}", self.runs_s.len());
        let _ = writeln!(s, "spread={:.4}", self.spread());
        s
    }
}

/// Feeds the clip through streaming features and streaming inference in
/// 10 ms chunks, single-threaded.
fn run_once<T: Real>(weights: &ModelWeights<T>, clip: &AudioClip, config: &FeatureConfig) -> Result<(Duration, Duration, Duration, usize), EvalError> {
    let mut fbank = FbankStream::<T>::new(config.clone())?;
    let mut state = StreamState::new(weights);
    let mut frames: Vec<Vec<T>> = Vec::new();
    let (mut feat_t, mut net_t) = (Duration::ZERO, Duration::ZERO);
    let mut emitted = 0;
    let start = Instant::now();
    for chunk in clip.samples().chunks(config.hop()) {
        let t0 = Instant::now();
        frames.clear();
        fbank.push(chunk, |f| frames.push(f.to_vec()));
        for f in &mut frames {
            weights.norm.apply_frame(f);
        }
        let t1 = Instant::now();
        for f in &frames {
            if weights.stream_push(&mut state, f)?.is_some() {
                emitted += 1;
            }
        }
        let t2 = Instant::now();
        feat_t += t1 - t0;
        net_t += t2 - t1;
    }
    Ok((start.elapsed(), feat_t, net_t, emitted))
}

/// Median-of-`repetitions` real-time factor of features plus streaming
/// inference over `clip` (at least 10 s long).
pub fn measure_rtf<T: Real>(
    weights: &ModelWeights<T>,
    clip: &AudioClip,
    config: &FeatureConfig,
    repetitions: usize,
) -> Result<RtfReport, EvalError> {
    let audio_s = clip.duration_s();
    if audio_s < 10.0 {
        return Err(EvalError::Argument(format!("RTF needs at least 10 s of audio, got {audio_s:.2} s")));
    }
    if repetitions < 3 {
        return Err(EvalError::Argument(format!("RTF needs at least 3 repetitions, got {repetitions}")));
    }
    if clip.sample_rate_hz() != config.sample_rate_hz {
        return Err(EvalError::Argument(format!(
            "clip is {} Hz, features expect {} Hz",
            clip.sample_rate_hz(),
            config.sample_rate_hz
        )));
    }
    // Warm-up so the first timed run does not pay for page faults.
    run_once(weights, clip, config)?;
    let mut runs = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        runs.push(run_once(weights, clip, config)?);
    }
    let mut idx: Vec<usize> = (0..runs.len()).collect();
    idx.sort_by_key(|&i| runs[i].0);
    let (wall, feat, net, _) = runs[idx[runs.len() / 2]];
    let wall_s = wall.as_secs_f64();
    Ok(RtfReport {
        audio_s,
        wall_s,
        rtf: wall_s / audio_s,
        features_s: feat.as_secs_f64(),
        network_s: net.as_secs_f64(),
        runs_s: runs.iter().map(|r| r.0.as_secs_f64()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MagicNetConfig;

    #[test]
    fn report_is_consistent() {
        let w = ModelWeights::<f32>::build(MagicNetConfig::default(), 0).unwrap();
        let clip = AudioClip::mono16k((0..160_000).map(|i| ((i as f32) * 0.01).sin() * 0.1).collect());
        let r = measure_rtf(&w, &clip, &FeatureConfig::default(), 3).unwrap();
        assert!(r.rtf > 0.0);
        assert!((r.rtf - r.wall_s / r.audio_s).abs() < 1e-12);
        assert!(r.features_s + r.network_s <= r.wall_s);
        assert_eq!(r.runs_s.len(), 3);
        assert!(r.to_kv().contains("rtf="));
    }

    #[test]
    fn streaming_run_emits_every_step() {
        let w = ModelWeights::<f32>::build(MagicNetConfig::default(), 0).unwrap();
        let clip = AudioClip::mono16k(vec![0.01; 16_000]);
        let (_, _, _, emitted) = run_once(&w, &clip, &FeatureConfig::default()).unwrap();
        assert_eq!(emitted, 13);
    }

    #[test]
    fn argument_checks() {
        let w = ModelWeights::<f32>::build(MagicNetConfig::default(), 0).unwrap();
        let short = AudioClip::mono16k(vec![0.0; 16_000]);
        assert!(measure_rtf(&w, &short, &FeatureConfig::default(), 5).is_err());
        let long = AudioClip::mono16k(vec![0.0; 160_000]);
        assert!(measure_rtf(&w, &long, &FeatureConfig::default(), 2).is_err());
    }
}
