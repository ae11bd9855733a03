//! Synthetic labeled corpora: harmonic "voiced" surrogates separated by
//! silence, mixed with generated noise at a controlled SNR.
//!
//! Each clip is laid out as `gap, utterance, gap, utterance, ...` with gaps
//! drawn from `silence_gap_s` and utterances from `utterance_s`; whatever
//! remains after the last utterance that fits is trailing silence. Labels are
//! exactly the utterance intervals.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{mix_at_snr, AudioClip, AudioError};
use crate::rng::seeded_rng;
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseKind {
    /// Broadband Gaussian noise.
    White,
    /// Low-pass filtered noise with a low engine hum.
    Car,
    /// Amplitude-modulated inharmonic multi-tone over a faint noise floor.
    Machine,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Car, NoiseKind::Machine];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Car => "car",
            NoiseKind::Machine => "machine",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = AudioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AudioError::Argument(format!("unknown noise kind '{s}'")))
    }
}

/// How the per-clip SNR is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrSpec {
    Fixed(f64),
    /// Drawn uniformly from `[low, high]` for every clip.
    Uniform { low: f64, high: f64 },
}

impl SnrSpec {
    fn bounds(self) -> (f64, f64) {
        match self {
            SnrSpec::Fixed(v) => (v, v),
            SnrSpec::Uniform { low, high } => (low, high),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub snr: SnrSpec,
    pub silence_gap_s: (f64, f64),
    pub utterance_s: (f64, f64),
    pub segment_len_s: f64,
    pub noise_kinds: Vec<NoiseKind>,
    pub seed: u64,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            snr: SnrSpec::Uniform { low: 5.0, high: 30.0 },
            silence_gap_s: (2.0, 5.0),
            utterance_s: (1.0, 4.0),
            segment_len_s: 20.0,
            noise_kinds: NoiseKind::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl MixSpec {
    pub const SNR_LIMITS_DB: (f64, f64) = (-10.0, 40.0);

    pub fn validate(&self) -> Result<(), AudioError> {
        let (lo, hi) = self.snr.bounds();
        let (min, max) = Self::SNR_LIMITS_DB;
        if !(lo <= hi && lo >= min && hi <= max) {
            return Err(AudioError::Argument(format!(
                "SNR range [{lo}, {hi}] dB must be ordered and within [{min}, {max}]"
            )));
        }
        let ok_range = |(a, b): (f64, f64)| a > 0.0 && a <= b && b.is_finite();
        if !ok_range(self.silence_gap_s) || !ok_range(self.utterance_s) {
            return Err(AudioError::Argument("gap/utterance ranges must be positive and ordered".into()));
        }
        if !(self.segment_len_s >= self.silence_gap_s.0 + self.utterance_s.0) {
            return Err(AudioError::Argument(format!(
                "segment of {} s cannot hold one {} s gap and one {} s utterance",
                self.segment_len_s, self.silence_gap_s.0, self.utterance_s.0
            )));
        }
        if self.noise_kinds.is_empty() {
            return Err(AudioError::Argument("no noise kinds selected".into()));
        }
        Ok(())
    }
}

/// One synthesized clip plus the condition it was generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub clip: AudioClip,
    pub noise: NoiseKind,
    pub snr_db: f64,
    pub clipped: usize,
}

/// Generates `n_clips` labeled, noisy clips. Clip `i` depends only on
/// `(spec, i)`, so runs with the same spec are bit-identical.
pub fn synth_corpus(spec: &MixSpec, n_clips: usize) -> Result<Vec<SynthClip>, AudioError> {
    spec.validate()?;
    if n_clips == 0 {
        return Err(AudioError::Argument("n_clips must be >= 1".into()));
    }
    (0..n_clips).map(|i| synth_clip(spec, i as u64)).collect()
}

fn synth_clip(spec: &MixSpec, index: u64) -> Result<SynthClip, AudioError> {
    let sr = SAMPLE_RATE_HZ as f64;
    let mut rng = seeded_rng(spec.seed, index);
    let len = (spec.segment_len_s * sr).round() as usize;
    let mut speech = vec![0.0f32; len];
    let mut labels = vec![false; len];

    let (gap_lo, gap_hi) = spec.silence_gap_s;
    let (utt_lo, utt_hi) = spec.utterance_s;
    let mut t = 0.0;
    loop {
        let max_gap = gap_hi.min(spec.segment_len_s - t - utt_lo);
        if max_gap < gap_lo {
            break;
        }
        t += draw(&mut rng, gap_lo, max_gap);
        let dur = draw(&mut rng, utt_lo, utt_hi.min(spec.segment_len_s - t));
        let start = (t * sr).round() as usize;
        let end = (((t + dur) * sr).round() as usize).min(len);
        voiced_surrogate(&mut rng, &mut speech[start..end]);
        labels[start..end].iter_mut().for_each(|l| *l = true);
        t += dur;
    }

    let noise_kind = spec.noise_kinds[rng.gen_range(0..spec.noise_kinds.len())];
    let (lo, hi) = spec.snr.bounds();
    let snr_db = draw(&mut rng, lo, hi);
    let noise = generate_noise(&mut rng, noise_kind, len);

    let speech = AudioClip::mono16k(speech).with_labels(labels)?;
    let mixed = mix_at_snr(&speech, &AudioClip::mono16k(noise), snr_db)?;
    Ok(SynthClip {
        clip: mixed.clip,
        noise: noise_kind,
        snr_db,
        clipped: mixed.clipped,
    })
}

fn draw(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Harmonic tone stack with a gliding fundamental in 100–300 Hz, 4 Hz
/// syllabic amplitude modulation and 20 ms edge ramps, peak-normalized.
fn voiced_surrogate(rng: &mut impl Rng, out: &mut [f32]) {
    let sr = SAMPLE_RATE_HZ as f64;
    let n = out.len();
    if n == 0 {
        return;
    }
    let f0_start: f64 = rng.gen_range(100.0..=300.0);
    let f0_end = (f0_start * rng.gen_range(0.85..1.15)).clamp(100.0, 300.0);
    let tilt: f64 = rng.gen_range(0.7..1.3);
    let syllable_phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let n_harm = (4000.0 / f0_start.max(f0_end)).floor().max(1.0) as usize;
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let amps: Vec<f64> = (1..=n_harm).map(|h| (h as f64).powf(-tilt)).collect();
    let ramp = (0.02 * sr) as usize;
    let mut phase = 0.0;
    for (i, slot) in out.iter_mut().enumerate() {
        let frac = i as f64 / n as f64;
        let f0 = f0_start + (f0_end - f0_start) * frac;
        phase += 2.0 * PI * f0 / sr;
        let tone: f64 = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(h, (&a, &p))| a * ((h + 1) as f64 * phase + p).sin())
            .sum();
        let t = i as f64 / sr;
        let syllabic = 0.25 + 0.75 * 0.5 * (1.0 - (2.0 * PI * 4.0 * t + syllable_phase).cos());
        let edge = if ramp == 0 {
            1.0
        } else {
            let k = i.min(n - 1 - i);
            if k < ramp {
                0.5 * (1.0 - (PI * k as f64 / ramp as f64).cos())
            } else {
                1.0
            }
        };
        *slot = (tone * syllabic * edge) as f32;
    }
    let peak = out.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let level: f32 = rng.gen_range(0.2..0.5);
        out.iter_mut().for_each(|v| *v *= level / peak);
    }
}

fn generate_noise(rng: &mut impl Rng, kind: NoiseKind, len: usize) -> Vec<f32> {
    let sr = SAMPLE_RATE_HZ as f64;
    let out: Vec<f64> = match kind {
        NoiseKind::White => (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        NoiseKind::Car => {
            let cutoff = rng.gen_range(80.0..300.0);
            let hum_hz = rng.gen_range(25.0..60.0);
            let a = (-2.0 * PI * cutoff / sr).exp();
            let (mut s1, mut s2) = (0.0, 0.0);
            let rumble: Vec<f64> = (0..len)
                .map(|_| {
                    s1 = a * s1 + (1.0 - a) * rng.sample::<f64, _>(StandardNormal);
                    s2 = a * s2 + (1.0 - a) * s1;
                    s2
                })
                .collect();
            let scale = unit_rms_scale(&rumble);
            rumble
                .iter()
                .enumerate()
                .map(|(i, &v)| v * scale + 0.3 * (2.0 * PI * hum_hz * i as f64 / sr).sin())
                .collect()
        }
        NoiseKind::Machine => {
            let n_tones = rng.gen_range(3..=6);
            let tones: Vec<(f64, f64, f64)> = (0..n_tones)
                .map(|_| (rng.gen_range(150.0..3000.0), rng.gen_range(0.3..1.0), rng.gen_range(0.0..2.0 * PI)))
                .collect();
            let am_hz = rng.gen_range(8.0..25.0);
            (0..len)
                .map(|i| {
                    let t = i as f64 / sr;
                    let am = 1.0 + 0.5 * (2.0 * PI * am_hz * t).sin();
                    let s: f64 = tones.iter().map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
                    am * s + 0.1 * rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        }
    };
    let scale = unit_rms_scale(&out);
    out.into_iter().map(|v| (v * scale) as f32).collect()
}

fn unit_rms_scale(x: &[f64]) -> f64 {
    let r = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if r > 0.0 {
        1.0 / r
    } else {
        1.0
    }
}
