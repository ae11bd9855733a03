use super::{mel_filterbank, FeatureConfig, FeatureError, FeatureMatrix, MelFilterbank, RealFft, Window};
use crate::audio::AudioClip;
use crate::nn::Tensor2D;
use crate::Real;

/// Number of whole frames in `n` samples.
pub fn num_frames(n: usize, config: &FeatureConfig) -> usize {
    let len = config.frame_len();
    if n < len {
        0
    } else {
        (n - len) / config.hop() + 1
    }
}

/// Splits `samples` into overlapping frames; a trailing partial frame is dropped.
pub fn frame_signal<'a>(samples: &'a [f32], config: &FeatureConfig) -> Vec<&'a [f32]> {
    let (len, hop) = (config.frame_len(), config.hop());
    (0..num_frames(samples.len(), config))
        .map(|k| &samples[k * hop..k * hop + len])
        .collect()
}

/// Reusable per-frame Fbank computation (window, filterbank and FFT plan).
pub struct FbankExtractor<T: Real> {
    config: FeatureConfig,
    window: Vec<T>,
    mel: MelFilterbank<T>,
    fft: RealFft<T>,
    frame: Vec<T>,
    power: Vec<T>,
}

impl<T: Real> FbankExtractor<T> {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        config.validate()?;
        let n = config.frame_len();
        let denom = (n.max(2) - 1) as f64;
        let window = (0..n)
            .map(|i| {
                let c = (2.0 * std::f64::consts::PI * i as f64 / denom).cos();
                T::lit(match config.window {
                    Window::Hann => 0.5 - 0.5 * c,
                    Window::Hamming => 0.54 - 0.46 * c,
                })
            })
            .collect();
        let mel = mel_filterbank(&config)?;
        Ok(Self {
            fft: RealFft::new(config.fft_size),
            frame: vec![T::zero(); config.fft_size],
            power: vec![T::zero(); config.n_bins()],
            window,
            mel,
            config,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Log-mel energies of one frame. `prev` is the raw sample just before
    /// the frame (0 at the start of the signal), used by pre-emphasis.
    pub fn frame_features(&mut self, prev: f32, frame: &[f32], out: &mut [T]) {
        let a = T::lit(self.config.preemph);
        let mut last = T::lit(prev as f64);
        for (i, &s) in frame.iter().enumerate() {
            let x = T::lit(s as f64);
            self.frame[i] = (x - a * last) * self.window[i];
            last = x;
        }
        for v in &mut self.frame[frame.len()..] {
            *v = T::zero();
        }
        let bins = self.fft.process(&self.frame).expect("buffer sized to fft");
        for (p, c) in self.power.iter_mut().zip(bins) {
            *p = c.norm_sqr();
        }
        self.mel.apply(&self.power, out);
        let floor = T::lit(self.config.log_floor);
        for v in out.iter_mut().take(self.config.n_mels) {
            *v = v.max(floor).ln();
        }
    }

    /// Batch extraction over a whole signal.
    pub fn extract(&mut self, samples: &[f32]) -> FeatureMatrix<T> {
        let cfg = self.config.clone();
        let frames = frame_signal(samples, &cfg);
        let mut data = Tensor2D::zeros(cfg.n_mels, frames.len());
        let mut col = vec![T::zero(); cfg.n_mels];
        for (k, frame) in frames.iter().enumerate() {
            let start = k * cfg.hop();
            let prev = if start == 0 { 0.0 } else { samples[start - 1] };
            self.frame_features(prev, frame, &mut col);
            for (c, &v) in col.iter().enumerate() {
                data.set(c, k, v);
            }
        }
        FeatureMatrix {
            data,
            hop_s: cfg.hop_ms / 1000.0,
            t0_s: cfg.frame_len() as f64 / 2.0 / cfg.sample_rate_hz as f64,
        }
    }
}

/// Fbank40 of a clip with the given config.
pub fn fbank40<T: Real>(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureMatrix<T>, FeatureError> {
    if clip.sample_rate_hz() != config.sample_rate_hz {
        return Err(FeatureError::Argument(format!(
            "clip is {} Hz, features expect {} Hz",
            clip.sample_rate_hz(),
            config.sample_rate_hz
        )));
    }
    Ok(FbankExtractor::new(config.clone())?.extract(clip.samples()))
}

/// Incremental extractor: accepts arbitrary chunks of samples and emits each
/// frame as soon as its last sample arrives.
pub struct FbankStream<T: Real> {
    extractor: FbankExtractor<T>,
    /// Samples from the start of the next frame onward.
    pending: Vec<f32>,
    prev: f32,
    frames_out: usize,
}

impl<T: Real> FbankStream<T> {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        Ok(Self {
            extractor: FbankExtractor::new(config)?,
            pending: Vec::new(),
            prev: 0.0,
            frames_out: 0,
        })
    }

    pub fn frames_emitted(&self) -> usize {
        self.frames_out
    }

    pub fn reset(&mut self) {
        self.pending.clear();
        self.prev = 0.0;
        self.frames_out = 0;
    }

    /// Feeds samples, calling `sink` with every completed frame in order.
    pub fn push(&mut self, samples: &[f32], mut sink: impl FnMut(&[T])) {
        let (len, hop, n_mels) = {
            let c = self.extractor.config();
            (c.frame_len(), c.hop(), c.n_mels)
        };
        self.pending.extend_from_slice(samples);
        let mut col = vec![T::zero(); n_mels];
        let mut start = 0;
        while self.pending.len() - start >= len {
            self.extractor.frame_features(self.prev, &self.pending[start..start + len], &mut col);
            sink(&col);
            self.frames_out += 1;
            self.prev = self.pending[start + hop - 1];
            start += hop;
        }
        self.pending.drain(..start);
    }

    /// Convenience wrapper collecting the frames from one push.
    pub fn push_collect(&mut self, samples: &[f32]) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        self.push(samples, |f| out.push(f.to_vec()));
        out
    }
}
