use super::{rms, AudioClip, AudioError};

/// Result of [`mix_at_snr`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mixed {
    pub clip: AudioClip,
    /// Gain applied to the (looped) noise.
    pub gain: f64,
    /// Samples that exceeded `[-1, 1]` and were clipped.
    pub clipped: usize,
}

/// Loops or truncates `noise` to `len` samples.
pub(crate) fn fit_noise(noise: &[f32], len: usize) -> Vec<f32> {
    noise.iter().copied().cycle().take(len).collect()
}

/// Adds `noise` to labeled `speech` so that the speech-active RMS over the
/// scaled noise RMS equals `snr_db`.
///
/// Speech RMS is measured over speech-labeled samples only. The noise is
/// looped or truncated to the speech length and its RMS is taken over that
/// fitted span. The sum is clipped to `[-1, 1]`; labels are copied.
pub fn mix_at_snr(speech: &AudioClip, noise: &AudioClip, snr_db: f64) -> Result<Mixed, AudioError> {
    if speech.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(AudioError::Argument(format!(
            "sample rate mismatch: speech {} Hz, noise {} Hz",
            speech.sample_rate_hz(),
            noise.sample_rate_hz()
        )));
    }
    let labels = speech
        .labels()
        .ok_or_else(|| AudioError::Argument("speech clip carries no labels".into()))?;
    if noise.is_empty() {
        return Err(AudioError::Argument("noise clip is empty".into()));
    }
    let active: Vec<f32> = speech
        .samples()
        .iter()
        .zip(labels)
        .filter_map(|(&s, &l)| l.then_some(s))
        .collect();
    if active.is_empty() {
        return Err(AudioError::Argument("speech clip has no speech-labeled samples".into()));
    }
    let fitted = fit_noise(noise.samples(), speech.len());
    let noise_rms = rms(&fitted)?;
    if noise_rms == 0.0 {
        return Err(AudioError::Argument("noise clip is silent (rms = 0)".into()));
    }
    let gain = rms(&active)? / (noise_rms * 10f64.powf(snr_db / 20.0));
    let mut clipped = 0;
    let samples = speech
        .samples()
        .iter()
        .zip(&fitted)
        .map(|(&s, &n)| {
            let v = s as f64 + gain * n as f64;
            if v.abs() > 1.0 {
                clipped += 1;
            }
            v.clamp(-1.0, 1.0) as f32
        })
        .collect();
    let clip = AudioClip::new(samples, speech.sample_rate_hz()).with_labels(labels.to_vec())?;
    Ok(Mixed { clip, gain, clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn labeled(samples: Vec<f32>, labels: Vec<bool>) -> AudioClip {
        AudioClip::mono16k(samples).with_labels(labels).unwrap()
    }

    #[test]
    fn symmetric_case_has_unit_gain() {
        let speech = labeled(vec![0.1, -0.1, 0.1, -0.1], vec![true; 4]);
        let noise = AudioClip::mono16k(vec![0.1, 0.1, -0.1, -0.1]);
        let m = mix_at_snr(&speech, &noise, 0.0).unwrap();
        assert!((m.gain - 1.0).abs() < 1e-6);
        let m = mix_at_snr(&speech, &noise, 20.0).unwrap();
        assert!((m.gain - 0.1).abs() < 1e-6);
    }

    #[test]
    fn silence_gaps_do_not_count_toward_speech_rms() {
        let speech = labeled(vec![0.2, -0.2, 0.0, 0.0, 0.0, 0.0], vec![true, true, false, false, false, false]);
        let noise = AudioClip::mono16k(vec![0.2, -0.2]);
        let m = mix_at_snr(&speech, &noise, 0.0).unwrap();
        assert!((m.gain - 1.0).abs() < 1e-6);
        assert_eq!(m.clip.labels().unwrap(), speech.labels().unwrap());
    }

    #[test]
    fn measured_snr_matches_request() {
        let mut rng = seeded_rng(5, 0);
        for _ in 0..20 {
            let n = rng.gen_range(500..2000);
            let labels: Vec<bool> = (0..n).map(|i| (i / 100) % 2 == 0).collect();
            let speech: Vec<f32> = labels.iter().map(|&l| if l { rng.gen_range(-0.3..0.3) } else { 0.0 }).collect();
            let noise: Vec<f32> = (0..rng.gen_range(50..3000)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let snr = rng.gen_range(-10.0..40.0);
            let m = mix_at_snr(&labeled(speech.clone(), labels.clone()), &AudioClip::mono16k(noise.clone()), snr).unwrap();
            let active: Vec<f32> = speech.iter().zip(&labels).filter(|p| *p.1).map(|p| *p.0).collect();
            let scaled: Vec<f32> = fit_noise(&noise, n).iter().map(|&v| (v as f64 * m.gain) as f32).collect();
            let measured = 20.0 * (rms(&active).unwrap() / rms(&scaled).unwrap()).log10();
            assert!((measured - snr).abs() < 0.01, "{measured} vs {snr}");
        }
    }

    #[test]
    fn clipping_is_counted() {
        let speech = labeled(vec![0.9, 0.9, -0.9, -0.9], vec![true; 4]);
        let noise = AudioClip::mono16k(vec![1.0, -1.0, -1.0, 1.0]);
        let m = mix_at_snr(&speech, &noise, 0.0).unwrap();
        assert_eq!(m.clipped, 2);
        assert!(m.clip.samples().iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn silent_noise_is_rejected() {
        let speech = labeled(vec![0.1; 4], vec![true; 4]);
        assert!(matches!(
            mix_at_snr(&speech, &AudioClip::mono16k(vec![0.0; 4]), 10.0),
            Err(AudioError::Argument(_))
        ));
        assert!(mix_at_snr(&AudioClip::mono16k(vec![0.1; 4]), &AudioClip::mono16k(vec![0.1; 4]), 0.0).is_err());
    }
}
