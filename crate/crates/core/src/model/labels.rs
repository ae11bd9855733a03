use crate::features::{num_frames, FeatureConfig};

/// Per-frame labels from per-sample labels: a frame is speech when at least
/// half of its samples are.
pub fn frame_labels(sample_labels: &[bool], config: &FeatureConfig) -> Vec<bool> {
    let (len, hop) = (config.frame_len(), config.hop());
    let mut prefix = Vec::with_capacity(sample_labels.len() + 1);
    prefix.push(0usize);
    for &l in sample_labels {
        prefix.push(prefix.last().unwrap() + l as usize);
    }
    (0..num_frames(sample_labels.len(), config))
        .map(|k| 2 * (prefix[k * hop + len] - prefix[k * hop]) >= len)
        .collect()
}

/// Majority vote over each window of `factor` frames; ties count as speech.
/// The last window may be shorter.
pub fn step_labels(frame_labels: &[bool], factor: usize) -> Vec<bool> {
    frame_labels
        .chunks(factor.max(1))
        .map(|w| 2 * w.iter().filter(|&&l| l).count() >= w.len())
        .collect()
}

/// Timestamp of output step `j`: the end of its frame window.
pub fn step_time_s(j: usize, factor: usize, hop_s: f64) -> f64 {
    (factor * (j + 1)) as f64 * hop_s
}
