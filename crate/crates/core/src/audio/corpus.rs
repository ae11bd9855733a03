//! Corpus manifests and per-sample label files.
//!
//! A manifest is a text file with one clip per line:
//! `<wav-path>\t<label-path>[\t<noise-kind>\t<snr-db>]`. Relative paths are
//! resolved against the manifest's directory. Label files hold one byte per
//! sample, `0` for non-speech and `1` for speech.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{read_wav, write_wav, AudioClip, AudioError, SynthClip};

/// Noise condition a clip was generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub noise: String,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub wav: PathBuf,
    pub labels: PathBuf,
    pub condition: Option<Condition>,
}

impl ManifestEntry {
    /// Reads the WAV and attaches its labels.
    pub fn load(&self) -> Result<AudioClip, AudioError> {
        let clip = read_wav(&self.wav)?;
        let labels = read_labels(&self.labels)?;
        if labels.len() != clip.len() {
            return Err(AudioError::Argument(format!(
                "{}: {} labels for {} samples in {}",
                self.labels.display(),
                labels.len(),
                clip.len(),
                self.wav.display()
            )));
        }
        clip.with_labels(labels)
    }
}

pub fn write_labels(labels: &[bool], path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    let bytes: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    fs::write(path, bytes).map_err(|e| AudioError::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<bool>, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AudioError::io(path, e))?;
    bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(AudioError::Argument(format!(
                "{}: byte {i} is {other}, labels must be 0 or 1",
                path.display()
            ))),
        })
        .collect()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, AudioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AudioError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let bad = |line: usize, reason: String| AudioError::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let condition = match cols.len() {
            2 => None,
            4 => Some(Condition {
                noise: cols[2].to_string(),
                snr_db: cols[3]
                    .parse()
                    .map_err(|_| bad(i + 1, format!("SNR column '{}' is not a number", cols[3])))?,
            }),
            n => return Err(bad(i + 1, format!("expected 2 or 4 tab-separated columns, found {n}"))),
        };
        entries.push(ManifestEntry {
            wav: base.join(cols[0]),
            labels: base.join(cols[1]),
            condition,
        });
    }
    Ok(entries)
}

/// Writes `clip_NNNNN.wav` / `clip_NNNNN.lab` pairs and `manifest.tsv` into
/// `dir` (created if needed). Returns the manifest path.
pub fn write_corpus(dir: impl AsRef<Path>, clips: &[SynthClip]) -> Result<PathBuf, AudioError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| AudioError::io(dir, e))?;
    let mut manifest = String::new();
    for (i, c) in clips.iter().enumerate() {
        let wav = format!("clip_{i:05}.wav");
        let lab = format!("clip_{i:05}.lab");
        write_wav(&c.clip, dir.join(&wav))?;
        let labels = c
            .clip
            .labels()
            .ok_or_else(|| AudioError::Argument(format!("clip {i} has no labels")))?;
        write_labels(labels, dir.join(&lab))?;
        writeln!(manifest, "{wav}\t{lab}\t{}\t{:.3}", c.noise, c.snr_db).expect("string write");
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).map_err(|e| AudioError::io(&path, e))?;
    Ok(path)
}
