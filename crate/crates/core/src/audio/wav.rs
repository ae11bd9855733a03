//! RIFF/WAVE PCM16 mono 16 kHz reader and writer.

use std::fs;
use std::path::Path;

use super::{AudioClip, AudioError};
use crate::SAMPLE_RATE_HZ;

fn format_err(chunk: &str, reason: impl Into<String>) -> AudioError {
    AudioError::Format {
        chunk: chunk.to_string(),
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Parses a WAV image. Samples are scaled by `1/32768`; labels are absent.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(format_err("RIFF", format!("header needs 12 bytes, file has {}", bytes.len())));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(format_err("RIFF", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(format_err("WAVE", "RIFF form type is not WAVE"));
    }
    let mut pos = 12;
    let mut fmt_seen = false;
    while pos + 8 <= bytes.len() {
        let id = String::from_utf8_lossy(&bytes[pos..pos + 4]).into_owned();
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id.as_str() {
            "fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(format_err("fmt ", format!("declared size {size} is invalid or truncated")));
                }
                let tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if tag != 1 {
                    return Err(AudioError::Unsupported {
                        field: "format tag",
                        found: tag as u32,
                        required: 1,
                    });
                }
                if channels != 1 {
                    return Err(AudioError::Unsupported {
                        field: "channel count",
                        found: channels as u32,
                        required: 1,
                    });
                }
                if rate != SAMPLE_RATE_HZ {
                    return Err(AudioError::Unsupported {
                        field: "sample rate",
                        found: rate,
                        required: SAMPLE_RATE_HZ,
                    });
                }
                if bits != 16 {
                    return Err(AudioError::Unsupported {
                        field: "bit depth",
                        found: bits as u32,
                        required: 16,
                    });
                }
                fmt_seen = true;
            }
            "data" => {
                if !fmt_seen {
                    return Err(format_err("data", "data chunk precedes fmt chunk"));
                }
                if body + size > bytes.len() {
                    return Err(format_err(
                        "data",
                        format!("declares {size} bytes but only {} remain", bytes.len() - body),
                    ));
                }
                if !size.is_multiple_of(2) {
                    return Err(format_err("data", format!("odd byte count {size} for 16-bit samples")));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                    .collect();
                return Ok(AudioClip::mono16k(samples));
            }
            _ => {
                if body + size > bytes.len() {
                    return Err(format_err(&id, "chunk runs past end of file"));
                }
            }
        }
        pos = body + size + (size & 1);
    }
    if fmt_seen {
        Err(format_err("data", "no data chunk"))
    } else {
        Err(format_err("fmt ", "no fmt chunk"))
    }
}

#[inline]
fn quantize(s: f32) -> i16 {
    (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Serializes a clip as a canonical 44-byte-header PCM16 WAV image.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in clip.samples() {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AudioError::io(path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    if clip.sample_rate_hz() != SAMPLE_RATE_HZ {
        return Err(AudioError::Unsupported {
            field: "sample rate",
            found: clip.sample_rate_hz(),
            required: SAMPLE_RATE_HZ,
        });
    }
    fs::write(path, encode_wav(clip)).map_err(|e| AudioError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_with_pcm(words: &[i16]) -> Vec<u8> {
        let mut bytes = encode_wav(&AudioClip::mono16k(vec![0.0; words.len()]));
        for (i, w) in words.iter().enumerate() {
            bytes[44 + 2 * i..46 + 2 * i].copy_from_slice(&w.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn pcm_scaling() {
        let c = decode_wav(&image_with_pcm(&[16384, 0, -32768])).unwrap();
        assert_eq!(c.samples(), &[0.5, 0.0, -1.0]);
        assert!(c.labels().is_none());
    }

    #[test]
    fn write_quantization() {
        let bytes = encode_wav(&AudioClip::mono16k(vec![0.5, 0.0, 0.0]));
        assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 16384);
        assert!(bytes[46..].iter().all(|&b| b == 0));
    }

    #[test]
    fn one_second_file_has_16000_samples() {
        let bytes = encode_wav(&AudioClip::mono16k(vec![0.1; 16000]));
        assert_eq!(decode_wav(&bytes).unwrap().len(), 16000);
    }

    #[test]
    fn header_errors_name_the_chunk() {
        let good = encode_wav(&AudioClip::mono16k(vec![0.0; 8]));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_wav(&bad), Err(AudioError::Format { chunk, .. }) if chunk == "RIFF"));
        let mut bad = good.clone();
        bad[8] = b'X';
        assert!(matches!(decode_wav(&bad), Err(AudioError::Format { chunk, .. }) if chunk == "WAVE"));
        let truncated = &good[..good.len() - 3];
        assert!(matches!(decode_wav(truncated), Err(AudioError::Format { chunk, .. }) if chunk == "data"));
    }

    #[test]
    fn unsupported_formats_report_found_and_required() {
        let good = encode_wav(&AudioClip::mono16k(vec![0.0; 8]));
        let mut stereo = good.clone();
        stereo[22..24].copy_from_slice(&2u16.to_le_bytes());
        match decode_wav(&stereo) {
            Err(AudioError::Unsupported { field, found, required }) => {
                assert_eq!((field, found, required), ("channel count", 2, 1))
            }
            other => panic!("{other:?}"),
        }
        let mut rate = good.clone();
        rate[24..28].copy_from_slice(&44100u32.to_le_bytes());
        assert!(matches!(decode_wav(&rate), Err(AudioError::Unsupported { found: 44100, required: 16000, .. })));
        let mut bits = good.clone();
        bits[34..36].copy_from_slice(&24u16.to_le_bytes());
        assert!(matches!(decode_wav(&bits), Err(AudioError::Unsupported { found: 24, required: 16, .. })));
    }

    #[test]
    fn skips_unknown_chunks() {
        let good = encode_wav(&AudioClip::mono16k(vec![0.25; 4]));
        let mut with_list = good[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&good[36..]);
        assert_eq!(decode_wav(&with_list).unwrap().samples(), &[0.25; 4]);
    }

    #[test]
    fn file_round_trip_and_io_error_context() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let clip = AudioClip::mono16k(vec![0.0; 100]);
        write_wav(&clip, &p).unwrap();
        assert_eq!(read_wav(&p).unwrap(), clip);
        let missing = dir.path().join("nope").join("b.wav");
        let err = write_wav(&clip, &missing).unwrap_err();
        assert!(err.to_string().contains("b.wav"));
    }

    proptest! {
        #[test]
        fn round_trip_within_one_lsb(samples in prop::collection::vec(-1.0f32..=1.0, 0..400)) {
            let clip = AudioClip::mono16k(samples.clone());
            let back = decode_wav(&encode_wav(&clip)).unwrap();
            for (a, b) in samples.iter().zip(back.samples()) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
