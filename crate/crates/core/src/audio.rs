//! WAV decoding, resampling and framing.
//!
//! Everything downstream works on mono `f64` samples at [`ANALYSIS_RATE`].
//! Decoding accepts RIFF/WAVE with PCM16 or IEEE float32 payloads; any
//! channel count is averaged down to mono.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sample rate used for all feature analysis.
pub const ANALYSIS_RATE: u32 = 16_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed WAV at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported WAV format: {0}")]
    Unsupported(String),
    #[error("invalid segment [{start}, {end}] for audio of {duration} s")]
    InvalidSegment { start: f64, end: f64, duration: f64 },
    #[error("invalid sample rate {0}")]
    InvalidRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid frame parameters: {0}")]
    InvalidGrid(String),
}

impl AudioError {
    pub fn code(&self) -> &'static str {
        match self {
            AudioError::Parse { .. } => "audio.parse",
            AudioError::Unsupported(_) => "audio.unsupported_format",
            AudioError::InvalidSegment { .. } => "audio.invalid_segment",
            AudioError::InvalidRate(_) => "audio.invalid_rate",
            AudioError::NonFinite(_) => "audio.non_finite",
            AudioError::InvalidGrid(_) => "audio.invalid_grid",
        }
    }
}

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Builds a waveform, clamping samples into [-1, 1].
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidRate(sample_rate));
        }
        let mut samples = samples;
        for (i, s) in samples.iter_mut().enumerate() {
            if !s.is_finite() {
                return Err(AudioError::NonFinite(i));
            }
            *s = s.clamp(-1.0, 1.0);
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns this waveform at the analysis rate, resampling if needed.
    pub fn to_analysis_rate(&self) -> Waveform {
        resample(self, ANALYSIS_RATE).expect("analysis rate is positive")
    }
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16, AudioError> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| AudioError::Parse { offset: at, message: "unexpected end of data".into() })
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, AudioError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| AudioError::Parse { offset: at, message: "unexpected end of data".into() })
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes a RIFF/WAVE file. PCM16 is scaled by 1/32768.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::Parse { offset: bytes.len(), message: "file shorter than RIFF header".into() });
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(AudioError::Parse { offset: 0, message: "missing RIFF tag".into() });
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::Parse { offset: 8, message: "missing WAVE tag".into() });
    }

    let mut pos = 12;
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<(usize, usize)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4)? as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(AudioError::Parse { offset: pos, message: "fmt chunk too short".into() });
                }
                let mut format = read_u16(bytes, body)?;
                let channels = read_u16(bytes, body + 2)?;
                let sample_rate = read_u32(bytes, body + 4)?;
                let bits = read_u16(bytes, body + 14)?;
                if format == FORMAT_EXTENSIBLE {
                    if size < 40 || body + 26 > bytes.len() {
                        return Err(AudioError::Parse {
                            offset: body,
                            message: "extensible fmt chunk too short".into(),
                        });
                    }
                    format = read_u16(bytes, body + 24)?;
                }
                if channels == 0 {
                    return Err(AudioError::Parse { offset: body + 2, message: "zero channels".into() });
                }
                if sample_rate == 0 {
                    return Err(AudioError::Parse { offset: body + 4, message: "zero sample rate".into() });
                }
                fmt = Some(FmtChunk { format, channels, sample_rate, bits });
            }
            b"data" => {
                let end = body.checked_add(size).filter(|&e| e <= bytes.len()).ok_or_else(|| {
                    AudioError::Parse { offset: pos + 4, message: "data chunk exceeds file size".into() }
                })?;
                data = Some((body, end));
                break;
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }

    let fmt = fmt.ok_or(AudioError::Parse { offset: pos, message: "missing fmt chunk".into() })?;
    let (start, end) = data.ok_or(AudioError::Parse { offset: pos, message: "missing data chunk".into() })?;

    let bytes_per_sample = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (f, b) => return Err(AudioError::Unsupported(format!("format tag {f} with {b} bits per sample"))),
    };
    let channels = fmt.channels as usize;
    let block = bytes_per_sample * channels;
    let payload = &bytes[start..end];
    let n = payload.len() / block;
    let mut samples = Vec::with_capacity(n);
    for (frame_idx, frame) in payload.chunks_exact(block).enumerate() {
        let mut acc = 0.0;
        for ch in frame.chunks_exact(bytes_per_sample) {
            let v = if bytes_per_sample == 2 {
                i16::from_le_bytes([ch[0], ch[1]]) as f64 / 32768.0
            } else {
                let f = f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]) as f64;
                if !f.is_finite() {
                    return Err(AudioError::NonFinite(frame_idx));
                }
                f
            };
            acc += v;
        }
        samples.push(acc / channels as f64);
    }
    Waveform::new(samples, fmt.sample_rate)
}

/// Sample encoding for [`encode_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Encodes a mono waveform as a canonical 44-byte-header WAV file.
pub fn encode_wav(w: &Waveform, encoding: WavEncoding) -> Vec<u8> {
    let (format, bits) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 16u16),
        WavEncoding::Float32 => (FORMAT_FLOAT, 32u16),
    };
    let bps = (bits / 8) as u32;
    let data_len = w.len() as u32 * bps;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * bps).to_le_bytes());
    out.extend_from_slice(&(bps as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in w.samples() {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            WavEncoding::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zero crossings of the interpolation kernel on each side, at the
/// (possibly lowered) cutoff.
const SINC_ZERO_CROSSINGS: f64 = 16.0;

/// Windowed-sinc (Blackman) resampling. The output holds
/// `round(len * target / source)` samples.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidRate(target_rate));
    }
    let src_rate = w.sample_rate();
    if src_rate == target_rate {
        return Ok(w.clone());
    }
    let ratio = target_rate as f64 / src_rate as f64;
    let cutoff = ratio.min(1.0);
    let half_width = SINC_ZERO_CROSSINGS / cutoff;
    let input = w.samples();
    let out_len = (input.len() as f64 * ratio).round() as usize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 / ratio;
        let lo = (center - half_width).ceil().max(0.0) as usize;
        let hi = ((center + half_width).floor() as isize).min(input.len() as isize - 1);
        let mut acc = 0.0;
        if hi >= lo as isize {
            for (k, &x) in input.iter().enumerate().take(hi as usize + 1).skip(lo) {
                let t = center - k as f64;
                // Blackman window over [-half_width, half_width]
                let u = (t / half_width + 1.0) * 0.5;
                let win = 0.42 - 0.5 * (2.0 * PI * u).cos() + 0.08 * (4.0 * PI * u).cos();
                acc += x * cutoff * sinc(cutoff * t) * win;
            }
        }
        out.push(acc);
    }
    Waveform::new(out, target_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

/// Framing configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub frame_length_ms: f64,
    pub hop_ms: f64,
    pub window: WindowKind,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { frame_length_ms: 25.0, hop_ms: 10.0, window: WindowKind::Hann }
    }
}

impl GridParams {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), AudioError> {
        if !(self.frame_length_ms.is_finite() && self.hop_ms.is_finite()) {
            return Err(AudioError::InvalidGrid("non-finite frame parameters".into()));
        }
        if self.frame_len(sample_rate) < 2 || self.hop_len(sample_rate) == 0 {
            return Err(AudioError::InvalidGrid(format!(
                "frame {} ms / hop {} ms too small at {} Hz",
                self.frame_length_ms, self.hop_ms, sample_rate
            )));
        }
        Ok(())
    }
}

/// One analysis frame. `length` samples are copied from the waveform
/// starting at `start_sample` and placed at `offset` inside a zero
/// buffer of the grid's frame length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    pub start_sample: usize,
    pub length: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    pub params: GridParams,
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop_len: usize,
    pub frames: Vec<Frame>,
}

impl FrameGrid {
    /// Zero-padded frame buffer (unwindowed).
    pub fn frame_samples(&self, w: &Waveform, idx: usize) -> Vec<f64> {
        let f = self.frames[idx];
        let mut buf = vec![0.0; self.frame_len];
        buf[f.offset..f.offset + f.length].copy_from_slice(&w.samples()[f.start_sample..f.start_sample + f.length]);
        buf
    }

    /// The real (non-padding) samples of a frame.
    pub fn frame_view<'a>(&self, w: &'a Waveform, idx: usize) -> &'a [f64] {
        let f = self.frames[idx];
        &w.samples()[f.start_sample..f.start_sample + f.length]
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_len as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: f64,
    pub end: f64,
}

impl TimeSpan {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Slack allowed when a segment end overshoots the waveform because of
/// timestamp rounding in alignment files.
const SEGMENT_SLACK_S: f64 = 0.005;

/// Frames the samples of `segment`.
///
/// Full frames start every hop from the segment start; a trailing
/// remainder shorter than one hop is not covered. A segment shorter than
/// one frame yields exactly one zero-padded frame with the segment
/// centered in it.
pub fn frame(w: &Waveform, segment: TimeSpan, params: &GridParams) -> Result<FrameGrid, AudioError> {
    params.validate(w.sample_rate())?;
    let duration = w.duration_s();
    let invalid = AudioError::InvalidSegment { start: segment.start, end: segment.end, duration };
    if !(segment.start.is_finite() && segment.end.is_finite())
        || segment.start < 0.0
        || segment.end <= segment.start
        || segment.end > duration + SEGMENT_SLACK_S
    {
        return Err(invalid);
    }
    let sr = w.sample_rate() as f64;
    let s0 = ((segment.start * sr).round() as usize).min(w.len());
    let s1 = ((segment.end * sr).round() as usize).min(w.len());
    if s1 <= s0 {
        return Err(invalid);
    }
    let n = s1 - s0;
    let frame_len = params.frame_len(w.sample_rate());
    let hop_len = params.hop_len(w.sample_rate());
    let frames = if n < frame_len {
        vec![Frame { start_sample: s0, length: n, offset: (frame_len - n) / 2 }]
    } else {
        let count = (n - frame_len) / hop_len + 1;
        (0..count).map(|i| Frame { start_sample: s0 + i * hop_len, length: frame_len, offset: 0 }).collect()
    };
    Ok(FrameGrid { params: *params, sample_rate: w.sample_rate(), frame_len, hop_len, frames })
}
