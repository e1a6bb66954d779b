//! Per-segment acoustic feature vectors.
//!
//! Twenty frame-level descriptors (LLDs) are summarised by four
//! functionals each, followed by eight temporal features, for 88 values.
//! The layout is fixed; see [`feature_names`].
//!
//! | dims   | content                                                     |
//! |--------|-------------------------------------------------------------|
//! | 0..80  | for each LLD in [`Lld::ALL`] order: mean, stddev, p20, p80  |
//! | 80..88 | [`TEMPORAL_NAMES`]                                          |

mod functionals;
mod lld;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioError, GridParams};

pub use functionals::functionals;
pub use lld::Analyzer;

pub const FEATURE_DIM: usize = 88;
pub const LLD_COUNT: usize = 20;
pub const FUNCTIONAL_NAMES: [&str; 4] = ["mean", "stddev", "p20", "p80"];
pub const TEMPORAL_NAMES: [&str; 8] = [
    "voiced_ratio",
    "mean_voiced_run_s",
    "mean_unvoiced_run_s",
    "energy_peaks_per_s",
    "f0_slope_per_s",
    "energy_slope_db_per_s",
    "delta_logF0_mean_abs",
    "delta_energy_mean_abs_db",
];

/// Energy floor for silent frames.
pub const ENERGY_FLOOR_DB: f64 = -100.0;
pub(crate) const ENERGY_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("segment produced no frames")]
    NoFrames,
    #[error("feature vector must have {FEATURE_DIM} finite values, got {0}")]
    BadVector(String),
    #[error("invalid feature configuration: {0}")]
    Config(String),
}

impl FeatureError {
    pub fn code(&self) -> &'static str {
        match self {
            FeatureError::Audio(e) => e.code(),
            FeatureError::NoFrames => "features.invalid_segment",
            FeatureError::BadVector(_) => "features.bad_vector",
            FeatureError::Config(_) => "features.config",
        }
    }
}

/// Frame-level descriptor kinds, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lld {
    LogF0,
    EnergyDb,
    Zcr,
    SpectralCentroidHz,
    SpectralFlux,
    SpectralRolloff85Hz,
    VoicingProb,
    /// 1-based cepstral index, 1..=13.
    Mfcc(u8),
}

impl Lld {
    pub const ALL: [Lld; LLD_COUNT] = [
        Lld::LogF0,
        Lld::EnergyDb,
        Lld::Zcr,
        Lld::SpectralCentroidHz,
        Lld::SpectralFlux,
        Lld::SpectralRolloff85Hz,
        Lld::VoicingProb,
        Lld::Mfcc(1),
        Lld::Mfcc(2),
        Lld::Mfcc(3),
        Lld::Mfcc(4),
        Lld::Mfcc(5),
        Lld::Mfcc(6),
        Lld::Mfcc(7),
        Lld::Mfcc(8),
        Lld::Mfcc(9),
        Lld::Mfcc(10),
        Lld::Mfcc(11),
        Lld::Mfcc(12),
        Lld::Mfcc(13),
    ];

    pub fn index(self) -> usize {
        match self {
            Lld::LogF0 => 0,
            Lld::EnergyDb => 1,
            Lld::Zcr => 2,
            Lld::SpectralCentroidHz => 3,
            Lld::SpectralFlux => 4,
            Lld::SpectralRolloff85Hz => 5,
            Lld::VoicingProb => 6,
            Lld::Mfcc(k) => 6 + k as usize,
        }
    }

    pub fn name(self) -> String {
        match self {
            Lld::LogF0 => "logF0".into(),
            Lld::EnergyDb => "energy_db".into(),
            Lld::Zcr => "zcr".into(),
            Lld::SpectralCentroidHz => "spectral_centroid_hz".into(),
            Lld::SpectralFlux => "spectral_flux".into(),
            Lld::SpectralRolloff85Hz => "spectral_rolloff85_hz".into(),
            Lld::VoicingProb => "voicing_prob".into(),
            Lld::Mfcc(k) => format!("mfcc_{k}"),
        }
    }
}

/// Column names of the 88-dim vector, in order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = Lld::ALL
        .iter()
        .flat_map(|l| FUNCTIONAL_NAMES.iter().map(move |f| format!("{}_{}", l.name(), f)))
        .collect();
    names.extend(TEMPORAL_NAMES.iter().map(|s| s.to_string()));
    names
}

/// Index of the first temporal feature.
pub const TEMPORAL_OFFSET: usize = LLD_COUNT * 4;

/// One LLD over the frames of a segment. For `LogF0`, values at unvoiced
/// frames are 0 and carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct LldTrack {
    pub kind: Lld,
    pub values: Vec<f64>,
    pub voiced_mask: Vec<bool>,
}

/// All twenty tracks of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LldSet {
    pub tracks: Vec<LldTrack>,
    pub hop_s: f64,
    pub duration_s: f64,
}

impl LldSet {
    pub fn track(&self, kind: Lld) -> &LldTrack {
        &self.tracks[kind.index()]
    }

    pub fn frame_count(&self) -> usize {
        self.tracks.first().map_or(0, |t| t.values.len())
    }

    pub fn voiced(&self) -> &[bool] {
        &self.tracks[0].voiced_mask
    }

    /// F0 in Hz at voiced frames.
    pub fn voiced_f0_hz(&self) -> Vec<f64> {
        let t = self.track(Lld::LogF0);
        t.values.iter().zip(&t.voiced_mask).filter(|(_, &v)| v).map(|(x, _)| x.exp()).collect()
    }
}

/// The 88-dimensional functional vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_DIM {
            return Err(FeatureError::BadVector(format!("{} values", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::BadVector(format!("non-finite value at dim {i}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = FeatureError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Extraction settings. Defaults: 25 ms Hann frames every 10 ms, F0 search
/// 60–400 Hz, voicing threshold 0.45, 512-point FFT, 26 mel bands up to
/// 8 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub grid: GridParams,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub voicing_threshold: f64,
    pub fft_size: usize,
    pub mel_bands: usize,
    pub mel_fmax_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            grid: GridParams::default(),
            f0_min_hz: 60.0,
            f0_max_hz: 400.0,
            voicing_threshold: 0.45,
            fft_size: 512,
            mel_bands: 26,
            mel_fmax_hz: 8000.0,
        }
    }
}
