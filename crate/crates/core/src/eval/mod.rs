//! Objective evaluation: prosody statistics, spectral and prosodic
//! distortion metrics, and intensity-trend analysis.

mod metrics;
mod trends;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{TimeSpan, Waveform};
use crate::features::{Analyzer, FeatureError, Lld, LldSet};
use crate::stats::{mean, stddev};

pub use metrics::{
    dtw_align, dtw_cost, evaluate_pair, frame_disturbance, mcd, mcd_frame, pitch_energy_distortion, Distortion,
    MetricsReport, MCD_SCALE,
};
pub use trends::{
    parse_runs_csv, runs_to_csv, trend_analysis, ExpectedSigns, ProsodyFeature, Sign, SkippedCell, TrendCell,
    TrendReport, TrendRun, MIN_INTENSITIES, RUNS_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("cepstral frames differ in dimension ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("runs table row {row}: {message}")]
    Runs { row: usize, message: String },
    #[error("expected-sign config: {0}")]
    Config(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Empty(_) => "eval.empty",
            EvalError::Dimension(..) => "eval.dimension",
            EvalError::Runs { .. } => "eval.runs",
            EvalError::Config(_) => "eval.config",
            EvalError::Features(e) => e.code(),
        }
    }
}

/// Duration, pitch and energy summary of a stretch of speech. Pitch
/// statistics cover voiced frames only and are zero, with `unvoiced` set,
/// when no frame is voiced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyStats {
    pub duration_s: f64,
    pub pitch_mean_hz: f64,
    pub pitch_std_hz: f64,
    pub energy_mean_db: f64,
    pub energy_std_db: f64,
    #[serde(default)]
    pub unvoiced: bool,
}

impl ProsodyStats {
    pub fn from_llds(set: &LldSet) -> Self {
        let f0 = set.voiced_f0_hz();
        let energy = &set.track(Lld::EnergyDb).values;
        Self {
            duration_s: set.duration_s,
            pitch_mean_hz: if f0.is_empty() { 0.0 } else { mean(&f0) },
            pitch_std_hz: if f0.is_empty() { 0.0 } else { stddev(&f0) },
            energy_mean_db: mean(energy),
            energy_std_db: stddev(energy),
            unvoiced: f0.is_empty(),
        }
    }
}

/// Prosody statistics over `span`, or the whole waveform when `None`.
pub fn prosody_stats(analyzer: &Analyzer, w: &Waveform, span: Option<TimeSpan>) -> Result<ProsodyStats, EvalError> {
    let span = span.unwrap_or_else(|| TimeSpan::new(0.0, w.duration_s()));
    Ok(ProsodyStats::from_llds(&analyzer.extract_llds(w, span)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, secs: f64) -> Waveform {
        let n = (secs * 16000.0).round() as usize;
        let s = (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin()).collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn sine_stats() {
        let s = prosody_stats(&Analyzer::default(), &sine(220.0, 0.5, 1.0), None).unwrap();
        assert!((s.pitch_mean_hz - 220.0).abs() <= 5.0, "{s:?}");
        assert!(s.pitch_std_hz < 5.0);
        assert!((s.duration_s - 1.0).abs() < 1e-12);
        assert!(!s.unvoiced);
    }

    #[test]
    fn silence_is_flagged() {
        let w = Waveform::new(vec![0.0; 16000], 16000).unwrap();
        let s = prosody_stats(&Analyzer::default(), &w, None).unwrap();
        assert_eq!(s.energy_mean_db, -100.0);
        assert!(s.unvoiced);
        assert_eq!((s.pitch_mean_hz, s.pitch_std_hz), (0.0, 0.0));
    }

    #[test]
    fn concatenation_keeps_means() {
        // 200 Hz has an 80-sample period that divides the 160-sample hop, so
        // every frame of the doubled signal sees the same samples.
        let an = Analyzer::default();
        let w = sine(200.0, 0.4, 0.5);
        let mut doubled = w.samples().to_vec();
        doubled.extend_from_slice(w.samples());
        let d = Waveform::new(doubled, 16000).unwrap();
        let a = prosody_stats(&an, &w, None).unwrap();
        let b = prosody_stats(&an, &d, None).unwrap();
        assert!((b.duration_s - 2.0 * a.duration_s).abs() < 1e-12);
        assert!((a.pitch_mean_hz - b.pitch_mean_hz).abs() < 1e-6);
        assert!((a.energy_mean_db - b.energy_mean_db).abs() < 1e-6);
    }
}
