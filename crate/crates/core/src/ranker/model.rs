use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{calibrate, Level, RankerError};

pub const MODEL_FORMAT_VERSION: u64 = 1;
pub const SUPPORTED_MODEL_VERSIONS: &[u64] = &[MODEL_FORMAT_VERSION];

/// A trained, calibrated ranking function for one (emotion, level).
///
/// The bias term is fixed at zero: it cancels in every pairwise
/// difference and is absorbed by the min-max calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingModel {
    pub emotion: String,
    pub level: Level,
    pub w: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub score_min: f64,
    pub score_max: f64,
    pub trained_on: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    #[serde(flatten)]
    model: RankingModel,
}

impl RankingModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn bias(&self) -> f64 {
        0.0
    }

    pub fn validate(&self) -> Result<(), RankerError> {
        let d = self.w.len();
        if d == 0 || self.feature_mean.len() != d || self.feature_std.len() != d {
            return Err(RankerError::Corrupt(format!(
                "inconsistent lengths: w {}, mean {}, std {}",
                d,
                self.feature_mean.len(),
                self.feature_std.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.w) || !finite(&self.feature_mean) || !finite(&self.feature_std) {
            return Err(RankerError::Corrupt("non-finite parameters".into()));
        }
        if self.feature_std.iter().any(|&s| s <= 0.0) {
            return Err(RankerError::Corrupt("feature_std must be positive".into()));
        }
        if !(self.score_min.is_finite() && self.score_max.is_finite() && self.score_min <= self.score_max) {
            return Err(RankerError::Corrupt(format!("bad calibration bounds [{}, {}]", self.score_min, self.score_max)));
        }
        Ok(())
    }

    /// Uncalibrated score wᵀx̃ on standardized input.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64, RankerError> {
        if x.len() != self.w.len() {
            return Err(RankerError::Dimension { expected: self.w.len(), found: x.len() });
        }
        Ok(x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_std)
            .zip(&self.w)
            .map(|(((x, m), s), w)| w * (x - m) / s)
            .sum::<f64>()
            + self.bias())
    }

    /// Calibrated intensity in [0, 1].
    pub fn score(&self, x: &[f64]) -> Result<f64, RankerError> {
        Ok(calibrate(self.raw_score(x)?, self.score_min, self.score_max))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile { version: MODEL_FORMAT_VERSION, model: self.clone() })
            .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RankerError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| RankerError::Corrupt(e.to_string()))?;
        let version = value
            .get("version")
            .ok_or_else(|| RankerError::Corrupt("missing version".into()))?
            .as_u64()
            .ok_or_else(|| RankerError::Corrupt("version is not an integer".into()))?;
        if !SUPPORTED_MODEL_VERSIONS.contains(&version) {
            return Err(RankerError::Version { found: version, supported: SUPPORTED_MODEL_VERSIONS.to_vec() });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| RankerError::Corrupt(e.to_string()))?;
        file.model.validate()?;
        Ok(file.model)
    }
}

pub fn save_model(model: &RankingModel, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, model.to_json())
}

/// Reads a model file; I/O failures surface as corrupt-file errors.
pub fn load_model(path: &Path) -> Result<RankingModel, RankerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RankerError::Corrupt(format!("{}: {e}", path.display())))?;
    RankingModel::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RankingModel {
        RankingModel {
            emotion: "Happy".into(),
            level: Level::Phoneme,
            w: vec![0.1, -0.2, 1.0 / 3.0],
            feature_mean: vec![1.0, 2.0, 3.0],
            feature_std: vec![0.5, 1.0, std::f64::consts::PI],
            score_min: -1.234567890123,
            score_max: 2.0,
            trained_on: "abc".into(),
        }
    }

    #[test]
    fn roundtrip_is_lossless() {
        let m = model();
        assert_eq!(RankingModel::from_json(&m.to_json()).unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = model().to_json();
        assert!(matches!(RankingModel::from_json(&text[..text.len() / 2]), Err(RankerError::Corrupt(_))));
    }

    #[test]
    fn unknown_version_names_supported() {
        let text = model().to_json().replace("\"version\": 1", "\"version\": 7");
        match RankingModel::from_json(&text) {
            Err(RankerError::Version { found: 7, supported }) => assert_eq!(supported, vec![1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_checked_on_score() {
        assert!(matches!(model().score(&[1.0]), Err(RankerError::Dimension { expected: 3, found: 1 })));
    }

    #[test]
    fn scores_are_clamped() {
        let m = model();
        let far: Vec<f64> = vec![1e6, -1e6, 1e6];
        assert_eq!(m.score(&far).unwrap(), 1.0);
        let low: Vec<f64> = vec![-1e6, 1e6, -1e6];
        assert_eq!(m.score(&low).unwrap(), 0.0);
    }
}
