use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HedError;
use crate::ranker::{load_model, save_model, Level, RankerError, RankingModel};

/// Name of the index file inside a bank directory.
pub const BANK_INDEX_FILE: &str = "bank.json";

#[derive(Serialize, Deserialize)]
struct BankIndex {
    version: u64,
    emotions: Vec<String>,
}

/// Ranking functions for every (emotion, level) pair, with a fixed
/// emotion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    emotions: Vec<String>,
    models: BTreeMap<(String, Level), RankingModel>,
}

impl ModelBank {
    pub fn new(emotions: Vec<String>, models: Vec<RankingModel>) -> Result<Self, HedError> {
        if emotions.is_empty() {
            return Err(HedError::Bank("no emotions".into()));
        }
        let mut map = BTreeMap::new();
        for m in models {
            m.validate()?;
            if !emotions.contains(&m.emotion) {
                return Err(HedError::Bank(format!("model for unlisted emotion {:?}", m.emotion)));
            }
            map.insert((m.emotion.clone(), m.level), m);
        }
        for e in &emotions {
            for level in Level::ALL {
                if !map.contains_key(&(e.clone(), level)) {
                    return Err(HedError::IncompleteBank { emotion: e.clone(), level });
                }
            }
        }
        let dims: Vec<usize> = map.values().map(RankingModel::dim).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(HedError::Bank(format!("models disagree on feature dimension: {dims:?}")));
        }
        Ok(Self { emotions, models: map })
    }

    pub fn emotions(&self) -> &[String] {
        &self.emotions
    }

    pub fn get(&self, emotion: &str, level: Level) -> Result<&RankingModel, HedError> {
        self.models
            .get(&(emotion.to_string(), level))
            .ok_or_else(|| HedError::IncompleteBank { emotion: emotion.to_string(), level })
    }

    pub fn models(&self) -> impl Iterator<Item = &RankingModel> {
        self.models.values()
    }

    pub fn model_file_name(emotion: &str, level: Level) -> String {
        format!("{emotion}.{level}.json")
    }

    pub fn save_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let index = BankIndex { version: 1, emotions: self.emotions.clone() };
        std::fs::write(dir.join(BANK_INDEX_FILE), serde_json::to_string_pretty(&index).expect("index serializes"))?;
        for m in self.models.values() {
            save_model(m, &dir.join(Self::model_file_name(&m.emotion, m.level)))?;
        }
        Ok(())
    }

    /// Loads `bank.json` and one model file per (emotion, level).
    pub fn load_dir(dir: &Path) -> Result<Self, HedError> {
        let index_path = dir.join(BANK_INDEX_FILE);
        let text = std::fs::read_to_string(&index_path)
            .map_err(|e| HedError::Bank(format!("{}: {e}", index_path.display())))?;
        let index: BankIndex =
            serde_json::from_str(&text).map_err(|e| HedError::Bank(format!("{}: {e}", index_path.display())))?;
        let mut models = Vec::new();
        for e in &index.emotions {
            for level in Level::ALL {
                let path = dir.join(Self::model_file_name(e, level));
                if !path.exists() {
                    return Err(HedError::IncompleteBank { emotion: e.clone(), level });
                }
                let m = load_model(&path)?;
                if m.emotion != *e || m.level != level {
                    return Err(HedError::Ranker(RankerError::Corrupt(format!(
                        "{} holds the {} ranker for {:?}",
                        path.display(),
                        m.level,
                        m.emotion
                    ))));
                }
                models.push(m);
            }
        }
        Self::new(index.emotions, models)
    }
}
