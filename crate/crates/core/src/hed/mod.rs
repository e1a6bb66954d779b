//! Hierarchical emotion distributions.
//!
//! A [`HedMatrix`] has one row per spoken phoneme. Each row holds `3K`
//! intensities for `K` emotions, laid out `[utterance | word | phoneme]`.
//! The utterance block is identical in every row; the word block is
//! identical across the phonemes of one word.

mod bank;
mod extract;
mod io;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::FeatureError;
use crate::ranker::{Level, RankerError};

pub use bank::{ModelBank, BANK_INDEX_FILE};
pub use extract::{extract_hed, score_features, segment_features, HedExtractor, SegmentFeatures};
pub use io::{
    csv_header, parse_hed, parse_hed_csv, parse_hed_json, serialize_hed, to_csv, to_json, HedFormat,
    HED_FORMAT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HedError {
    #[error("alignment has no phonemes; nothing to extract")]
    EmptyHierarchy,
    #[error("model bank is missing the {level} ranker for {emotion:?}")]
    IncompleteBank { emotion: String, level: Level },
    #[error("model bank error: {0}")]
    Bank(String),
    #[error("HED schema error at row {row}: {message}")]
    Schema { row: usize, message: String },
    #[error("HED value {value} at row {row}, column {column} is outside [0, 1]")]
    Validation { row: usize, column: String, value: f64 },
    #[error("HED invariant violated at row {row}, column {column}: {message}")]
    Invariant { row: usize, column: String, message: String },
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
}

impl HedError {
    pub fn code(&self) -> &'static str {
        match self {
            HedError::EmptyHierarchy => "hed.empty_hierarchy",
            HedError::IncompleteBank { .. } => "hed.incomplete_bank",
            HedError::Bank(_) => "hed.bank",
            HedError::Schema { .. } => "hed.schema",
            HedError::Validation { .. } => "hed.validation",
            HedError::Invariant { .. } => "hed.invariant",
            HedError::Features(e) => e.code(),
            HedError::Ranker(e) => e.code(),
        }
    }
}

/// Column block of a HED row.
pub fn block_offset(level: Level, k: usize) -> usize {
    match level {
        Level::Utterance => 0,
        Level::Word => k,
        Level::Phoneme => 2 * k,
    }
}

fn block_prefix(level: Level) -> &'static str {
    match level {
        Level::Utterance => "utt",
        Level::Word => "word",
        Level::Phoneme => "phon",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedMatrix {
    phoneme_labels: Vec<String>,
    word_of_phoneme: Vec<usize>,
    emotions: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl HedMatrix {
    /// Builds a matrix after checking every invariant.
    pub fn new(
        phoneme_labels: Vec<String>,
        word_of_phoneme: Vec<usize>,
        emotions: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, HedError> {
        let m = Self { phoneme_labels, word_of_phoneme, emotions, rows };
        m.validate()?;
        Ok(m)
    }

    /// Assembles rows by duplicating the utterance distribution into every
    /// row and replicating each word distribution across its phonemes.
    pub fn from_blocks(
        phoneme_labels: Vec<String>,
        word_of_phoneme: Vec<usize>,
        emotions: Vec<String>,
        utterance: &[f64],
        words: &[Vec<f64>],
        phonemes: &[Vec<f64>],
    ) -> Result<Self, HedError> {
        let k = emotions.len();
        if phonemes.len() != word_of_phoneme.len() {
            return Err(HedError::Schema {
                row: phonemes.len().min(word_of_phoneme.len()),
                message: format!("{} phoneme distributions for {} phonemes", phonemes.len(), word_of_phoneme.len()),
            });
        }
        let mut rows = Vec::with_capacity(phonemes.len());
        for (i, (ph, &wi)) in phonemes.iter().zip(&word_of_phoneme).enumerate() {
            let word = words.get(wi).ok_or_else(|| HedError::Schema {
                row: i,
                message: format!("word index {wi} has no word distribution"),
            })?;
            if utterance.len() != k || word.len() != k || ph.len() != k {
                return Err(HedError::Schema { row: i, message: format!("distribution length differs from K={k}") });
            }
            let mut row = Vec::with_capacity(3 * k);
            row.extend_from_slice(utterance);
            row.extend_from_slice(word);
            row.extend_from_slice(ph);
            rows.push(row);
        }
        Self::new(phoneme_labels, word_of_phoneme, emotions, rows)
    }

    pub fn column_name(&self, col: usize) -> String {
        let k = self.k();
        let level = Level::ALL[col / k];
        format!("{}_{}", block_prefix(level), self.emotions[col % k])
    }

    pub fn validate(&self) -> Result<(), HedError> {
        let k = self.emotions.len();
        if k == 0 {
            return Err(HedError::Schema { row: 0, message: "no emotions".into() });
        }
        for (i, e) in self.emotions.iter().enumerate() {
            if e.is_empty() || self.emotions[..i].contains(e) {
                return Err(HedError::Schema { row: 0, message: format!("emotion label {e:?} empty or repeated") });
            }
        }
        let n = self.rows.len();
        if self.phoneme_labels.len() != n || self.word_of_phoneme.len() != n {
            return Err(HedError::Schema {
                row: 0,
                message: format!(
                    "{} rows, {} labels, {} word indices",
                    n,
                    self.phoneme_labels.len(),
                    self.word_of_phoneme.len()
                ),
            });
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != 3 * k {
                return Err(HedError::Schema { row: r, message: format!("expected {} values, found {}", 3 * k, row.len()) });
            }
            for (c, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(HedError::Validation { row: r, column: self.column_name(c), value: v });
                }
            }
        }
        if self.word_of_phoneme.windows(2).any(|w| w[1] < w[0]) {
            let r = self.word_of_phoneme.windows(2).position(|w| w[1] < w[0]).unwrap() + 1;
            return Err(HedError::Invariant {
                row: r,
                column: "word_index".into(),
                message: "word indices must be non-decreasing".into(),
            });
        }
        if let Some(first) = self.rows.first() {
            for (r, row) in self.rows.iter().enumerate().skip(1) {
                if let Some(c) = (0..k).find(|&c| row[c] != first[c]) {
                    return Err(HedError::Invariant {
                        row: r,
                        column: self.column_name(c),
                        message: "utterance block differs from row 0".into(),
                    });
                }
            }
        }
        for r in 1..n {
            if self.word_of_phoneme[r] == self.word_of_phoneme[r - 1] {
                if let Some(c) = (k..2 * k).find(|&c| self.rows[r][c] != self.rows[r - 1][c]) {
                    return Err(HedError::Invariant {
                        row: r,
                        column: self.column_name(c),
                        message: "word block differs within one word".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.emotions.len()
    }

    pub fn emotions(&self) -> &[String] {
        &self.emotions
    }

    pub fn emotion_index(&self, label: &str) -> Option<usize> {
        self.emotions.iter().position(|e| e == label)
    }

    pub fn phoneme_labels(&self) -> &[String] {
        &self.phoneme_labels
    }

    pub fn word_of_phoneme(&self) -> &[usize] {
        &self.word_of_phoneme
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of words addressable by index (highest word index + 1).
    pub fn word_count(&self) -> usize {
        self.word_of_phoneme.last().map_or(0, |w| w + 1)
    }

    pub fn phonemes_of_word(&self, word: usize) -> std::ops::Range<usize> {
        let start = self.word_of_phoneme.partition_point(|&w| w < word);
        let end = self.word_of_phoneme.partition_point(|&w| w <= word);
        start..end
    }

    pub fn value(&self, row: usize, level: Level, emotion: usize) -> f64 {
        self.rows[row][block_offset(level, self.k()) + emotion]
    }

    pub fn utterance_block(&self) -> &[f64] {
        &self.rows[0][..self.k()]
    }

    /// Word block of `word`, `None` if the word has no phonemes.
    pub fn word_block(&self, word: usize) -> Option<&[f64]> {
        let r = self.phonemes_of_word(word);
        (!r.is_empty()).then(|| &self.rows[r.start][self.k()..2 * self.k()])
    }

    pub fn same_shape(&self, other: &HedMatrix) -> bool {
        self.emotions == other.emotions
            && self.word_of_phoneme == other.word_of_phoneme
            && self.phoneme_labels == other.phoneme_labels
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }

    /// SHA-256 of the JSON form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(to_json(self).as_bytes()))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn example() -> HedMatrix {
        HedMatrix::from_blocks(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0, 0, 1],
            vec!["Angry".into(), "Happy".into()],
            &[0.5, 0.2],
            &[vec![0.9, 0.1], vec![0.3, 0.4]],
            &[vec![0.11, 0.12], vec![0.21, 0.22], vec![0.31, 0.32]],
        )
        .unwrap()
    }

    #[test]
    fn replication_rule() {
        let m = example();
        assert_eq!(m.rows()[0], vec![0.5, 0.2, 0.9, 0.1, 0.11, 0.12]);
        assert_eq!(m.rows()[1], vec![0.5, 0.2, 0.9, 0.1, 0.21, 0.22]);
        assert_eq!(m.rows()[2], vec![0.5, 0.2, 0.3, 0.4, 0.31, 0.32]);
        assert_eq!(m.word_count(), 2);
        assert_eq!(m.phonemes_of_word(0), 0..2);
        assert_eq!(m.word_block(1).unwrap(), &[0.3, 0.4]);
        assert_eq!(m.column_name(3), "word_Happy");
    }

    #[test]
    fn invariants_are_enforced() {
        let m = example();
        let mut rows = m.rows().to_vec();
        rows[2][0] = 0.6;
        assert!(matches!(
            HedMatrix::new(m.phoneme_labels().to_vec(), vec![0, 0, 1], m.emotions().to_vec(), rows),
            Err(HedError::Invariant { row: 2, .. })
        ));
        let mut rows = m.rows().to_vec();
        rows[1][2] = 0.0;
        assert!(matches!(
            HedMatrix::new(m.phoneme_labels().to_vec(), vec![0, 0, 1], m.emotions().to_vec(), rows),
            Err(HedError::Invariant { row: 1, .. })
        ));
        let mut rows = m.rows().to_vec();
        rows[1][5] = 1.3;
        match HedMatrix::new(m.phoneme_labels().to_vec(), vec![0, 0, 1], m.emotions().to_vec(), rows) {
            Err(HedError::Validation { row: 1, column, value }) => {
                assert_eq!(column, "phon_Happy");
                assert_eq!(value, 1.3);
            }
            other => panic!("{other:?}"),
        }
    }
}
