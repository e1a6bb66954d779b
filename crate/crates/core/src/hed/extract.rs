use rayon::prelude::*;

use super::{HedError, HedMatrix, ModelBank};
use crate::alignment::AlignmentHierarchy;
use crate::audio::{TimeSpan, Waveform, ANALYSIS_RATE};
use crate::features::{Analyzer, FeatureError, FeatureVector};
use crate::ranker::Level;

/// Feature vectors for every segment of a hierarchy. `words` is indexed
/// like `AlignmentHierarchy::words`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub utterance: FeatureVector,
    pub words: Vec<FeatureVector>,
    pub phonemes: Vec<FeatureVector>,
}

impl SegmentFeatures {
    pub fn level(&self, level: Level) -> Vec<&FeatureVector> {
        match level {
            Level::Utterance => vec![&self.utterance],
            Level::Word => self.words.iter().collect(),
            Level::Phoneme => self.phonemes.iter().collect(),
        }
    }
}

/// Feature extraction plus scoring against a model bank.
#[derive(Debug)]
pub struct HedExtractor<'a> {
    pub analyzer: &'a Analyzer,
    pub bank: &'a ModelBank,
    /// Extract segments on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl HedExtractor<'_> {
    pub fn segment_features(&self, w: &Waveform, h: &AlignmentHierarchy) -> Result<SegmentFeatures, HedError> {
        segment_features(self.analyzer, w, h, self.parallel)
    }

    pub fn extract(&self, w: &Waveform, h: &AlignmentHierarchy) -> Result<HedMatrix, HedError> {
        if h.phonemes.is_empty() {
            return Err(HedError::EmptyHierarchy);
        }
        let feats = self.segment_features(w, h)?;
        score_features(self.bank, h, &feats)
    }
}

/// Extracts features for the utterance, each word and each phoneme.
pub fn segment_features(
    analyzer: &Analyzer,
    w: &Waveform,
    h: &AlignmentHierarchy,
    parallel: bool,
) -> Result<SegmentFeatures, HedError> {
    let owned;
    let w = if w.sample_rate() == ANALYSIS_RATE {
        w
    } else {
        owned = w.to_analysis_rate();
        &owned
    };
    let mut spans: Vec<TimeSpan> = Vec::with_capacity(1 + h.words.len() + h.phonemes.len());
    spans.push(h.utterance.span());
    spans.extend(h.words.iter().map(|s| s.span()));
    spans.extend(h.phonemes.iter().map(|s| s.span()));
    let run = |s: &TimeSpan| analyzer.extract(w, *s);
    let vectors: Result<Vec<FeatureVector>, FeatureError> = if parallel {
        spans.par_iter().map(run).collect()
    } else {
        spans.iter().map(run).collect()
    };
    let mut vectors = vectors?.into_iter();
    let utterance = vectors.next().expect("utterance span present");
    let words: Vec<_> = vectors.by_ref().take(h.words.len()).collect();
    let phonemes: Vec<_> = vectors.collect();
    Ok(SegmentFeatures { utterance, words, phonemes })
}

/// Scores precomputed features and assembles the matrix.
pub fn score_features(bank: &ModelBank, h: &AlignmentHierarchy, feats: &SegmentFeatures) -> Result<HedMatrix, HedError> {
    if h.phonemes.is_empty() {
        return Err(HedError::EmptyHierarchy);
    }
    let emotions = bank.emotions();
    let dist = |level: Level, x: &FeatureVector| -> Result<Vec<f64>, HedError> {
        emotions.iter().map(|e| Ok(bank.get(e, level)?.score(x.as_slice())?)).collect()
    };
    let utterance = dist(Level::Utterance, &feats.utterance)?;
    let words = feats.words.iter().map(|x| dist(Level::Word, x)).collect::<Result<Vec<_>, _>>()?;
    let phonemes = feats.phonemes.iter().map(|x| dist(Level::Phoneme, x)).collect::<Result<Vec<_>, _>>()?;
    HedMatrix::from_blocks(
        h.phonemes.iter().map(|p| p.label.clone()).collect(),
        h.word_of_phoneme.clone(),
        emotions.to_vec(),
        &utterance,
        &words,
        &phonemes,
    )
}

/// Extracts a HED matrix with the default parallel setting.
pub fn extract_hed(
    w: &Waveform,
    h: &AlignmentHierarchy,
    bank: &ModelBank,
    analyzer: &Analyzer,
) -> Result<HedMatrix, HedError> {
    HedExtractor { analyzer, bank, parallel: true }.extract(w, h)
}
