//! Forced-alignment ingestion.
//!
//! Alignments arrive as Praat TextGrids (long or short text format) or as
//! JSON. Both paths end in [`AlignmentHierarchy::build`], which drops
//! silence intervals, snaps phoneme boundaries onto word boundaries within
//! [`BOUNDARY_TOLERANCE_S`], and maps every phoneme to its word.

mod json;
mod textgrid;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::audio::TimeSpan;

pub use json::{parse_alignment_json, to_alignment_json};
pub use textgrid::{parse_textgrid, parse_textgrid_with, TextGrid, Tier, TierKind};

/// Phoneme boundaries closer than this to a word boundary are snapped.
pub const BOUNDARY_TOLERANCE_S: f64 = 0.001;

pub const DEFAULT_SILENCE_LABELS: [&str; 4] = ["", "sil", "sp", "spn"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("tier not found: {0}")]
    TierNotFound(String),
    #[error("{tier} tier has overlapping or unordered intervals at indices {pairs:?}")]
    Overlap { tier: String, pairs: Vec<(usize, usize)> },
    #[error("phoneme {index} ({label:?}, {start}-{end}) is not contained in {context}")]
    Containment { index: usize, label: String, start: f64, end: f64, context: String },
    #[error("invalid {tier} segment {index}: {message}")]
    InvalidSegment { tier: String, index: usize, message: String },
    #[error("TextGrid syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("alignment JSON error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl AlignmentError {
    pub fn code(&self) -> &'static str {
        match self {
            AlignmentError::TierNotFound(_) => "alignment.tier_not_found",
            AlignmentError::Overlap { .. } => "alignment.overlap",
            AlignmentError::Containment { .. } => "alignment.containment",
            AlignmentError::InvalidSegment { .. } => "alignment.invalid_segment",
            AlignmentError::Syntax { .. } => "alignment.syntax",
            AlignmentError::Schema { .. } => "alignment.schema",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl Segment {
    pub fn new(label: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        Self { label: label.into(), start_s, end_s }
    }

    pub fn span(&self) -> TimeSpan {
        TimeSpan::new(self.start_s, self.end_s)
    }
}

/// Labels treated as non-speech.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilenceLabels(BTreeSet<String>);

impl Default for SilenceLabels {
    fn default() -> Self {
        Self(DEFAULT_SILENCE_LABELS.iter().map(|s| s.to_string()).collect())
    }
}

impl SilenceLabels {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(labels.into_iter().map(Into::into).collect())
    }

    pub fn is_silence(&self, label: &str) -> bool {
        self.0.contains(label.trim())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Utterance → words → phonemes, silences removed.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentHierarchy {
    pub utterance: Segment,
    pub words: Vec<Segment>,
    pub phonemes: Vec<Segment>,
    pub word_of_phoneme: Vec<usize>,
    pub silence_labels: SilenceLabels,
}

fn check_segments(tier: &str, segs: &[Segment]) -> Result<(), AlignmentError> {
    for (i, s) in segs.iter().enumerate() {
        if !(s.start_s.is_finite() && s.end_s.is_finite()) {
            return Err(AlignmentError::InvalidSegment { tier: tier.into(), index: i, message: "non-finite bound".into() });
        }
        if s.start_s < 0.0 {
            return Err(AlignmentError::InvalidSegment { tier: tier.into(), index: i, message: "negative start".into() });
        }
        if s.start_s >= s.end_s {
            return Err(AlignmentError::InvalidSegment {
                tier: tier.into(),
                index: i,
                message: format!("start {} >= end {}", s.start_s, s.end_s),
            });
        }
    }
    let pairs: Vec<(usize, usize)> = segs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].start_s < w[0].end_s - 1e-9)
        .map(|(i, _)| (i, i + 1))
        .collect();
    if pairs.is_empty() {
        Ok(())
    } else {
        Err(AlignmentError::Overlap { tier: tier.into(), pairs })
    }
}

impl AlignmentHierarchy {
    /// Validates and assembles a hierarchy from raw tier intervals.
    ///
    /// `words` and `phonemes` may contain silence intervals; they are
    /// dropped here. When `declared_words` is given (JSON input), each
    /// phoneme must sit inside the declared word rather than whichever word
    /// contains it.
    pub fn build(
        utterance: Segment,
        words: Vec<Segment>,
        phonemes: Vec<Segment>,
        declared_words: Option<Vec<usize>>,
        silence_labels: SilenceLabels,
    ) -> Result<Self, AlignmentError> {
        check_segments("utterance", std::slice::from_ref(&utterance))?;
        check_segments("word", &words)?;
        check_segments("phoneme", &phonemes)?;

        let keep = |s: &Segment| !silence_labels.is_silence(&s.label);
        let words: Vec<Segment> = words.into_iter().filter(|s| keep(s)).collect();
        let (phonemes, declared): (Vec<Segment>, Option<Vec<usize>>) = match declared_words {
            Some(decl) => {
                let (p, d): (Vec<_>, Vec<_>) = phonemes.into_iter().zip(decl).filter(|(s, _)| keep(s)).unzip();
                (p, Some(d))
            }
            None => (phonemes.into_iter().filter(|s| keep(s)).collect(), None),
        };

        for (i, w) in words.iter().enumerate() {
            if w.start_s < utterance.start_s - BOUNDARY_TOLERANCE_S || w.end_s > utterance.end_s + BOUNDARY_TOLERANCE_S {
                return Err(AlignmentError::InvalidSegment {
                    tier: "word".into(),
                    index: i,
                    message: "word lies outside the utterance interval".into(),
                });
            }
        }

        let mut snapped = Vec::with_capacity(phonemes.len());
        let mut word_of_phoneme = Vec::with_capacity(phonemes.len());
        for (i, mut p) in phonemes.into_iter().enumerate() {
            let containment = |p: &Segment, context: String| AlignmentError::Containment {
                index: i,
                label: p.label.clone(),
                start: p.start_s,
                end: p.end_s,
                context,
            };
            let inside = |w: &Segment| {
                p.start_s >= w.start_s - BOUNDARY_TOLERANCE_S && p.end_s <= w.end_s + BOUNDARY_TOLERANCE_S
            };
            let wi = match &declared {
                Some(decl) => {
                    let wi = decl[i];
                    match words.get(wi) {
                        Some(w) if inside(w) => wi,
                        Some(_) => return Err(containment(&p, format!("declared word {wi}"))),
                        None => return Err(containment(&p, format!("declared word {wi} (only {} words)", words.len()))),
                    }
                }
                None => words.iter().position(inside)
                    .ok_or_else(|| containment(&p, "any word".into()))?,
            };
            let w = &words[wi];
            if (p.start_s - w.start_s).abs() <= BOUNDARY_TOLERANCE_S {
                p.start_s = w.start_s;
            }
            if (p.end_s - w.end_s).abs() <= BOUNDARY_TOLERANCE_S {
                p.end_s = w.end_s;
            }
            p.start_s = p.start_s.max(w.start_s);
            p.end_s = p.end_s.min(w.end_s);
            if p.start_s >= p.end_s {
                return Err(containment(&p, format!("word {wi} after boundary snapping")));
            }
            snapped.push(p);
            word_of_phoneme.push(wi);
        }
        if word_of_phoneme.windows(2).any(|w| w[1] < w[0]) {
            return Err(AlignmentError::InvalidSegment {
                tier: "phoneme".into(),
                index: 0,
                message: "phoneme-to-word mapping is not monotone".into(),
            });
        }
        check_segments("phoneme", &snapped)?;

        Ok(Self { utterance, words, phonemes: snapped, word_of_phoneme, silence_labels })
    }

    pub fn phoneme_count(&self) -> usize {
        self.phonemes.len()
    }

    /// Phoneme indices belonging to word `w`.
    pub fn phonemes_of_word(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        self.word_of_phoneme.iter().enumerate().filter(move |(_, &wi)| wi == w).map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(l: &str, a: f64, b: f64) -> Segment {
        Segment::new(l, a, b)
    }

    #[test]
    fn nests_phonemes_into_words() {
        let h = AlignmentHierarchy::build(
            seg("hello world", 0.0, 1.0),
            vec![seg("hello", 0.0, 0.5), seg("world", 0.5, 1.0)],
            vec![
                seg("HH", 0.0, 0.1),
                seg("AH", 0.1, 0.2),
                seg("L", 0.2, 0.3),
                seg("OW", 0.3, 0.5),
                seg("W", 0.5, 0.6),
                seg("ER", 0.6, 0.7),
                seg("L", 0.7, 0.8),
                seg("D", 0.8, 1.0),
            ],
            None,
            SilenceLabels::default(),
        )
        .unwrap();
        assert_eq!(h.words.len(), 2);
        assert_eq!(h.phonemes.len(), 8);
        assert_eq!(h.word_of_phoneme, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(h.phonemes_of_word(1).collect::<Vec<_>>(), vec![4, 5, 6, 7]);
    }

    #[test]
    fn straddling_phoneme_is_rejected() {
        let err = AlignmentHierarchy::build(
            seg("", 0.0, 1.0),
            vec![seg("hello", 0.0, 0.5), seg("world", 0.5, 1.0)],
            vec![seg("HH", 0.0, 0.4), seg("X", 0.4, 0.6), seg("D", 0.6, 1.0)],
            None,
            SilenceLabels::default(),
        )
        .unwrap_err();
        assert!(matches!(err, AlignmentError::Containment { index: 1, .. }));
    }

    #[test]
    fn boundaries_snap_within_tolerance() {
        let h = AlignmentHierarchy::build(
            seg("", 0.0, 1.0),
            vec![seg("a", 0.1, 0.5)],
            vec![seg("A", 0.0995, 0.3), seg("B", 0.3, 0.5004)],
            None,
            SilenceLabels::default(),
        )
        .unwrap();
        assert_eq!(h.phonemes[0].start_s, 0.1);
        assert_eq!(h.phonemes[1].end_s, 0.5);
    }

    #[test]
    fn silences_are_dropped() {
        let h = AlignmentHierarchy::build(
            seg("", 0.0, 1.0),
            vec![seg("", 0.0, 0.2), seg("a", 0.2, 0.8), seg("sil", 0.8, 1.0)],
            vec![seg("sil", 0.0, 0.2), seg("A", 0.2, 0.5), seg("sp", 0.5, 0.55), seg("B", 0.55, 0.8), seg("", 0.8, 1.0)],
            None,
            SilenceLabels::default(),
        )
        .unwrap();
        assert_eq!(h.words.len(), 1);
        assert_eq!(h.phonemes.iter().map(|p| p.label.as_str()).collect::<Vec<_>>(), vec!["A", "B"]);
        assert_eq!(h.word_of_phoneme, vec![0, 0]);
    }

    #[test]
    fn overlap_lists_indices() {
        let err = AlignmentHierarchy::build(
            seg("", 0.0, 1.0),
            vec![seg("a", 0.0, 0.5), seg("b", 0.4, 1.0)],
            vec![],
            None,
            SilenceLabels::default(),
        )
        .unwrap_err();
        assert_eq!(err, AlignmentError::Overlap { tier: "word".into(), pairs: vec![(0, 1)] });
    }

    #[test]
    fn empty_phone_tier_is_allowed() {
        let h = AlignmentHierarchy::build(
            seg("", 0.0, 1.0),
            vec![seg("a", 0.0, 1.0)],
            vec![],
            None,
            SilenceLabels::default(),
        )
        .unwrap();
        assert_eq!(h.phoneme_count(), 0);
    }
}
