use serde::{Deserialize, Serialize};

use super::{AlignmentError, AlignmentHierarchy, Segment, SilenceLabels};

#[derive(Debug, Serialize, Deserialize)]
struct UtteranceDoc {
    start: f64,
    end: f64,
    #[serde(default)]
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WordDoc {
    label: String,
    start: f64,
    end: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PhonemeDoc {
    label: String,
    start: f64,
    end: f64,
    word: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignmentDoc {
    utterance: UtteranceDoc,
    words: Vec<WordDoc>,
    phonemes: Vec<PhonemeDoc>,
}

/// Parses the JSON alignment form. Phoneme `word` fields index into the
/// `words` array after silence words are removed.
pub fn parse_alignment_json(text: &str) -> Result<AlignmentHierarchy, AlignmentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: AlignmentDoc = serde_path_to_error::deserialize(de).map_err(|e| AlignmentError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let utterance = Segment::new(doc.utterance.text, doc.utterance.start, doc.utterance.end);
    let words = doc.words.into_iter().map(|w| Segment::new(w.label, w.start, w.end)).collect();
    let (phonemes, declared): (Vec<_>, Vec<_>) =
        doc.phonemes.into_iter().map(|p| (Segment::new(p.label, p.start, p.end), p.word)).unzip();
    AlignmentHierarchy::build(utterance, words, phonemes, Some(declared), SilenceLabels::default())
}

pub fn to_alignment_json(h: &AlignmentHierarchy) -> String {
    let doc = AlignmentDoc {
        utterance: UtteranceDoc { start: h.utterance.start_s, end: h.utterance.end_s, text: h.utterance.label.clone() },
        words: h.words.iter().map(|w| WordDoc { label: w.label.clone(), start: w.start_s, end: w.end_s }).collect(),
        phonemes: h
            .phonemes
            .iter()
            .zip(&h.word_of_phoneme)
            .map(|(p, &word)| PhonemeDoc { label: p.label.clone(), start: p.start_s, end: p.end_s, word })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("alignment serializes")
}
