//! CSV and JSON forms of a HED matrix. Both round-trip exactly: floats are
//! written with the shortest representation that parses back bit-identical.

use serde::{Deserialize, Serialize};

use super::{block_prefix, HedError, HedMatrix};
use crate::ranker::Level;

pub const HED_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HedFormat {
    Csv,
    Json,
}

impl HedFormat {
    /// Guesses the format from a file extension; anything but `.json` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => HedFormat::Json,
            _ => HedFormat::Csv,
        }
    }
}

impl std::str::FromStr for HedFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(HedFormat::Csv),
            "json" => Ok(HedFormat::Json),
            _ => Err(format!("unknown HED format {s:?} (expected csv or json)")),
        }
    }
}

pub fn csv_header(emotions: &[String]) -> Vec<String> {
    let mut h = vec!["phoneme".to_string(), "word_index".to_string()];
    for level in Level::ALL {
        h.extend(emotions.iter().map(|e| format!("{}_{e}", block_prefix(level))));
    }
    h
}

pub fn to_csv(m: &HedMatrix) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(csv_header(m.emotions())).expect("in-memory write");
    for (i, row) in m.rows().iter().enumerate() {
        let mut rec = vec![m.phoneme_labels()[i].clone(), m.word_of_phoneme()[i].to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Parses the CSV form. Row numbers in errors count data rows from 0.
pub fn parse_hed_csv(text: &str) -> Result<HedMatrix, HedError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| HedError::Schema { row: 0, message: format!("header: {e}") })?,
        None => return Err(HedError::Schema { row: 0, message: "empty input".into() }),
    };
    let header: Vec<&str> = header.iter().collect();
    if header.len() < 5 || header[0] != "phoneme" || header[1] != "word_index" || !(header.len() - 2).is_multiple_of(3) {
        return Err(HedError::Schema {
            row: 0,
            message: format!("header must be phoneme,word_index followed by 3K columns, got {}", header.join(",")),
        });
    }
    let k = (header.len() - 2) / 3;
    let emotions: Vec<String> = header[2..2 + k]
        .iter()
        .map(|c| c.strip_prefix("utt_").map(str::to_string))
        .collect::<Option<_>>()
        .ok_or_else(|| HedError::Schema { row: 0, message: "first emotion block must use utt_ columns".into() })?;
    let expected = csv_header(&emotions);
    if let Some(c) = (0..header.len()).find(|&c| header[c] != expected[c]) {
        return Err(HedError::Schema {
            row: 0,
            message: format!("header column {c} is {:?}, expected {:?}", header[c], expected[c]),
        });
    }

    let mut labels = Vec::new();
    let mut words = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| HedError::Schema { row: r, message: e.to_string() })?;
        if rec.len() != expected.len() {
            return Err(HedError::Schema {
                row: r,
                message: format!("expected {} fields, found {}", expected.len(), rec.len()),
            });
        }
        labels.push(rec[0].to_string());
        words.push(rec[1].trim().parse::<usize>().map_err(|_| HedError::Schema {
            row: r,
            message: format!("word_index {:?} is not a non-negative integer", &rec[1]),
        })?);
        let mut row = Vec::with_capacity(3 * k);
        for c in 2..rec.len() {
            let v: f64 = rec[c].trim().parse().map_err(|_| HedError::Schema {
                row: r,
                message: format!("column {} value {:?} is not a number", expected[c], &rec[c]),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    HedMatrix::new(labels, words, emotions, rows)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HedJson {
    version: u64,
    emotions: Vec<String>,
    phonemes: Vec<String>,
    word_of_phoneme: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

pub fn to_json(m: &HedMatrix) -> String {
    serde_json::to_string(&HedJson {
        version: HED_FORMAT_VERSION,
        emotions: m.emotions().to_vec(),
        phonemes: m.phoneme_labels().to_vec(),
        word_of_phoneme: m.word_of_phoneme().to_vec(),
        rows: m.rows().to_vec(),
    })
    .expect("HED serializes")
}

pub fn parse_hed_json(text: &str) -> Result<HedMatrix, HedError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: HedJson = serde_path_to_error::deserialize(de).map_err(|e| {
        let row = e.path().iter().find_map(|seg| match seg {
            serde_path_to_error::Segment::Seq { index } => Some(*index),
            _ => None,
        });
        HedError::Schema { row: row.unwrap_or(0), message: format!("{}: {}", e.path(), e.inner()) }
    })?;
    if doc.version != HED_FORMAT_VERSION {
        return Err(HedError::Schema { row: 0, message: format!("unsupported HED version {}", doc.version) });
    }
    HedMatrix::new(doc.phonemes, doc.word_of_phoneme, doc.emotions, doc.rows)
}

pub fn serialize_hed(m: &HedMatrix, format: HedFormat) -> String {
    match format {
        HedFormat::Csv => to_csv(m),
        HedFormat::Json => to_json(m),
    }
}

pub fn parse_hed(text: &str, format: HedFormat) -> Result<HedMatrix, HedError> {
    match format {
        HedFormat::Csv => parse_hed_csv(text),
        HedFormat::Json => parse_hed_json(text),
    }
}
