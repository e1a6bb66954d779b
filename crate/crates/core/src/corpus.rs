//! Manifest-driven corpus loading and ranker-bank training.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{parse_alignment_json, parse_textgrid, AlignmentError, AlignmentHierarchy};
use crate::audio::{decode_wav, AudioError, Waveform};
use crate::features::Analyzer;
use crate::hed::{segment_features, HedError, ModelBank, SegmentFeatures};
use crate::ranker::{build_pairs, train, Hyper, LabeledSample, Level, PairCaps, RankerError, TrainReport};

pub const MANIFEST_HEADER: [&str; 4] = ["wav", "alignment", "emotion", "speaker"];

/// Tier names read from TextGrid alignments.
pub const WORD_TIER: &str = "words";
pub const PHONE_TIER: &str = "phones";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    Audio { path: String, source: AudioError },
    #[error("{path}: {source}")]
    Alignment { path: String, source: AlignmentError },
    #[error("{path}: {source}")]
    Extraction { path: String, source: HedError },
    #[error("training the {level} ranker for {emotion:?}: {source}")]
    Training { emotion: String, level: Level, source: RankerError },
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Hed(#[from] HedError),
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Manifest { .. } => "corpus.manifest",
            CorpusError::Io { .. } => "corpus.io",
            CorpusError::Audio { source, .. } => source.code(),
            CorpusError::Alignment { source, .. } => source.code(),
            CorpusError::Extraction { source, .. } => source.code(),
            CorpusError::Training { source, .. } => source.code(),
            CorpusError::Ranker(e) => e.code(),
            CorpusError::Hed(e) => e.code(),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub wav: String,
    pub alignment: String,
    pub emotion: String,
    pub speaker: String,
}

/// Corpus index. Relative paths resolve against `root`, the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, root: &Path) -> Result<Self, CorpusError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| CorpusError::Manifest { row: 0, message: e.to_string() })?;
        if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
            return Err(CorpusError::Manifest { row: 0, message: format!("header must be {}", MANIFEST_HEADER.join(",")) });
        }
        let entries = r
            .deserialize::<ManifestEntry>()
            .enumerate()
            .map(|(i, e)| e.map_err(|e| CorpusError::Manifest { row: i + 1, message: e.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(i) = entries.iter().position(|e| e.emotion.is_empty() || e.speaker.is_empty()) {
            return Err(CorpusError::Manifest { row: i + 1, message: "empty emotion or speaker".into() });
        }
        Ok(Self { root: root.to_path_buf(), entries })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER).expect("in-memory write");
        for e in &self.entries {
            w.write_record([&e.wav, &e.alignment, &e.emotion, &e.speaker]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn emotions(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.emotion.clone()).collect()
    }
}

pub fn load_wav(path: &Path) -> Result<Waveform, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    decode_wav(&bytes).map_err(|source| CorpusError::Audio { path: path.display().to_string(), source })
}

/// Reads a `.json` or `.TextGrid` alignment (tiers `words` and `phones`).
pub fn load_alignment(path: &Path) -> Result<AlignmentHierarchy, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let is_json = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json { parse_alignment_json(&text) } else { parse_textgrid(&text, WORD_TIER, PHONE_TIER) };
    parsed.map_err(|source| CorpusError::Alignment { path: path.display().to_string(), source })
}

/// Alignment text in either supported form, detected by content: JSON if it
/// starts with `{`, TextGrid otherwise.
pub fn parse_alignment_text(text: &str) -> Result<AlignmentHierarchy, AlignmentError> {
    if text.trim_start().starts_with('{') {
        parse_alignment_json(text)
    } else {
        parse_textgrid(text, WORD_TIER, PHONE_TIER)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub neutral: String,
    /// Emotions to train; every non-neutral label in the manifest if `None`.
    pub emotions: Option<Vec<String>>,
    /// Keep at most this many utterances per (speaker, emotion), sampled
    /// with `seed`.
    pub per_speaker: Option<usize>,
    pub seed: u64,
    pub hyper: Hyper,
    pub caps: PairCaps,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            neutral: "Neutral".into(),
            emotions: None,
            per_speaker: None,
            seed: 0,
            hyper: Hyper::default(),
            caps: PairCaps { max_ordered: Some(5000), max_similar: Some(5000) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub emotion: String,
    pub level: Level,
    pub samples: usize,
    #[serde(flatten)]
    pub train: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub utterances: usize,
    pub neutral: String,
    pub emotions: Vec<String>,
    pub seed: u64,
    pub models: Vec<ModelReport>,
}

/// Seeded per-(speaker, emotion) subset, in manifest order.
pub fn subset(manifest: &Manifest, per_speaker: Option<usize>, seed: u64) -> Vec<ManifestEntry> {
    let Some(k) = per_speaker else { return manifest.entries.clone() };
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        groups.entry((&e.speaker, &e.emotion)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = Vec::new();
    for idx in groups.values() {
        if idx.len() <= k {
            keep.extend(idx);
        } else {
            keep.extend(sample(&mut rng, idx.len(), k).into_iter().map(|j| idx[j]));
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| manifest.entries[i].clone()).collect()
}

/// One analysed utterance: its emotion and segment features.
#[derive(Debug, Clone)]
pub struct AnalysedUtterance {
    pub emotion: String,
    pub features: SegmentFeatures,
}

pub fn analyse(manifest: &Manifest, entries: &[ManifestEntry], analyzer: &Analyzer) -> Result<Vec<AnalysedUtterance>, CorpusError> {
    entries
        .par_iter()
        .map(|e| {
            let wav_path = manifest.resolve(&e.wav);
            let w = load_wav(&wav_path)?;
            let h = load_alignment(&manifest.resolve(&e.alignment))?;
            let features = segment_features(analyzer, &w, &h, false)
                .map_err(|source| CorpusError::Extraction { path: wav_path.display().to_string(), source })?;
            Ok(AnalysedUtterance { emotion: e.emotion.clone(), features })
        })
        .collect()
}

/// Trains one ranker per (emotion, level) from analysed utterances.
pub fn train_bank(utts: &[AnalysedUtterance], config: &TrainConfig) -> Result<(ModelBank, TrainingReport), CorpusError> {
    let labels: BTreeSet<String> = utts.iter().map(|u| u.emotion.clone()).collect();
    let emotions: Vec<String> = match &config.emotions {
        Some(e) => e.clone(),
        None => labels.iter().filter(|e| **e != config.neutral).cloned().collect(),
    };
    if !labels.contains(&config.neutral) {
        return Err(RankerError::InsufficientData(config.neutral.clone()).into());
    }
    if emotions.is_empty() {
        return Err(RankerError::InsufficientData("any non-neutral emotion".into()).into());
    }
    let samples: Vec<Vec<LabeledSample>> = Level::ALL
        .iter()
        .map(|&level| {
            utts.iter()
                .filter(|u| u.emotion == config.neutral || emotions.contains(&u.emotion))
                .flat_map(|u| {
                    u.features.level(level).into_iter().map(|x| LabeledSample::new(&u.emotion, x.as_slice().to_vec()))
                })
                .collect()
        })
        .collect();
    let jobs: Vec<(usize, &String, Level)> = emotions
        .iter()
        .enumerate()
        .flat_map(|(i, e)| Level::ALL.iter().map(move |&l| (i, e, l)))
        .collect();
    let trained = jobs
        .par_iter()
        .map(|&(i, emotion, level)| {
            let wrap = |source| CorpusError::Training { emotion: emotion.clone(), level, source };
            let seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((i * 3 + level as usize) as u64);
            let set = &samples[level as usize];
            let pairs = build_pairs(set, emotion, &config.neutral, config.caps, seed).map_err(wrap)?;
            let n = pairs.features.len();
            let outcome = train(&pairs, &config.hyper).map_err(wrap)?;
            let report = ModelReport { emotion: emotion.clone(), level, samples: n, train: outcome.report.clone() };
            Ok((outcome.into_model(emotion.clone(), level), report))
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let (models, reports): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    let bank = ModelBank::new(emotions.clone(), models)?;
    let report = TrainingReport {
        utterances: utts.len(),
        neutral: config.neutral.clone(),
        emotions,
        seed: config.seed,
        models: reports,
    };
    Ok((bank, report))
}

/// Subsets, analyses and trains in one go.
pub fn train_from_manifest(
    manifest: &Manifest,
    analyzer: &Analyzer,
    config: &TrainConfig,
) -> Result<(ModelBank, TrainingReport), CorpusError> {
    let entries = subset(manifest, config.per_speaker, config.seed);
    let utts = analyse(manifest, &entries, analyzer)?;
    train_bank(&utts, config)
}
