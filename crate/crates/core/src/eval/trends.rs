use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalError, ProsodyStats};
use crate::editor::Condition;
use crate::stats::{slope, spearman};

/// Fewest distinct intensities a (condition, emotion) cell needs.
pub const MIN_INTENSITIES: usize = 3;

pub const RUNS_HEADER: [&str; 8] = [
    "condition",
    "emotion",
    "intensity",
    "duration_s",
    "pitch_mean_hz",
    "pitch_std_hz",
    "energy_mean_db",
    "energy_std_db",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProsodyFeature {
    DurationS,
    PitchMeanHz,
    PitchStdHz,
    EnergyMeanDb,
    EnergyStdDb,
}

impl ProsodyFeature {
    pub const ALL: [ProsodyFeature; 5] = [
        ProsodyFeature::DurationS,
        ProsodyFeature::PitchMeanHz,
        ProsodyFeature::PitchStdHz,
        ProsodyFeature::EnergyMeanDb,
        ProsodyFeature::EnergyStdDb,
    ];

    pub fn name(self) -> &'static str {
        RUNS_HEADER[3 + self as usize]
    }

    pub fn of(self, s: &ProsodyStats) -> f64 {
        match self {
            ProsodyFeature::DurationS => s.duration_s,
            ProsodyFeature::PitchMeanHz => s.pitch_mean_hz,
            ProsodyFeature::PitchStdHz => s.pitch_std_hz,
            ProsodyFeature::EnergyMeanDb => s.energy_mean_db,
            ProsodyFeature::EnergyStdDb => s.energy_std_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[serde(alias = "+")]
    Positive,
    #[serde(alias = "-")]
    Negative,
    #[serde(alias = "0")]
    Flat,
}

impl Sign {
    fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
            Sign::Flat => '0',
        }
    }
}

/// Expected trend direction per emotion and prosody feature, applied to
/// every control condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpectedSigns(pub BTreeMap<String, BTreeMap<ProsodyFeature, Sign>>);

impl Default for ExpectedSigns {
    /// Sadness: slower speech with lower, flatter pitch and energy.
    /// Happiness: higher mean pitch.
    fn default() -> Self {
        use ProsodyFeature::*;
        let sad = [
            (DurationS, Sign::Positive),
            (PitchMeanHz, Sign::Negative),
            (PitchStdHz, Sign::Negative),
            (EnergyMeanDb, Sign::Negative),
            (EnergyStdDb, Sign::Negative),
        ];
        let happy = [(PitchMeanHz, Sign::Positive)];
        Self(BTreeMap::from([
            ("Sad".to_string(), sad.into_iter().collect()),
            ("Happy".to_string(), happy.into_iter().collect()),
        ]))
    }
}

impl ExpectedSigns {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| EvalError::Config(format!("{}: {}", e.path(), e.inner())))
    }

    pub fn get(&self, emotion: &str, feature: ProsodyFeature) -> Option<Sign> {
        self.0.get(emotion).and_then(|m| m.get(&feature)).copied()
    }
}

/// One synthesized or measured utterance in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRun {
    pub condition: Condition,
    pub emotion: String,
    pub intensity: f64,
    pub stats: ProsodyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCell {
    pub condition: Condition,
    pub emotion: String,
    pub feature: ProsodyFeature,
    pub rho: f64,
    pub slope: f64,
    pub sign: Sign,
    pub samples: usize,
    pub expected: Option<Sign>,
    /// Whether the fitted sign agrees with `expected`.
    pub matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub condition: Condition,
    pub emotion: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub cells: Vec<TrendCell>,
    pub skipped: Vec<SkippedCell>,
    pub expected: ExpectedSigns,
}

fn sign_of(slope: f64, ys: &[f64]) -> Sign {
    let scale = ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    if slope.abs() <= 1e-12 * scale {
        Sign::Flat
    } else if slope > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// Spearman correlation and least-squares slope of every prosody feature
/// against intensity, per (condition, emotion).
pub fn trend_analysis(runs: &[TrendRun], expected: &ExpectedSigns) -> TrendReport {
    let mut groups: BTreeMap<(Condition, String), Vec<&TrendRun>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.condition, r.emotion.clone())).or_default().push(r);
    }
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for ((condition, emotion), rs) in groups {
        let xs: Vec<f64> = rs.iter().map(|r| r.intensity).collect();
        let mut distinct = xs.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < MIN_INTENSITIES {
            skipped.push(SkippedCell {
                condition,
                emotion,
                reason: format!("{} distinct intensities, need at least {MIN_INTENSITIES}", distinct.len()),
            });
            continue;
        }
        for feature in ProsodyFeature::ALL {
            let ys: Vec<f64> = rs.iter().map(|r| feature.of(&r.stats)).collect();
            let rho = spearman(&xs, &ys);
            let b = slope(&xs, &ys);
            let sign = sign_of(b, &ys);
            let exp = expected.get(&emotion, feature);
            cells.push(TrendCell {
                condition,
                emotion: emotion.clone(),
                feature,
                rho,
                slope: b,
                sign,
                samples: rs.len(),
                expected: exp,
                matches: exp.map(|e| e == sign),
            });
        }
    }
    TrendReport { cells, skipped, expected: expected.clone() }
}

impl TrendReport {
    pub fn cell(&self, condition: Condition, emotion: &str, feature: ProsodyFeature) -> Option<&TrendCell> {
        self.cells.iter().find(|c| c.condition == condition && c.emotion == emotion && c.feature == feature)
    }

    fn emotions(&self) -> Vec<String> {
        let mut e: Vec<String> = self.cells.iter().map(|c| c.emotion.clone()).collect();
        e.extend(self.skipped.iter().map(|c| c.emotion.clone()));
        e.sort();
        e.dedup();
        e
    }

    /// One row per (emotion, feature) with rho per condition; skipped cells
    /// are left empty.
    pub fn heatmap_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["emotion".to_string(), "feature".to_string()];
        header.extend(Condition::ALL.iter().map(|c| c.to_string()));
        header.push("expected".into());
        w.write_record(&header).expect("in-memory write");
        for e in self.emotions() {
            for f in ProsodyFeature::ALL {
                let mut rec = vec![e.clone(), f.name().to_string()];
                for c in Condition::ALL {
                    rec.push(self.cell(c, &e, f).map(|x| x.rho.to_string()).unwrap_or_default());
                }
                rec.push(self.expected.get(&e, f).map(|s| s.symbol().to_string()).unwrap_or_default());
                w.write_record(&rec).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Text grid of conditions × (emotion, feature). Each cell shows the
    /// fitted sign and rho; `!` marks disagreement with the expected sign.
    pub fn render_grid(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<8} {:<15} {:>4}", "emotion", "feature", "exp");
        for c in Condition::ALL {
            let _ = write!(out, " {:>9}", c.as_str());
        }
        out.push('\n');
        for e in self.emotions() {
            for f in ProsodyFeature::ALL {
                let exp = self.expected.get(&e, f).map_or(' ', Sign::symbol);
                let _ = write!(out, "{:<8} {:<15} {:>4}", e, f.name(), exp);
                for c in Condition::ALL {
                    let cell = match self.cell(c, &e, f) {
                        Some(x) => {
                            let flag = if x.matches == Some(false) { '!' } else { ' ' };
                            format!("{}{:+.2}{}", x.sign.symbol(), x.rho, flag)
                        }
                        None => "skip".into(),
                    };
                    let _ = write!(out, " {cell:>9}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn mismatches(&self) -> Vec<&TrendCell> {
        self.cells.iter().filter(|c| c.matches == Some(false)).collect()
    }
}

#[derive(Deserialize, Serialize)]
struct RunRow {
    condition: Condition,
    emotion: String,
    intensity: f64,
    duration_s: f64,
    pitch_mean_hz: f64,
    pitch_std_hz: f64,
    energy_mean_db: f64,
    energy_std_db: f64,
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<TrendRun>, EvalError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| EvalError::Runs { row: 0, message: e.to_string() })?.clone();
    if header.iter().collect::<Vec<_>>() != RUNS_HEADER {
        return Err(EvalError::Runs { row: 0, message: format!("header must be {}", RUNS_HEADER.join(",")) });
    }
    r.deserialize::<RunRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| EvalError::Runs { row: i + 1, message: e.to_string() })?;
            Ok(TrendRun {
                condition: row.condition,
                emotion: row.emotion,
                intensity: row.intensity,
                stats: ProsodyStats {
                    duration_s: row.duration_s,
                    pitch_mean_hz: row.pitch_mean_hz,
                    pitch_std_hz: row.pitch_std_hz,
                    energy_mean_db: row.energy_mean_db,
                    energy_std_db: row.energy_std_db,
                    unvoiced: false,
                },
            })
        })
        .collect()
}

pub fn runs_to_csv(runs: &[TrendRun]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in runs {
        w.serialize(RunRow {
            condition: r.condition,
            emotion: r.emotion.clone(),
            intensity: r.intensity,
            duration_s: r.stats.duration_s,
            pitch_mean_hz: r.stats.pitch_mean_hz,
            pitch_std_hz: r.stats.pitch_std_hz,
            energy_mean_db: r.stats.energy_mean_db,
            energy_std_db: r.stats.energy_std_db,
        })
        .expect("in-memory write");
    }
    if runs.is_empty() {
        w.write_record(RUNS_HEADER).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
