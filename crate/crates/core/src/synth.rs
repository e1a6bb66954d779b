//! Parametric generator for synthetic emotional speech.
//!
//! Not a TTS system: it renders harmonic "phonemes" whose pitch, loudness,
//! pitch range, loudness spread and duration are shifted per emotion in a
//! known direction. That makes it a ground-truth source for tests, the
//! bundled fixture corpus, and trend-analysis checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{to_alignment_json, AlignmentHierarchy, Segment, SilenceLabels};
use crate::audio::{encode_wav, WavEncoding, Waveform};
use crate::corpus::{Manifest, ManifestEntry};
use crate::hed::HedMatrix;
use crate::ranker::Level;

/// Prosody shift at full intensity, relative to the speaker's neutral voice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodyProfile {
    /// Relative change of mean F0.
    pub f0_rel: f64,
    /// Relative change of pitch range.
    pub range_rel: f64,
    /// Loudness change in dB.
    pub level_db: f64,
    /// Relative change of loudness spread (between and within phonemes).
    pub spread_rel: f64,
    /// Relative change of phoneme duration.
    pub duration_rel: f64,
}

pub const NEUTRAL: &str = "Neutral";

/// Angry: louder, higher, faster. Happy: higher with a wide range.
/// Sad: slower, lower, flatter, quieter. Surprise: highest and widest.
pub fn default_profiles() -> BTreeMap<String, ProsodyProfile> {
    let p = |f0_rel, range_rel, level_db, spread_rel, duration_rel| ProsodyProfile {
        f0_rel,
        range_rel,
        level_db,
        spread_rel,
        duration_rel,
    };
    BTreeMap::from([
        ("Angry".to_string(), p(0.25, 0.5, 7.0, 0.5, -0.2)),
        ("Happy".to_string(), p(0.35, 0.8, 4.0, 0.3, -0.1)),
        ("Sad".to_string(), p(-0.2, -0.6, -7.0, -0.5, 0.4)),
        ("Surprise".to_string(), p(0.45, 1.0, 5.0, 0.4, -0.05)),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    pub f0_hz: f64,
    /// RMS level of a neutral phoneme, dBFS.
    pub level_db: f64,
    /// Speaking-rate multiplier; 1.1 is 10% faster.
    pub rate: f64,
}

impl Default for Voice {
    fn default() -> Self {
        Self { f0_hz: 130.0, level_db: -26.0, rate: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpec {
    pub label: String,
    pub phonemes: Vec<String>,
}

impl WordSpec {
    pub fn new(label: &str, phonemes: &[&str]) -> Self {
        Self { label: label.into(), phonemes: phonemes.iter().map(|s| s.to_string()).collect() }
    }
}

pub const LEXICON: &[(&str, &[&str])] = &[
    ("the", &["DH", "AH"]),
    ("cat", &["K", "AE", "T"]),
    ("sat", &["S", "AE", "T"]),
    ("on", &["AA", "N"]),
    ("a", &["AH"]),
    ("warm", &["W", "AO", "R", "M"]),
    ("mat", &["M", "AE", "T"]),
    ("hello", &["HH", "AH", "L", "OW"]),
    ("world", &["W", "ER", "L", "D"]),
    ("today", &["T", "AH", "D", "EY"]),
    ("we", &["W", "IY"]),
    ("will", &["W", "IH", "L"]),
    ("go", &["G", "OW"]),
    ("home", &["HH", "OW", "M"]),
    ("now", &["N", "AW"]),
    ("really", &["R", "IH", "L", "IY"]),
    ("green", &["G", "R", "IY", "N"]),
    ("river", &["R", "IH", "V", "ER"]),
];

/// A sentence of `n_words` lexicon words chosen with `rng`.
pub fn sentence(rng: &mut impl Rng, n_words: usize) -> Vec<WordSpec> {
    (0..n_words)
        .map(|_| {
            let (w, p) = LEXICON[rng.gen_range(0..LEXICON.len())];
            WordSpec::new(w, p)
        })
        .collect()
}

/// Stable pseudo-random value in [-1, 1] for a label.
fn label_hash(label: &str, salt: u8) -> f64 {
    let d = Sha256::digest([label.as_bytes(), &[salt]].concat());
    let v = u32::from_le_bytes([d[0], d[1], d[2], d[3]]);
    v as f64 / u32::MAX as f64 * 2.0 - 1.0
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub waveform: Waveform,
    pub alignment: AlignmentHierarchy,
}

#[derive(Debug, Clone)]
pub struct Synthesizer {
    pub sample_rate: u32,
    /// Silence before the first and after the last word.
    pub pad_s: f64,
    /// Pitch range of a neutral voice, relative to F0.
    pub base_range: f64,
    /// Loudness spread of a neutral voice, dB.
    pub base_spread_db: f64,
    pub profiles: BTreeMap<String, ProsodyProfile>,
}

impl Default for Synthesizer {
    fn default() -> Self {
        Self { sample_rate: 16000, pad_s: 0.1, base_range: 0.08, base_spread_db: 3.0, profiles: default_profiles() }
    }
}

#[derive(Debug, Clone, Copy)]
struct PhoneParams {
    f0: f64,
    range: f64,
    level_db: f64,
    spread: f64,
    duration_s: f64,
}

impl Synthesizer {
    fn params(&self, label: &str, voice: &Voice, mix: &[(String, f64)]) -> PhoneParams {
        let mut shift = ProsodyProfile { f0_rel: 0.0, range_rel: 0.0, level_db: 0.0, spread_rel: 0.0, duration_rel: 0.0 };
        for (e, x) in mix {
            if let Some(p) = self.profiles.get(e) {
                shift.f0_rel += x * p.f0_rel;
                shift.range_rel += x * p.range_rel;
                shift.level_db += x * p.level_db;
                shift.spread_rel += x * p.spread_rel;
                shift.duration_rel += x * p.duration_rel;
            }
        }
        let base_dur = 0.1 + 0.04 * label_hash(label, 0);
        PhoneParams {
            f0: voice.f0_hz * (1.0 + shift.f0_rel).max(0.2),
            range: self.base_range * (1.0 + shift.range_rel).max(0.0),
            level_db: voice.level_db + shift.level_db,
            spread: self.base_spread_db * (1.0 + shift.spread_rel).max(0.0),
            duration_s: base_dur * (1.0 + shift.duration_rel).max(0.2) / voice.rate,
        }
    }

    /// Renders `words` with a per-phoneme emotion mix (emotion, intensity).
    pub fn render(&self, words: &[WordSpec], voice: &Voice, mix: &[Vec<(String, f64)>]) -> Rendered {
        let sr = self.sample_rate as f64;
        let n_phones: usize = words.iter().map(|w| w.phonemes.len()).sum();
        assert_eq!(mix.len(), n_phones, "one emotion mix per phoneme");
        let pad = (self.pad_s * sr).round() as usize;
        let mut samples = vec![0.0; pad];
        let mut phase = 0.0f64;
        let mut word_segs = Vec::new();
        let mut phone_segs = Vec::new();
        let mut p_index = 0;
        for word in words {
            let word_start = samples.len();
            for (pos, label) in word.phonemes.iter().enumerate() {
                let pp = self.params(label, voice, &mix[p_index]);
                p_index += 1;
                let offset = label_hash(label, 1 + pos as u8);
                let level_off = label_hash(label, 9);
                let (f1, f2) = (550.0 + 250.0 * label_hash(label, 2), 1700.0 + 700.0 * label_hash(label, 3));
                let n = (pp.duration_s * sr).round().max(1.0) as usize;
                let start = samples.len();
                let centre_f0 = pp.f0 * (1.0 + pp.range * offset);
                let harmonics = ((4000.0 / centre_f0) as usize).max(1);
                let weights: Vec<f64> = (1..=harmonics)
                    .map(|h| {
                        let f = h as f64 * centre_f0;
                        (-((f - f1) / 200.0).powi(2)).exp() + 0.6 * (-((f - f2) / 300.0).powi(2)).exp() + 0.05
                    })
                    .collect();
                let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                for i in 0..n {
                    let u = (i as f64 + 0.5) / n as f64;
                    let f0 = centre_f0 * (1.0 + pp.range * (0.5 - u));
                    let env_db = pp.level_db + pp.spread * level_off - 2.0 * pp.spread * (1.0 - (PI * u).sin());
                    let amp = 10f64.powf(env_db / 20.0) * 2f64.sqrt() / norm;
                    phase += 2.0 * PI * f0 / sr;
                    if phase > 2.0 * PI {
                        phase -= 2.0 * PI;
                    }
                    let s: f64 = weights.iter().enumerate().map(|(h, w)| w * ((h + 1) as f64 * phase).sin()).sum();
                    samples.push(amp * s);
                }
                phone_segs.push(Segment::new(label.clone(), start as f64 / sr, samples.len() as f64 / sr));
            }
            word_segs.push(Segment::new(word.label.clone(), word_start as f64 / sr, samples.len() as f64 / sr));
        }
        samples.extend(std::iter::repeat_n(0.0, pad));
        let text = words.iter().map(|w| w.label.as_str()).collect::<Vec<_>>().join(" ");
        let duration = samples.len() as f64 / sr;
        let word_of: Vec<usize> = words.iter().enumerate().flat_map(|(i, w)| vec![i; w.phonemes.len()]).collect();
        let alignment = AlignmentHierarchy::build(
            Segment::new(text, 0.0, duration),
            word_segs,
            phone_segs,
            Some(word_of),
            SilenceLabels::default(),
        )
        .expect("rendered alignment is consistent");
        Rendered { waveform: Waveform::new(samples, self.sample_rate).expect("valid rate"), alignment }
    }

    /// Every phoneme carries `emotion` at `intensity`; `Neutral` renders the
    /// plain voice.
    pub fn render_emotion(&self, words: &[WordSpec], voice: &Voice, emotion: &str, intensity: f64) -> Rendered {
        let n: usize = words.iter().map(|w| w.phonemes.len()).sum();
        self.render(words, voice, &vec![vec![(emotion.to_string(), intensity)]; n])
    }

    /// Drives each phoneme by the mean of its utterance, word and phoneme
    /// intensities, so an edit at any level moves the rendered prosody.
    pub fn render_hed(&self, words: &[WordSpec], voice: &Voice, hed: &HedMatrix) -> Rendered {
        let mix: Vec<Vec<(String, f64)>> = (0..hed.row_count())
            .map(|r| {
                hed.emotions()
                    .iter()
                    .enumerate()
                    .map(|(e, label)| {
                        let m = Level::ALL.iter().map(|&l| hed.value(r, l, e)).sum::<f64>() / 3.0;
                        (label.clone(), m)
                    })
                    .collect()
            })
            .collect();
        self.render(words, voice, &mix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub speakers: usize,
    pub utterances_per_emotion: usize,
    /// Emotion labels to render, including the neutral class.
    pub emotions: Vec<String>,
    pub min_words: usize,
    pub max_words: usize,
    /// Intensity range sampled for non-neutral utterances.
    pub intensity: (f64, f64),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            speakers: 2,
            utterances_per_emotion: 6,
            emotions: vec![NEUTRAL.into(), "Angry".into(), "Happy".into(), "Sad".into()],
            min_words: 3,
            max_words: 5,
            intensity: (0.7, 1.0),
            seed: 7,
        }
    }
}

/// Writes `wav/*.wav`, `alignment/*.json` and `manifest.csv` under `dir`.
/// Texts are parallel across speakers and emotions. Output is a pure
/// function of `spec`.
pub fn generate_corpus(dir: &Path, spec: &CorpusSpec, synth: &Synthesizer) -> std::io::Result<Manifest> {
    std::fs::create_dir_all(dir.join("wav"))?;
    std::fs::create_dir_all(dir.join("alignment"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let texts: Vec<Vec<WordSpec>> = (0..spec.utterances_per_emotion)
        .map(|_| {
            let n = rng.gen_range(spec.min_words..=spec.max_words.max(spec.min_words));
            sentence(&mut rng, n)
        })
        .collect();
    let voices: Vec<Voice> = (0..spec.speakers)
        .map(|s| {
            let t = if spec.speakers > 1 { s as f64 / (spec.speakers - 1) as f64 } else { 0.5 };
            Voice {
                f0_hz: 105.0 + 110.0 * t + rng.gen_range(-5.0..5.0),
                level_db: rng.gen_range(-28.0..-24.0),
                rate: rng.gen_range(0.92..1.08),
            }
        })
        .collect();
    let mut entries = Vec::new();
    for (s, voice) in voices.iter().enumerate() {
        let speaker = format!("spk{:02}", s + 1);
        for emotion in &spec.emotions {
            for (u, words) in texts.iter().enumerate() {
                let intensity =
                    if emotion == NEUTRAL { 0.0 } else { rng.gen_range(spec.intensity.0..=spec.intensity.1) };
                // small per-utterance variation so classes are not point masses
                let v = Voice {
                    f0_hz: voice.f0_hz * (1.0 + rng.gen_range(-0.02..0.02)),
                    level_db: voice.level_db + rng.gen_range(-0.5..0.5),
                    rate: voice.rate * (1.0 + rng.gen_range(-0.02..0.02)),
                };
                let r = synth.render_emotion(words, &v, emotion, intensity);
                let stem = format!("{speaker}_{}_{:03}", emotion.to_lowercase(), u + 1);
                let wav = format!("wav/{stem}.wav");
                let alignment = format!("alignment/{stem}.json");
                std::fs::write(dir.join(&wav), encode_wav(&r.waveform, WavEncoding::Pcm16))?;
                std::fs::write(dir.join(&alignment), to_alignment_json(&r.alignment))?;
                entries.push(ManifestEntry { wav, alignment, emotion: emotion.clone(), speaker: speaker.clone() });
            }
        }
    }
    let manifest = Manifest { root: dir.to_path_buf(), entries };
    std::fs::write(dir.join("manifest.csv"), manifest.to_csv())?;
    Ok(manifest)
}
