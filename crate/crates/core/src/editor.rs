//! Level-targeted edits of HED matrices.
//!
//! Edits are pure: [`apply`] returns a new matrix and leaves its input
//! untouched. Levels are independent channels, so a phoneme edit never
//! changes word or utterance blocks.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hed::{block_offset, HedError, HedMatrix};
use crate::ranker::Level;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("op {op}: {message}")]
    Index { op: usize, message: String },
    #[error("op {op}: unknown emotion label {label:?}")]
    Label { op: usize, label: String },
    #[error("op {op}: {message}")]
    Selector { op: usize, message: String },
    #[error("op {op}: value {value} is not finite")]
    Value { op: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid edit script: {0}")]
    Script(String),
    #[error(transparent)]
    Hed(#[from] HedError),
}

impl EditError {
    pub fn code(&self) -> &'static str {
        match self {
            EditError::Index { .. } => "editor.index",
            EditError::Label { .. } => "editor.label",
            EditError::Selector { .. } => "editor.selector",
            EditError::Value { .. } => "editor.value",
            EditError::Shape(_) => "editor.shape",
            EditError::Script(_) => "editor.script",
            EditError::Hed(e) => e.code(),
        }
    }
}

/// Which units an op touches. Ranges are half-open and index words at the
/// word level and phonemes at the phoneme level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    All,
    Word(usize),
    Phoneme(usize),
    Range { start: usize, end: usize },
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::All => f.write_str("all"),
            Selector::Word(i) => write!(f, "word {i}"),
            Selector::Phoneme(i) => write!(f, "phoneme {i}"),
            Selector::Range { start, end } => write!(f, "range {start}..{end}"),
        }
    }
}

/// An emotion label or every emotion; serialized as a plain string with
/// `"all"` reserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum EmotionSel {
    All,
    Label(String),
}

impl From<String> for EmotionSel {
    fn from(s: String) -> Self {
        if s == "all" {
            EmotionSel::All
        } else {
            EmotionSel::Label(s)
        }
    }
}

impl From<EmotionSel> for String {
    fn from(e: EmotionSel) -> String {
        match e {
            EmotionSel::All => "all".into(),
            EmotionSel::Label(s) => s,
        }
    }
}

impl From<&str> for EmotionSel {
    fn from(s: &str) -> Self {
        EmotionSel::from(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Set,
    Scale,
    Add,
}

impl Action {
    fn apply(self, current: f64, value: f64) -> f64 {
        let v = match self {
            Action::Set => value,
            Action::Scale => current * value,
            Action::Add => current + value,
        };
        v.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditOp {
    pub level: Level,
    pub selector: Selector,
    pub emotion: EmotionSel,
    pub action: Action,
    pub value: f64,
}

impl EditOp {
    pub fn set(level: Level, selector: Selector, emotion: impl Into<EmotionSel>, value: f64) -> Self {
        Self { level, selector, emotion: emotion.into(), action: Action::Set, value }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} {} {} on {} ({})",
            self.action,
            self.value,
            String::from(self.emotion.clone()),
            self.selector,
            self.level
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    /// Fingerprint of the matrix the script was written against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    #[serde(default)]
    pub meta: EditMeta,
}

impl EditScript {
    pub fn new(ops: Vec<EditOp>) -> Self {
        Self { ops, meta: EditMeta::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EditError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| EditError::Script(format!("{}: {}", e.path(), e.inner())))
    }
}

/// Rows affected by `sel` at `level`, plus the column range.
fn target(m: &HedMatrix, op_index: usize, op: &EditOp) -> Result<(Vec<usize>, Vec<usize>), EditError> {
    let n = m.row_count();
    let words = m.word_count();
    let bad = |message: String| EditError::Index { op: op_index, message };
    let rows: Vec<usize> = match (op.level, &op.selector) {
        (_, Selector::All) => (0..n).collect(),
        (Level::Utterance, s) => {
            return Err(EditError::Selector {
                op: op_index,
                message: format!("utterance-level edits only accept the `all` selector, got {s}"),
            })
        }
        (Level::Word, Selector::Phoneme(_)) => {
            return Err(EditError::Selector {
                op: op_index,
                message: "word-level edits select words, not phonemes".into(),
            })
        }
        (_, Selector::Word(w)) => {
            if *w >= words {
                return Err(bad(format!("word {w} out of range ({words} words)")));
            }
            m.phonemes_of_word(*w).collect()
        }
        (Level::Phoneme, Selector::Phoneme(p)) => {
            if *p >= n {
                return Err(bad(format!("phoneme {p} out of range ({n} phonemes)")));
            }
            vec![*p]
        }
        (Level::Word, Selector::Range { start, end }) => {
            if start > end || *end > words {
                return Err(bad(format!("word range {start}..{end} invalid for {words} words")));
            }
            (m.phonemes_of_word(*start).start..m.phonemes_of_word(end.saturating_sub(1)).end)
                .filter(|_| start < end)
                .collect()
        }
        (Level::Phoneme, Selector::Range { start, end }) => {
            if start > end || *end > n {
                return Err(bad(format!("phoneme range {start}..{end} invalid for {n} phonemes")));
            }
            (*start..*end).collect()
        }
    };
    let k = m.k();
    let emotions: Vec<usize> = match &op.emotion {
        EmotionSel::All => (0..k).collect(),
        EmotionSel::Label(l) => {
            vec![m.emotion_index(l).ok_or_else(|| EditError::Label { op: op_index, label: l.clone() })?]
        }
    };
    let offset = block_offset(op.level, k);
    let cols = emotions.into_iter().map(|e| offset + e).collect();
    let rows = if op.level == Level::Utterance { (0..n).collect() } else { rows };
    Ok((rows, cols))
}

/// Applies every op in order. Fails without partial effects.
pub fn apply(m: &HedMatrix, script: &EditScript) -> Result<HedMatrix, EditError> {
    let mut out = m.clone();
    for (i, op) in script.ops.iter().enumerate() {
        if !op.value.is_finite() {
            return Err(EditError::Value { op: i, value: op.value });
        }
        let (rows, cols) = target(&out, i, op)?;
        let data = out.rows_mut();
        for &r in &rows {
            for &c in &cols {
                data[r][c] = op.action.apply(data[r][c], op.value);
            }
        }
    }
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

/// Control segments of an intensity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    U,
    W,
    P,
    WP,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::U, Condition::W, Condition::P, Condition::WP];

    pub fn levels(self) -> &'static [Level] {
        match self {
            Condition::U => &[Level::Utterance],
            Condition::W => &[Level::Word],
            Condition::P => &[Level::Phoneme],
            Condition::WP => &[Level::Word, Level::Phoneme],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::U => "U",
            Condition::W => "W",
            Condition::P => "P",
            Condition::WP => "WP",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "U" | "UTTERANCE" => Ok(Condition::U),
            "W" | "WORD" => Ok(Condition::W),
            "P" | "PHONEME" => Ok(Condition::P),
            "WP" | "WORD+PHONEME" => Ok(Condition::WP),
            _ => Err(format!("unknown condition {s:?} (expected U, W, P or WP)")),
        }
    }
}

/// The script a sweep applies for one value.
pub fn sweep_script(condition: Condition, selector: &Selector, emotion: &EmotionSel, value: f64) -> EditScript {
    EditScript::new(
        condition
            .levels()
            .iter()
            .map(|&level| {
                let selector = if level == Level::Utterance { Selector::All } else { selector.clone() };
                EditOp { level, selector, emotion: emotion.clone(), action: Action::Set, value }
            })
            .collect(),
    )
}

/// One edited matrix per value, each produced by set-ops at the levels of
/// `condition`. The utterance level always uses the `all` selector.
pub fn sweep(
    m: &HedMatrix,
    condition: Condition,
    selector: &Selector,
    emotion: &EmotionSel,
    values: &[f64],
) -> Result<Vec<HedMatrix>, EditError> {
    values.iter().map(|&v| apply(m, &sweep_script(condition, selector, emotion, v))).collect()
}

/// Per-unit set-ops for one level, before range merging.
fn unit_ops(a: &HedMatrix, b: &HedMatrix, level: Level, units: &[(usize, usize)]) -> Vec<(usize, EmotionSel, f64)> {
    let k = a.k();
    let off = block_offset(level, k);
    let mut out = Vec::new();
    for (u, &(row, _)) in units.iter().enumerate() {
        let (ra, rb) = (&a.rows()[row][off..off + k], &b.rows()[row][off..off + k]);
        let changed: Vec<usize> = (0..k).filter(|&e| ra[e].to_bits() != rb[e].to_bits()).collect();
        if changed.is_empty() {
            continue;
        }
        if changed.len() > 1 && rb.iter().all(|v| v.to_bits() == rb[0].to_bits()) {
            out.push((u, EmotionSel::All, rb[0]));
        } else {
            out.extend(changed.into_iter().map(|e| (u, EmotionSel::Label(a.emotions()[e].clone()), rb[e])));
        }
    }
    out
}

/// Merges runs of identical ops on consecutive units into range or `all`
/// ops.
fn merge_units(level: Level, n_units: usize, ops: Vec<(usize, EmotionSel, f64)>) -> Vec<EditOp> {
    let mut groups: Vec<(EmotionSel, u64, usize, usize)> = Vec::new();
    for (u, e, v) in ops {
        match groups.iter_mut().rev().find(|g| g.0 == e && g.1 == v.to_bits() && g.3 == u) {
            Some(g) => g.3 = u + 1,
            None => groups.push((e, v.to_bits(), u, u + 1)),
        }
    }
    groups
        .into_iter()
        .map(|(emotion, bits, start, end)| {
            let selector = if start == 0 && end == n_units {
                Selector::All
            } else if end == start + 1 {
                match level {
                    Level::Word => Selector::Word(start),
                    _ => Selector::Phoneme(start),
                }
            } else {
                Selector::Range { start, end }
            };
            EditOp { level, selector, emotion, action: Action::Set, value: f64::from_bits(bits) }
        })
        .collect()
}

/// A script of set-ops that turns `a` into `b`. Uniform block changes
/// become single utterance, word, `all`-emotion or range ops.
pub fn diff(a: &HedMatrix, b: &HedMatrix) -> Result<EditScript, EditError> {
    if !a.same_shape(b) {
        return Err(EditError::Shape(format!(
            "{}×{} matrix vs {}×{} (or differing labels, words or emotions)",
            a.row_count(),
            a.k(),
            b.row_count(),
            b.k()
        )));
    }
    let mut ops = Vec::new();
    if a.row_count() == 0 {
        return Ok(EditScript::new(ops));
    }
    ops.extend(merge_units(Level::Utterance, 1, unit_ops(a, b, Level::Utterance, &[(0, 0)])));

    // Words without phonemes carry no cells; merging across them is harmless
    // because a range over an empty word is a no-op.
    let words: Vec<(usize, usize)> =
        (0..a.word_count()).map(|w| (a.phonemes_of_word(w).next().unwrap_or(0), w)).collect();
    let present: Vec<(usize, usize)> = words.iter().copied().filter(|&(_, w)| !a.phonemes_of_word(w).is_empty()).collect();
    let word_ops: Vec<_> = unit_ops(a, b, Level::Word, &present)
        .into_iter()
        .map(|(u, e, v)| (present[u].1, e, v))
        .collect();
    ops.extend(merge_units(Level::Word, a.word_count(), word_ops));

    let phones: Vec<(usize, usize)> = (0..a.row_count()).map(|r| (r, r)).collect();
    ops.extend(merge_units(Level::Phoneme, a.row_count(), unit_ops(a, b, Level::Phoneme, &phones)));

    let mut script = EditScript::new(ops);
    script.meta.source = Some(a.fingerprint());
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> HedMatrix {
        HedMatrix::from_blocks(
            vec!["HH".into(), "AH".into(), "L".into()],
            vec![0, 1, 1],
            vec!["Angry".into(), "Happy".into(), "Sad".into()],
            &[0.5, 0.2, 0.1],
            &[vec![0.9, 0.1, 0.3], vec![0.3, 0.4, 0.5]],
            &[vec![0.11, 0.12, 0.13], vec![0.21, 0.22, 0.23], vec![0.31, 0.32, 0.33]],
        )
        .unwrap()
    }

    #[test]
    fn word_set_touches_only_word_block() {
        let m = example();
        let out = apply(&m, &EditScript::new(vec![EditOp::set(Level::Word, Selector::Word(1), "Happy", 1.0)])).unwrap();
        for r in 0..3 {
            for c in 0..9 {
                let expected = if r >= 1 && c == 4 { 1.0 } else { m.rows()[r][c] };
                assert_eq!(out.rows()[r][c], expected, "cell ({r},{c})");
            }
        }
        assert_eq!(m, example(), "input untouched");
    }

    #[test]
    fn identity_scale_and_clamp() {
        let m = example();
        let scale = EditOp { action: Action::Scale, ..EditOp::set(Level::Utterance, Selector::All, "all", 1.0) };
        assert_eq!(apply(&m, &EditScript::new(vec![scale])).unwrap(), m);
        let add = EditOp { action: Action::Add, ..EditOp::set(Level::Phoneme, Selector::Phoneme(0), "Sad", 5.0) };
        let out = apply(&m, &EditScript::new(vec![add])).unwrap();
        assert_eq!(out.rows()[0][8], 1.0);
        let neg = EditOp { action: Action::Scale, ..EditOp::set(Level::Word, Selector::All, "all", -3.0) };
        let out = apply(&m, &EditScript::new(vec![neg])).unwrap();
        assert!(out.rows().iter().all(|r| r[3..6].iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn selector_errors_name_the_op() {
        let m = example();
        let s = EditScript::new(vec![
            EditOp::set(Level::Phoneme, Selector::Phoneme(0), "Sad", 0.2),
            EditOp::set(Level::Word, Selector::Word(5), "Sad", 0.2),
        ]);
        match apply(&m, &s) {
            Err(e @ EditError::Index { op: 1, .. }) => assert!(e.to_string().starts_with("op 1: word 5")),
            other => panic!("{other:?}"),
        }
        let s = EditScript::new(vec![EditOp::set(Level::Word, Selector::All, "Bored", 0.2)]);
        assert_eq!(apply(&m, &s).unwrap_err(), EditError::Label { op: 0, label: "Bored".into() });
        let s = EditScript::new(vec![EditOp::set(Level::Utterance, Selector::Word(0), "Sad", 0.2)]);
        assert!(matches!(apply(&m, &s), Err(EditError::Selector { op: 0, .. })));
        let s = EditScript::new(vec![EditOp::set(Level::Phoneme, Selector::Range { start: 2, end: 4 }, "Sad", 0.2)]);
        assert!(matches!(apply(&m, &s), Err(EditError::Index { op: 0, .. })));
        let s = EditScript::new(vec![EditOp::set(Level::Phoneme, Selector::All, "Sad", f64::NAN)]);
        assert!(matches!(apply(&m, &s), Err(EditError::Value { op: 0, .. })));
    }

    #[test]
    fn phoneme_level_word_selector_and_ranges() {
        let m = example();
        let out = apply(&m, &EditScript::new(vec![EditOp::set(Level::Phoneme, Selector::Word(1), "Angry", 0.0)])).unwrap();
        assert_eq!(out.rows()[0][6], 0.11);
        assert_eq!(out.rows()[1][6], 0.0);
        assert_eq!(out.rows()[2][6], 0.0);
        let out = apply(
            &m,
            &EditScript::new(vec![EditOp::set(Level::Word, Selector::Range { start: 0, end: 2 }, "Sad", 0.7)]),
        )
        .unwrap();
        assert!(out.rows().iter().all(|r| r[5] == 0.7));
    }

    #[test]
    fn sweeps() {
        let m = example();
        let e = EmotionSel::from("Happy");
        assert!(sweep(&m, Condition::W, &Selector::Word(0), &e, &[]).unwrap().is_empty());
        let out = sweep(&m, Condition::W, &Selector::Word(0), &e, &[0.0, 0.5, 1.0]).unwrap();
        for (o, v) in out.iter().zip([0.0, 0.5, 1.0]) {
            assert_eq!(o.rows()[0][4], v);
            assert_eq!(o.rows()[1][4], 0.4);
        }
        let wp = sweep(&m, Condition::WP, &Selector::Word(0), &e, &[0.5]).unwrap();
        assert_eq!(wp[0].rows()[0][4], 0.5);
        assert_eq!(wp[0].rows()[0][7], 0.5);
        assert_eq!(wp[0].rows()[1][7], 0.22);
        let u = sweep(&m, Condition::U, &Selector::Word(0), &e, &[1.0]).unwrap();
        assert!(u[0].rows().iter().all(|r| r[1] == 1.0));
    }

    #[test]
    fn diff_examples() {
        let m = example();
        assert!(diff(&m, &m).unwrap().is_empty());

        let one = apply(&m, &EditScript::new(vec![EditOp::set(Level::Phoneme, Selector::Phoneme(2), "Sad", 0.9)])).unwrap();
        let d = diff(&m, &one).unwrap();
        assert_eq!(d.ops, vec![EditOp::set(Level::Phoneme, Selector::Phoneme(2), "Sad", 0.9)]);

        let utt = apply(&m, &EditScript::new(vec![EditOp::set(Level::Utterance, Selector::All, "all", 0.6)])).unwrap();
        let d = diff(&m, &utt).unwrap();
        assert_eq!(d.ops, vec![EditOp::set(Level::Utterance, Selector::All, "all", 0.6)]);
        assert_eq!(apply(&m, &d).unwrap(), utt);
    }

    #[test]
    fn diff_op_count_is_minimal_on_uniform_utterance_change() {
        // Brute force: the cheapest of the three single-level encodings.
        let m = example();
        let b = apply(&m, &EditScript::new(vec![EditOp::set(Level::Utterance, Selector::All, "Happy", 0.95)])).unwrap();
        let d = diff(&m, &b).unwrap();
        let changed_cells = m
            .rows()
            .iter()
            .zip(b.rows())
            .flat_map(|(x, y)| x.iter().zip(y).filter(|(p, q)| p != q))
            .count();
        assert_eq!(changed_cells, 3);
        assert_eq!(d.ops.len(), 1);
        assert_eq!(d.ops[0].level, Level::Utterance);
    }

    #[test]
    fn script_json() {
        let s = EditScript {
            ops: vec![EditOp {
                action: Action::Add,
                ..EditOp::set(Level::Word, Selector::Range { start: 0, end: 2 }, "all", -0.25)
            }],
            meta: EditMeta { author: Some("me".into()), timestamp: None, source: Some("abc".into()) },
        };
        let text = s.to_json();
        assert!(text.contains("\"emotion\": \"all\""));
        assert_eq!(EditScript::from_json(&text).unwrap(), s);
        let bad = r#"{"ops":[{"level":"word","selector":"all","emotion":"Sad","action":"multiply","value":1}]}"#;
        match EditScript::from_json(bad) {
            Err(EditError::Script(m)) => assert!(m.starts_with("ops[0].action"), "{m}"),
            other => panic!("{other:?}"),
        }
        let compact = r#"{"ops":[{"level":"phoneme","selector":{"phoneme":3},"emotion":"Sad","action":"set","value":1}]}"#;
        assert_eq!(EditScript::from_json(compact).unwrap().ops[0].selector, Selector::Phoneme(3));
    }

    pub(crate) fn arb_pair() -> impl Strategy<Value = (HedMatrix, HedMatrix)> {
        let emotions = ["A", "B", "C"];
        (1usize..=3, proptest::collection::vec(1usize..4, 1..5)).prop_flat_map(move |(k, per_word)| {
            let n: usize = per_word.iter().sum();
            let nw = per_word.len();
            // a small value alphabet makes uniform blocks and runs common
            let val = prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0f64..=1.0];
            let block = move |count: usize| {
                proptest::collection::vec(proptest::collection::vec(val.clone(), k), count)
            };
            let side = (block(1), block(nw), block(n));
            (side.clone(), side, Just(per_word)).prop_map(move |((ua, wa, pa), (ub, wb, pb), per_word)| {
                let wop: Vec<usize> = per_word.iter().enumerate().flat_map(|(i, &c)| vec![i; c]).collect();
                let labels: Vec<String> = (0..wop.len()).map(|i| format!("p{i}")).collect();
                let em: Vec<String> = emotions[..k].iter().map(|s| s.to_string()).collect();
                let mk = |u: &[Vec<f64>], w: &[Vec<f64>], p: &[Vec<f64>]| {
                    HedMatrix::from_blocks(labels.clone(), wop.clone(), em.clone(), &u[0], w, p).unwrap()
                };
                (mk(&ua, &wa, &pa), mk(&ub, &wb, &pb))
            })
        })
    }

    fn arb_op(k: usize, words: usize, phones: usize) -> impl Strategy<Value = EditOp> {
        let level = prop_oneof![Just(Level::Utterance), Just(Level::Word), Just(Level::Phoneme)];
        let action = prop_oneof![Just(Action::Set), Just(Action::Scale), Just(Action::Add)];
        (level, action, -3.0f64..3.0, 0..=k, 0..words, 0..phones, 0..=phones, any::<u8>()).prop_map(
            move |(level, action, value, e, w, p, end, pick)| {
                let emotion = if e == k { EmotionSel::All } else { EmotionSel::Label(["A", "B", "C"][e].into()) };
                let selector = match (level, pick % 3) {
                    (Level::Utterance, _) | (_, 0) => Selector::All,
                    (Level::Word, 1) => Selector::Word(w),
                    (Level::Word, _) => Selector::Range { start: w.min(words), end: words },
                    (_, 1) => Selector::Phoneme(p),
                    _ => Selector::Range { start: p.min(end), end },
                };
                EditOp { level, selector, emotion, action, value }
            },
        )
    }

    proptest! {
        #[test]
        fn diff_reproduces_target((a, b) in arb_pair()) {
            let d = diff(&a, &b).unwrap();
            prop_assert!(d.ops.iter().all(|o| o.action == Action::Set));
            prop_assert_eq!(apply(&a, &d).unwrap(), b);
        }

        #[test]
        fn random_scripts_keep_invariants(
            (m, ops) in arb_pair().prop_flat_map(|(a, _)| {
                let (k, w, p) = (a.k(), a.word_count(), a.row_count());
                (Just(a), proptest::collection::vec(arb_op(k, w, p), 0..8))
            })
        ) {
            let before = m.clone();
            let out = apply(&m, &EditScript::new(ops)).unwrap();
            prop_assert!(out.validate().is_ok());
            prop_assert!(out.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(m, before);
        }
    }
}
