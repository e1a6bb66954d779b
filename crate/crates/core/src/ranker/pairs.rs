use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RankerError;

/// A feature row with its emotion label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub emotion: String,
    pub features: Vec<f64>,
}

impl LabeledSample {
    pub fn new(emotion: impl Into<String>, features: Vec<f64>) -> Self {
        Self { emotion: emotion.into(), features }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCaps {
    pub max_ordered: Option<usize>,
    pub max_similar: Option<usize>,
}

/// Training pairs over a feature matrix.
///
/// `ordered` holds `(hi, lo)` with the constraint `f(x_hi) > f(x_lo)`;
/// `similar` holds `(i, j)` with `f(x_i) ≈ f(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub ordered: Vec<(usize, usize)>,
    pub similar: Vec<(usize, usize)>,
    pub features: Vec<Vec<f64>>,
}

impl PairSet {
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), RankerError> {
        let n = self.features.len();
        if n == 0 {
            return Err(RankerError::InvalidPairs("empty feature matrix".into()));
        }
        let d = self.dim();
        if d == 0 {
            return Err(RankerError::InvalidPairs("zero-dimensional features".into()));
        }
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return Err(RankerError::InvalidPairs(format!("row {i} has {} dims, expected {d}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(RankerError::InvalidPairs(format!("row {i} has non-finite values")));
            }
        }
        for (kind, pairs) in [("ordered", &self.ordered), ("similar", &self.similar)] {
            for &(a, b) in pairs {
                if a >= n || b >= n {
                    return Err(RankerError::InvalidPairs(format!("{kind} pair ({a}, {b}) out of range for {n} rows")));
                }
                if a == b {
                    return Err(RankerError::InvalidPairs(format!("{kind} pair ({a}, {a}) is reflexive")));
                }
            }
        }
        let norm = |&(a, b): &(usize, usize)| (a.min(b), a.max(b));
        let ordered: std::collections::HashSet<_> = self.ordered.iter().map(norm).collect();
        if let Some(p) = self.similar.iter().map(norm).find(|p| ordered.contains(p)) {
            return Err(RankerError::InvalidPairs(format!("pair {p:?} is both ordered and similar")));
        }
        Ok(())
    }
}

fn cap<T: Copy>(items: Vec<T>, max: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<T> {
    match max {
        Some(k) if k < items.len() => {
            let mut idx = sample(rng, items.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| items[i]).collect()
        }
        _ => items,
    }
}

fn within(indices: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            out.push((i, j));
        }
    }
    out
}

/// Builds ordered pairs (target × neutral) and similar pairs (within the
/// target class and within the neutral class). Samples of other emotions
/// are left out of the feature matrix. Caps are applied by seeded uniform
/// sampling without replacement.
pub fn build_pairs(
    samples: &[LabeledSample],
    target: &str,
    neutral: &str,
    caps: PairCaps,
    seed: u64,
) -> Result<PairSet, RankerError> {
    let mut features = Vec::new();
    let mut hi = Vec::new();
    let mut lo = Vec::new();
    for s in samples {
        let slot = if s.emotion == target {
            &mut hi
        } else if s.emotion == neutral {
            &mut lo
        } else {
            continue;
        };
        slot.push(features.len());
        features.push(s.features.clone());
    }
    if hi.is_empty() {
        return Err(RankerError::InsufficientData(target.to_string()));
    }
    if lo.is_empty() {
        return Err(RankerError::InsufficientData(neutral.to_string()));
    }
    let ordered: Vec<(usize, usize)> = hi.iter().flat_map(|&h| lo.iter().map(move |&l| (h, l))).collect();
    let mut similar = within(&hi);
    similar.extend(within(&lo));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ordered = cap(ordered, caps.max_ordered, &mut rng);
    let similar = cap(similar, caps.max_similar, &mut rng);
    let set = PairSet { ordered, similar, features };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(angry: usize, neutral: usize) -> Vec<LabeledSample> {
        let mut v = Vec::new();
        for i in 0..angry {
            v.push(LabeledSample::new("Angry", vec![i as f64 + 10.0]));
        }
        v.push(LabeledSample::new("Sad", vec![-3.0]));
        for i in 0..neutral {
            v.push(LabeledSample::new("Neutral", vec![i as f64]));
        }
        v
    }

    #[test]
    fn counts_without_caps() {
        let p = build_pairs(&samples(3, 2), "Angry", "Neutral", PairCaps::default(), 0).unwrap();
        assert_eq!(p.ordered.len(), 6);
        assert_eq!(p.similar.len(), 4);
        assert_eq!(p.features.len(), 5);
        for &(h, l) in &p.ordered {
            assert!(p.features[h][0] >= 10.0 && p.features[l][0] < 10.0);
        }
    }

    #[test]
    fn missing_class() {
        assert_eq!(
            build_pairs(&samples(3, 0), "Angry", "Neutral", PairCaps::default(), 0).unwrap_err(),
            RankerError::InsufficientData("Neutral".into())
        );
        assert_eq!(
            build_pairs(&samples(2, 2), "Happy", "Neutral", PairCaps::default(), 0).unwrap_err(),
            RankerError::InsufficientData("Happy".into())
        );
    }

    #[test]
    fn capped_sampling_is_seeded() {
        let caps = PairCaps { max_ordered: Some(4), max_similar: Some(2) };
        let a = build_pairs(&samples(5, 4), "Angry", "Neutral", caps, 42).unwrap();
        let b = build_pairs(&samples(5, 4), "Angry", "Neutral", caps, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ordered.len(), 4);
        assert_eq!(a.similar.len(), 2);
        let c = build_pairs(&samples(5, 4), "Angry", "Neutral", caps, 43).unwrap();
        assert!(a.ordered != c.ordered || a.similar != c.similar);
    }

    #[test]
    fn validation() {
        let base = PairSet { ordered: vec![(0, 1)], similar: vec![], features: vec![vec![1.0], vec![0.0]] };
        assert!(base.validate().is_ok());
        let mut p = base.clone();
        p.ordered.push((1, 1));
        assert!(p.validate().is_err());
        let mut p = base.clone();
        p.similar.push((1, 0));
        assert!(p.validate().is_err());
        let mut p = base.clone();
        p.ordered.push((0, 2));
        assert!(p.validate().is_err());
    }
}
