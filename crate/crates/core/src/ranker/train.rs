use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Level, PairSet, RankerError, RankingModel, DEGENERATE_SPREAD};

/// Solver hyperparameters. Defaults: `C_ordered = C_similar = 0.1`,
/// gradient tolerance 1e-6 (max-norm), at most 500 Newton iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub c_ordered: f64,
    pub c_similar: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self { c_ordered: 0.1, c_similar: 0.1, tol: 1e-6, max_iter: 500 }
    }
}

impl Hyper {
    fn validate(&self) -> Result<(), RankerError> {
        if !(self.c_ordered > 0.0 && self.c_ordered.is_finite()) {
            return Err(RankerError::InvalidHyper(format!("C_ordered must be > 0, got {}", self.c_ordered)));
        }
        if !(self.c_similar >= 0.0 && self.c_similar.is_finite()) {
            return Err(RankerError::InvalidHyper(format!("C_similar must be >= 0, got {}", self.c_similar)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(RankerError::InvalidHyper(format!("tolerance must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Per-dimension z-scoring fitted on the training rows. Dimensions with
/// no spread get unit scale and are flagged constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut std = Vec::with_capacity(d);
        let mut constant = Vec::with_capacity(d);
        for (v, m) in var.iter().zip(&mean) {
            let s = (v / n).sqrt();
            // NaN spread counts as flat
            let flat = s.is_nan() || s <= 1e-12 * (1.0 + m.abs());
            constant.push(flat);
            std.push(if flat { 1.0 } else { s });
        }
        Self { mean, std, constant }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .zip(&self.constant)
            .map(|(((x, m), s), &c)| if c { 0.0 } else { (x - m) / s })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L(w) = ½‖w‖² + C_o Σ_O max(0, 1 − w·d)² + C_s Σ_S (w·s)², where `d` and
/// `s` are standardized pair differences.
#[derive(Debug, Clone)]
pub struct Objective {
    dim: usize,
    ordered: Vec<Vec<f64>>,
    similar: Vec<Vec<f64>>,
    c_ordered: f64,
    c_similar: f64,
    similar_gram: DMatrix<f64>,
}

impl Objective {
    pub fn new(ordered: Vec<Vec<f64>>, similar: Vec<Vec<f64>>, dim: usize, c_ordered: f64, c_similar: f64) -> Self {
        let mut similar_gram = DMatrix::zeros(dim, dim);
        for s in &similar {
            let v = DVector::from_column_slice(s);
            similar_gram.ger(2.0 * c_similar, &v, &v, 1.0);
        }
        Self { dim, ordered, similar, c_ordered, c_similar, similar_gram }
    }

    /// Builds the objective over standardized pair differences.
    pub fn from_pairs(pairs: &PairSet, std: &Standardizer, c_ordered: f64, c_similar: f64) -> Self {
        let z: Vec<Vec<f64>> = pairs.features.iter().map(|r| std.apply(r)).collect();
        let diff = |&(a, b): &(usize, usize)| z[a].iter().zip(&z[b]).map(|(x, y)| x - y).collect::<Vec<f64>>();
        Self::new(
            pairs.ordered.iter().map(diff).collect(),
            pairs.similar.iter().map(diff).collect(),
            pairs.dim(),
            c_ordered,
            c_similar,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let reg = 0.5 * dot(w, w);
        let hinge: f64 = self.ordered.iter().map(|d| (1.0 - dot(w, d)).max(0.0).powi(2)).sum();
        let sim: f64 = self.similar.iter().map(|s| dot(w, s).powi(2)).sum();
        reg + self.c_ordered * hinge + self.c_similar * sim
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = w.to_vec();
        for d in &self.ordered {
            let m = 1.0 - dot(w, d);
            if m > 0.0 {
                let k = -2.0 * self.c_ordered * m;
                g.iter_mut().zip(d).for_each(|(gi, di)| *gi += k * di);
            }
        }
        for s in &self.similar {
            let k = 2.0 * self.c_similar * dot(w, s);
            g.iter_mut().zip(s).for_each(|(gi, si)| *gi += k * si);
        }
        g
    }

    /// Generalized Hessian (the hinge's second derivative taken as 0 at the
    /// kink).
    fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::identity(self.dim, self.dim) + &self.similar_gram;
        for d in &self.ordered {
            if 1.0 - dot(w, d) > 0.0 {
                let v = DVector::from_column_slice(d);
                h.ger(2.0 * self.c_ordered, &v, &v, 1.0);
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm_inf: f64,
    pub converged: bool,
    pub ordered_pairs: usize,
    pub similar_pairs: usize,
    /// Fraction of ordered pairs with `f(x_hi) > f(x_lo)`.
    pub ordering_accuracy: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Vec<f64>,
    pub standardizer: Standardizer,
    pub score_min: f64,
    pub score_max: f64,
    pub fingerprint: String,
    pub report: TrainReport,
}

impl TrainOutcome {
    pub fn into_model(self, emotion: impl Into<String>, level: Level) -> RankingModel {
        RankingModel {
            emotion: emotion.into(),
            level,
            w: self.weights,
            feature_mean: self.standardizer.mean,
            feature_std: self.standardizer.std,
            score_min: self.score_min,
            score_max: self.score_max,
            trained_on: self.fingerprint,
        }
    }
}

fn fingerprint(pairs: &PairSet, hyper: &Hyper) -> String {
    let mut h = Sha256::new();
    h.update((pairs.features.len() as u64).to_le_bytes());
    h.update((pairs.dim() as u64).to_le_bytes());
    for row in &pairs.features {
        for v in row {
            h.update(v.to_le_bytes());
        }
    }
    for list in [&pairs.ordered, &pairs.similar] {
        h.update((list.len() as u64).to_le_bytes());
        for &(a, b) in list {
            h.update((a as u64).to_le_bytes());
            h.update((b as u64).to_le_bytes());
        }
    }
    h.update(hyper.c_ordered.to_le_bytes());
    h.update(hyper.c_similar.to_le_bytes());
    hex::encode(h.finalize())
}

/// Backtracking halvings before a step is abandoned.
const MAX_BACKTRACKS: usize = 60;
const ARMIJO: f64 = 1e-4;

/// Minimizes the pairwise squared-hinge objective with damped Newton steps
/// and calibrates the result on the training rows.
///
/// Every accepted step strictly lowers the objective. If the gradient
/// tolerance is not met within `max_iter` iterations, or no descent step
/// can be found, the model is still returned and the report says
/// `converged: false`.
pub fn train(pairs: &PairSet, hyper: &Hyper) -> Result<TrainOutcome, RankerError> {
    hyper.validate()?;
    pairs.validate()?;
    let standardizer = Standardizer::fit(&pairs.features);
    let obj = Objective::from_pairs(pairs, &standardizer, hyper.c_ordered, hyper.c_similar);
    let d = obj.dim();

    let mut w = vec![0.0; d];
    let mut f = obj.value(&w);
    let mut g = obj.gradient(&w);
    let mut iterations = 0;
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    while iterations < hyper.max_iter && inf_norm(&g) > hyper.tol {
        let h = obj.hessian(&w);
        let neg_g = DVector::from_iterator(d, g.iter().map(|x| -x));
        let step: Vec<f64> = match h.cholesky() {
            Some(ch) => ch.solve(&neg_g).iter().copied().collect(),
            None => neg_g.iter().copied().collect(),
        };
        let slope = dot(&g, &step);
        let step = if slope < 0.0 { step } else { g.iter().map(|x| -x).collect() };
        let slope = dot(&g, &step);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi + t * si).collect();
            let ft = obj.value(&trial);
            if ft < f && ft <= f + ARMIJO * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, ft)) => {
                w = trial;
                f = ft;
                g = obj.gradient(&w);
            }
            None => break,
        }
    }
    for (wi, &c) in w.iter_mut().zip(&standardizer.constant) {
        if c {
            *wi = 0.0;
        }
    }
    let grad_norm_inf = inf_norm(&g);

    let raw: Vec<f64> = pairs.features.iter().map(|r| dot(&w, &standardizer.apply(r))).collect();
    let score_min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let score_max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let correct = pairs.ordered.iter().filter(|&&(a, b)| raw[a] > raw[b]).count();
    let ordering_accuracy = if pairs.ordered.is_empty() { 1.0 } else { correct as f64 / pairs.ordered.len() as f64 };

    let report = TrainReport {
        iterations,
        objective: f,
        grad_norm_inf,
        converged: grad_norm_inf <= hyper.tol,
        ordered_pairs: pairs.ordered.len(),
        similar_pairs: pairs.similar.len(),
        ordering_accuracy,
        degenerate: score_max - score_min < DEGENERATE_SPREAD,
    };
    if !report.converged {
        log::warn!("ranker did not converge: |grad|_inf = {grad_norm_inf:e} after {iterations} iterations");
    }
    Ok(TrainOutcome { weights: w, standardizer, score_min, score_max, fingerprint: fingerprint(pairs, hyper), report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_d() -> PairSet {
        PairSet {
            ordered: vec![(2, 0), (2, 1), (3, 0), (3, 1)],
            similar: vec![],
            features: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
        }
    }

    /// Independent 1-D oracle: dense grid over w ∈ [0, 5] then golden-section
    /// refinement around the best grid point.
    fn grid_oracle_1d(diffs: &[f64], c: f64) -> (f64, f64) {
        let obj = |w: f64| 0.5 * w * w + c * diffs.iter().map(|d| (1.0 - w * d).max(0.0).powi(2)).sum::<f64>();
        let steps = 500_000;
        let (mut best_w, mut best_f) = (0.0, obj(0.0));
        for i in 0..=steps {
            let w = 5.0 * i as f64 / steps as f64;
            let f = obj(w);
            if f < best_f {
                best_f = f;
                best_w = w;
            }
        }
        let (mut a, mut b) = (best_w - 1e-5, best_w + 1e-5);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if obj(x1) < obj(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let w = 0.5 * (a + b);
        (w, obj(w))
    }

    #[test]
    fn one_d_matches_grid_search() {
        let pairs = one_d();
        let out = train(&pairs, &Hyper { c_ordered: 1.0, ..Hyper::default() }).unwrap();
        // standardized differences computed independently: population std of {0,1,2,3}
        let s = (1.25f64).sqrt();
        let diffs = [2.0 / s, 1.0 / s, 3.0 / s, 2.0 / s];
        let (w_star, f_star) = grid_oracle_1d(&diffs, 1.0);
        assert!((out.weights[0] - w_star).abs() < 1e-4, "{} vs {w_star}", out.weights[0]);
        assert!((out.report.objective - f_star).abs() <= 1e-6 * f_star.abs().max(1.0));
        assert!(out.report.converged);
        assert_eq!(out.report.ordering_accuracy, 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = rng.gen_range(1..6);
            let rows = |rng: &mut ChaCha8Rng, n| -> Vec<Vec<f64>> {
                (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
            };
            let obj = Objective::new(rows(&mut rng, 7), rows(&mut rng, 4), d, 0.7, 0.3);
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = obj.gradient(&w);
            let eps = 1e-5;
            for k in 0..d {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[k] += eps;
                wm[k] -= eps;
                let fd = (obj.value(&wp) - obj.value(&wm)) / (2.0 * eps);
                let scale = g[k].abs().max(1.0);
                assert!((fd - g[k]).abs() / scale < 1e-4, "dim {k}: fd {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn heavy_similarity_collapses_scores() {
        let mut pairs = one_d();
        pairs.ordered = vec![(3, 0)];
        pairs.similar = vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)];
        let out = train(&pairs, &Hyper { c_similar: 1e13, ..Hyper::default() }).unwrap();
        assert!(out.weights[0].abs() < 1e-10);
        let model = out.into_model("Angry", Level::Word);
        for r in &pairs.features {
            assert_eq!(model.score(r).unwrap(), 0.5);
        }
    }

    #[test]
    fn constant_dims_are_pinned() {
        let pairs = PairSet {
            ordered: vec![(0, 1), (2, 3)],
            similar: vec![],
            features: vec![vec![2.0, 7.0], vec![0.0, 7.0], vec![3.0, 7.0], vec![1.0, 7.0]],
        };
        let out = train(&pairs, &Hyper::default()).unwrap();
        assert_eq!(out.weights[1], 0.0);
        assert_eq!(out.standardizer.std[1], 1.0);
    }

    #[test]
    fn max_iter_flags_non_convergence() {
        let out = train(&one_d(), &Hyper { max_iter: 0, ..Hyper::default() }).unwrap();
        assert!(!out.report.converged);
        assert!(out.report.grad_norm_inf > 0.0);
    }

    #[test]
    fn bad_hyper() {
        assert!(train(&one_d(), &Hyper { c_ordered: 0.0, ..Hyper::default() }).is_err());
        assert!(train(&one_d(), &Hyper { c_similar: -1.0, ..Hyper::default() }).is_err());
    }
}
