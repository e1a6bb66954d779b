use serde::{Deserialize, Serialize};

use super::{EvalError, ProsodyStats};
use crate::audio::Waveform;
use crate::features::{Analyzer, Lld, LldSet};

/// 10 / ln 10: converts natural-log cepstral distance to dB.
pub const MCD_SCALE: f64 = 10.0 / std::f64::consts::LN_10;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mel-cepstral distortion of one frame pair, in dB.
pub fn mcd_frame(a: &[f64], b: &[f64]) -> f64 {
    MCD_SCALE * (2.0 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
}

fn check(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(), EvalError> {
    if a.is_empty() {
        return Err(EvalError::Empty("reference sequence"));
    }
    if b.is_empty() {
        return Err(EvalError::Empty("test sequence"));
    }
    let d = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|f| f.len() != d) {
        return Err(EvalError::Dimension(d, bad.len()));
    }
    Ok(())
}

/// Minimum-cost monotone alignment with steps (1,0), (0,1), (1,1) and
/// Euclidean local cost. On equal cumulative cost the diagonal predecessor
/// wins, then (i-1, j), then (i, j-1).
pub fn dtw_align(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<(usize, usize)>, EvalError> {
    check(a, b)?;
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let c = euclid(&a[i], &b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
                let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[at(i, j)] = c + best;
        }
    }
    let (mut i, mut j) = (n - 1, m - 1);
    let mut path = vec![(i, j)];
    while (i, j) != (0, 0) {
        let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
        let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
        let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(path)
}

/// Summed Euclidean cost along a path.
pub fn dtw_cost(a: &[Vec<f64>], b: &[Vec<f64>], path: &[(usize, usize)]) -> f64 {
    path.iter().map(|&(i, j)| euclid(&a[i], &b[j])).sum()
}

/// RMS deviation of a path from the diagonal, in frames.
pub fn frame_disturbance(path: &[(usize, usize)]) -> f64 {
    if path.is_empty() {
        return 0.0;
    }
    let s: f64 = path.iter().map(|&(i, j)| (i as f64 - j as f64).powi(2)).sum();
    (s / path.len() as f64).sqrt()
}

/// Mean MCD over the DTW path, or over the first `min(len)` frame pairs
/// when `use_dtw` is false.
pub fn mcd(reference: &[Vec<f64>], test: &[Vec<f64>], use_dtw: bool) -> Result<f64, EvalError> {
    check(reference, test)?;
    let pairs: Vec<(usize, usize)> = if use_dtw {
        dtw_align(reference, test)?
    } else {
        (0..reference.len().min(test.len())).map(|i| (i, i)).collect()
    };
    Ok(pairs.iter().map(|&(i, j)| mcd_frame(&reference[i], &test[j])).sum::<f64>() / pairs.len() as f64)
}

/// Pitch and energy RMSE along a cepstral DTW path. Pitch is `None` when no
/// aligned pair is voiced on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub pitch_rmse_hz: Option<f64>,
    pub energy_rmse_db: f64,
}

fn cepstra(set: &LldSet) -> Vec<Vec<f64>> {
    (0..set.frame_count()).map(|i| (1..=13).map(|k| set.track(Lld::Mfcc(k)).values[i]).collect()).collect()
}

fn distortion_from(r: &LldSet, t: &LldSet, path: &[(usize, usize)]) -> Distortion {
    let (re, te) = (&r.track(Lld::EnergyDb).values, &t.track(Lld::EnergyDb).values);
    let energy = path.iter().map(|&(i, j)| (re[i] - te[j]).powi(2)).sum::<f64>() / path.len() as f64;
    let (rf, tf) = (r.track(Lld::LogF0), t.track(Lld::LogF0));
    let voiced: Vec<f64> = path
        .iter()
        .filter(|&&(i, j)| rf.voiced_mask[i] && tf.voiced_mask[j])
        .map(|&(i, j)| (rf.values[i].exp() - tf.values[j].exp()).powi(2))
        .collect();
    Distortion {
        pitch_rmse_hz: (!voiced.is_empty()).then(|| (voiced.iter().sum::<f64>() / voiced.len() as f64).sqrt()),
        energy_rmse_db: energy.sqrt(),
    }
}

pub fn pitch_energy_distortion(analyzer: &Analyzer, reference: &Waveform, test: &Waveform) -> Result<Distortion, EvalError> {
    let r = analyzer.extract_llds_whole(reference)?;
    let t = analyzer.extract_llds_whole(test)?;
    let path = dtw_align(&cepstra(&r), &cepstra(&t))?;
    Ok(distortion_from(&r, &t, &path))
}

/// Everything `eval metrics` reports for one reference/test pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mcd_db: f64,
    pub mcd_dtw_db: f64,
    pub frame_disturbance: f64,
    pub pitch_rmse_hz: Option<f64>,
    pub energy_rmse_db: f64,
    pub reference_frames: usize,
    pub test_frames: usize,
    pub reference: ProsodyStats,
    pub test: ProsodyStats,
}

pub fn evaluate_pair(analyzer: &Analyzer, reference: &Waveform, test: &Waveform) -> Result<MetricsReport, EvalError> {
    let r = analyzer.extract_llds_whole(reference)?;
    let t = analyzer.extract_llds_whole(test)?;
    let (rc, tc) = (cepstra(&r), cepstra(&t));
    let path = dtw_align(&rc, &tc)?;
    let d = distortion_from(&r, &t, &path);
    Ok(MetricsReport {
        mcd_db: mcd(&rc, &tc, false)?,
        mcd_dtw_db: path.iter().map(|&(i, j)| mcd_frame(&rc[i], &tc[j])).sum::<f64>() / path.len() as f64,
        frame_disturbance: frame_disturbance(&path),
        pitch_rmse_hz: d.pitch_rmse_hz,
        energy_rmse_db: d.energy_rmse_db,
        reference_frames: rc.len(),
        test_frames: tc.len(),
        reference: ProsodyStats::from_llds(&r),
        test: ProsodyStats::from_llds(&t),
    })
}
