use super::{FeatureError, FeatureVector, Lld, LldSet, FEATURE_DIM};
use crate::stats::{mean, percentile_sorted, slope, stddev};

fn four(values: &[f64], out: &mut Vec<f64>) {
    if values.is_empty() {
        out.extend_from_slice(&[0.0; 4]);
        return;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    out.push(mean(values));
    out.push(stddev(values));
    out.push(percentile_sorted(&sorted, 0.2));
    out.push(percentile_sorted(&sorted, 0.8));
}

/// Mean length of runs where `mask == want`, in frames.
fn mean_run(mask: &[bool], want: bool) -> f64 {
    let mut runs = Vec::new();
    let mut cur = 0usize;
    for &m in mask {
        if m == want {
            cur += 1;
        } else if cur > 0 {
            runs.push(cur as f64);
            cur = 0;
        }
    }
    if cur > 0 {
        runs.push(cur as f64);
    }
    mean(&runs)
}

fn count_peaks(xs: &[f64]) -> usize {
    if xs.len() < 3 {
        return 0;
    }
    xs.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

/// Summarises an [`LldSet`] into the 88-dim vector.
///
/// LogF0 functionals, the F0 slope and the F0 delta use voiced frames only
/// and are 0 when none are voiced. Slopes are least-squares fits against
/// frame time (`index × hop`).
pub fn functionals(set: &LldSet) -> Result<FeatureVector, FeatureError> {
    let n = set.frame_count();
    if n == 0 {
        return Err(FeatureError::NoFrames);
    }
    let voiced = set.voiced();
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for kind in Lld::ALL {
        let track = set.track(kind);
        if kind == Lld::LogF0 {
            let v: Vec<f64> = track.values.iter().zip(voiced).filter(|(_, &m)| m).map(|(x, _)| *x).collect();
            four(&v, &mut out);
        } else {
            four(&track.values, &mut out);
        }
    }

    let times: Vec<f64> = (0..n).map(|i| i as f64 * set.hop_s).collect();
    let f0 = &set.track(Lld::LogF0).values;
    let energy = &set.track(Lld::EnergyDb).values;
    let n_voiced = voiced.iter().filter(|&&v| v).count();

    out.push(n_voiced as f64 / n as f64);
    out.push(mean_run(voiced, true) * set.hop_s);
    out.push(mean_run(voiced, false) * set.hop_s);
    out.push(if set.duration_s > 0.0 { count_peaks(energy) as f64 / set.duration_s } else { 0.0 });

    let (vt, vf): (Vec<f64>, Vec<f64>) =
        times.iter().zip(f0).zip(voiced).filter(|(_, &m)| m).map(|((t, f), _)| (*t, *f)).unzip();
    out.push(slope(&vt, &vf));
    out.push(slope(&times, energy));

    let f0_deltas: Vec<f64> = (1..n).filter(|&i| voiced[i] && voiced[i - 1]).map(|i| (f0[i] - f0[i - 1]).abs()).collect();
    out.push(mean(&f0_deltas));
    let e_deltas: Vec<f64> = energy.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    out.push(mean(&e_deltas));

    FeatureVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{LldTrack, LLD_COUNT, TEMPORAL_OFFSET};

    fn set_with(energy: Vec<f64>, voiced: Vec<bool>, hop: f64) -> LldSet {
        let n = energy.len();
        let tracks = Lld::ALL
            .iter()
            .map(|&kind| {
                let values = match kind {
                    Lld::EnergyDb => energy.clone(),
                    Lld::LogF0 => voiced.iter().map(|&v| if v { 5.0 } else { 0.0 }).collect(),
                    _ => vec![3.0; n],
                };
                LldTrack { kind, values, voiced_mask: voiced.clone() }
            })
            .collect();
        LldSet { tracks, hop_s: hop, duration_s: n as f64 * hop }
    }

    #[test]
    fn constant_track() {
        let fv = functionals(&set_with(vec![3.0; 10], vec![true; 10], 0.01)).unwrap();
        for l in 0..LLD_COUNT {
            if l == 0 {
                continue;
            }
            assert_eq!(&fv.as_slice()[l * 4..l * 4 + 4], &[3.0, 0.0, 3.0, 3.0]);
        }
        assert_eq!(fv.as_slice().len(), 88);
    }

    #[test]
    fn energy_ramp_slope() {
        // 0 → 10 dB over one second, 101 frames at 10 ms
        let energy: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let fv = functionals(&set_with(energy, vec![false; 101], 0.01)).unwrap();
        let slope = fv[TEMPORAL_OFFSET + 5];
        assert!((slope - 10.0).abs() <= 0.5, "{slope}");
    }

    #[test]
    fn unvoiced_segments_zero_pitch_dims() {
        let fv = functionals(&set_with(vec![-40.0, -30.0, -35.0], vec![false; 3], 0.01)).unwrap();
        assert_eq!(&fv.as_slice()[..4], &[0.0; 4]);
        assert_eq!(fv[TEMPORAL_OFFSET], 0.0);
        assert_eq!(fv[TEMPORAL_OFFSET + 4], 0.0);
        assert_eq!(fv[TEMPORAL_OFFSET + 6], 0.0);
        // one energy peak over 30 ms
        assert!((fv[TEMPORAL_OFFSET + 3] - 1.0 / 0.03).abs() < 1e-9);
    }

    #[test]
    fn runs_and_ratio() {
        let voiced = vec![true, true, false, true, false, false];
        let fv = functionals(&set_with(vec![0.0; 6], voiced, 0.01)).unwrap();
        assert!((fv[TEMPORAL_OFFSET] - 0.5).abs() < 1e-12);
        assert!((fv[TEMPORAL_OFFSET + 1] - 0.015).abs() < 1e-12);
        assert!((fv[TEMPORAL_OFFSET + 2] - 0.015).abs() < 1e-12);
    }

    #[test]
    fn energy_shift_covariance() {
        let base: Vec<f64> = (0..40).map(|i| ((i * 7919) % 23) as f64 - 50.0).collect();
        let a = functionals(&set_with(base.clone(), vec![true; 40], 0.01)).unwrap();
        let b = functionals(&set_with(base.iter().map(|e| e + 12.5).collect(), vec![true; 40], 0.01)).unwrap();
        let e = Lld::EnergyDb.index() * 4;
        assert!((b[e] - a[e] - 12.5).abs() < 1e-9);
        assert!((b[e + 1] - a[e + 1]).abs() < 1e-9);
        assert!((b[e + 2] - a[e + 2] - 12.5).abs() < 1e-9);
        assert!((b[e + 3] - a[e + 3] - 12.5).abs() < 1e-9);
    }

    #[test]
    fn empty_set_is_rejected() {
        let set = LldSet { tracks: vec![], hop_s: 0.01, duration_s: 0.0 };
        assert_eq!(functionals(&set).unwrap_err(), FeatureError::NoFrames);
    }
}
