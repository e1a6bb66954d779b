use std::borrow::Cow;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{
    functionals, FeatureConfig, FeatureError, FeatureVector, Lld, LldSet, LldTrack, ENERGY_EPS, ENERGY_FLOOR_DB,
    LLD_COUNT,
};
use crate::audio::{frame, resample, FrameGrid, TimeSpan, Waveform, ANALYSIS_RATE};

/// Among lags whose normalized correlation is within this fraction of the
/// best one, the shortest wins. Suppresses octave-down errors.
const PITCH_PEAK_RATIO: f64 = 0.9;

/// Half-width of the median smoother run over log F0 inside voiced runs.
/// Removes isolated octave jumps at frames that straddle an F0 change.
const PITCH_MEDIAN_RADIUS: usize = 2;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-style mel filters over `bins` FFT bins.
fn mel_filterbank(bands: usize, fft_size: usize, rate: f64, fmax: f64) -> Vec<Vec<(usize, f64)>> {
    let bins = fft_size / 2 + 1;
    let (mlo, mhi) = (hz_to_mel(0.0), hz_to_mel(fmax.min(rate / 2.0)));
    let edges: Vec<f64> = (0..bands + 2).map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (bands + 1) as f64)).collect();
    (0..bands)
        .map(|b| {
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .filter_map(|k| {
                    let f = k as f64 * rate / fft_size as f64;
                    let w = if f > l && f <= c {
                        (f - l) / (c - l)
                    } else if f > c && f < r {
                        (r - f) / (r - c)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II rows 1..=n_out (row 0 dropped).
fn dct_rows(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    let scale = (2.0 / n_in as f64).sqrt();
    (1..=n_out)
        .map(|k| {
            (0..n_in)
                .map(|n| scale * (std::f64::consts::PI * k as f64 * (n as f64 + 0.5) / n_in as f64).cos())
                .collect()
        })
        .collect()
}

/// Reusable feature extractor. Holds FFT plans, mel filters and the
/// analysis window; cheap to share across threads.
pub struct Analyzer {
    config: FeatureConfig,
    frame_len: usize,
    window: Vec<f64>,
    spectrum_fft: Arc<dyn Fft<f64>>,
    corr_size: usize,
    corr_fft: Arc<dyn Fft<f64>>,
    corr_ifft: Arc<dyn Fft<f64>>,
    mel: Vec<Vec<(usize, f64)>>,
    dct: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::new(FeatureConfig::default()).expect("default config is valid")
    }
}

/// Frame-wise measurements before functionals.
struct FrameMeasures {
    log_f0: f64,
    voiced: bool,
    energy_db: f64,
    zcr: f64,
    centroid: f64,
    rolloff: f64,
    voicing: f64,
    mfcc: [f64; 13],
    magnitude: Vec<f64>,
}

impl Analyzer {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        config.grid.validate(ANALYSIS_RATE)?;
        if !(config.f0_min_hz > 0.0 && config.f0_max_hz > config.f0_min_hz) {
            return Err(FeatureError::Config(format!("bad F0 range {}–{}", config.f0_min_hz, config.f0_max_hz)));
        }
        if !(0.0..=1.0).contains(&config.voicing_threshold) {
            return Err(FeatureError::Config(format!("voicing threshold {}", config.voicing_threshold)));
        }
        if config.mel_bands < 14 {
            return Err(FeatureError::Config("need at least 14 mel bands for 13 cepstra".into()));
        }
        let frame_len = config.grid.frame_len(ANALYSIS_RATE);
        let fft_size = config.fft_size.max(frame_len).next_power_of_two();
        let corr_size = (2 * frame_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            frame_len,
            window: config.grid.window.coefficients(frame_len),
            spectrum_fft: planner.plan_fft_forward(fft_size),
            corr_size,
            corr_fft: planner.plan_fft_forward(corr_size),
            corr_ifft: planner.plan_fft_inverse(corr_size),
            mel: mel_filterbank(config.mel_bands, fft_size, ANALYSIS_RATE as f64, config.mel_fmax_hz),
            dct: dct_rows(config.mel_bands, 13),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    fn at_rate<'a>(w: &'a Waveform) -> Cow<'a, Waveform> {
        if w.sample_rate() == ANALYSIS_RATE {
            Cow::Borrowed(w)
        } else {
            Cow::Owned(resample(w, ANALYSIS_RATE).expect("analysis rate is positive"))
        }
    }

    /// Normalized cross-correlation pitch estimate on the real samples of a
    /// frame. Returns (best correlation, F0 in Hz if any candidate lag).
    fn pitch(&self, real: &[f64]) -> (f64, Option<f64>) {
        let n = real.len();
        let sr = ANALYSIS_RATE as f64;
        let min_lag = (sr / self.config.f0_max_hz).floor().max(1.0) as usize;
        let max_lag = ((sr / self.config.f0_min_hz).ceil() as usize).min(2 * n / 3);
        if max_lag < min_lag + 2 {
            return (0.0, None);
        }
        let dc = real.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = real.iter().map(|v| v - dc).collect();
        let total: f64 = x.iter().map(|v| v * v).sum();
        if total <= ENERGY_EPS * n as f64 {
            return (0.0, None);
        }

        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.corr_size, Complex::new(0.0, 0.0));
        self.corr_fft.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.corr_ifft.process(&mut buf);
        let scale = 1.0 / self.corr_size as f64;

        // prefix sums of x² for the per-lag energies
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for v in &x {
            prefix.push(prefix.last().unwrap() + v * v);
        }
        let nccf: Vec<f64> = (0..=max_lag + 1)
            .map(|lag| {
                if lag >= n {
                    return 0.0;
                }
                let head = prefix[n - lag];
                let tail = prefix[n] - prefix[lag];
                let denom = (head * tail).sqrt();
                if denom <= ENERGY_EPS {
                    0.0
                } else {
                    (buf[lag].re * scale / denom).clamp(-1.0, 1.0)
                }
            })
            .collect();

        let best = nccf[min_lag..=max_lag].iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        if best <= 0.0 {
            return (0.0, None);
        }
        let threshold = PITCH_PEAK_RATIO * best;
        let peak = (min_lag..=max_lag).find(|&l| {
            nccf[l] >= threshold && nccf[l] >= nccf[l - 1] && nccf[l] >= nccf[l + 1]
        });
        let lag = match peak {
            Some(l) => l,
            None => (min_lag..=max_lag).max_by(|&a, &b| nccf[a].total_cmp(&nccf[b])).unwrap(),
        };
        let (a, b, c) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        (best, Some(sr / (lag as f64 + shift)))
    }

    fn measure(&self, grid: &FrameGrid, w: &Waveform, idx: usize) -> FrameMeasures {
        let real = grid.frame_view(w, idx);
        let n = real.len();

        let power = real.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let energy_db = (10.0 * (power + ENERGY_EPS).log10()).max(ENERGY_FLOOR_DB);
        let zcr = if n < 2 {
            0.0
        } else {
            real.windows(2).filter(|p| p[0] * p[1] < 0.0).count() as f64 / (n - 1) as f64
        };

        let raw = grid.frame_samples(w, idx);
        let fft_size = self.spectrum_fft.len();
        let mut spec: Vec<Complex<f64>> = raw.iter().zip(&self.window).map(|(x, h)| Complex::new(x * h, 0.0)).collect();
        spec.resize(fft_size, Complex::new(0.0, 0.0));
        self.spectrum_fft.process(&mut spec);
        let bins = fft_size / 2 + 1;
        let bin_hz = ANALYSIS_RATE as f64 / fft_size as f64;
        let magnitude: Vec<f64> = spec[..bins].iter().map(|c| c.norm()).collect();
        let pow: Vec<f64> = magnitude.iter().map(|m| m * m).collect();

        let mag_sum: f64 = magnitude.iter().sum();
        let centroid = if mag_sum > 0.0 {
            magnitude.iter().enumerate().map(|(k, m)| k as f64 * bin_hz * m).sum::<f64>() / mag_sum
        } else {
            0.0
        };
        let pow_sum: f64 = pow.iter().sum();
        let rolloff = if pow_sum > 0.0 {
            let target = 0.85 * pow_sum;
            let mut acc = 0.0;
            let mut k_roll = bins - 1;
            for (k, p) in pow.iter().enumerate() {
                acc += p;
                if acc >= target {
                    k_roll = k;
                    break;
                }
            }
            k_roll as f64 * bin_hz
        } else {
            0.0
        };

        let log_mel: Vec<f64> = self
            .mel
            .iter()
            .map(|band| (band.iter().map(|&(k, wt)| wt * pow[k]).sum::<f64>() + ENERGY_EPS).ln())
            .collect();
        let mut mfcc = [0.0; 13];
        for (c, row) in mfcc.iter_mut().zip(&self.dct) {
            *c = row.iter().zip(&log_mel).map(|(a, b)| a * b).sum();
        }

        let (voicing, f0) = self.pitch(real);
        let voiced = voicing >= self.config.voicing_threshold && f0.is_some();
        let log_f0 = if voiced { f0.unwrap().ln() } else { 0.0 };

        FrameMeasures { log_f0, voiced, energy_db, zcr, centroid, rolloff, voicing, mfcc, magnitude }
    }

    /// Frame-level descriptors of `segment`. Audio at other rates is
    /// resampled to the analysis rate first.
    pub fn extract_llds(&self, w: &Waveform, segment: TimeSpan) -> Result<LldSet, FeatureError> {
        let w = Self::at_rate(w);
        let grid = frame(&w, segment, &self.config.grid)?;
        debug_assert_eq!(grid.frame_len, self.frame_len);
        if grid.is_empty() {
            return Err(FeatureError::NoFrames);
        }
        let frames: Vec<FrameMeasures> = (0..grid.len()).map(|i| self.measure(&grid, &w, i)).collect();
        let n = frames.len();
        let voiced: Vec<bool> = frames.iter().map(|f| f.voiced).collect();
        let mut values: Vec<Vec<f64>> = (0..LLD_COUNT).map(|_| Vec::with_capacity(n)).collect();
        let mut prev_mag: Option<&Vec<f64>> = None;
        for f in &frames {
            let flux = match prev_mag {
                Some(p) => p.iter().zip(&f.magnitude).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
                None => 0.0,
            };
            prev_mag = Some(&f.magnitude);
            values[Lld::LogF0.index()].push(f.log_f0);
            values[Lld::EnergyDb.index()].push(f.energy_db);
            values[Lld::Zcr.index()].push(f.zcr);
            values[Lld::SpectralCentroidHz.index()].push(f.centroid);
            values[Lld::SpectralFlux.index()].push(flux);
            values[Lld::SpectralRolloff85Hz.index()].push(f.rolloff);
            values[Lld::VoicingProb.index()].push(f.voicing);
            for k in 0..13 {
                values[Lld::Mfcc(k as u8 + 1).index()].push(f.mfcc[k]);
            }
        }
        smooth_voiced_runs(&mut values[Lld::LogF0.index()], &voiced);
        let tracks = Lld::ALL
            .iter()
            .zip(values)
            .map(|(&kind, values)| LldTrack { kind, values, voiced_mask: voiced.clone() })
            .collect();
        Ok(LldSet { tracks, hop_s: grid.hop_s(), duration_s: segment.duration() })
    }

    /// LLDs followed by functionals.
    pub fn extract(&self, w: &Waveform, segment: TimeSpan) -> Result<FeatureVector, FeatureError> {
        functionals(&self.extract_llds(w, segment)?)
    }

    /// Whole-waveform LLDs.
    pub fn extract_llds_whole(&self, w: &Waveform) -> Result<LldSet, FeatureError> {
        self.extract_llds(w, TimeSpan::new(0.0, w.duration_s()))
    }

    /// Per-frame mel cepstra c1..c13 over the whole waveform.
    pub fn mel_cepstra(&self, w: &Waveform) -> Result<Vec<Vec<f64>>, FeatureError> {
        let set = self.extract_llds_whole(w)?;
        let n = set.frame_count();
        Ok((0..n).map(|i| (1..=13).map(|k| set.track(Lld::Mfcc(k)).values[i]).collect()).collect())
    }
}

/// Running median (window truncated at run edges) over each voiced run;
/// unvoiced frames are left alone.
fn smooth_voiced_runs(values: &mut [f64], voiced: &[bool]) {
    let src = values.to_vec();
    let n = src.len();
    let mut i = 0;
    while i < n {
        if !voiced[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && voiced[i] {
            i += 1;
        }
        for (j, out) in values.iter_mut().enumerate().take(i).skip(start) {
            let lo = j.saturating_sub(PITCH_MEDIAN_RADIUS).max(start);
            let hi = (j + PITCH_MEDIAN_RADIUS + 1).min(i);
            let mut win = src[lo..hi].to_vec();
            win.sort_by(f64::total_cmp);
            let m = win.len();
            *out = if m % 2 == 1 { win[m / 2] } else { 0.5 * (win[m / 2 - 1] + win[m / 2]) };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FEATURE_DIM, TEMPORAL_OFFSET};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(freq: f64, secs: f64, amp: f64) -> Waveform {
        let n = (16000.0 * secs) as usize;
        Waveform::new((0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / 16000.0).sin()).collect(), 16000).unwrap()
    }

    #[test]
    fn median_removes_isolated_octave_jump() {
        let mut v = vec![0.0, 5.0, 5.0, 4.3, 5.0, 5.0, 0.0, 3.0];
        let voiced = [false, true, true, true, true, true, false, true];
        smooth_voiced_runs(&mut v, &voiced);
        assert_eq!(v, vec![0.0, 5.0, 5.0, 5.0, 5.0, 5.0, 0.0, 3.0]);
    }

    #[test]
    fn sine_pitch() {
        let a = Analyzer::default();
        let set = a.extract_llds(&sine(220.0, 0.5, 0.5), TimeSpan::new(0.0, 0.5)).unwrap();
        assert!(set.voiced().iter().all(|&v| v));
        let mut f0 = set.voiced_f0_hz();
        f0.sort_by(f64::total_cmp);
        let median = f0[f0.len() / 2];
        assert!((215.0..=225.0).contains(&median), "median {median}");
    }

    #[test]
    fn pitch_range_edges() {
        let a = Analyzer::default();
        for f in [70.0, 120.0, 380.0] {
            let set = a.extract_llds(&sine(f, 0.5, 0.5), TimeSpan::new(0.0, 0.5)).unwrap();
            let f0 = set.voiced_f0_hz();
            assert!(f0.len() as f64 >= 0.9 * set.frame_count() as f64, "{f} Hz mostly voiced");
            let m = crate::stats::percentile(&f0, 0.5);
            assert!((m - f).abs() < 0.03 * f, "{f} Hz estimated {m}");
        }
    }

    #[test]
    fn silence_floors() {
        let a = Analyzer::default();
        let w = Waveform::new(vec![0.0; 8000], 16000).unwrap();
        let set = a.extract_llds(&w, TimeSpan::new(0.0, 0.5)).unwrap();
        assert!(set.track(Lld::EnergyDb).values.iter().all(|&e| e == ENERGY_FLOOR_DB));
        assert!(set.voiced().iter().all(|&v| !v));
        assert!(set.track(Lld::Zcr).values.iter().all(|&z| z == 0.0));
        let fv = functionals(&set).unwrap();
        assert!(fv.as_slice()[..4].iter().all(|&v| v == 0.0));
        assert_eq!(fv[TEMPORAL_OFFSET], 0.0);
    }

    #[test]
    fn white_noise_is_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = Waveform::new((0..16000).map(|_| rng.gen_range(-0.5..0.5)).collect(), 16000).unwrap();
        let a = Analyzer::default();
        let set = a.extract_llds(&w, TimeSpan::new(0.0, 1.0)).unwrap();
        let below = set
            .track(Lld::VoicingProb)
            .values
            .iter()
            .filter(|&&p| p < a.config().voicing_threshold)
            .count();
        assert!(below as f64 >= 0.9 * set.frame_count() as f64, "{below}/{}", set.frame_count());
    }

    #[test]
    fn resamples_other_rates() {
        let n = 24000;
        let w = Waveform::new((0..n).map(|i| 0.5 * (2.0 * PI * 200.0 * i as f64 / 48000.0).sin()).collect(), 48000)
            .unwrap();
        let set = Analyzer::default().extract_llds(&w, TimeSpan::new(0.0, 0.5)).unwrap();
        let m = crate::stats::percentile(&set.voiced_f0_hz(), 0.5);
        assert!((m - 200.0).abs() < 5.0);
    }

    #[test]
    fn sub_frame_segment() {
        let a = Analyzer::default();
        let w = sine(300.0, 0.2, 0.5);
        let fv = a.extract(&w, TimeSpan::new(0.1, 0.105)).unwrap();
        assert_eq!(fv.as_slice().len(), FEATURE_DIM);
        assert!(fv.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mfcc_ignores_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..4800).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let a = Analyzer::default();
        let c1 = a.mel_cepstra(&Waveform::new(noise.clone(), 16000).unwrap()).unwrap();
        let c2 = a.mel_cepstra(&Waveform::new(noise.iter().map(|x| 2.0 * x).collect(), 16000).unwrap()).unwrap();
        for (x, y) in c1.iter().zip(&c2) {
            for (a, b) in x.iter().zip(y) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
