//! Sample statistics and semi-parametric memory estimators.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::acvf::AcvfSequence;
use crate::error::{Error, Result};

/// Default bandwidth exponent for the pre-filter estimators, `N = ⌊T^0.65⌋`.
pub const DEFAULT_BANDWIDTH_EXPONENT: f64 = 0.65;
/// Search interval for the local Whittle minimisation.
pub const WHITTLE_BRACKET: (f64, f64) = (-0.49, 0.49);
const WHITTLE_GRID: usize = 97;

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn sample_mean(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

/// `T^{1/2-d} (ȳ - μ)`.
pub fn renormalized_mean(series: &[f64], d: f64, mu: f64) -> Result<f64> {
    let m = sample_mean(series)?;
    Ok((series.len() as f64).powf(0.5 - d) * (m - mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    /// `1/T` at every lag.
    Length,
    /// `1/(T - k)` at lag `k`.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    SampleMean,
    Zero,
}

fn centre(series: &[f64], center: Centering) -> Result<f64> {
    match center {
        Centering::SampleMean => sample_mean(series),
        Centering::Zero if series.is_empty() => Err(Error::EmptyInput),
        Centering::Zero => Ok(0.0),
    }
}

fn lagged_cross(series: &[f64], k: usize, c: f64) -> f64 {
    series[..series.len() - k]
        .iter()
        .zip(&series[k..])
        .map(|(a, b)| (a - c) * (b - c))
        .sum()
}

/// Sample autocovariance at lag `k`.
pub fn sample_acvf(series: &[f64], k: usize, divisor: Divisor, center: Centering) -> Result<f64> {
    let t = series.len();
    let c = centre(series, center)?;
    if k >= t {
        return Err(Error::Domain(format!("lag {k} out of range for length {t}")));
    }
    let den = match divisor {
        Divisor::Length => t,
        Divisor::Overlap => t - k,
    };
    Ok(lagged_cross(series, k, c) / den as f64)
}

/// Sample autocovariances for lags `0..=maxlag`.
pub fn sample_acvf_seq(series: &[f64], maxlag: usize, divisor: Divisor, center: Centering) -> Result<AcvfSequence> {
    let t = series.len();
    let c = centre(series, center)?;
    if maxlag >= t {
        return Err(Error::Domain(format!("lag {maxlag} out of range for length {t}")));
    }
    let values = (0..=maxlag)
        .map(|k| {
            let den = match divisor {
                Divisor::Length => t,
                Divisor::Overlap => t - k,
            };
            lagged_cross(series, k, c) / den as f64
        })
        .collect();
    match AcvfSequence::new(values) {
        Err(Error::Domain(_)) if series.iter().all(|&y| y == series[0]) => {
            Err(Error::DegenerateVariance("constant series"))
        }
        other => other,
    }
}

fn acf_with(series: &[f64], k: usize, c: f64) -> Result<f64> {
    let t = series.len();
    if k == 0 || k >= t {
        return Err(Error::Domain(format!("lag {k} out of range 1..{t}")));
    }
    let den: f64 = series.iter().map(|y| (y - c) * (y - c)).sum();
    if den == 0.0 {
        return Err(Error::DegenerateVariance("zero sum of squares"));
    }
    Ok(lagged_cross(series, k, c) / den)
}

/// Mean-corrected sample autocorrelation `ρ̂(k)`.
pub fn sample_acf(series: &[f64], k: usize) -> Result<f64> {
    acf_with(series, k, sample_mean(series)?)
}

/// Sample autocorrelation with the mean known to be zero, `ρ̂₀(k)`.
pub fn sample_acf_zero_mean(series: &[f64], k: usize) -> Result<f64> {
    acf_with(series, k, 0.0)
}

/// Periodogram on the Fourier frequencies `2πj/T`, `j = 1..⌊(T-1)/2⌋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    len: usize,
    frequencies: Vec<f64>,
    ordinates: Vec<f64>,
}

impl Periodogram {
    /// Wraps ordinates for a series of length `t`; used for synthetic spectra.
    pub fn from_ordinates(t: usize, ordinates: Vec<f64>) -> Result<Self> {
        let m = (t.saturating_sub(1)) / 2;
        if ordinates.len() != m {
            return Err(Error::Dimension(format!("{} ordinates for T = {t}, expected {m}", ordinates.len())));
        }
        if ordinates.iter().any(|&i| !(i >= 0.0)) {
            return Err(Error::Domain("periodogram ordinates must be non-negative".into()));
        }
        let frequencies = (1..=m).map(|j| fourier(j, t)).collect();
        Ok(Self { len: t, frequencies, ordinates })
    }

    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    /// CSV with columns `frequency,ordinate`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency", "ordinate"])?;
        for (f, i) in self.frequencies.iter().zip(&self.ordinates) {
            w.write_record([format!("{f:.17e}"), format!("{i:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    fn check_bandwidth(&self, n: usize) -> Result<()> {
        if n < 2 || 2 * n >= self.len || n > self.ordinates.len() {
            return Err(Error::Bandwidth { bandwidth: n, frequencies: self.ordinates.len() });
        }
        Ok(())
    }
}

fn fourier(j: usize, t: usize) -> f64 {
    2.0 * PI * j as f64 / t as f64
}

/// `I(λ_j) = |Σ_t y(t) e^{-iλ_j t}|² / (2πT)`.
pub fn periodogram(series: &[f64]) -> Result<Periodogram> {
    let t = series.len();
    if t < 4 {
        return Err(Error::Domain(format!("periodogram needs T >= 4, got {t}")));
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&y| Complex64::new(y, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(t).process(&mut buf);
    let m = (t - 1) / 2;
    let scale = 1.0 / (2.0 * PI * t as f64);
    let ordinates = buf[1..=m].iter().map(|c| c.norm_sqr() * scale).collect();
    let frequencies = (1..=m).map(|j| fourier(j, t)).collect();
    Ok(Periodogram { len: t, frequencies, ordinates })
}

/// `⌊T^0.65⌋`, the default pre-filter bandwidth.
pub fn default_bandwidth(t: usize) -> usize {
    bandwidth_for(t, DEFAULT_BANDWIDTH_EXPONENT)
}

pub fn bandwidth_for(t: usize, exponent: f64) -> usize {
    (t as f64).powf(exponent).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMethod {
    LocalWhittle,
    Gph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub d_hat: f64,
    pub method: MemoryMethod,
    pub bandwidth: usize,
    /// Additive adjustment applied by [`MemoryEstimate::adjusted`].
    pub offset: f64,
}

impl MemoryEstimate {
    pub fn with_offset(self, offset: f64) -> Self {
        Self { offset, ..self }
    }

    pub fn adjusted(&self) -> f64 {
        self.d_hat + self.offset
    }

    /// Adjusted estimate clamped to `(-0.5 + margin, 0.5 - margin)`; margins
    /// are capped at 0.5.
    pub fn clamped(&self, margin: f64) -> f64 {
        let m = margin.clamp(0.0, 0.5);
        self.adjusted().clamp(-0.5 + m, 0.5 - m)
    }
}

/// Local Whittle objective
/// `R(d) = ln(N⁻¹ Σ λ_j^{2d} I_j) - 2d N⁻¹ Σ ln λ_j`.
pub fn local_whittle_objective(pgram: &Periodogram, n: usize, d: f64) -> f64 {
    let lam = &pgram.frequencies[..n];
    let ord = &pgram.ordinates[..n];
    let nf = n as f64;
    let mean_log: f64 = lam.iter().map(|l| l.ln()).sum::<f64>() / nf;
    let weighted: f64 = lam.iter().zip(ord).map(|(l, i)| (2.0 * d * l.ln()).exp() * i).sum::<f64>() / nf;
    weighted.ln() - 2.0 * d * mean_log
}

/// Local Whittle estimate of `d` from the lowest `n` ordinates, minimised over
/// [`WHITTLE_BRACKET`] by a 97-point grid followed by golden-section search.
pub fn local_whittle(pgram: &Periodogram, n: usize) -> Result<MemoryEstimate> {
    pgram.check_bandwidth(n)?;
    if pgram.ordinates[..n].iter().all(|&i| i == 0.0) {
        return Err(Error::ZeroOrdinate(1));
    }
    let f = |d: f64| local_whittle_objective(pgram, n, d);
    let (lo, hi) = WHITTLE_BRACKET;
    let step = (hi - lo) / (WHITTLE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..WHITTLE_GRID).map(|i| lo + step * i as f64).collect();
    let (best, _) = grid
        .iter()
        .map(|&d| f(d))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(WHITTLE_GRID - 1)];
    let d_gs = golden_section(f, a, b, 1e-10);
    let d_hat = if f(d_gs) <= f(grid[best]) { d_gs } else { grid[best] };
    Ok(MemoryEstimate { d_hat, method: MemoryMethod::LocalWhittle, bandwidth: n, offset: 0.0 })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Log-periodogram regression of `ln I_j` on `-2 ln(2 sin(λ_j/2))`.
pub fn gph(pgram: &Periodogram, n: usize) -> Result<MemoryEstimate> {
    pgram.check_bandwidth(n)?;
    if let Some(j) = pgram.ordinates[..n].iter().position(|&i| i <= 0.0) {
        return Err(Error::ZeroOrdinate(j + 1));
    }
    let x: Vec<f64> = pgram.frequencies[..n].iter().map(|l| -2.0 * (2.0 * (l / 2.0).sin()).ln()).collect();
    let y: Vec<f64> = pgram.ordinates[..n].iter().map(|i| i.ln()).collect();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(MemoryEstimate { d_hat: sxy / sxx, method: MemoryMethod::Gph, bandwidth: n, offset: 0.0 })
}

/// Runs the chosen estimator with bandwidth `⌊T^exponent⌋`.
pub fn estimate_memory(series: &[f64], method: MemoryMethod, exponent: f64) -> Result<MemoryEstimate> {
    let pgram = periodogram(series)?;
    let n = bandwidth_for(series.len(), exponent);
    match method {
        MemoryMethod::LocalWhittle => local_whittle(&pgram, n),
        MemoryMethod::Gph => gph(&pgram, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acvf::fn_acvf;
    use crate::levinson::GaussianSimulator;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    #[test]
    fn means() {
        assert_eq!(sample_mean(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!(matches!(sample_mean(&[]), Err(Error::EmptyInput)));
        let y = [0.5, 1.5, -0.3, 2.2];
        let rm = renormalized_mean(&y, 0.0, 0.0).unwrap();
        assert!((rm - 2.0 * sample_mean(&y).unwrap()).abs() < 1e-15);
        assert_eq!(renormalized_mean(&[2.0, 2.0], 0.3, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn autocovariance_modes() {
        let c = [3.0; 10];
        for k in 0..10 {
            assert_eq!(sample_acvf(&c, k, Divisor::Length, Centering::SampleMean).unwrap(), 0.0);
        }
        let y = [0.3, -1.0, 2.0, 0.7, -0.4, 1.1];
        for k in 0..6 {
            let a = sample_acvf(&y, k, Divisor::Length, Centering::SampleMean).unwrap();
            let b = sample_acvf(&y, k, Divisor::Overlap, Centering::SampleMean).unwrap();
            assert!((a - b * (6 - k) as f64 / 6.0).abs() < 1e-15);
        }
        let alt = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(sample_acvf(&alt, 1, Divisor::Length, Centering::Zero).unwrap(), -0.75);
        assert!(sample_acvf(&alt, 4, Divisor::Length, Centering::Zero).is_err());
    }

    #[test]
    fn autocorrelations() {
        let alt: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((sample_acf_zero_mean(&alt, 1).unwrap() + 0.99).abs() < 1e-15);
        assert!(matches!(sample_acf(&[2.0; 5], 1), Err(Error::DegenerateVariance(_))));
        assert!(sample_acf(&alt, 0).is_err());
    }

    proptest! {
        #[test]
        fn acf_bounded_and_invariant(
            y in prop::collection::vec(-5.0f64..5.0, 8..60),
            a in prop_oneof![-4.0f64..-0.1, 0.1f64..4.0],
            b in -3.0f64..3.0,
        ) {
            let spread = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let s: Vec<f64> = y.iter().map(|v| a * v).collect();
            for k in 1..y.len().min(6) {
                let r = sample_acf(&y, k).unwrap();
                prop_assert!(r.abs() <= 1.0 + 1e-12);
                prop_assert!((r - sample_acf(&z, k).unwrap()).abs() < 1e-9);
                let r0 = sample_acf_zero_mean(&y, k).unwrap();
                prop_assert!((r0 - sample_acf_zero_mean(&s, k).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn acf_negative_bias_under_long_memory() {
        let t = 500;
        let g = fn_acvf(0.2, 1.0, t - 1).unwrap();
        let sim = GaussianSimulator::new(&g, t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let est: Vec<f64> = (0..1000).map(|_| sample_acf(&sim.sample(&mut rng), 1).unwrap()).collect();
        assert!(median(est) < 0.25);
    }

    fn direct_dft_sq(y: &[f64], j: usize) -> f64 {
        let t = y.len();
        let (mut re, mut im) = (0.0, 0.0);
        for (s, v) in y.iter().enumerate() {
            let arg = fourier(j, t) * (s + 1) as f64;
            re += v * arg.cos();
            im -= v * arg.sin();
        }
        re * re + im * im
    }

    #[test]
    fn periodogram_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..37).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let p = periodogram(&y).unwrap();
        assert_eq!(p.ordinates().len(), 18);
        for (j, i) in p.ordinates().iter().enumerate() {
            let oracle = direct_dft_sq(&y, j + 1) / (2.0 * PI * 37.0);
            assert!((i - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn periodogram_of_constant_is_zero() {
        let p = periodogram(&[4.2; 64]).unwrap();
        assert!(p.ordinates().iter().all(|&i| i < 1e-20));
        assert!(periodogram(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for t in [64usize, 65] {
            let y: Vec<f64> = (0..t).map(|_| rand::Rng::random::<f64>(&mut rng) * 3.0).collect();
            let p = periodogram(&y).unwrap();
            let mut total = 2.0 * p.ordinates().iter().sum::<f64>();
            if t % 2 == 0 {
                total += direct_dft_sq(&y, t / 2) / (2.0 * PI * t as f64);
            }
            let lhs = 2.0 * PI / t as f64 * total;
            let var = sample_acvf(&y, 0, Divisor::Length, Centering::SampleMean).unwrap();
            assert!((lhs - var).abs() < 1e-12, "T={t}: {lhs} vs {var}");
        }
    }

    #[test]
    fn cosine_peak() {
        let t = 64;
        let y: Vec<f64> = (1..=t).map(|s| (fourier(5, t) * s as f64).cos()).collect();
        let p = periodogram(&y).unwrap();
        let peak = p.ordinates()[4];
        for (j, &i) in p.ordinates().iter().enumerate() {
            if j != 4 {
                assert!(peak >= 10.0 * i);
            }
        }
    }

    fn synthetic(t: usize, f: impl Fn(f64) -> f64) -> Periodogram {
        let m = (t - 1) / 2;
        Periodogram::from_ordinates(t, (1..=m).map(|j| f(fourier(j, t))).collect()).unwrap()
    }

    #[test]
    fn local_whittle_synthetic() {
        let flat = synthetic(500, |_| 2.5);
        let est = local_whittle(&flat, 56).unwrap();
        assert!(est.d_hat.abs() < 1e-6);
        // grid oracle: R is minimised at 0 on the grid as well
        let grid_min = (0..97)
            .map(|i| -0.49 + 0.98 * i as f64 / 96.0)
            .min_by(|a, b| local_whittle_objective(&flat, 56, *a).total_cmp(&local_whittle_objective(&flat, 56, *b)))
            .unwrap();
        assert!(grid_min.abs() < 1e-12);

        let power = synthetic(500, |l| l.powf(-0.6));
        let est = local_whittle(&power, 56).unwrap();
        assert!((est.d_hat - 0.3).abs() < 0.005);
        let at = local_whittle_objective(&power, 56, est.d_hat);
        assert!(at <= local_whittle_objective(&power, 56, 0.3 - 1e-3));
        assert!(at <= local_whittle_objective(&power, 56, 0.3 + 1e-3));
    }

    #[test]
    fn local_whittle_errors() {
        let flat = synthetic(100, |_| 1.0);
        assert!(matches!(local_whittle(&flat, 1), Err(Error::Bandwidth { .. })));
        assert!(matches!(local_whittle(&flat, 50), Err(Error::Bandwidth { .. })));
        let zero = synthetic(100, |_| 0.0);
        assert!(matches!(local_whittle(&zero, 10), Err(Error::ZeroOrdinate(_))));
    }

    #[test]
    fn gph_synthetic() {
        let p = synthetic(400, |l| (2.0 * (l / 2.0).sin()).powf(-0.4));
        assert!((gph(&p, 40).unwrap().d_hat - 0.2).abs() < 1e-12);
        let flat = synthetic(400, |_| 3.0);
        assert!(gph(&flat, 40).unwrap().d_hat.abs() < 1e-12);
        let mut ords = vec![1.0; 199];
        ords[3] = 0.0;
        let p = Periodogram::from_ordinates(400, ords).unwrap();
        assert!(matches!(gph(&p, 10), Err(Error::ZeroOrdinate(4))));
    }

    #[test]
    fn estimators_on_fractional_noise() {
        let t = 500;
        let n = default_bandwidth(t);
        assert_eq!(n, 56);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);

        let sim = GaussianSimulator::new(&fn_acvf(0.4, 1.0, t - 1).unwrap(), t).unwrap();
        let lw: Vec<f64> = (0..1000)
            .map(|_| local_whittle(&periodogram(&sim.sample(&mut rng)).unwrap(), n).unwrap().d_hat)
            .collect();
        let m = median(lw);
        assert!((0.3..=0.5).contains(&m), "local Whittle median {m}");

        let sim = GaussianSimulator::new(&fn_acvf(0.2, 1.0, t - 1).unwrap(), t).unwrap();
        let g: Vec<f64> =
            (0..1000).map(|_| gph(&periodogram(&sim.sample(&mut rng)).unwrap(), n).unwrap().d_hat).collect();
        let m = median(g);
        assert!((m - 0.2).abs() < 0.1, "GPH median {m}");
    }

    #[test]
    fn clamping() {
        let e = MemoryEstimate { d_hat: 0.52, method: MemoryMethod::LocalWhittle, bandwidth: 10, offset: 0.0 };
        assert_eq!(e.clamped(1e-3), 0.499);
        assert_eq!(e.with_offset(-1.2).clamped(1e-3), -0.499);
        assert!((e.with_offset(-0.1).clamped(1e-3) - 0.42).abs() < 1e-15);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0).unwrap(), 4.0);
        assert!((quantile_sorted(&v, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&v, 0.25).unwrap() - 1.75).abs() < 1e-15);
        assert!(quantile_sorted(&[], 0.5).is_err());
    }
}
