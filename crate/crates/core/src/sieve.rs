//! Autoregressive sieve: AR(h) estimation by Yule–Walker, Burg or least
//! squares, AIC order selection, and standardized residuals for resampling.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levinson::{levinson_solve, LevinsonSolution};
use crate::stats::{sample_acvf_seq, Centering, Divisor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    YuleWalker,
    Burg,
    LeastSquares,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::YuleWalker => "yule_walker",
            FitMethod::Burg => "burg",
            FitMethod::LeastSquares => "least_squares",
        }
    }
}

/// Coefficients of a fitted AR(h) without residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ArEstimate {
    pub method: FitMethod,
    /// `φ̄_h(1..h)` in the prediction-error sign convention.
    pub phi: Vec<f64>,
    /// The estimator's own innovation variance.
    pub sigma2: f64,
    /// Reflection coefficients, for the Levinson-type estimators.
    pub pacf: Option<Vec<f64>>,
}

impl ArEstimate {
    pub fn order(&self) -> usize {
        self.phi.len()
    }
}

/// A fitted sieve together with its standardized residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveFit {
    pub method: FitMethod,
    pub h: usize,
    pub phi_bar: Vec<f64>,
    pub sigma2_bar: f64,
    pub residuals_std: Vec<f64>,
    pub source_len: usize,
    /// Sample mean removed before fitting.
    pub mean: f64,
}

impl SieveFit {
    /// One-line CSV: `method,h,sigma2,phi_1,...,phi_h`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let mut header = vec!["method".to_string(), "h".into(), "sigma2".into()];
        header.extend((1..=self.h).map(|j| format!("phi_{j}")));
        w.write_record(&header)?;
        let mut row = vec![self.method.name().to_string(), self.h.to_string(), format!("{:.17e}", self.sigma2_bar)];
        row.extend(self.phi_bar.iter().map(|p| format!("{p:.17e}")));
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }

    /// JSON summary without the residual vector.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "h": self.h,
            "coefficients": self.phi_bar,
            "sigma2": self.sigma2_bar,
            "mean": self.mean,
            "source_len": self.source_len,
        })
    }
}

fn centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let y: Vec<f64> = series.iter().map(|v| v - mean).collect();
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateVariance("constant series"));
    }
    Ok((y, mean))
}

fn check_order(t: usize, h: usize) -> Result<()> {
    if t < 2 || h >= t {
        return Err(Error::Domain(format!("order {h} needs more than {h} observations (T = {t})")));
    }
    Ok(())
}

/// Estimates an AR(h) on the mean-centred series.
pub fn estimate_ar(series: &[f64], h: usize, method: FitMethod) -> Result<ArEstimate> {
    check_order(series.len(), h)?;
    let (y, _) = centered(series)?;
    match method {
        FitMethod::YuleWalker => {
            let s = yule_walker(&y, h)?;
            Ok(ArEstimate { method, phi: s.phi, sigma2: s.sigma2, pacf: Some(s.pacf) })
        }
        FitMethod::Burg => {
            let b = burg(&y, h)?;
            Ok(ArEstimate { method, phi: b.phi, sigma2: *b.variances.last().unwrap(), pacf: Some(b.pacf) })
        }
        FitMethod::LeastSquares => {
            let (phi, sigma2) = least_squares(&y, h)?;
            Ok(ArEstimate { method, phi, sigma2, pacf: None })
        }
    }
}

fn yule_walker(y: &[f64], h: usize) -> Result<LevinsonSolution> {
    let acvf = sample_acvf_seq(y, h, Divisor::Length, Centering::SampleMean)?;
    levinson_solve(&acvf, h)
}

struct BurgFit {
    phi: Vec<f64>,
    pacf: Vec<f64>,
    variances: Vec<f64>,
}

/// Burg's forward–backward recursion on centred data.
fn burg(y: &[f64], h: usize) -> Result<BurgFit> {
    let t = y.len();
    let mut f = y.to_vec();
    let mut b = y.to_vec();
    let mut pi: Vec<f64> = Vec::with_capacity(h);
    let mut pacf = Vec::with_capacity(h);
    let mut p = y.iter().map(|v| v * v).sum::<f64>() / t as f64;
    let mut variances = vec![p];
    for m in 1..=h {
        let (mut num, mut den) = (0.0, 0.0);
        for s in m..t {
            num += f[s] * b[s - 1];
            den += f[s] * f[s] + b[s - 1] * b[s - 1];
        }
        if den <= 0.0 {
            return Err(Error::DegenerateVariance("vanishing Burg prediction errors"));
        }
        let kappa = 2.0 * num / den;
        let prev = pi.clone();
        for j in 0..m - 1 {
            pi[j] = prev[j] - kappa * prev[m - 2 - j];
        }
        pi.push(kappa);
        for s in (m..t).rev() {
            let (fs, bs) = (f[s], b[s - 1]);
            f[s] = fs - kappa * bs;
            b[s] = bs - kappa * fs;
        }
        p *= 1.0 - kappa * kappa;
        pacf.push(kappa);
        variances.push(p);
    }
    Ok(BurgFit { phi: pi.iter().map(|v| -v).collect(), pacf, variances })
}

/// Ordinary least squares over `t = h+1..T`; returns coefficients and the
/// residual mean square.
fn least_squares(y: &[f64], h: usize) -> Result<(Vec<f64>, f64)> {
    let t = y.len();
    if h == 0 {
        return Ok((Vec::new(), y.iter().map(|v| v * v).sum::<f64>() / t as f64));
    }
    let rows = t - h;
    let x = DMatrix::from_fn(rows, h, |r, j| y[h + r - j - 1]);
    let target = DVector::from_iterator(rows, y[h..].iter().copied());
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &target;
    let chol = xtx.cholesky().ok_or(Error::SingularDesign(h))?;
    let beta = chol.solve(&xty);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign(h));
    }
    let resid = &target - &x * &beta;
    let rss = resid.norm_squared();
    Ok((beta.iter().map(|v| -v).collect(), rss / rows as f64))
}

/// Sieve residuals `ε̄_h(t) = Σ_j φ̄_h(j) y(t-j)` with circular initial values
/// `y(1-j) = y(T-j+1)`.
pub fn circular_residuals(y: &[f64], phi: &[f64]) -> Vec<f64> {
    let t = y.len();
    (0..t)
        .map(|s| {
            let mut e = y[s];
            for (j, p) in phi.iter().enumerate() {
                let lag = j + 1;
                let idx = if lag <= s { s - lag } else { t + s - lag };
                e += p * y[idx];
            }
            e
        })
        .collect()
}

/// Centres and scales to sample mean 0 and variance (divisor `T`) 1.
pub fn standardize(e: &[f64]) -> Result<Vec<f64>> {
    let n = e.len() as f64;
    let m = e.iter().sum::<f64>() / n;
    let c: Vec<f64> = e.iter().map(|v| v - m).collect();
    let s = (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateVariance("residuals have no spread"));
    }
    let mut z: Vec<f64> = c.iter().map(|v| v / s).collect();
    // one corrective pass removes the rounding left by the first
    let m2 = z.iter().sum::<f64>() / n;
    z.iter_mut().for_each(|v| *v -= m2);
    let s2 = (z.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    z.iter_mut().for_each(|v| *v /= s2);
    Ok(z)
}

/// Fits an AR(h) sieve and builds the standardized residuals.
pub fn fit(series: &[f64], h: usize, method: FitMethod) -> Result<SieveFit> {
    let est = estimate_ar(series, h, method)?;
    if !(est.sigma2 > 0.0) {
        return Err(Error::DegenerateVariance("zero innovation variance"));
    }
    let (y, mean) = centered(series)?;
    let residuals_std = standardize(&circular_residuals(&y, &est.phi))?;
    Ok(SieveFit {
        method,
        h,
        phi_bar: est.phi,
        sigma2_bar: est.sigma2,
        residuals_std,
        source_len: series.len(),
        mean,
    })
}

/// Result of the AIC search over `h = 0..=M_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub h_hat: usize,
    pub max_order: usize,
    pub aic_trace: Vec<f64>,
}

/// `M_T = ⌊(ln T)²⌋`.
pub fn max_order(t: usize) -> usize {
    (t as f64).ln().powi(2).floor() as usize
}

/// Native residual variances `σ̂²_0, ..., σ̂²_m` of the chosen estimator.
pub fn residual_variances(series: &[f64], m: usize, method: FitMethod) -> Result<Vec<f64>> {
    check_order(series.len(), m)?;
    let (y, _) = centered(series)?;
    match method {
        FitMethod::YuleWalker => Ok(yule_walker(&y, m)?.variances),
        FitMethod::Burg => Ok(burg(&y, m)?.variances),
        FitMethod::LeastSquares => (0..=m).map(|h| least_squares(&y, h).map(|(_, s)| s)).collect(),
    }
}

/// Chooses `h` minimising `ln σ̂²_h + 2h/T`, ties to the smaller order.
pub fn select_order_aic(series: &[f64], method: FitMethod) -> Result<OrderSelection> {
    let t = series.len();
    if t < 8 {
        return Err(Error::Domain(format!("AIC order selection needs T >= 8, got {t}")));
    }
    let m = max_order(t);
    let vars = residual_variances(series, m, method)?;
    let aic_trace: Vec<f64> =
        vars.iter().enumerate().map(|(h, v)| v.ln() + 2.0 * h as f64 / t as f64).collect();
    let mut h_hat = 0;
    for (h, a) in aic_trace.iter().enumerate() {
        if *a < aic_trace[h_hat] {
            h_hat = h;
        }
    }
    Ok(OrderSelection { h_hat, max_order: m, aic_trace })
}

/// `Σ_j |φ̄_h(j) - φ_h(j)|²`.
pub fn yw_coefficient_error(fit: &SieveFit, truth: &LevinsonSolution) -> Result<f64> {
    coefficient_error(&fit.phi_bar, &truth.phi)
}

pub fn coefficient_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::OrderMismatch { fit: estimate.len(), truth: truth.len() });
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acvf::{arfima_acvf, ArfimaSpec, AcvfSequence};
    use crate::levinson::GaussianSimulator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const METHODS: [FitMethod; 3] = [FitMethod::YuleWalker, FitMethod::Burg, FitMethod::LeastSquares];

    fn path(d: f64, phi: f64, t: usize, seed: u64) -> Vec<f64> {
        let g = arfima_acvf(&ArfimaSpec::new(d, phi, 1.0).unwrap(), t - 1).unwrap();
        GaussianSimulator::new(&g, t).unwrap().sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn order_zero_standardizes_the_series() {
        let y = path(0.2, 0.3, 50, 1);
        for m in METHODS {
            let f = fit(&y, 0, m).unwrap();
            assert!(f.phi_bar.is_empty());
            for (a, b) in f.residuals_std.iter().zip(standardize(&y).unwrap()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residuals_are_exactly_standardized() {
        let y = path(0.4, 0.6, 300, 2);
        for m in METHODS {
            let f = fit(&y, 7, m).unwrap();
            let n = f.residuals_std.len() as f64;
            let mean = f.residuals_std.iter().sum::<f64>() / n;
            let var = f.residuals_std.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
            assert!(mean.abs() < 1e-12, "{m:?}");
            assert!((var - 1.0).abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn yule_walker_on_population_ar1() {
        // the Levinson path behind Yule–Walker, fed population moments
        let phi: f64 = 0.6;
        let g = AcvfSequence::new((0..4).map(|k| phi.powi(k) / (1.0 - phi * phi)).collect()).unwrap();
        let s = levinson_solve(&g, 1).unwrap();
        assert_eq!(s.phi[0], -phi);
    }

    #[test]
    fn burg_on_alternating_series() {
        let y: Vec<f64> = (0..40).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = estimate_ar(&y, 1, FitMethod::Burg).unwrap();
        assert!((e.phi[0] - 1.0).abs() < 1e-15);
        assert!(e.sigma2.abs() < 1e-15);
        // a perfectly predictable series leaves nothing to resample
        assert!(matches!(fit(&y, 1, FitMethod::Burg), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(fit(&[1.5; 30], 2, FitMethod::YuleWalker), Err(Error::DegenerateVariance(_))));
        assert!(matches!(fit(&[1.5; 30], 0, FitMethod::Burg), Err(Error::DegenerateVariance(_))));
        assert!(matches!(fit(&[1.0, 2.0, 3.0], 3, FitMethod::Burg), Err(Error::Domain(_))));
        // a polynomial trend makes the lag matrix rank deficient
        let ramp: Vec<f64> = (0..12).map(|t| t as f64).collect();
        assert!(matches!(fit(&ramp, 3, FitMethod::LeastSquares), Err(Error::SingularDesign(3))));
    }

    #[test]
    fn stable_levinson_type_fits() {
        for seed in 0..20 {
            let y = path(0.45, 0.9, 120, seed);
            for m in [FitMethod::YuleWalker, FitMethod::Burg] {
                let e = estimate_ar(&y, 15, m).unwrap();
                assert!(e.pacf.unwrap().iter().all(|k| k.abs() < 1.0));
            }
        }
    }

    #[test]
    fn max_order_values() {
        assert_eq!(max_order(500), 38);
        assert_eq!(max_order(100), 21);
        assert_eq!(max_order(8), 4);
    }

    #[test]
    fn aic_ties_prefer_smaller_order() {
        let y = path(0.0, 0.0, 200, 3);
        let sel = select_order_aic(&y, FitMethod::Burg).unwrap();
        let best = sel.aic_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(sel.aic_trace.iter().position(|&a| a == best).unwrap(), sel.h_hat);
        assert_eq!(sel.aic_trace.len(), sel.max_order + 1);
        assert!(select_order_aic(&y[..7], FitMethod::Burg).is_err());
    }

    #[test]
    fn aic_on_white_noise_and_ar1() {
        let t = 500;
        let noise = GaussianSimulator::new(&arfima_acvf(&ArfimaSpec::new(0.0, 0.0, 1.0).unwrap(), t - 1).unwrap(), t).unwrap();
        let ar = GaussianSimulator::new(&arfima_acvf(&ArfimaSpec::new(0.0, 0.6, 1.0).unwrap(), t - 1).unwrap(), t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut orders: Vec<usize> = (0..200)
            .map(|_| select_order_aic(&noise.sample(&mut rng), FitMethod::Burg).unwrap().h_hat)
            .collect();
        let small = orders.iter().filter(|&&h| h <= 2).count();
        orders.sort();
        assert_eq!(orders[99], 0);
        assert!(small as f64 / 200.0 > 0.8);
        let hits = (0..200)
            .filter(|_| select_order_aic(&ar.sample(&mut rng), FitMethod::Burg).unwrap().h_hat >= 1)
            .count();
        assert!(hits as f64 / 200.0 > 0.99);
    }

    #[test]
    fn coefficient_error_arithmetic() {
        let truth = LevinsonSolution { phi: vec![0.3], sigma2: 1.0, pacf: vec![-0.3], variances: vec![1.0, 1.0] };
        let f = SieveFit {
            method: FitMethod::YuleWalker,
            h: 1,
            phi_bar: vec![0.5],
            sigma2_bar: 1.0,
            residuals_std: vec![],
            source_len: 0,
            mean: 0.0,
        };
        assert!((yw_coefficient_error(&f, &truth).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(coefficient_error(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.0);
        assert!(matches!(coefficient_error(&[0.1], &[0.1, 0.2]), Err(Error::OrderMismatch { fit: 1, truth: 2 })));
    }

    #[test]
    fn estimators_agree_on_long_ar2() {
        // AR(2) through the ARFIMA path is not available, so build the
        // autocovariances from MA(∞) weights.
        let (a1, a2) = (0.5, -0.3);
        let t = 10_000;
        let mut psi = vec![1.0, a1];
        for j in 2..400 {
            psi.push(a1 * psi[j - 1] + a2 * psi[j - 2]);
        }
        let mut g: Vec<f64> = (0..=2).map(|k| psi.iter().zip(&psi[k..]).map(|(x, y)| x * y).sum()).collect();
        for k in 3..t {
            let next = a1 * g[k - 1] + a2 * g[k - 2];
            g.push(next);
        }
        let g = AcvfSequence::new(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut gaps = Vec::new();
        // the streaming simulator would cost O(T²) memory otherwise
        for _ in 0..100 {
            let y = crate::levinson::simulate_gaussian(&g, t, &mut rng).unwrap();
            let ests: Vec<Vec<f64>> = METHODS.iter().map(|&m| estimate_ar(&y, 2, m).unwrap().phi).collect();
            let mut worst: f64 = 0.0;
            for i in 0..3 {
                for j in i + 1..3 {
                    for c in 0..2 {
                        worst = worst.max((ests[i][c] - ests[j][c]).abs());
                    }
                }
            }
            gaps.push(worst);
        }
        gaps.sort_by(|a, b| a.total_cmp(b));
        assert!(gaps[50] < 0.02, "median gap {}", gaps[50]);
    }

    #[test]
    fn csv_and_json() {
        let y = path(0.2, 0.3, 80, 4);
        let f = fit(&y, 2, FitMethod::Burg).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,h,sigma2,phi_1,phi_2\nburg,2,"));
        let j = f.summary_json();
        assert_eq!(j["h"], 2);
        assert_eq!(j["method"], "burg");
    }
}
