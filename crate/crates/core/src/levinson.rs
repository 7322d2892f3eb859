//! Durbin–Levinson recursion: Yule–Walker solutions of every order and exact
//! Gaussian simulation through the innovations form.
//!
//! Coefficients follow the prediction-error convention
//! `ε_h(t) = Σ_{j=0}^{h} φ_h(j) y(t-j)` with `φ_h(0) = 1`, so the one-step
//! predictor is `-Σ_{j≥1} φ_h(j) y(t-j)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::acvf::AcvfSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LevinsonSolution {
    /// `φ_h(1), ..., φ_h(h)`.
    pub phi: Vec<f64>,
    /// Prediction error variance `σ²_h`.
    pub sigma2: f64,
    /// Partial autocorrelations `κ_1, ..., κ_h`.
    pub pacf: Vec<f64>,
    /// Stage variances `σ²_0, ..., σ²_h`.
    pub variances: Vec<f64>,
}

impl LevinsonSolution {
    pub fn order(&self) -> usize {
        self.phi.len()
    }

    /// Largest absolute residual of the Yule–Walker system
    /// `Σ_j φ_h(j) γ(j - k) = δ_0(k) σ²_h`, `k = 0..h`.
    pub fn yule_walker_residual(&self, acvf: &AcvfSequence) -> f64 {
        let h = self.order();
        (0..=h)
            .map(|k| {
                let mut s = acvf.at(k as isize);
                for j in 1..=h {
                    s += self.phi[j - 1] * acvf.at(j as isize - k as isize);
                }
                if k == 0 {
                    s -= self.sigma2;
                }
                s.abs()
            })
            .fold(0.0, f64::max)
    }
}

/// One Durbin step: turns order `m-1` predictor coefficients `pi` into
/// order `m`, returning the reflection coefficient.
#[inline]
fn durbin_step(pi: &mut Vec<f64>, gamma: &[f64], v: f64) -> f64 {
    let m = pi.len() + 1;
    let mut num = gamma[m];
    for (j, p) in pi.iter().enumerate() {
        num -= p * gamma[m - 1 - j];
    }
    let kappa = num / v;
    let prev = pi.clone();
    for j in 0..m - 1 {
        pi[j] = prev[j] - kappa * prev[m - 2 - j];
    }
    pi.push(kappa);
    kappa
}

/// Solves the order-`h` Yule–Walker equations.
pub fn levinson_solve(acvf: &AcvfSequence, h: usize) -> Result<LevinsonSolution> {
    acvf.require(h)?;
    let gamma = acvf.values();
    let mut pi: Vec<f64> = Vec::with_capacity(h);
    let mut pacf = Vec::with_capacity(h);
    let mut variances = Vec::with_capacity(h + 1);
    let mut v = gamma[0];
    variances.push(v);
    for m in 1..=h {
        let kappa = durbin_step(&mut pi, gamma, v);
        v *= 1.0 - kappa * kappa;
        if !(kappa.abs() < 1.0) || !(v > 0.0) {
            return Err(Error::Singular { order: m, variance: v });
        }
        pacf.push(kappa);
        variances.push(v);
    }
    Ok(LevinsonSolution { phi: pi.iter().map(|p| -p).collect(), sigma2: v, pacf, variances })
}

/// Precomputed innovations form for repeated exact draws from
/// `N(0, Toeplitz(γ(0..T-1)))`.
///
/// Stores every predictor up to order `T - 1`, so memory is `O(T²)`. For a
/// single long path prefer [`simulate_gaussian`].
#[derive(Debug, Clone)]
pub struct GaussianSimulator {
    len: usize,
    // predictor of order m lives at offsets[m]..offsets[m]+m
    predictors: Vec<f64>,
    offsets: Vec<usize>,
    sds: Vec<f64>,
}

impl GaussianSimulator {
    pub fn new(acvf: &AcvfSequence, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::EmptyInput);
        }
        acvf.require(t - 1)?;
        let gamma = acvf.values();
        let mut predictors = Vec::with_capacity(t * (t - 1) / 2);
        let mut offsets = Vec::with_capacity(t);
        let mut sds = Vec::with_capacity(t);
        let mut pi: Vec<f64> = Vec::with_capacity(t);
        let mut v = gamma[0];
        offsets.push(0);
        sds.push(v.sqrt());
        for m in 1..t {
            let kappa = durbin_step(&mut pi, gamma, v);
            v *= 1.0 - kappa * kappa;
            if !(v > 0.0) {
                return Err(Error::Singular { order: m, variance: v });
            }
            offsets.push(predictors.len());
            predictors.extend_from_slice(&pi);
            sds.push(v.sqrt());
        }
        Ok(Self { len: t, predictors, offsets, sds })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Draws one path.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len);
        for t in 0..self.len {
            let pi = &self.predictors[self.offsets[t]..self.offsets[t] + t];
            let z: f64 = rng.sample(StandardNormal);
            y.push(predict(pi, &y) + self.sds[t] * z);
        }
        y
    }

    /// Builds the path from caller-supplied standard normal innovations.
    pub fn path_from_innovations(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.len {
            return Err(Error::Dimension(format!("{} innovations for length {}", z.len(), self.len)));
        }
        let mut y = Vec::with_capacity(self.len);
        for (t, zt) in z.iter().enumerate() {
            let pi = &self.predictors[self.offsets[t]..self.offsets[t] + t];
            y.push(predict(pi, &y) + self.sds[t] * zt);
        }
        Ok(y)
    }
}

#[inline]
fn predict(pi: &[f64], past: &[f64]) -> f64 {
    // π(1) multiplies the most recent observation
    pi.iter().zip(past.iter().rev()).map(|(p, y)| p * y).sum()
}

/// Exact Gaussian path of length `t` with autocovariances `acvf`, generated
/// by the Durbin–Levinson conditional recursion in `O(T²)` time and `O(T)`
/// memory. Produces the same path as [`GaussianSimulator::sample`] for the
/// same rng state.
pub fn simulate_gaussian<R: Rng + ?Sized>(acvf: &AcvfSequence, t: usize, rng: &mut R) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::EmptyInput);
    }
    acvf.require(t - 1)?;
    let gamma = acvf.values();
    let mut y = Vec::with_capacity(t);
    let mut pi: Vec<f64> = Vec::with_capacity(t);
    let mut v = gamma[0];
    for m in 0..t {
        if m > 0 {
            let kappa = durbin_step(&mut pi, gamma, v);
            v *= 1.0 - kappa * kappa;
            if !(v > 0.0) {
                return Err(Error::Singular { order: m, variance: v });
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        y.push(predict(&pi, &y) + v.sqrt() * z);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acvf::fn_acvf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ar1(phi: f64, sigma2: f64, k: usize) -> AcvfSequence {
        AcvfSequence::new((0..=k).map(|j| sigma2 * phi.powi(j as i32) / (1.0 - phi * phi)).collect()).unwrap()
    }

    #[test]
    fn white_noise_solution() {
        let g = fn_acvf(0.0, 2.0, 5).unwrap();
        let s = levinson_solve(&g, 3).unwrap();
        assert_eq!(s.phi, vec![0.0; 3]);
        assert_eq!(s.sigma2, 2.0);
    }

    #[test]
    fn recovers_ar1() {
        let s = levinson_solve(&ar1(0.6, 1.7, 4), 1).unwrap();
        assert!((s.phi[0] + 0.6).abs() < 1e-15);
        assert!((s.sigma2 - 1.7).abs() < 1e-14);
        // higher orders add nothing
        let s = levinson_solve(&ar1(0.6, 1.7, 4), 4).unwrap();
        assert!(s.phi[1..].iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn one_step_fractional_noise() {
        let g = fn_acvf(0.2, 1.0, 2).unwrap();
        let s = levinson_solve(&g, 1).unwrap();
        assert!((s.phi[0] + 0.25).abs() < 1e-15);
        assert!((s.sigma2 - g.variance() * (1.0 - 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn yule_walker_residual_and_variance_invariants() {
        let g = fn_acvf(0.45, 1.0, 60).unwrap();
        let s = levinson_solve(&g, 60).unwrap();
        assert!(s.yule_walker_residual(&g) < 1e-10);
        let prod: f64 = s.pacf.iter().map(|k| 1.0 - k * k).product();
        assert!((s.sigma2 - g.variance() * prod).abs() < 1e-12);
        assert!(s.variances.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.pacf.iter().all(|k| k.abs() < 1.0));
    }

    #[test]
    fn singular_sequence_is_rejected() {
        // perfectly correlated: Toeplitz(1,1,1) is singular
        let g = AcvfSequence::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(levinson_solve(&g, 2), Err(Error::Singular { order: 1, .. })));
        assert!(!g.is_positive_definite());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(simulate_gaussian(&g, 3, &mut rng).is_err());
    }

    #[test]
    fn insufficient_lags() {
        let g = fn_acvf(0.2, 1.0, 3).unwrap();
        assert!(matches!(levinson_solve(&g, 4), Err(Error::InsufficientLags { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(simulate_gaussian(&g, 5, &mut rng), Err(Error::InsufficientLags { .. })));
    }

    #[test]
    fn degenerate_draw() {
        let g = fn_acvf(0.3, 1.0, 0).unwrap();
        let sim = GaussianSimulator::new(&g, 1).unwrap();
        assert_eq!(sim.path_from_innovations(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn white_noise_scales_innovations() {
        let g = fn_acvf(0.0, 4.0, 9).unwrap();
        let sim = GaussianSimulator::new(&g, 10).unwrap();
        let z: Vec<f64> = (0..10).map(|i| i as f64 - 4.5).collect();
        let y = sim.path_from_innovations(&z).unwrap();
        for (a, b) in y.iter().zip(&z) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn streaming_and_stored_paths_are_identical() {
        let g = fn_acvf(0.35, 1.0, 199).unwrap();
        let sim = GaussianSimulator::new(&g, 200).unwrap();
        let a = sim.sample(&mut ChaCha8Rng::seed_from_u64(99));
        let b = simulate_gaussian(&g, 200, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
        let c = simulate_gaussian(&g, 200, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn three_by_three_covariance() {
        let g = AcvfSequence::new(vec![1.3, 0.8, 0.25]).unwrap();
        let sim = GaussianSimulator::new(&g, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut sum = [[0.0; 3]; 3];
        let mut sum2 = [[0.0; 3]; 3];
        for _ in 0..n {
            let y = sim.sample(&mut rng);
            for i in 0..3 {
                for j in 0..3 {
                    let p = y[i] * y[j];
                    sum[i][j] += p;
                    sum2[i][j] += p * p;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mean = sum[i][j] / n as f64;
                let var = sum2[i][j] / n as f64 - mean * mean;
                let se = (var / n as f64).sqrt();
                let target = g.at(i as isize - j as isize);
                assert!((mean - target).abs() < 3.0 * se, "({i},{j}) {mean} vs {target}");
            }
        }
    }

    #[test]
    fn fractional_noise_sample_autocovariances() {
        let t = 500;
        let g = fn_acvf(0.3, 1.0, t - 1).unwrap();
        let sim = GaussianSimulator::new(&g, t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let paths = 10_000;
        // E[(1/T) Σ y(t) y(t+k)] = (T-k)/T γ(k) for a zero-mean path
        let mut acc = vec![Vec::new(); 6];
        for _ in 0..paths {
            let y = sim.sample(&mut rng);
            for (k, a) in acc.iter_mut().enumerate() {
                let s: f64 = y[..t - k].iter().zip(&y[k..]).map(|(a, b)| a * b).sum();
                a.push(s / (t - k) as f64);
            }
        }
        for (k, a) in acc.iter().enumerate() {
            let m = a.iter().sum::<f64>() / paths as f64;
            let v = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (paths - 1) as f64;
            let se = (v / paths as f64).sqrt();
            assert!((m - g.values()[k]).abs() < 3.0 * se, "lag {k}: {m} vs {}", g.values()[k]);
        }
    }

    #[test]
    fn long_ar2_path_recovers_coefficients() {
        // AR(2): y(t) = 0.5 y(t-1) - 0.3 y(t-2) + e(t); autocovariances from
        // the MA(∞) weights
        let (a1, a2) = (0.5, -0.3);
        let mut psi = vec![1.0, a1];
        for j in 2..400 {
            psi.push(a1 * psi[j - 1] + a2 * psi[j - 2]);
        }
        let gamma: Vec<f64> =
            (0..=2).map(|k| psi.iter().zip(&psi[k..]).map(|(x, y)| x * y).sum()).collect();
        // extend with the AR recursion
        let t = 10_000;
        let mut full = gamma.clone();
        for k in 3..t {
            full.push(a1 * full[k - 1] + a2 * full[k - 2]);
        }
        let g = AcvfSequence::new(full).unwrap();
        let truth = levinson_solve(&g, 2).unwrap();
        assert!((truth.phi[0] + a1).abs() < 1e-12 && (truth.phi[1] + a2).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(314);
        let reps = 20;
        let mut est = vec![Vec::new(); 2];
        for _ in 0..reps {
            let y = simulate_gaussian(&g, t, &mut rng).unwrap();
            let sample: Vec<f64> = (0..=2)
                .map(|k| y[..t - k].iter().zip(&y[k..]).map(|(a, b)| a * b).sum::<f64>() / t as f64)
                .collect();
            let s = levinson_solve(&AcvfSequence::new(sample).unwrap(), 2).unwrap();
            est[0].push(s.phi[0]);
            est[1].push(s.phi[1]);
        }
        for (j, e) in est.iter().enumerate() {
            let m = e.iter().sum::<f64>() / reps as f64;
            let sd = (e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            let se = sd / (reps as f64).sqrt();
            assert!((m - truth.phi[j]).abs() < 2.0 * se, "coef {j}: {m} vs {}", truth.phi[j]);
        }
    }
}
