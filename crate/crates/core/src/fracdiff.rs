//! Fractional difference and integration filters built from the binomial
//! expansion of `(1 - z)^d`.
//!
//! All filters use an expanding window: output `t` only sees
//! `y(1), ..., y(t)`, so no pre-sample values are ever invented and the output
//! has the same length as the input.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Truncated coefficients `α_0, ..., α_{n-1}` of `(1 - z)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracFilter {
    d: f64,
    coeffs: Vec<f64>,
}

impl FracFilter {
    /// Computes the first `n` coefficients with the product recursion
    /// `α_j = α_{j-1} (j - 1 - d) / j`.
    pub fn new(d: f64, n: usize) -> Result<Self> {
        check_d(d)?;
        if n == 0 {
            return Err(Error::Domain("filter length must be positive".into()));
        }
        let mut coeffs = Vec::with_capacity(n);
        coeffs.push(1.0);
        let mut a = 1.0;
        for j in 1..n {
            let jf = j as f64;
            a *= (jf - 1.0 - d) / jf;
            coeffs.push(a);
        }
        Ok(Self { d, coeffs })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Expanding-window convolution `w(t) = Σ_{j<t} α_j y(t-j)`.
    ///
    /// Only the first `series.len()` coefficients are used, so the filter must
    /// be at least as long as the series.
    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; series.len()];
        self.apply_into(series, &mut out)?;
        Ok(out)
    }

    /// Like [`FracFilter::apply`], writing into a caller-owned buffer.
    pub fn apply_into(&self, series: &[f64], out: &mut [f64]) -> Result<()> {
        let n = series.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n > self.coeffs.len() || out.len() != n {
            return Err(Error::Dimension(format!(
                "series of length {n} with filter of length {} into buffer of length {}",
                self.coeffs.len(),
                out.len()
            )));
        }
        for (t, o) in out.iter_mut().enumerate() {
            // α_0..α_t against y(t)..y(0)
            *o = self.coeffs[..=t]
                .iter()
                .zip(series[..=t].iter().rev())
                .map(|(a, y)| a * y)
                .sum();
        }
        Ok(())
    }

    /// Transform-based convolution, `O(T log T)`. Agrees with
    /// [`FracFilter::apply`] to rounding error.
    pub fn apply_fft(&self, series: &[f64]) -> Result<Vec<f64>> {
        let n = series.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n > self.coeffs.len() {
            return Err(Error::Dimension(format!(
                "series of length {n} with filter of length {}",
                self.coeffs.len()
            )));
        }
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);

        let mut a: Vec<Complex64> = self.coeffs[..n]
            .iter()
            .map(|&c| Complex64::new(c, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(size)
            .collect();
        let mut b: Vec<Complex64> = series
            .iter()
            .map(|&c| Complex64::new(c, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(size)
            .collect();
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        inv.process(&mut a);
        let scale = 1.0 / size as f64;
        Ok(a[..n].iter().map(|c| c.re * scale).collect())
    }
}

/// A filter with the transform of its coefficients cached for one series
/// length, for repeated filtering of equally long series.
#[derive(Clone)]
pub struct PreparedFilter {
    n: usize,
    spectrum: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PreparedFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreparedFilter").field("n", &self.n).field("size", &self.spectrum.len()).finish()
    }
}

impl PreparedFilter {
    pub fn new(filter: &FracFilter, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n > filter.len() {
            return Err(Error::Dimension(format!("series of length {n} with filter of length {}", filter.len())));
        }
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); size];
        for (s, &c) in spectrum.iter_mut().zip(&filter.coeffs[..n]) {
            s.re = c;
        }
        fwd.process(&mut spectrum);
        Ok(Self { n, spectrum, fwd, inv })
    }

    pub fn series_len(&self) -> usize {
        self.n
    }

    /// Filters `series` into `out`, using `scratch` as the transform buffer.
    pub fn apply_into(&self, series: &[f64], out: &mut [f64], scratch: &mut Vec<Complex64>) -> Result<()> {
        if series.len() != self.n || out.len() != self.n {
            return Err(Error::Dimension(format!(
                "prepared for length {}, got series {} and buffer {}",
                self.n,
                series.len(),
                out.len()
            )));
        }
        let size = self.spectrum.len();
        scratch.clear();
        scratch.extend(series.iter().map(|&v| Complex64::new(v, 0.0)));
        scratch.resize(size, Complex64::new(0.0, 0.0));
        self.fwd.process(scratch);
        for (x, s) in scratch.iter_mut().zip(&self.spectrum) {
            *x *= s;
        }
        self.inv.process(scratch);
        let scale = 1.0 / size as f64;
        for (o, c) in out.iter_mut().zip(scratch.iter()) {
            *o = c.re * scale;
        }
        Ok(())
    }
}

fn check_d(d: f64) -> Result<()> {
    if !(d > -1.0) || !d.is_finite() {
        return Err(Error::Domain(format!("fractional exponent d = {d} must exceed -1")));
    }
    Ok(())
}

/// First `n` binomial coefficients of `(1 - z)^d`.
pub fn frac_coeffs(d: f64, n: usize) -> Result<FracFilter> {
    FracFilter::new(d, n)
}

/// Applies `(1 - L)^d` to `series` with the expanding-window convolution.
pub fn apply_frac_filter(series: &[f64], d: f64) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    FracFilter::new(d, series.len())?.apply(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_gamma;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn integer_and_identity_filters() {
        assert_eq!(frac_coeffs(1.0, 4).unwrap().coeffs(), &[1.0, -1.0, 0.0, 0.0]);
        assert_eq!(frac_coeffs(0.0, 3).unwrap().coeffs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn fractional_coefficients() {
        let f = frac_coeffs(0.4, 3).unwrap();
        assert_eq!(f.coeffs()[0], 1.0);
        assert!((f.coeffs()[1] + 0.4).abs() < 1e-15);
        assert!((f.coeffs()[2] + 0.12).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(frac_coeffs(-1.0, 3), Err(Error::Domain(_))));
        assert!(matches!(frac_coeffs(0.2, 0), Err(Error::Domain(_))));
        assert!(matches!(apply_frac_filter(&[], 0.2), Err(Error::EmptyInput)));
        assert!(matches!(apply_frac_filter(&[1.0], -1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn no_overflow_for_long_filters() {
        let f = frac_coeffs(0.3, 5000).unwrap();
        assert!(f.coeffs().iter().all(|c| c.is_finite()));
    }

    #[test]
    fn identity_and_differencing() {
        let y = [0.3, -1.2, 2.5, 0.7];
        assert_eq!(apply_frac_filter(&y, 0.0).unwrap(), y.to_vec());
        let c = 2.75;
        assert_eq!(apply_frac_filter(&[c, c, c], 1.0).unwrap(), vec![c, 0.0, 0.0]);
    }

    #[test]
    fn round_trip_t200() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..200).map(|_| rng.random::<f64>() - 0.5).collect();
        let back = apply_frac_filter(&apply_frac_filter(&y, 0.4).unwrap(), -0.4).unwrap();
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn parseval_partial_sum() {
        // Σ |α_j^{(-d)}|² = Γ(1 - 2d) / Γ(1 - d)²
        let d = 0.3;
        let f = frac_coeffs(-d, 1_000_000).unwrap();
        let partial: f64 = f.coeffs().iter().map(|a| a * a).sum();
        let exact = (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp();
        assert!((partial / exact - 1.0).abs() < 0.01, "{partial} vs {exact}");
    }

    #[test]
    fn fft_path_agrees_with_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..777).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        for d in [-0.45, 0.1, 0.499] {
            let f = frac_coeffs(d, y.len()).unwrap();
            let direct = f.apply(&y).unwrap();
            let fast = f.apply_fft(&y).unwrap();
            for (a, b) in direct.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(d in -0.99f64..0.99, y in prop::collection::vec(-10.0f64..10.0, 1..120)) {
            let back = apply_frac_filter(&apply_frac_filter(&y, d).unwrap(), -d).unwrap();
            for (a, b) in y.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn negative_coefficients_for_positive_d(d in 0.001f64..0.999, n in 2usize..300) {
            let f = frac_coeffs(d, n).unwrap();
            prop_assert!(f.coeffs()[1..].iter().all(|&a| a < 0.0));
        }
    }

    #[test]
    fn prepared_matches_direct() {
        let y: Vec<f64> = (0..300).map(|t| ((t * 37 % 101) as f64 - 50.0) / 13.0).collect();
        let f = FracFilter::new(-0.35, 300).unwrap();
        let p = PreparedFilter::new(&f, 300).unwrap();
        let mut out = vec![0.0; 300];
        let mut scratch = Vec::new();
        p.apply_into(&y, &mut out, &mut scratch).unwrap();
        let direct = f.apply(&y).unwrap();
        for (a, b) in out.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(p.apply_into(&y[..10], &mut out[..10], &mut scratch).is_err());
    }
}
