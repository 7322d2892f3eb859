//! Second-moment theory for fractional noise and ARFIMA(1,d,0).
//!
//! The ARFIMA(1,d,0) autocovariance is obtained from the fractional-noise
//! autocovariance `γ_w` of `w(t) = (1 - φL) y(t)` through the two-sided
//! geometric sum
//!
//! ```text
//! γ_y(k) = (1 - φ²)⁻¹ Σ_m φ^|m| γ_w(k + m)
//! ```
//!
//! whose two halves are Gauss hypergeometric series in `φ`:
//!
//! ```text
//! Σ_{m≥0} φ^m γ_w(k+m) = γ_w(k)     ₂F₁(k+d, 1; k+1-d; φ)
//! Σ_{m≥1} φ^m γ_w(k-m) = φ γ_w(k-1) ₂F₁(1-k+d, 1; 2-k-d; φ)
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_ratio, ln_gamma};

/// Target relative accuracy for [`hyp2f1`].
pub const HYP2F1_TOL: f64 = 1e-14;
/// Term budget for [`hyp2f1`].
pub const HYP2F1_MAX_TERMS: usize = 1_000_000;

/// Parameters of `(1 - L)^d (1 - φL) y(t) = ε(t)`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArfimaSpec {
    pub d: f64,
    pub phi: f64,
    pub sigma2: f64,
}

impl ArfimaSpec {
    pub fn new(d: f64, phi: f64, sigma2: f64) -> Result<Self> {
        let spec = Self { d, phi, sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    /// Fractional noise with unit innovation variance.
    pub fn fractional_noise(d: f64) -> Result<Self> {
        Self::new(d, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.abs() < 0.5) {
            return Err(Error::Domain(format!("|d| = {} must be below 0.5", self.d.abs())));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::Domain(format!("|phi| = {} must be below 1", self.phi.abs())));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Domain(format!("sigma2 = {} must be positive", self.sigma2)));
        }
        Ok(())
    }
}

/// Autocovariances `γ(0), ..., γ(K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcvfSequence {
    values: Vec<f64>,
}

impl AcvfSequence {
    /// Wraps raw values; requires `γ(0) > 0` and `|γ(k)| ≤ γ(0)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let g0 = *values.first().ok_or(Error::EmptyInput)?;
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(Error::Domain(format!("gamma(0) = {g0} must be positive")));
        }
        if let Some(k) = values.iter().position(|g| !g.is_finite() || g.abs() > g0 * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("|gamma({k})| exceeds gamma(0)")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn maxlag(&self) -> usize {
        self.values.len() - 1
    }

    /// `γ(|k|)`; panics past `maxlag`.
    pub fn at(&self, k: isize) -> f64 {
        self.values[k.unsigned_abs()]
    }

    pub fn variance(&self) -> f64 {
        self.values[0]
    }

    /// Autocorrelation `γ(k) / γ(0)`.
    pub fn rho(&self, k: usize) -> f64 {
        self.values[k] / self.values[0]
    }

    pub fn truncated(&self, maxlag: usize) -> Result<Self> {
        self.require(maxlag)?;
        Ok(Self { values: self.values[..=maxlag].to_vec() })
    }

    pub(crate) fn require(&self, maxlag: usize) -> Result<()> {
        if self.maxlag() < maxlag {
            return Err(Error::InsufficientLags { needed: maxlag, available: self.maxlag() });
        }
        Ok(())
    }

    /// Toeplitz positive definiteness up to `maxlag`, checked through the
    /// Levinson prediction variances.
    pub fn is_positive_definite(&self) -> bool {
        crate::levinson::levinson_solve(self, self.maxlag()).is_ok()
    }

    /// CSV with columns `lag,gamma`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lag", "gamma"])?;
        for (k, g) in self.values.iter().enumerate() {
            w.write_record([k.to_string(), format!("{g:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gauss hypergeometric series `₂F₁(a, b; c; z)` for `|z| < 1`.
///
/// Summation stops once a geometric bound on the remaining tail falls below
/// [`HYP2F1_TOL`] relative to the partial sum.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    hyp2f1_with_budget(a, b, c, z, HYP2F1_MAX_TERMS)
}

pub fn hyp2f1_with_budget(a: f64, b: f64, c: f64, z: f64, max_terms: usize) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return Err(Error::Domain(format!("|z| = {} must be below 1", z.abs())));
    }
    if c <= 0.0 && c == c.floor() {
        return Err(Error::Domain(format!("c = {c} is a non-positive integer")));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    // Past this index the term ratios are monotone and below one.
    let settle = (a.abs() + b.abs() + c.abs()).ceil() as usize + 2;
    let mut sum = 1.0;
    let mut term = 1.0;
    for n in 0..max_terms {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if n >= settle {
            let np = nf + 1.0;
            let next = ((a + np) * (b + np) / ((c + np) * (np + 1.0)) * z).abs();
            let rho = next.max(z.abs());
            if rho < 1.0 && term.abs() * rho / (1.0 - rho) <= HYP2F1_TOL * sum.abs() {
                return Ok(sum);
            }
        }
    }
    Err(Error::NonConvergence { terms: max_terms })
}

/// Autocovariances of fractional noise `(1 - L)^d y(t) = ε(t)`.
pub fn fn_acvf(d: f64, sigma2: f64, maxlag: usize) -> Result<AcvfSequence> {
    ArfimaSpec::new(d, 0.0, sigma2)?;
    let mut values = Vec::with_capacity(maxlag + 1);
    let mut g = sigma2 * (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp();
    values.push(g);
    for k in 1..=maxlag {
        let kf = k as f64;
        g *= (kf - 1.0 + d) / (kf - d);
        values.push(g);
    }
    AcvfSequence::new(values)
}

/// Exact autocovariances of ARFIMA(1,d,0).
pub fn arfima_acvf(spec: &ArfimaSpec, maxlag: usize) -> Result<AcvfSequence> {
    spec.validate()?;
    let ArfimaSpec { d, phi, sigma2 } = *spec;
    if phi == 0.0 {
        return fn_acvf(d, sigma2, maxlag);
    }
    if d == 0.0 {
        let g0 = sigma2 / (1.0 - phi * phi);
        let values = (0..=maxlag).map(|k| g0 * phi.powi(k as i32)).collect();
        return AcvfSequence::new(values);
    }
    let gw = fn_acvf(d, 1.0, maxlag + 1)?;
    let scale = sigma2 / (1.0 - phi * phi);
    let mut values = Vec::with_capacity(maxlag + 1);
    for k in 0..=maxlag {
        let kf = k as f64;
        let ahead = gw.at(k as isize) * hyp2f1(kf + d, 1.0, kf + 1.0 - d, phi)?;
        let behind = phi * gw.at(k as isize - 1) * hyp2f1(1.0 - kf + d, 1.0, 2.0 - kf - d, phi)?;
        values.push(scale * (ahead + behind));
    }
    AcvfSequence::new(values)
}

/// Exact variance of the sample mean of `T` observations,
/// `T⁻¹ Σ_{|k|<T} (1 - |k|/T) γ(k)`.
pub fn exact_mean_variance(acvf: &AcvfSequence, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::EmptyInput);
    }
    acvf.require(t - 1)?;
    let tf = t as f64;
    let g = acvf.values();
    let mut s = g[0];
    for (k, gk) in g.iter().enumerate().take(t).skip(1) {
        s += 2.0 * (1.0 - k as f64 / tf) * gk;
    }
    Ok(s / tf)
}

/// Large-`T` second-moment approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotics {
    /// Long-run variance of the renormalised mean `T^{1/2-d}(ȳ - μ)`.
    pub omega2: f64,
    /// `T^{2d-1} ω²`.
    pub mean_var_approx: f64,
    /// `E[γ̂(k) - γ(k)] ≈ -ω² T^{2d-1}`, the same at every lag.
    pub acvf_bias: f64,
}

pub fn asymptotics(spec: &ArfimaSpec, t: usize) -> Result<Asymptotics> {
    spec.validate()?;
    if t < 2 {
        return Err(Error::Domain("asymptotics need T >= 2".into()));
    }
    let ArfimaSpec { d, phi, sigma2 } = *spec;
    let kappa1 = 1.0 / (1.0 - phi);
    let omega2 = sigma2 * kappa1 * kappa1 * gamma_ratio(1.0 - 2.0 * d, 1.0 + d)
        / ((1.0 + 2.0 * d) * crate::special::gamma(1.0 - d));
    let mean_var_approx = (t as f64).powf(2.0 * d - 1.0) * omega2;
    Ok(Asymptotics { omega2, mean_var_approx, acvf_bias: -mean_var_approx })
}
