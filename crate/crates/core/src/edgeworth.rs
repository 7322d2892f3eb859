//! Second-order Edgeworth expansion for the zero-mean sample autocorrelation
//! of a Gaussian process with known autocovariance.
//!
//! With `x ~ N(0, Σ)` and `ρ̂₀(k) = x'A x / x'x`, the event `W_k ≤ c` for
//! `W_k = √T(ρ̂₀(k) - ρ(k))` is `x'B x ≤ 0` with `B = A - (ρ(k) + c/√T) I`.
//! The cumulants of the quadratic form are `2^{r-1}(r-1)! tr[(BΣ)^r]`.
//!
//! Writing `X = AΣ`, `Y = Σ` and `s = ρ(k) + c/√T`, `BΣ = X - sY`, so every
//! trace is a polynomial in `s` whose coefficients are fixed traces of words
//! in `X` and `Y`. [`EdgeworthPlan`] computes those once per lag and evaluates
//! each grid point in constant time; [`quadform_cumulants`] is the direct
//! dense computation and serves as the reference.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acvf::AcvfSequence;
use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf};

/// Upper end of the memory range where the expansion is trusted.
pub const VALIDITY_LIMIT: f64 = 0.1;

/// Dense `T × T` Toeplitz covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCov {
    matrix: DMatrix<f64>,
}

impl ToeplitzCov {
    /// Builds `Σ_{ij} = γ(|i-j|)` and checks positive definiteness by Cholesky.
    pub fn new(acvf: &AcvfSequence, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::EmptyInput);
        }
        acvf.require(t - 1)?;
        let g = acvf.values();
        let matrix = DMatrix::from_fn(t, t, |i, j| g[i.abs_diff(j)]);
        if matrix.clone().cholesky().is_none() {
            return Err(Error::Domain(format!("autocovariance is not positive definite at dimension {t}")));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// `A_{T,k}`: `1/2` where `|i-j| = k`, zero elsewhere (`A_{T,0} = I`).
pub fn build_a(t: usize, k: usize) -> Result<DMatrix<f64>> {
    if k >= t {
        return Err(Error::Domain(format!("lag {k} must be below T = {t}")));
    }
    if k == 0 {
        return Ok(DMatrix::identity(t, t));
    }
    Ok(DMatrix::from_fn(t, t, |i, j| if i.abs_diff(j) == k { 0.5 } else { 0.0 }))
}

/// `B_{T,k} = A_{T,k} - (ρ(k) + c T^{-1/2}) I`.
pub fn build_b(t: usize, k: usize, rho_k: f64, c: f64) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::Domain("lag must be at least 1".into()));
    }
    let mut b = build_a(t, k)?;
    let s = rho_k + c / (t as f64).sqrt();
    for i in 0..t {
        b[(i, i)] -= s;
    }
    Ok(b)
}

/// `2^{r-1}(r-1)!` for `r = 1..4`.
const CUMULANT_SCALE: [f64; 4] = [1.0, 2.0, 8.0, 48.0];

/// Cumulants `κ_1..κ_{r_max}` of `x'Bx` for `x ~ N(0, Σ)` from traces of the
/// powers of `BΣ`.
pub fn quadform_cumulants(b: &DMatrix<f64>, sigma: &ToeplitzCov, r_max: usize) -> Result<Vec<f64>> {
    if !(1..=4).contains(&r_max) {
        return Err(Error::Domain(format!("cumulant order {r_max} outside 1..=4")));
    }
    if b.nrows() != b.ncols() || b.nrows() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "B is {}x{}, Σ is {}x{}",
            b.nrows(),
            b.ncols(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    let m = b * sigma.matrix();
    let mut power = m.clone();
    let mut out = Vec::with_capacity(r_max);
    for r in 0..r_max {
        if r > 0 {
            power = &power * &m;
        }
        out.push(CUMULANT_SCALE[r] * power.trace());
    }
    Ok(out)
}

/// `tr(PQ)` without forming the product.
fn trace_product(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    // column-major storage: tr(PQ) = Σ_ij P_ij Q_ji = Σ_ij P_ij (Qᵀ)_ij
    p.component_mul(&q.transpose()).sum()
}

/// Fixed traces of words in `X = AΣ` and `Y = Σ` up to length four.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTable {
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
    pub xxx: f64,
    pub xxy: f64,
    pub xyy: f64,
    pub yyy: f64,
    pub xxxx: f64,
    pub xxxy: f64,
    pub xxyy: f64,
    pub xyxy: f64,
    pub xyyy: f64,
    pub yyyy: f64,
}

impl TraceTable {
    pub fn new(a: &DMatrix<f64>, sigma: &ToeplitzCov) -> Result<Self> {
        let y = sigma.matrix();
        if a.nrows() != y.nrows() || a.ncols() != y.ncols() {
            return Err(Error::Dimension(format!("A is {}x{}, Σ is {}x{}", a.nrows(), a.ncols(), y.nrows(), y.ncols())));
        }
        let x = a * y;
        let x2 = &x * &x;
        let xy = &x * y;
        let y2 = y * y;
        Ok(Self {
            x: x.trace(),
            y: y.trace(),
            xx: x2.trace(),
            xy: xy.trace(),
            yy: y2.trace(),
            xxx: trace_product(&x2, &x),
            xxy: trace_product(&x2, y),
            xyy: trace_product(&x, &y2),
            yyy: trace_product(&y2, y),
            xxxx: trace_product(&x2, &x2),
            xxxy: trace_product(&x2, &xy),
            xxyy: trace_product(&x2, &y2),
            xyxy: trace_product(&xy, &xy),
            xyyy: trace_product(&xy, &y2),
            yyyy: trace_product(&y2, &y2),
        })
    }

    /// `tr[(X - sY)^r]` for `r = 1..4`.
    pub fn power_traces(&self, s: f64) -> [f64; 4] {
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s2 * s2;
        [
            self.x - s * self.y,
            self.xx - 2.0 * s * self.xy + s2 * self.yy,
            self.xxx - 3.0 * s * self.xxy + 3.0 * s2 * self.xyy - s3 * self.yyy,
            self.xxxx - 4.0 * s * self.xxxy + s2 * (4.0 * self.xxyy + 2.0 * self.xyxy) - 4.0 * s3 * self.xyyy
                + s4 * self.yyyy,
        ]
    }

    pub fn cumulants(&self, s: f64) -> [f64; 4] {
        let tr = self.power_traces(s);
        std::array::from_fn(|r| CUMULANT_SCALE[r] * tr[r])
    }
}

/// One evaluation of the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthPoint {
    pub u: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub cdf: f64,
    pub kappa: [f64; 4],
}

/// `F̃ = Φ(u) - φ(u)[η₃/6 H₂(u) + η₄/24 H₃(u) + η₃²/72 H₅(u)]` with
/// `u = -κ₁/√κ₂` and `η_r = κ_r / κ₂^{r/2}`.
pub fn edgeworth_from_cumulants(kappa: [f64; 4]) -> Result<EdgeworthPoint> {
    expansion(kappa, false)
}

/// As [`edgeworth_from_cumulants`], or only the `η₃` term when `first_order`.
pub fn expansion(kappa: [f64; 4], first_order: bool) -> Result<EdgeworthPoint> {
    let k2 = kappa[1];
    if !(k2 > 0.0) || !k2.is_finite() {
        return Err(Error::DegenerateVariance("quadratic form has no variance"));
    }
    let sd = k2.sqrt();
    let u = -kappa[0] / sd;
    let eta3 = kappa[2] / (k2 * sd);
    let eta4 = kappa[3] / (k2 * k2);
    let u2 = u * u;
    let h2 = u2 - 1.0;
    let h3 = u * (u2 - 3.0);
    let h5 = u * (u2 * u2 - 10.0 * u2 + 15.0);
    let mut correction = eta3 / 6.0 * h2;
    if !first_order {
        correction += eta4 / 24.0 * h3 + eta3 * eta3 / 72.0 * h5;
    }
    Ok(EdgeworthPoint { u, eta3, eta4, cdf: norm_cdf(u) - norm_pdf(u) * correction, kappa })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeworthOptions {
    /// Evaluate even when `d` is outside the validity region.
    pub allow_invalid: bool,
    /// Spread grid points over the rayon pool.
    pub parallel: bool,
    /// Keep only the skewness term; the full expansion is the default.
    pub first_order: bool,
}

pub fn check_validity(d: f64, options: &EdgeworthOptions) -> Result<()> {
    if d >= VALIDITY_LIMIT && !options.allow_invalid {
        return Err(Error::Validity(d));
    }
    Ok(())
}

/// Per-lag precomputation for evaluating `F̃` at many points.
#[derive(Debug, Clone)]
pub struct EdgeworthPlan {
    t: usize,
    k: usize,
    rho: f64,
    gamma0: f64,
    first_order: bool,
    traces: TraceTable,
}

impl EdgeworthPlan {
    /// `d` is the memory parameter of the process behind `acvf`, used only for
    /// the validity check.
    pub fn new(k: usize, acvf: &AcvfSequence, t: usize, d: f64, options: &EdgeworthOptions) -> Result<Self> {
        check_validity(d, options)?;
        if k == 0 || k >= t {
            return Err(Error::Domain(format!("lag {k} must lie in 1..{t}")));
        }
        let sigma = ToeplitzCov::new(acvf, t)?;
        let a = build_a(t, k)?;
        let traces = TraceTable::new(&a, &sigma)?;
        Ok(Self { t, k, rho: acvf.rho(k), gamma0: acvf.variance(), first_order: options.first_order, traces })
    }

    pub fn lag(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn traces(&self) -> &TraceTable {
        &self.traces
    }

    /// Expansion of `P(W_k ≤ c)`.
    pub fn point(&self, c: f64) -> Result<EdgeworthPoint> {
        self.point_at_s(self.rho + c / (self.t as f64).sqrt())
    }

    pub fn cdf(&self, c: f64) -> Result<f64> {
        Ok(self.point(c)?.cdf)
    }

    /// Expansion of `P(ρ̂₀(k) ≤ x)`; here `s = x`.
    pub fn point_rho0(&self, x: f64) -> Result<EdgeworthPoint> {
        self.point_at_s(x)
    }

    fn point_at_s(&self, s: f64) -> Result<EdgeworthPoint> {
        expansion(self.traces.cumulants(s), self.first_order)
    }

    /// Large-sample standard deviation of `ρ̂₀(k)`: `√κ₂ / (T γ(0))` at `c = 0`.
    pub fn asymptotic_sd(&self) -> f64 {
        self.traces.cumulants(self.rho)[1].sqrt() / (self.t as f64 * self.gamma0)
    }

    /// Evaluates the expansion on a grid of `ρ̂₀` values and differentiates it
    /// by central differences.
    pub fn curve(&self, grid: &[f64], parallel: bool) -> Result<EdgeworthCurve> {
        if grid.len() < 3 {
            return Err(Error::Domain("density grid needs at least 3 points".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("density grid must be strictly increasing".into()));
        }
        let points: Vec<EdgeworthPoint> = if parallel {
            grid.par_iter().map(|&x| self.point_rho0(x)).collect::<Result<_>>()?
        } else {
            grid.iter().map(|&x| self.point_rho0(x)).collect::<Result<_>>()?
        };
        let cdf: Vec<f64> = points.iter().map(|p| p.cdf).collect();
        let n = grid.len();
        let density: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (cdf[hi] - cdf[lo]) / (grid[hi] - grid[lo])
            })
            .collect();
        let sqrt_t = (self.t as f64).sqrt();
        let valid: Vec<bool> = (0..n)
            .map(|i| {
                let monotone = i == 0 || cdf[i] >= cdf[i - 1];
                monotone && density[i] >= 0.0 && (0.0..=1.0).contains(&cdf[i])
            })
            .collect();
        Ok(EdgeworthCurve {
            lag: self.k,
            t: self.t,
            rho: self.rho,
            x: grid.to_vec(),
            c: grid.iter().map(|x| sqrt_t * (x - self.rho)).collect(),
            cdf,
            density,
            kappa: points.iter().map(|p| p.kappa).collect(),
            valid,
        })
    }

    /// Grid of `points` values spanning `ρ(k) ± half_width_sd` asymptotic
    /// standard deviations.
    pub fn default_grid(&self, half_width_sd: f64, points: usize) -> Vec<f64> {
        let sd = self.asymptotic_sd();
        let lo = self.rho - half_width_sd * sd;
        let step = 2.0 * half_width_sd * sd / (points - 1) as f64;
        (0..points).map(|i| lo + step * i as f64).collect()
    }

    /// Grid with step `sd/25` spanning `±half_width_sd` standard deviations.
    pub fn standard_grid(&self, half_width_sd: f64) -> Vec<f64> {
        let points = (2.0 * half_width_sd * 25.0).round() as usize + 1;
        self.default_grid(half_width_sd, points)
    }
}

/// `F̃_{W_k}(c)` in one call. Builds the full plan; use [`EdgeworthPlan`] when
/// evaluating many points.
#[allow(non_snake_case)]
pub fn edgeworth_cdf_W(c: f64, k: usize, acvf: &AcvfSequence, t: usize, d: f64, options: &EdgeworthOptions) -> Result<f64> {
    EdgeworthPlan::new(k, acvf, t, d, options)?.cdf(c)
}

/// Direct evaluation through [`quadform_cumulants`], `O(T³)` per point.
#[allow(non_snake_case)]
pub fn edgeworth_cdf_W_dense(c: f64, k: usize, acvf: &AcvfSequence, t: usize) -> Result<EdgeworthPoint> {
    let sigma = ToeplitzCov::new(acvf, t)?;
    let b = build_b(t, k, acvf.rho(k), c)?;
    let kv = quadform_cumulants(&b, &sigma, 4)?;
    edgeworth_from_cumulants([kv[0], kv[1], kv[2], kv[3]])
}

/// Expansion curve on the `ρ̂₀(k)` scale.
pub fn edgeworth_density_rho0(
    k: usize,
    acvf: &AcvfSequence,
    t: usize,
    d: f64,
    grid: &[f64],
    options: &EdgeworthOptions,
) -> Result<EdgeworthCurve> {
    EdgeworthPlan::new(k, acvf, t, d, options)?.curve(grid, options.parallel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthCurve {
    pub lag: usize,
    pub t: usize,
    pub rho: f64,
    /// Grid on the `ρ̂₀` scale.
    pub x: Vec<f64>,
    /// The same grid on the `W` scale.
    pub c: Vec<f64>,
    pub cdf: Vec<f64>,
    pub density: Vec<f64>,
    pub kappa: Vec<[f64; 4]>,
    pub valid: Vec<bool>,
}

impl EdgeworthCurve {
    pub fn is_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn invalid_points(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Trapezoid integral of the density over the grid.
    pub fn density_mass(&self) -> f64 {
        self.x.windows(2).zip(self.density.windows(2)).map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1])).sum()
    }

    /// Expansion CDF at `x`, by linear interpolation and clamped at the ends.
    pub fn cdf_at(&self, x: f64) -> f64 {
        interpolate(&self.x, &self.cdf, x)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "c", "cdf", "density", "kappa1", "kappa2", "kappa3", "kappa4", "valid_flag"])?;
        for i in 0..self.x.len() {
            let k = self.kappa[i];
            w.write_record(&[
                format!("{:e}", self.x[i]),
                format!("{:e}", self.c[i]),
                format!("{:e}", self.cdf[i]),
                format!("{:e}", self.density[i]),
                format!("{:e}", k[0]),
                format!("{:e}", k[1]),
                format!("{:e}", k[2]),
                format!("{:e}", k[3]),
                u8::from(self.valid[i]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|v| *v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    ys[i - 1] + (x - x0) / (x1 - x0) * (ys[i] - ys[i - 1])
}
