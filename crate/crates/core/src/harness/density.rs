//! Kernel density estimates and goodness-of-fit measures.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::edgeworth::EdgeworthCurve;
use crate::error::{Error, Result};
use crate::harness::config::BandwidthRule;
use crate::special::norm_pdf;
use crate::stats::quantile_sorted;

/// Floor applied to densities before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySource {
    Mc,
    Sbs,
    Pfsbs,
    Fpfbs,
    Edgeworth,
    ExactNormal,
    Other(String),
}

impl DensitySource {
    pub fn from_label(label: &str) -> Self {
        match label {
            "mc" => DensitySource::Mc,
            "sbs" => DensitySource::Sbs,
            "pfsbs" => DensitySource::Pfsbs,
            "fpfbs" => DensitySource::Fpfbs,
            "edgeworth" => DensitySource::Edgeworth,
            "exact_normal" => DensitySource::ExactNormal,
            other => DensitySource::Other(other.to_string()),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            DensitySource::Mc => "mc",
            DensitySource::Sbs => "sbs",
            DensitySource::Pfsbs => "pfsbs",
            DensitySource::Fpfbs => "fpfbs",
            DensitySource::Edgeworth => "edgeworth",
            DensitySource::ExactNormal => "exact_normal",
            DensitySource::Other(s) => s,
        }
    }
}

/// Density and distribution function tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub source: DensitySource,
    pub x: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Kernel bandwidth, when the estimate is a KDE.
    pub bandwidth: Option<f64>,
}

impl DensityEstimate {
    /// Tabulates given functions on `grid`.
    pub fn from_fn(
        source: DensitySource,
        grid: &[f64],
        pdf: impl Fn(f64) -> f64,
        cdf: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        check_grid(grid)?;
        Ok(Self {
            source,
            x: grid.to_vec(),
            pdf: grid.iter().map(|&x| pdf(x)).collect(),
            cdf: grid.iter().map(|&x| cdf(x)).collect(),
            bandwidth: None,
        })
    }

    pub fn from_edgeworth(curve: &EdgeworthCurve) -> Self {
        Self {
            source: DensitySource::Edgeworth,
            x: curve.x.clone(),
            pdf: curve.density.clone(),
            cdf: curve.cdf.clone(),
            bandwidth: None,
        }
    }

    /// Linear interpolation of the density; `None` outside the grid.
    pub fn pdf_at(&self, x: f64) -> Option<f64> {
        interpolate(&self.x, &self.pdf, x)
    }

    pub fn cdf_at(&self, x: f64) -> Option<f64> {
        interpolate(&self.x, &self.cdf, x)
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.x, &self.pdf)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "pdf", "cdf", "source"])?;
        for i in 0..self.x.len() {
            w.write_record(&[
                format!("{:e}", self.x[i]),
                format!("{:e}", self.pdf[i]),
                format!("{:e}", self.cdf[i]),
                self.source.label().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Domain("grid needs at least 2 points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if !(x >= xs[0] && x <= xs[n - 1]) {
        return None;
    }
    let i = xs.partition_point(|v| *v <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    Some(ys[i - 1] + (x - x0) / (x1 - x0) * (ys[i] - ys[i - 1]))
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn sorted(points: &[f64]) -> Vec<f64> {
    let mut v = points.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `1.06 min(sd, IQR/1.349) n^{-1/5}`.
pub fn silverman_bandwidth(points: &[f64]) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientDraws { needed: 2, got: n });
    }
    let mean = points.iter().sum::<f64>() / n as f64;
    let sd = (points.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let s = sorted(points);
    let iqr = quantile_sorted(&s, 0.75)? - quantile_sorted(&s, 0.25)?;
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::DegenerateVariance("points have no spread"));
    }
    Ok(1.06 * spread * (n as f64).powf(-0.2))
}

pub fn bandwidth(points: &[f64], rule: BandwidthRule) -> Result<f64> {
    match rule {
        BandwidthRule::Silverman => silverman_bandwidth(points),
        BandwidthRule::Fixed(h) if h > 0.0 => Ok(h),
        BandwidthRule::Fixed(h) => Err(Error::Domain(format!("bandwidth must be positive, got {h}"))),
    }
}

/// Gaussian kernel density estimate on `grid`, with the distribution function
/// by cumulative trapezoid.
pub fn kde(points: &[f64], grid: &[f64], rule: BandwidthRule, source: DensitySource) -> Result<DensityEstimate> {
    check_grid(grid)?;
    let h = bandwidth(points, rule)?;
    let scale = 1.0 / (points.len() as f64 * h);
    let pdf: Vec<f64> =
        grid.iter().map(|&x| scale * points.iter().map(|p| norm_pdf((x - p) / h)).sum::<f64>()).collect();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 1..grid.len() {
        acc += 0.5 * (grid[i] - grid[i - 1]) * (pdf[i] + pdf[i - 1]);
        cdf.push(acc);
    }
    Ok(DensityEstimate { source, x: grid.to_vec(), pdf, cdf, bandwidth: Some(h) })
}

/// Evenly spaced grid covering every sample with `pad` extra on both sides.
pub fn covering_grid(samples: &[&[f64]], pad: f64, points: usize) -> Result<Vec<f64>> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        for &v in s.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() || points < 2 {
        return Err(Error::EmptyInput);
    }
    let (lo, hi) = (lo - pad, hi + pad);
    if !(hi > lo) {
        return Err(Error::DegenerateVariance("samples have no spread"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub subject: DensitySource,
    pub comparator: DensitySource,
    pub rmsd: f64,
    pub kld: f64,
    pub gini: f64,
    /// Evaluation points that fell outside a grid and were clipped to it.
    pub clipped: usize,
}

/// RMSD and sample KLD of the densities at the sorted Monte Carlo points, and
/// twice the area between the PP-plot and the diagonal. `comparator` is the
/// Monte Carlo reference.
pub fn gof_measures(subject: &DensityEstimate, comparator: &DensityEstimate, mc_points: &[f64]) -> Result<GofReport> {
    if mc_points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = sorted(mc_points);
    let mut clipped = 0;
    let mut eval = |d: &DensityEstimate, x: f64, cdf: bool| {
        let (xs, ys) = (&d.x, if cdf { &d.cdf } else { &d.pdf });
        let xc = x.clamp(xs[0], xs[xs.len() - 1]);
        if xc != x {
            clipped += 1;
        }
        interpolate(xs, ys, xc).expect("clamped into the grid")
    };
    let n = s.len() as f64;
    let (mut sq, mut kl) = (0.0, 0.0);
    let mut pp: Vec<(f64, f64)> = Vec::with_capacity(s.len() + 2);
    pp.push((0.0, 0.0));
    for &x in &s {
        let p_mc = eval(comparator, x, false);
        let p_bs = eval(subject, x, false);
        sq += (p_mc - p_bs) * (p_mc - p_bs);
        kl += (p_mc.max(DENSITY_FLOOR) / p_bs.max(DENSITY_FLOOR)).ln();
        pp.push((eval(comparator, x, true).clamp(0.0, 1.0), eval(subject, x, true).clamp(0.0, 1.0)));
    }
    pp.push((1.0, 1.0));
    // the comparator cdf is non-decreasing in x, so pp is ordered in its first coordinate
    let area: f64 = pp
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * ((w[0].1 - w[0].0).abs() + (w[1].1 - w[1].0).abs()))
        .sum();
    Ok(GofReport {
        subject: subject.source.clone(),
        comparator: comparator.source.clone(),
        rmsd: (sq / n).sqrt(),
        kld: kl / n,
        gini: (2.0 * area).clamp(0.0, 1.0),
        clipped,
    })
}

/// `sup_x |F_n(x) - F(x)|` for the empirical distribution of `sample`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = sorted(sample);
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// `sup_x |F_a(x) - F_b(x)|` between two empirical distributions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}
