//! Sieve bootstrap generators: raw (SBS), pre-filtered (PFSBS) and
//! fixed-filter (FPFBS), plus the autocovariance implied by a fitted sieve and
//! the scalar percentile set.

use std::io::{Read, Write};

use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acvf::AcvfSequence;
use crate::error::{Error, Result};
use crate::fracdiff::{FracFilter, PreparedFilter};
use crate::rng::{fnv1a, uniform_index};
use crate::sieve::{fit, select_order_aic, FitMethod, OrderSelection, SieveFit};
use crate::stats::{estimate_memory, quantile_sorted, MemoryEstimate, MemoryMethod, DEFAULT_BANDWIDTH_EXPONENT};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_FIXED_D: f64 = 0.5;

// Above this length the inverse filter runs through a cached FFT.
const FFT_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Sbs,
    Pfsbs,
    Fpfbs,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Sbs => "sbs",
            MethodKind::Pfsbs => "pfsbs",
            MethodKind::Fpfbs => "fpfbs",
        }
    }

    fn id(self) -> u64 {
        match self {
            MethodKind::Sbs => 1,
            MethodKind::Pfsbs => 2,
            MethodKind::Fpfbs => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRule {
    Aic,
    Fixed(usize),
}

/// How PFSBS estimates its per-series pre-filter exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefilterConfig {
    pub estimator: MemoryMethod,
    pub bandwidth_exponent: f64,
    /// Added to the raw estimate before clamping.
    pub offset: f64,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        Self { estimator: MemoryMethod::LocalWhittle, bandwidth_exponent: DEFAULT_BANDWIDTH_EXPONENT, offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMethod {
    pub kind: MethodKind,
    /// Label used in outputs; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_order")]
    pub order: OrderRule,
    #[serde(default = "default_estimator")]
    pub estimator: FitMethod,
    #[serde(default)]
    pub prefilter: PrefilterConfig,
    /// Nominal exponent for FPFBS.
    #[serde(default = "default_fixed_d")]
    pub fixed_d: f64,
    /// Width of the margin below 0.5 in the admissibility window.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_order() -> OrderRule {
    OrderRule::Aic
}
fn default_estimator() -> FitMethod {
    FitMethod::Burg
}
fn default_fixed_d() -> f64 {
    DEFAULT_FIXED_D
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl BootstrapMethod {
    fn with_kind(kind: MethodKind) -> Self {
        Self {
            kind,
            name: None,
            order: OrderRule::Aic,
            estimator: FitMethod::Burg,
            prefilter: PrefilterConfig::default(),
            fixed_d: DEFAULT_FIXED_D,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn sbs() -> Self {
        Self::with_kind(MethodKind::Sbs)
    }

    pub fn pfsbs() -> Self {
        Self::with_kind(MethodKind::Pfsbs)
    }

    pub fn fpfbs() -> Self {
        Self::with_kind(MethodKind::Fpfbs)
    }

    pub fn with_order(mut self, order: OrderRule) -> Self {
        self.order = order;
        self
    }

    pub fn with_estimator(mut self, estimator: FitMethod) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        // the clamp interval (-0.5 + ε, 0.5 - ε) is empty from ε = 0.5 on
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Config(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon)));
        }
        if let OrderRule::Fixed(h) = self.order {
            if h > 10_000 {
                return Err(Error::Config(format!("fixed order {h} is unreasonably large")));
            }
        }
        if self.kind == MethodKind::Fpfbs && !self.fixed_d.is_finite() {
            return Err(Error::Config("fixed_d must be finite".into()));
        }
        let e = self.prefilter.bandwidth_exponent;
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Config(format!("bandwidth exponent must lie in (0, 1), got {e}")));
        }
        Ok(())
    }

    /// Stream purpose for this method: the kind in the high bits and a hash of
    /// the configuration (label excluded) in the low 12 bits. Never zero, so
    /// it never collides with the data stream.
    pub fn stream_purpose(&self) -> u64 {
        let mut key = self.clone();
        key.name = None;
        let json = serde_json::to_vec(&key).expect("method serializes");
        (self.kind.id() << 12) | (fnv1a(&json) & 0xfff)
    }

    /// Pre-filter exponent this method would use on `series`.
    pub fn prefilter_for(&self, series: &[f64]) -> Result<Option<Prefilter>> {
        let margin = self.epsilon;
        match self.kind {
            MethodKind::Sbs => Ok(None),
            MethodKind::Pfsbs => {
                let est = estimate_memory(series, self.prefilter.estimator, self.prefilter.bandwidth_exponent)?
                    .with_offset(self.prefilter.offset);
                let d = est.clamped(margin);
                Ok(Some(Prefilter { d, requested: est.adjusted(), clamped: d != est.adjusted(), estimate: Some(est) }))
            }
            MethodKind::Fpfbs => {
                let d = self.fixed_d.clamp(-0.5 + margin, 0.5 - margin);
                Ok(Some(Prefilter { d, requested: self.fixed_d, clamped: d != self.fixed_d, estimate: None }))
            }
        }
    }
}

/// Open window `(-0.5, 0.5(1 - ε))` for pre-filter exponents.
pub fn admissible_window(epsilon: f64) -> (f64, f64) {
    (-0.5, 0.5 * (1.0 - epsilon))
}

pub fn check_admissible(d: f64, epsilon: f64) -> Result<()> {
    let (lower, upper) = admissible_window(epsilon);
    if d > lower && d < upper {
        Ok(())
    } else {
        Err(Error::Admissibility { d, lower, upper })
    }
}

/// The exponent actually used to pre-filter one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prefilter {
    pub d: f64,
    /// Value before clamping into the window.
    pub requested: f64,
    pub clamped: bool,
    pub estimate: Option<MemoryEstimate>,
}

/// One bootstrap path with its innovations and initial values.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapPath {
    pub values: Vec<f64>,
    /// `ε*(1..T)`.
    pub innovations: Vec<f64>,
    /// `y*(0), y*(-1), ..., y*(1-h)`.
    pub initial: Vec<f64>,
}

/// Bootstrap draws for a fixed fit: resample, rescale, recurse.
#[derive(Debug, Clone)]
pub struct SieveBootstrap {
    centered: Vec<f64>,
    fit: SieveFit,
    sigma: f64,
}

impl SieveBootstrap {
    /// `series` must be the data `fit` was estimated from.
    pub fn new(series: &[f64], fit: SieveFit) -> Result<Self> {
        let t = series.len();
        if t == 0 {
            return Err(Error::EmptyInput);
        }
        if fit.source_len != t || fit.residuals_std.len() != t {
            return Err(Error::Dimension(format!("fit built from {} observations, series has {t}", fit.source_len)));
        }
        if fit.h >= t {
            return Err(Error::Domain(format!("order {} needs more than {} observations", fit.h, fit.h)));
        }
        let centered = series.iter().map(|v| v - fit.mean).collect();
        let sigma = fit.sigma2_bar.sqrt();
        Ok(Self { centered, fit, sigma })
    }

    pub fn fit(&self) -> &SieveFit {
        &self.fit
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.draw_detailed(rng).values
    }

    /// Draws `τ` first (when `h > 0`), then the `T` resampling indices.
    pub fn draw_detailed<R: Rng + ?Sized>(&self, rng: &mut R) -> BootstrapPath {
        let t = self.len();
        let h = self.fit.h;
        let mut ext = vec![0.0; h + t];
        if h > 0 {
            // τ uniform on {h, ..., T}, 1-based
            let tau = h + uniform_index(rng, t - h + 1);
            for m in 1..=h {
                ext[h - m] = self.centered[tau - m];
            }
        }
        let innovations: Vec<f64> =
            (0..t).map(|_| self.sigma * self.fit.residuals_std[uniform_index(rng, t)]).collect();
        let phi = &self.fit.phi_bar;
        for s in 0..t {
            let pos = h + s;
            let mut acc = innovations[s];
            for (j, p) in phi.iter().enumerate() {
                acc -= p * ext[pos - j - 1];
            }
            ext[pos] = acc;
        }
        let initial = ext[..h].iter().rev().copied().collect();
        BootstrapPath { values: ext.split_off(h), innovations, initial }
    }
}

/// Per-series state after fitting: draws are cheap and repeatable.
#[derive(Debug, Clone)]
pub struct PreparedBootstrap {
    method: BootstrapMethod,
    prefilter: Option<Prefilter>,
    selection: Option<OrderSelection>,
    sieve: SieveBootstrap,
    inverse: Option<Inverse>,
}

#[derive(Debug, Clone)]
enum Inverse {
    Direct(FracFilter),
    Fft(PreparedFilter),
}

/// What a replication records about its bootstrap fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub h: usize,
    pub d_pre: Option<f64>,
    pub d_requested: Option<f64>,
    pub clamped: bool,
}

impl PreparedBootstrap {
    pub fn new(series: &[f64], method: &BootstrapMethod) -> Result<Self> {
        method.validate()?;
        let prefilter = method.prefilter_for(series)?;
        prepare(series, method, prefilter)
    }

    pub fn method(&self) -> &BootstrapMethod {
        &self.method
    }

    pub fn prefilter(&self) -> Option<&Prefilter> {
        self.prefilter.as_ref()
    }

    pub fn order_selection(&self) -> Option<&OrderSelection> {
        self.selection.as_ref()
    }

    pub fn sieve(&self) -> &SieveBootstrap {
        &self.sieve
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            h: self.sieve.fit.h,
            d_pre: self.prefilter.map(|p| p.d),
            d_requested: self.prefilter.map(|p| p.requested),
            clamped: self.prefilter.is_some_and(|p| p.clamped),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut scratch = Vec::new();
        let w = self.sieve.draw(rng);
        self.invert(w, &mut scratch)
    }

    /// Like [`PreparedBootstrap::draw`] with a reusable transform buffer.
    pub fn draw_with<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<Complex64>) -> Vec<f64> {
        let w = self.sieve.draw(rng);
        self.invert(w, scratch)
    }

    fn invert(&self, w: Vec<f64>, scratch: &mut Vec<Complex64>) -> Vec<f64> {
        match &self.inverse {
            None => w,
            Some(Inverse::Direct(f)) => f.apply(&w).expect("filter sized to the series"),
            Some(Inverse::Fft(p)) => {
                let mut out = vec![0.0; w.len()];
                p.apply_into(&w, &mut out, scratch).expect("filter sized to the series");
                out
            }
        }
    }
}

fn prepare(series: &[f64], method: &BootstrapMethod, prefilter: Option<Prefilter>) -> Result<PreparedBootstrap> {
    let t = series.len();
    let (w, inverse) = match &prefilter {
        None => (series.to_vec(), None),
        Some(p) => {
            check_admissible(p.d, method.epsilon)?;
            let w = FracFilter::new(p.d, t)?.apply(series)?;
            let inv = FracFilter::new(-p.d, t)?;
            let inv = if t > FFT_THRESHOLD { Inverse::Fft(PreparedFilter::new(&inv, t)?) } else { Inverse::Direct(inv) };
            (w, Some(inv))
        }
    };
    let (h, selection) = match method.order {
        OrderRule::Fixed(h) => (h, None),
        OrderRule::Aic => {
            let sel = select_order_aic(&w, method.estimator)?;
            (sel.h_hat, Some(sel))
        }
    };
    let f = fit(&w, h, method.estimator)?;
    let sieve = SieveBootstrap::new(&w, f)?;
    Ok(PreparedBootstrap { method: method.clone(), prefilter, selection, sieve, inverse })
}

/// One SBS path from a fit of `series`.
pub fn sbs_draw<R: Rng + ?Sized>(series: &[f64], fit: &SieveFit, rng: &mut R) -> Result<Vec<f64>> {
    Ok(SieveBootstrap::new(series, fit.clone())?.draw(rng))
}

/// One PFSBS path with the given pre-filter exponent. The order rule and
/// estimator come from `config`; its kind is ignored.
pub fn pfsbs_draw<R: Rng + ?Sized>(
    series: &[f64],
    d_pre: f64,
    config: &BootstrapMethod,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_admissible(d_pre, config.epsilon)?;
    let p = Prefilter { d: d_pre, requested: d_pre, clamped: false, estimate: None };
    let prepared = prepare(series, config, Some(p))?;
    let w = prepared.sieve.draw(rng);
    // always the direct inverse here
    FracFilter::new(-d_pre, series.len())?.apply(&w)
}

/// Autocovariance of the fitted AR(h): `γ̄(k) = γ̂(k)` for `k ≤ h`, then
/// `γ̄(k) = -Σ_j φ̄(j) γ̄(k-j)`.
///
/// With a Yule–Walker fit and the divisor-`T` sample autocovariance this is
/// the stationary autocovariance of the bootstrap recursion.
pub fn sieve_implied_acvf(fit: &SieveFit, sample_acvf: &AcvfSequence, maxlag: usize) -> Result<AcvfSequence> {
    let h = fit.h;
    sample_acvf.require(h)?;
    let mut g = Vec::with_capacity(maxlag + 1);
    for k in 0..=maxlag {
        if k <= h {
            g.push(sample_acvf.values()[k]);
        } else {
            let v: f64 = fit.phi_bar.iter().enumerate().map(|(j, p)| p * g[k - j - 1]).sum();
            g.push(-v);
        }
    }
    AcvfSequence::new(g)
}

/// Symmetric scalar percentile set `{s : (s - m)² ≤ q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileSet {
    pub center: f64,
    pub half_width: f64,
    pub alpha: f64,
}

impl PercentileSet {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, s: f64) -> bool {
        (s - self.center).abs() <= self.half_width
    }
}

pub const MIN_PERCENTILE_DRAWS: usize = 20;

/// Centres on the bootstrap mean; `q` is the type-7 `(1-α)` quantile of the
/// squared centred draws.
pub fn percentile_set(draws: &[f64], alpha: f64) -> Result<PercentileSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if draws.len() < MIN_PERCENTILE_DRAWS {
        return Err(Error::InsufficientDraws { needed: MIN_PERCENTILE_DRAWS, got: draws.len() });
    }
    let center = draws.iter().sum::<f64>() / draws.len() as f64;
    let mut sq: Vec<f64> = draws.iter().map(|s| (s - center) * (s - center)).collect();
    sq.sort_by(f64::total_cmp);
    let q = quantile_sorted(&sq, 1.0 - alpha)?;
    Ok(PercentileSet { center, half_width: q.sqrt(), alpha })
}

/// Stream coordinates of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationSeed {
    pub master: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMeta {
    pub seed: ReplicationSeed,
    #[serde(flatten)]
    pub fit: FitSummary,
}

/// `R × B` bootstrap statistic values for one method and statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDraws {
    pub statistic: String,
    pub method: BootstrapMethod,
    pub replications: Vec<ReplicationMeta>,
    #[serde(skip)]
    values: Vec<Vec<f64>>,
}

impl BootstrapDraws {
    pub fn new(
        statistic: impl Into<String>,
        method: BootstrapMethod,
        values: Vec<Vec<f64>>,
        replications: Vec<ReplicationMeta>,
    ) -> Result<Self> {
        let b = values.first().map_or(0, Vec::len);
        if b == 0 {
            return Err(Error::InsufficientDraws { needed: 1, got: 0 });
        }
        for (row, v) in values.iter().enumerate() {
            if v.len() != b {
                return Err(Error::Ragged { row, len: v.len(), expected: b });
            }
            if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("non-finite bootstrap value at replication {row}, draw {bad}")));
            }
        }
        if replications.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} metadata rows for {} replications",
                replications.len(),
                values.len()
            )));
        }
        Ok(Self { statistic: statistic.into(), method, replications, values })
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn replication_count(&self) -> usize {
        self.values.len()
    }

    pub fn draw_count(&self) -> usize {
        self.values[0].len()
    }

    /// Long-format CSV: `replication,draw,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replication", "draw", "value"])?;
        for (r, row) in self.values.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                w.write_record(&[r.to_string(), b.to_string(), format!("{v:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar with the method, statistic and per-replication metadata.
    pub fn write_metadata<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Inverse of [`BootstrapDraws::write_csv`] plus [`BootstrapDraws::write_metadata`].
    pub fn read<C: Read, J: Read>(csv_reader: C, json_reader: J) -> Result<Self> {
        let meta: BootstrapDraws = serde_json::from_reader(json_reader)?;
        let mut values: Vec<Vec<f64>> = Vec::new();
        let mut rdr = csv::Reader::from_reader(csv_reader);
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| Error::Config("short CSV record".into()));
            let parse_idx = |s: &str| s.parse::<usize>().map_err(|e| Error::Config(format!("bad index {s}: {e}")));
            let r = parse_idx(field(0)?)?;
            let b = parse_idx(field(1)?)?;
            let v: f64 = field(2)?.parse().map_err(|e| Error::Config(format!("bad value: {e}")))?;
            if r == values.len() {
                values.push(Vec::new());
            }
            let row = values.get_mut(r).ok_or_else(|| Error::Config(format!("replication {r} out of order")))?;
            if b != row.len() {
                return Err(Error::Config(format!("draw {b} out of order in replication {r}")));
            }
            row.push(v);
        }
        Self::new(meta.statistic, meta.method, values, meta.replications)
    }
}
