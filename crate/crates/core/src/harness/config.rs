//! Experiment configuration.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acvf::ArfimaSpec;
use crate::bootstrap::BootstrapMethod;
use crate::error::{Error, Result};
use crate::stats::{renormalized_mean, sample_acf, sample_acf_zero_mean, sample_mean};

/// Statistic computed on every data path and every bootstrap path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    /// `T^{1/2-d}(ȳ - μ)` with the configured `d` and `μ = 0`.
    RenormMean,
    Acf(usize),
    /// Autocorrelation with the mean known to be zero.
    Acf0(usize),
}

impl Statistic {
    pub fn id(&self) -> String {
        match self {
            Statistic::Mean => "mean".into(),
            Statistic::RenormMean => "renorm_mean".into(),
            Statistic::Acf(k) => format!("acf_{k}"),
            Statistic::Acf0(k) => format!("acf0_{k}"),
        }
    }

    pub fn parse_id(id: &str) -> Result<Self> {
        let lag = |s: &str| s.parse::<usize>().map_err(|_| Error::Config(format!("bad lag in statistic id {id:?}")));
        match id {
            "mean" => Ok(Statistic::Mean),
            "renorm_mean" => Ok(Statistic::RenormMean),
            _ => {
                if let Some(k) = id.strip_prefix("acf0_") {
                    Ok(Statistic::Acf0(lag(k)?))
                } else if let Some(k) = id.strip_prefix("acf_") {
                    Ok(Statistic::Acf(lag(k)?))
                } else {
                    Err(Error::Config(format!("unknown statistic id {id:?}")))
                }
            }
        }
    }

    pub fn lag(&self) -> Option<usize> {
        match self {
            Statistic::Acf(k) | Statistic::Acf0(k) => Some(*k),
            _ => None,
        }
    }

    pub fn evaluate(&self, series: &[f64], d: f64) -> Result<f64> {
        match *self {
            Statistic::Mean => sample_mean(series),
            Statistic::RenormMean => renormalized_mean(series, d, 0.0),
            Statistic::Acf(k) => sample_acf(series, k),
            Statistic::Acf0(k) => sample_acf_zero_mean(series, k),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Kernel bandwidth choice for density estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `1.06 min(sd, IQR/1.349) n^{-1/5}`.
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: ArfimaSpec,
    /// Series length `T`.
    pub t: usize,
    /// Monte Carlo replications `R`.
    pub replications: usize,
    /// Bootstrap draws `B` per replication and method.
    pub draws: usize,
    pub statistics: Vec<Statistic>,
    #[serde(default)]
    pub methods: Vec<BootstrapMethod>,
    pub seed: u64,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    /// Points in density grids.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; the rayon default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Also keep the raw data and bootstrap paths.
    #[serde(default)]
    pub keep_paths: bool,
}

fn default_grid_points() -> usize {
    512
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.t < 8 {
            return bad(format!("T must be at least 8, got {}", self.t));
        }
        if self.replications == 0 || self.draws == 0 {
            return bad("replications and draws must be positive".into());
        }
        if self.statistics.is_empty() {
            return bad("at least one statistic is required".into());
        }
        for s in &self.statistics {
            if let Some(k) = s.lag() {
                if k == 0 || k >= self.t {
                    return bad(format!("lag {k} must lie in 1..{}", self.t));
                }
            }
        }
        let mut seen = HashSet::new();
        for s in &self.statistics {
            if !seen.insert(s.id()) {
                return bad(format!("statistic {s} listed twice"));
            }
        }
        let mut labels = HashSet::new();
        let mut purposes = HashSet::new();
        for m in &self.methods {
            m.validate().map_err(|e| Error::Config(e.to_string()))?;
            if !labels.insert(m.label()) {
                return bad(format!("method label {:?} used twice", m.label()));
            }
            if !purposes.insert(m.stream_purpose()) {
                return bad(format!("method {:?} shares a random stream with another method", m.label()));
            }
        }
        if self.grid_points < 3 {
            return bad("grid_points must be at least 3".into());
        }
        if let BandwidthRule::Fixed(h) = self.bandwidth {
            if !(h > 0.0) {
                return bad(format!("fixed bandwidth must be positive, got {h}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            spec: ArfimaSpec::new(0.2, 0.3, 1.0).unwrap(),
            t: 100,
            replications: 2,
            draws: 3,
            statistics: vec![Statistic::Mean, Statistic::Acf0(2)],
            methods: vec![BootstrapMethod::sbs()],
            seed: 1,
            bandwidth: BandwidthRule::Silverman,
            grid_points: 64,
            out_dir: None,
            threads: None,
            keep_paths: false,
        }
    }

    #[test]
    fn json_round_trip() {
        let c = base();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let minimal = r#"{"spec":{"d":0.1,"phi":0.0,"sigma2":1.0},"t":50,"replications":1,"draws":1,
            "statistics":["mean",{"acf":1}],"methods":[{"kind":"sbs"}],"seed":7}"#;
        let m = ExperimentConfig::from_json(minimal).unwrap();
        assert_eq!(m.grid_points, 512);
        assert_eq!(m.statistics[1], Statistic::Acf(1));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = base();
        c.t = 5;
        assert!(c.validate().unwrap_err().is_config());
        let mut c = base();
        c.statistics.push(Statistic::Acf(100));
        assert!(c.validate().is_err());
        let mut c = base();
        c.methods.push(BootstrapMethod::sbs());
        assert!(c.validate().is_err());
        let mut c = base();
        c.replications = 0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json("{\"t\": 3}").unwrap_err().is_config());
    }

    #[test]
    fn statistic_ids_round_trip() {
        for s in [Statistic::Mean, Statistic::RenormMean, Statistic::Acf(3), Statistic::Acf0(12)] {
            assert_eq!(Statistic::parse_id(&s.id()).unwrap(), s);
        }
        assert!(Statistic::parse_id("median").is_err());
    }
}
