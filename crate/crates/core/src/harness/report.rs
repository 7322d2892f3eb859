//! Summary tables and figure data from experiment results.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acvf::{arfima_acvf, exact_mean_variance, ArfimaSpec};
use crate::bootstrap::BootstrapDraws;
use crate::edgeworth::{EdgeworthOptions, EdgeworthPlan, VALIDITY_LIMIT};
use crate::error::{Error, Result};
use crate::harness::config::Statistic;
use crate::harness::density::{covering_grid, gof_measures, kde, ks_distance, DensityEstimate, DensitySource};
use crate::harness::experiment::ExperimentResult;
use crate::stats::quantile_sorted;

/// Sorts each row and averages the order statistics across rows.
pub fn average_bootstrap_distribution(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let b = rows.first().ok_or(Error::EmptyInput)?.len();
    if b == 0 {
        return Err(Error::EmptyInput);
    }
    let mut acc = vec![0.0; b];
    for (row, r) in rows.iter().enumerate() {
        if r.len() != b {
            return Err(Error::Ragged { row, len: r.len(), expected: b });
        }
        let mut s = r.clone();
        s.sort_by(f64::total_cmp);
        for (a, v) in acc.iter_mut().zip(&s) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// For each probability, the quantile across replications of every column of
/// the row-sorted draws: `out[p][column]`.
pub fn column_quantiles(rows: &[Vec<f64>], probs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let b = rows.first().ok_or(Error::EmptyInput)?.len();
    let mut sorted_rows = Vec::with_capacity(rows.len());
    for (row, r) in rows.iter().enumerate() {
        if r.len() != b {
            return Err(Error::Ragged { row, len: r.len(), expected: b });
        }
        let mut s = r.clone();
        s.sort_by(f64::total_cmp);
        sorted_rows.push(s);
    }
    let mut out = vec![Vec::with_capacity(b); probs.len()];
    for j in 0..b {
        let mut col: Vec<f64> = sorted_rows.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        for (o, &p) in out.iter_mut().zip(probs) {
            o.push(quantile_sorted(&col, p)?);
        }
    }
    Ok(out)
}

/// Sample standard deviation (divisor `n - 1`).
pub fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Standard deviation of `averaged` as a percentage of the exact standard
/// deviation of the sample mean.
pub fn stdev_ratio_of(averaged: &[f64], spec: &ArfimaSpec, t: usize) -> Result<f64> {
    if averaged.len() < 2 {
        return Err(Error::InsufficientDraws { needed: 2, got: averaged.len() });
    }
    let exact = exact_mean_variance(&arfima_acvf(spec, t)?, t)?;
    Ok(100.0 * std_dev(averaged) / exact.sqrt())
}

/// [`stdev_ratio_of`] applied to the average bootstrap distribution of the mean.
pub fn stdev_ratio(draws: &BootstrapDraws, spec: &ArfimaSpec, t: usize) -> Result<f64> {
    if draws.statistic != Statistic::Mean.id() {
        return Err(Error::Config(format!("standard-deviation ratio needs the mean, got {}", draws.statistic)));
    }
    stdev_ratio_of(&average_bootstrap_distribution(draws.values())?, spec, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdevRatioRow {
    pub method: String,
    pub d: f64,
    pub phi: f64,
    pub t: usize,
    pub ratio: f64,
    pub mean_order: f64,
    pub mean_d_pre: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofRow {
    pub statistic: String,
    pub subject: String,
    pub rmsd: f64,
    pub kld: f64,
    pub gini: f64,
    pub clipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthRow {
    pub statistic: String,
    pub lag: usize,
    /// `sup |F̃ - F_MC|`.
    pub sup_mc: f64,
    /// `sup |F̃ - F_avg|` per method.
    pub sup_methods: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub stdev_ratios: Vec<StdevRatioRow>,
    pub gof: Vec<GofRow>,
    pub edgeworth: Vec<EdgeworthRow>,
    /// Densities per statistic: Monte Carlo, each method and, where valid, the
    /// expansion.
    pub densities: Vec<(String, Vec<DensityEstimate>)>,
    /// Per-column quantiles of the sorted draws per (method, statistic).
    pub quantiles: Vec<(String, String, Vec<Vec<f64>>)>,
}

pub const QUANTILE_PROBS: [f64; 3] = [0.25, 0.5, 0.75];

impl Report {
    /// Ratio of `subject`'s measures to `baseline`'s for one statistic.
    pub fn gof_ratio(&self, statistic: &str, subject: &str, baseline: &str) -> Option<[f64; 3]> {
        let find = |s: &str| self.gof.iter().find(|r| r.statistic == statistic && r.subject == s);
        let (a, b) = (find(subject)?, find(baseline)?);
        Some([a.rmsd / b.rmsd, a.kld / b.kld, a.gini / b.gini])
    }

    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            let p = dir.join(name);
            let w = csv::Writer::from_writer(BufWriter::new(File::create(&p)?));
            written.push(p);
            Ok(w)
        };

        let mut w = open("table_stdev_ratio.csv")?;
        w.write_record(["method", "d", "phi", "t", "ratio_percent", "mean_order", "mean_d_pre"])?;
        for r in &self.stdev_ratios {
            w.write_record(&[
                r.method.clone(),
                r.d.to_string(),
                r.phi.to_string(),
                r.t.to_string(),
                format!("{:.4}", r.ratio),
                format!("{:.4}", r.mean_order),
                r.mean_d_pre.map_or(String::new(), |d| format!("{d:.6}")),
            ])?;
        }
        w.flush()?;

        let mut w = open("table_gof.csv")?;
        w.write_record(["statistic", "subject", "rmsd", "kld", "gini", "clipped"])?;
        for r in &self.gof {
            w.write_record(&[
                r.statistic.clone(),
                r.subject.clone(),
                format!("{:e}", r.rmsd),
                format!("{:e}", r.kld),
                format!("{:e}", r.gini),
                r.clipped.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = open("table_gof_relative.csv")?;
        w.write_record(["statistic", "subject", "baseline", "rmsd_ratio", "kld_ratio", "gini_ratio"])?;
        for r in &self.gof {
            if r.subject == "sbs" || r.subject == "mc" {
                continue;
            }
            if let Some(q) = self.gof_ratio(&r.statistic, &r.subject, "sbs") {
                w.write_record(&[
                    r.statistic.clone(),
                    r.subject.clone(),
                    "sbs".into(),
                    format!("{:.6}", q[0]),
                    format!("{:.6}", q[1]),
                    format!("{:.6}", q[2]),
                ])?;
            }
        }
        w.flush()?;

        if !self.edgeworth.is_empty() {
            let mut w = open("edgeworth_sup.csv")?;
            w.write_record(["statistic", "lag", "comparison", "sup_distance"])?;
            for r in &self.edgeworth {
                w.write_record(&[r.statistic.clone(), r.lag.to_string(), "mc".into(), format!("{:e}", r.sup_mc)])?;
                for (m, v) in &r.sup_methods {
                    w.write_record(&[r.statistic.clone(), r.lag.to_string(), m.clone(), format!("{v:e}")])?;
                }
            }
            w.flush()?;
        }

        for (stat, dens) in &self.densities {
            let mut w = open(&format!("density_{stat}.csv"))?;
            w.write_record(["source", "x", "pdf", "cdf"])?;
            for d in dens {
                for i in 0..d.x.len() {
                    w.write_record(&[
                        d.source.label().to_string(),
                        format!("{:e}", d.x[i]),
                        format!("{:e}", d.pdf[i]),
                        format!("{:e}", d.cdf[i]),
                    ])?;
                }
            }
            w.flush()?;
        }

        for (method, stat, q) in &self.quantiles {
            let mut w = open(&format!("quantiles_{method}_{stat}.csv"))?;
            let mut header = vec!["order_statistic".to_string()];
            header.extend(QUANTILE_PROBS.iter().map(|p| format!("q{p}")));
            w.write_record(&header)?;
            for j in 0..q[0].len() {
                let mut row = vec![(j + 1).to_string()];
                row.extend(q.iter().map(|col| format!("{:e}", col[j])));
                w.write_record(&row)?;
            }
            w.flush()?;
        }

        let summary = dir.join("report.json");
        let slim = serde_json::json!({
            "stdev_ratios": self.stdev_ratios,
            "gof": self.gof,
            "edgeworth": self.edgeworth,
        });
        std::fs::write(&summary, serde_json::to_string_pretty(&slim)?)?;
        written.push(summary);
        Ok(written)
    }
}

/// Tables and figure data for every statistic and method of `result`.
pub fn build_report(result: &ExperimentResult) -> Result<Report> {
    let cfg = &result.config;
    let mut report = Report {
        stdev_ratios: Vec::new(),
        gof: Vec::new(),
        edgeworth: Vec::new(),
        densities: Vec::new(),
        quantiles: Vec::new(),
    };

    if let Some(si) = result.statistic_index(&Statistic::Mean) {
        for (m, per_stat) in cfg.methods.iter().zip(&result.draws) {
            let d = &per_stat[si];
            let n = d.replications.len() as f64;
            let pre: Vec<f64> = d.replications.iter().filter_map(|r| r.fit.d_pre).collect();
            report.stdev_ratios.push(StdevRatioRow {
                method: m.label(),
                d: cfg.spec.d,
                phi: cfg.spec.phi,
                t: cfg.t,
                ratio: stdev_ratio(d, &cfg.spec, cfg.t)?,
                mean_order: d.replications.iter().map(|r| r.fit.h as f64).sum::<f64>() / n,
                mean_d_pre: (!pre.is_empty()).then(|| pre.iter().sum::<f64>() / pre.len() as f64),
            });
        }
    }

    let acvf = (cfg.spec.d < VALIDITY_LIMIT).then(|| arfima_acvf(&cfg.spec, cfg.t)).transpose()?;
    for (si, stat) in cfg.statistics.iter().enumerate() {
        let id = stat.id();
        let mc = &result.mc[si];
        let averaged: Vec<(String, Vec<f64>)> = cfg
            .methods
            .iter()
            .zip(&result.draws)
            .map(|(m, per_stat)| Ok((m.label(), average_bootstrap_distribution(per_stat[si].values())?)))
            .collect::<Result<_>>()?;

        let plan = match (stat, &acvf) {
            (Statistic::Acf0(k), Some(a)) => Some(EdgeworthPlan::new(*k, a, cfg.t, cfg.spec.d, &EdgeworthOptions::default())?),
            _ => None,
        };
        if let (Some(plan), Statistic::Acf0(k)) = (&plan, stat) {
            let f = |x: f64| plan.point_rho0(x).map(|p| p.cdf).unwrap_or(f64::NAN);
            report.edgeworth.push(EdgeworthRow {
                statistic: id.clone(),
                lag: *k,
                sup_mc: ks_distance(mc, f)?,
                sup_methods: averaged.iter().map(|(l, a)| Ok((l.clone(), ks_distance(a, f)?))).collect::<Result<_>>()?,
            });
        }

        if mc.len() < 2 {
            continue;
        }
        let mut samples: Vec<&[f64]> = vec![mc.as_slice()];
        samples.extend(averaged.iter().map(|(_, a)| a.as_slice()));
        let spread = samples.iter().map(|s| std_dev(s)).filter(|s| s.is_finite()).fold(0.0, f64::max);
        let grid = covering_grid(&samples, 4.0 * spread.max(f64::MIN_POSITIVE), cfg.grid_points)?;
        let mc_density = kde(mc, &grid, cfg.bandwidth, DensitySource::Mc)?;
        let mut dens = vec![mc_density.clone()];
        for (label, avg) in &averaged {
            let est = kde(avg, &grid, cfg.bandwidth, DensitySource::from_label(label))?;
            let g = gof_measures(&est, &mc_density, mc)?;
            report.gof.push(GofRow {
                statistic: id.clone(),
                subject: label.clone(),
                rmsd: g.rmsd,
                kld: g.kld,
                gini: g.gini,
                clipped: g.clipped,
            });
            dens.push(est);
        }
        if let Some(plan) = &plan {
            let curve = plan.curve(&plan.standard_grid(6.0), false)?;
            let est = DensityEstimate::from_edgeworth(&curve);
            let g = gof_measures(&est, &mc_density, mc)?;
            report.gof.push(GofRow {
                statistic: id.clone(),
                subject: "edgeworth".into(),
                rmsd: g.rmsd,
                kld: g.kld,
                gini: g.gini,
                clipped: g.clipped,
            });
            dens.push(est);
        }
        report.densities.push((id.clone(), dens));
        for (m, per_stat) in cfg.methods.iter().zip(&result.draws) {
            report.quantiles.push((m.label(), id.clone(), column_quantiles(per_stat[si].values(), &QUANTILE_PROBS)?));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{BootstrapMethod, FitSummary, ReplicationMeta, ReplicationSeed};
    use crate::harness::config::{BandwidthRule, ExperimentConfig};
    use crate::harness::experiment::run_experiment;
    use crate::rng::stream;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn averaging_examples() {
        assert_eq!(average_bootstrap_distribution(&[vec![3.0, 1.0, 2.0]]).unwrap(), vec![1.0, 2.0, 3.0]);
        let row = vec![5.0, -1.0, 2.0];
        assert_eq!(average_bootstrap_distribution(&[row.clone(), row.clone()]).unwrap(), vec![-1.0, 2.0, 5.0]);
        assert_eq!(average_bootstrap_distribution(&[vec![1.0, 3.0], vec![5.0, 7.0]]).unwrap(), vec![3.0, 5.0]);
        assert!(matches!(
            average_bootstrap_distribution(&[vec![1.0, 3.0], vec![5.0]]),
            Err(Error::Ragged { row: 1, len: 1, expected: 2 })
        ));
        let avg = average_bootstrap_distribution(&[vec![9.0, -3.0, 0.5], vec![0.0, 4.0, -8.0]]).unwrap();
        assert!(avg.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn column_quantile_shape() {
        let q = column_quantiles(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], &QUANTILE_PROBS).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q[1], vec![3.0, 4.0]);
    }

    #[test]
    fn exact_normal_draws_give_full_ratio() {
        let spec = ArfimaSpec::new(0.3, 0.3, 1.0).unwrap();
        let t = 100;
        let sd = exact_mean_variance(&arfima_acvf(&spec, t).unwrap(), t).unwrap().sqrt();
        let normal = Normal::new(0.0, sd).unwrap();
        let mut rng = stream(5, 5);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..1000).map(|_| normal.sample(&mut rng)).collect()).collect();
        let meta = ReplicationMeta {
            seed: ReplicationSeed { master: 5, stream: 0 },
            fit: FitSummary { h: 0, d_pre: None, d_requested: None, clamped: false },
        };
        let draws = BootstrapDraws::new("mean", BootstrapMethod::sbs(), rows, vec![meta; 50]).unwrap();
        let r = stdev_ratio(&draws, &spec, t).unwrap();
        assert!((r - 100.0).abs() < 2.0, "{r}");
        let wrong = BootstrapDraws::new("acf_1", BootstrapMethod::sbs(), vec![vec![0.0, 1.0]], vec![meta]).unwrap();
        assert!(stdev_ratio(&wrong, &spec, t).is_err());
    }

    #[test]
    fn report_from_small_experiment() {
        let cfg = ExperimentConfig {
            spec: ArfimaSpec::new(0.05, 0.3, 1.0).unwrap(),
            t: 80,
            replications: 20,
            draws: 30,
            statistics: vec![Statistic::Mean, Statistic::Acf0(1)],
            methods: vec![BootstrapMethod::sbs(), BootstrapMethod::pfsbs()],
            seed: 3,
            bandwidth: BandwidthRule::Silverman,
            grid_points: 128,
            out_dir: None,
            threads: None,
            keep_paths: false,
        };
        let res = run_experiment(&cfg).unwrap();
        let rep = build_report(&res).unwrap();
        assert_eq!(rep.stdev_ratios.len(), 2);
        assert_eq!(rep.edgeworth.len(), 1);
        assert_eq!(rep.gof.iter().filter(|g| g.statistic == "acf0_1").count(), 3);
        assert!(rep.gof.iter().all(|g| g.rmsd >= 0.0 && (0.0..=1.0).contains(&g.gini)));
        assert!(rep.gof_ratio("mean", "pfsbs", "sbs").is_some());
        let dir = tempfile::tempdir().unwrap();
        let files = rep.write_dir(dir.path()).unwrap();
        assert!(files.iter().any(|f| f.ends_with("table_stdev_ratio.csv")));
        assert!(files.iter().any(|f| f.ends_with("edgeworth_sup.csv")));
        assert!(files.iter().any(|f| f.ends_with("density_acf0_1.csv")));
    }
}
