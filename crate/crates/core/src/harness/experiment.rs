//! Monte Carlo engine: simulate, bootstrap, collect.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::acvf::arfima_acvf;
use crate::bootstrap::{BootstrapDraws, FitSummary, PreparedBootstrap, ReplicationMeta, ReplicationSeed};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Statistic};
use crate::levinson::GaussianSimulator;
use crate::rng::{stream, stream_id, DATA_PURPOSE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Everything one replication produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutput {
    /// Statistic values on the data path, in config order.
    pub mc: Vec<f64>,
    pub methods: Vec<MethodOutput>,
    pub data_path: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub fit: FitSummary,
    pub stream: u64,
    /// `values[statistic][draw]`.
    pub values: Vec<Vec<f64>>,
    pub paths: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// `mc[statistic][replication]`.
    pub mc: Vec<Vec<f64>>,
    /// `draws[method][statistic]`.
    pub draws: Vec<Vec<BootstrapDraws>>,
    pub data_paths: Option<Vec<Vec<f64>>>,
    /// `bootstrap_paths[method][replication][draw]`.
    pub bootstrap_paths: Option<Vec<Vec<Vec<Vec<f64>>>>>,
}

/// Shared, read-only state of an experiment.
#[derive(Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    simulator: GaussianSimulator,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let acvf = arfima_acvf(&config.spec, config.t)?;
        let simulator = GaussianSimulator::new(&acvf, config.t)?;
        Ok(Self { config, simulator })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn data_stream(&self, replication: usize) -> u64 {
        stream_id(replication as u64, DATA_PURPOSE)
    }

    /// Simulated series of one replication.
    pub fn data_path(&self, replication: usize) -> Vec<f64> {
        self.simulator.sample(&mut stream(self.config.seed, self.data_stream(replication)))
    }

    pub fn replication(&self, index: usize) -> Result<ReplicationOutput> {
        let cfg = &self.config;
        let wrap = |stream: u64| move |e: Error| Error::Replication { index, stream, source: Box::new(e) };
        let data_stream = self.data_stream(index);
        let y = self.data_path(index);
        let mc = cfg
            .statistics
            .iter()
            .map(|s| s.evaluate(&y, cfg.spec.d))
            .collect::<Result<Vec<f64>>>()
            .map_err(wrap(data_stream))?;
        let mut methods = Vec::with_capacity(cfg.methods.len());
        for m in &cfg.methods {
            let id = stream_id(index as u64, m.stream_purpose());
            let prepared = PreparedBootstrap::new(&y, m).map_err(wrap(id))?;
            let mut rng = stream(cfg.seed, id);
            let mut scratch: Vec<Complex64> = Vec::new();
            let mut values = vec![Vec::with_capacity(cfg.draws); cfg.statistics.len()];
            let mut paths = cfg.keep_paths.then(|| Vec::with_capacity(cfg.draws));
            for _ in 0..cfg.draws {
                let path = prepared.draw_with(&mut rng, &mut scratch);
                for (s, out) in cfg.statistics.iter().zip(values.iter_mut()) {
                    out.push(s.evaluate(&path, cfg.spec.d).map_err(wrap(id))?);
                }
                if let Some(p) = paths.as_mut() {
                    p.push(path);
                }
            }
            methods.push(MethodOutput { fit: prepared.summary(), stream: id, values, paths });
        }
        Ok(ReplicationOutput { mc, methods, data_path: cfg.keep_paths.then_some(y) })
    }

    pub fn run(&self, execution: Execution) -> Result<ExperimentResult> {
        let r = self.config.replications;
        let outputs: Vec<Result<ReplicationOutput>> = match execution {
            Execution::Serial => (0..r).map(|i| self.replication(i)).collect(),
            Execution::Parallel => match self.config.threads {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                    pool.install(|| (0..r).into_par_iter().map(|i| self.replication(i)).collect())
                }
                None => (0..r).into_par_iter().map(|i| self.replication(i)).collect(),
            },
        };
        // the first failure by replication index, whatever order workers ran in
        let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
        self.assemble(outputs)
    }

    fn assemble(&self, outputs: Vec<ReplicationOutput>) -> Result<ExperimentResult> {
        let cfg = &self.config;
        let ns = cfg.statistics.len();
        let mc: Vec<Vec<f64>> = (0..ns).map(|s| outputs.iter().map(|o| o.mc[s]).collect()).collect();
        let mut draws = Vec::with_capacity(cfg.methods.len());
        let mut boot_paths = cfg.keep_paths.then(Vec::new);
        for (mi, m) in cfg.methods.iter().enumerate() {
            let meta: Vec<ReplicationMeta> = outputs
                .iter()
                .map(|o| ReplicationMeta {
                    seed: ReplicationSeed { master: cfg.seed, stream: o.methods[mi].stream },
                    fit: o.methods[mi].fit,
                })
                .collect();
            let per_stat = cfg
                .statistics
                .iter()
                .enumerate()
                .map(|(si, s)| {
                    let rows = outputs.iter().map(|o| o.methods[mi].values[si].clone()).collect();
                    BootstrapDraws::new(s.id(), m.clone(), rows, meta.clone())
                })
                .collect::<Result<Vec<_>>>()?;
            draws.push(per_stat);
            if let Some(bp) = boot_paths.as_mut() {
                bp.push(outputs.iter().map(|o| o.methods[mi].paths.clone().unwrap_or_default()).collect());
            }
        }
        let data_paths = cfg.keep_paths.then(|| outputs.iter().map(|o| o.data_path.clone().unwrap_or_default()).collect());
        Ok(ExperimentResult { config: cfg.clone(), mc, draws, data_paths, bootstrap_paths: boot_paths })
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    Experiment::new(config.clone())?.run(Execution::Parallel)
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentResult> {
    Experiment::new(config.clone())?.run(execution)
}

pub const CONFIG_FILE: &str = "config.json";
pub const MC_FILE: &str = "mc.csv";

fn draws_stem(label: &str, stat: &Statistic) -> String {
    format!("draws_{label}_{}", stat.id())
}

impl ExperimentResult {
    pub fn statistic_index(&self, s: &Statistic) -> Option<usize> {
        self.config.statistics.iter().position(|x| x == s)
    }

    pub fn method_index(&self, label: &str) -> Option<usize> {
        self.config.methods.iter().position(|m| m.label() == label)
    }

    pub fn mc_values(&self, s: &Statistic) -> Option<&[f64]> {
        self.statistic_index(s).map(|i| self.mc[i].as_slice())
    }

    pub fn draws_for(&self, label: &str, s: &Statistic) -> Option<&BootstrapDraws> {
        Some(&self.draws[self.method_index(label)?][self.statistic_index(s)?])
    }

    /// Writes config, Monte Carlo values, draws with sidecars and, when kept,
    /// paths. Returns the files written.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let cfg_path = dir.join(CONFIG_FILE);
        std::fs::write(&cfg_path, self.config.to_json())?;
        written.push(cfg_path);

        let mc_path = dir.join(MC_FILE);
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&mc_path)?));
        let mut header = vec!["replication".to_string()];
        header.extend(self.config.statistics.iter().map(Statistic::id));
        w.write_record(&header)?;
        for r in 0..self.config.replications {
            let mut row = vec![r.to_string()];
            row.extend(self.mc.iter().map(|col| format!("{:e}", col[r])));
            w.write_record(&row)?;
        }
        w.flush()?;
        written.push(mc_path);

        for (m, per_stat) in self.config.methods.iter().zip(&self.draws) {
            for (s, d) in self.config.statistics.iter().zip(per_stat) {
                let stem = draws_stem(&m.label(), s);
                let csv_path = dir.join(format!("{stem}.csv"));
                let json_path = dir.join(format!("{stem}.json"));
                d.write_csv(BufWriter::new(File::create(&csv_path)?))?;
                d.write_metadata(BufWriter::new(File::create(&json_path)?))?;
                written.push(csv_path);
                written.push(json_path);
            }
        }

        if let Some(paths) = &self.data_paths {
            let p = dir.join("paths_data.csv");
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&p)?));
            w.write_record(["replication", "t", "value"])?;
            for (r, path) in paths.iter().enumerate() {
                for (t, v) in path.iter().enumerate() {
                    w.write_record(&[r.to_string(), (t + 1).to_string(), format!("{v:e}")])?;
                }
            }
            w.flush()?;
            written.push(p);
        }
        if let Some(all) = &self.bootstrap_paths {
            for (m, per_rep) in self.config.methods.iter().zip(all) {
                let p = dir.join(format!("paths_{}.csv", m.label()));
                let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&p)?));
                w.write_record(["replication", "draw", "t", "value"])?;
                for (r, per_draw) in per_rep.iter().enumerate() {
                    for (b, path) in per_draw.iter().enumerate() {
                        for (t, v) in path.iter().enumerate() {
                            w.write_record(&[r.to_string(), b.to_string(), (t + 1).to_string(), format!("{v:e}")])?;
                        }
                    }
                }
                w.flush()?;
                written.push(p);
            }
        }
        Ok(written)
    }

    /// Reads what [`ExperimentResult::write_dir`] wrote, without paths.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let config = ExperimentConfig::from_json(&std::fs::read_to_string(dir.join(CONFIG_FILE))?)?;
        let ns = config.statistics.len();
        let mut mc = vec![Vec::with_capacity(config.replications); ns];
        let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(dir.join(MC_FILE))?));
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != ns + 1 {
                return Err(Error::Config(format!("{MC_FILE}: expected {} columns, got {}", ns + 1, rec.len())));
            }
            for (s, col) in mc.iter_mut().enumerate() {
                col.push(rec[s + 1].parse().map_err(|e| Error::Config(format!("{MC_FILE}: {e}")))?);
            }
        }
        if mc.first().map_or(0, Vec::len) != config.replications {
            return Err(Error::Config(format!("{MC_FILE} does not hold {} replications", config.replications)));
        }
        let mut draws = Vec::new();
        for m in &config.methods {
            let mut per_stat = Vec::new();
            for s in &config.statistics {
                let stem = draws_stem(&m.label(), s);
                let c = BufReader::new(File::open(dir.join(format!("{stem}.csv")))?);
                let j = BufReader::new(File::open(dir.join(format!("{stem}.json")))?);
                per_stat.push(BootstrapDraws::read(c, j)?);
            }
            draws.push(per_stat);
        }
        Ok(Self { config, mc, draws, data_paths: None, bootstrap_paths: None })
    }
}
