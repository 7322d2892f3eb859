//! Monte Carlo experiments: configuration, execution, densities and reports.

pub mod config;
pub mod density;
pub mod experiment;
pub mod report;

pub use config::{BandwidthRule, ExperimentConfig, Statistic};
pub use density::{gof_measures, kde, ks_distance, ks_two_sample, DensityEstimate, DensitySource, GofReport};
pub use experiment::{run_experiment, run_experiment_with, Execution, Experiment, ExperimentResult};
pub use report::{average_bootstrap_distribution, build_report, stdev_ratio, stdev_ratio_of, Report};
