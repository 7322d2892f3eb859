//! Built-in experiment suites.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sieveboot::{Error, ExperimentConfig, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Fig5,
    Fig6,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }

    fn source(self) -> &'static str {
        match self {
            Preset::Table1 => include_str!("../presets/table1.json"),
            Preset::Table2 => include_str!("../presets/table2.json"),
            Preset::Table3 => include_str!("../presets/table3.json"),
            Preset::Fig5 => include_str!("../presets/fig5.json"),
            Preset::Fig6 => include_str!("../presets/fig6.json"),
        }
    }

    pub fn suite(self) -> Result<Suite> {
        Suite::from_json(self.source())
    }
}

/// Named list of experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub runs: Vec<SuiteRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteRun {
    pub id: String,
    pub config: ExperimentConfig,
}

impl Suite {
    pub fn from_json(text: &str) -> Result<Self> {
        let suite: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if suite.runs.is_empty() {
            return Err(Error::Config(format!("suite {:?} has no runs", suite.name)));
        }
        let mut ids = std::collections::HashSet::new();
        for run in &suite.runs {
            if run.id.is_empty() || run.id.contains(['/', '\\']) || !ids.insert(run.id.as_str()) {
                return Err(Error::Config(format!("bad or duplicate run id {:?}", run.id)));
            }
            run.config.validate()?;
        }
        Ok(suite)
    }

    /// A single configuration as a one-run suite.
    pub fn single(config: ExperimentConfig) -> Self {
        Self { name: "experiment".into(), description: String::new(), runs: vec![SuiteRun { id: String::new(), config }] }
    }
}
