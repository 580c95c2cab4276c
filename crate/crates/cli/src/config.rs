use std::path::{Path, PathBuf};

use serde::Deserialize;
use ttchaos::pipeline::{FieldSpec, SolverSpec};

use crate::error::CliError;

/// Which discretization path a stage runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PathSel {
    #[default]
    Tt,
    Sparse,
    Both,
}

impl PathSel {
    pub fn tt(self) -> bool {
        matches!(self, Self::Tt | Self::Both)
    }

    pub fn sparse(self) -> bool {
        matches!(self, Self::Sparse | Self::Both)
    }
}

/// One `[[stats.frequency]]` table: a scalar functional and the intervals to count.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySpec {
    /// Value at the unknown nearest to this point; area average when absent.
    pub point: Option<[f64; 2]>,
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSpec {
    /// `solution.ttc` of a higher-order run used for the covariance error.
    pub reference: Option<PathBuf>,
    /// Variable subsets (1-based); all single variables when absent.
    pub sobol: Option<Vec<Vec<usize>>>,
    /// Nodes per variable of the theta grid used for frequencies.
    pub grid_nodes: usize,
    pub frequency: Vec<FrequencySpec>,
}

impl Default for StatsSpec {
    fn default() -> Self {
        Self {
            reference: None,
            sobol: None,
            grid_nodes: 9,
            frequency: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSpec,
    pub solver: SolverSpec,
    pub path: PathSel,
    pub seed: u64,
    pub out: PathBuf,
    pub stats: StatsSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            field: FieldSpec::default(),
            solver: SolverSpec::default(),
            path: PathSel::Tt,
            seed: 1,
            out: PathBuf::from("out"),
            stats: StatsSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // a relative reference is resolved against the config file
        let mut cfg = cfg;
        if let Some(r) = &cfg.stats.reference {
            if r.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.stats.reference = Some(base.join(r));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.field.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.stats.grid_nodes < 2 {
            return Err(CliError::Config("stats.grid_nodes must be at least 2".into()));
        }
        for f in &self.stats.frequency {
            for [lo, hi] in &f.intervals {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(CliError::Config(format!("empty frequency interval [{lo}, {hi}]")));
                }
            }
        }
        if let Some(sets) = &self.stats.sobol {
            for q in sets {
                if q.iter().any(|&v| v == 0 || v > self.field.m) {
                    return Err(CliError::Config(format!("Sobol subset {q:?} outside 1..={}", self.field.m)));
                }
            }
        }
        Ok(())
    }
}
