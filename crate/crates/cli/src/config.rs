//! Run configuration: a TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use copula_risk::copulas::CopulaSpec;
use copula_risk::error::{Error, Result};
use copula_risk::estimation::MarginMode;
use serde::{Deserialize, Serialize};

/// Every field is optional in the file; flags override file values and
/// unset fields fall back to the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub asset1: Option<PathBuf>,
    pub asset2: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub panel: Option<PathBuf>,
    pub ar_max: Option<usize>,
    pub ar_orders: Option<[usize; 2]>,
    pub copulas: Option<Vec<String>>,
    pub margin_mode: Option<String>,
    pub margin_starts: Option<usize>,
    pub split_date: Option<NaiveDate>,
    pub alphas: Option<Vec<f64>>,
    pub draws: Option<usize>,
    pub bootstrap: Option<usize>,
    pub band_sims: Option<usize>,
    pub dq_sims: Option<usize>,
    pub benchmark: Option<String>,
    pub weights: Option<[f64; 2]>,
}

pub const DEFAULT_SEED: u64 = 20_130_901;
pub const DEFAULT_AR_MAX: usize = 5;
pub const DEFAULT_BAND_SIMS: usize = 10_000;
pub const DEFAULT_DQ_SIMS: usize = 1000;
pub const DEFAULT_COPULAS: [&str; 8] = [
    "normal",
    "clayton",
    "rotated_gumbel",
    "student_t",
    "sjc",
    "rotated_gumbel_gas",
    "normal_gas",
    "student_t_gas",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Input(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            seed, threads, asset1, asset2, holidays, panel, ar_max, ar_orders, copulas, margin_mode,
            margin_starts, split_date, alphas, draws, bootstrap, band_sims, dq_sims, benchmark, weights
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn ar_max(&self) -> Result<usize> {
        let p = self.ar_max.unwrap_or(DEFAULT_AR_MAX);
        if p > 5 {
            return Err(Error::Input(format!("ar_max {p} exceeds 5")));
        }
        Ok(p)
    }

    pub fn copula_specs(&self) -> Result<Vec<CopulaSpec>> {
        let labels: Vec<String> = match &self.copulas {
            Some(v) => v.clone(),
            None => DEFAULT_COPULAS.iter().map(|s| s.to_string()).collect(),
        };
        if labels.is_empty() {
            return Err(Error::Input("no copula specifications requested".into()));
        }
        labels.iter().map(|l| l.parse()).collect()
    }

    pub fn margin_mode(&self) -> Result<MarginMode> {
        self.margin_mode.as_deref().map_or(Ok(MarginMode::default()), str::parse)
    }

    pub fn alphas(&self) -> Result<Vec<f64>> {
        let a = self
            .alphas
            .clone()
            .unwrap_or_else(|| copula_risk::risk::VAR_LEVELS.to_vec());
        if let Some(bad) = a.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Input(format!("alpha {bad} outside (0, 1)")));
        }
        Ok(a)
    }

    pub fn draws(&self) -> Result<usize> {
        let s = self.draws.unwrap_or(copula_risk::risk::DEFAULT_DRAWS);
        if s < copula_risk::risk::MIN_DRAWS {
            return Err(Error::Input(format!(
                "draws must be at least {}",
                copula_risk::risk::MIN_DRAWS
            )));
        }
        Ok(s)
    }

    pub fn bootstrap(&self) -> Result<usize> {
        match self.bootstrap.unwrap_or(0) {
            b @ (0 | 200..) => Ok(b),
            b => Err(Error::Input(format!("bootstrap replicates must be 0 or at least 200, got {b}"))),
        }
    }

    pub fn portfolio(&self) -> Result<copula_risk::risk::PortfolioSpec> {
        let [w1, w2] = self.weights.unwrap_or([0.5, 0.5]);
        copula_risk::risk::PortfolioSpec::new(w1, w2).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn require_path(&self, field: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        field
            .clone()
            .ok_or_else(|| Error::Input(format!("missing `{name}` (set it in the config or pass --{name})")))
    }
}
