//! Multi-stage maximum likelihood: margins first, then the copula on the
//! PIT pairs, plus stationary block-bootstrap standard errors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::{self, CopulaFit, CopulaSpec, Dynamics};
use crate::distributions::EmpiricalDist;
use crate::error::{Error, Result};
use crate::margins::{self, FitOptions, MarginFit};
use crate::market_data::ReturnPanel;
use crate::{seed, stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    /// Skewed-t PITs from the fitted Realized-GARCH margins.
    #[default]
    Parametric,
    /// Rescaled empirical CDF of the standardized residuals.
    Semiparametric,
}

impl std::str::FromStr for MarginMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parametric" => Ok(MarginMode::Parametric),
            "semiparametric" => Ok(MarginMode::Semiparametric),
            _ => Err(Error::Input(format!("unknown margin mode `{s}`"))),
        }
    }
}

/// Stage-one output: both margin fits and the PIT pairs the copula sees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginStage {
    pub mode: MarginMode,
    pub margins: [MarginFit; 2],
    pub pairs: Vec<(f64, f64)>,
}

impl MarginStage {
    /// Log-likelihood contributed by the margins (zero when semiparametric).
    pub fn loglik(&self) -> f64 {
        match self.mode {
            MarginMode::Parametric => self.margins.iter().map(|m| m.loglik_partial).sum(),
            MarginMode::Semiparametric => 0.0,
        }
    }

    /// Empirical distribution of margin `i`'s in-sample standardized residuals.
    pub fn ecdf(&self, i: usize) -> Result<EmpiricalDist> {
        EmpiricalDist::new(&self.margins[i].z)
    }

    /// PITs of new standardized residuals for margin `i` under this stage's mode.
    pub fn pit(&self, i: usize, z: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            MarginMode::Parametric => {
                let dist = crate::distributions::SkewT::new(self.margins[i].params.innov)?;
                Ok(margins::pit(z, &dist))
            }
            MarginMode::Semiparametric => {
                let e = self.ecdf(i)?;
                Ok(z.iter().map(|&v| rescaled_rank(&e, v)).collect())
            }
        }
    }
}

/// ECDF value kept strictly inside (0, 1): values below the sample minimum
/// map to `1 / (2 (T + 1))`.
fn rescaled_rank(e: &EmpiricalDist, z: f64) -> f64 {
    let v = e.eval(z);
    if v > 0.0 {
        v
    } else {
        0.5 / (e.len() + 1) as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MsmlSpec {
    pub ar_orders: [usize; 2],
    pub copula: CopulaSpec,
    pub margin_mode: MarginMode,
    /// Multistart count for each margin.
    pub margin_starts: usize,
    pub seed: u64,
}

impl MsmlSpec {
    pub fn new(ar_orders: [usize; 2], copula: CopulaSpec, margin_mode: MarginMode) -> Self {
        Self {
            ar_orders,
            copula,
            margin_mode,
            margin_starts: 5,
            seed: 0,
        }
    }
}

/// Full conditional joint distribution: two margins and one copula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointModel {
    pub stage: MarginStage,
    pub copula: CopulaFit,
    /// Margins plus copula (parametric) or copula only (semiparametric).
    pub loglik_total: f64,
}

impl JointModel {
    pub fn new(stage: MarginStage, copula: CopulaFit) -> Self {
        let loglik_total = stage.loglik() + copula.loglik;
        Self {
            stage,
            copula,
            loglik_total,
        }
    }

    pub fn margin_mode(&self) -> MarginMode {
        self.stage.mode
    }
}

/// Stage one: fit both Realized-GARCH margins and build PIT pairs.
pub fn fit_margins(
    panel: &ReturnPanel,
    ar_orders: [usize; 2],
    mode: MarginMode,
    opts: &FitOptions,
) -> Result<MarginStage> {
    fit_margins_from(panel, ar_orders, mode, opts, [None, None])
}

fn fit_margins_from(
    panel: &ReturnPanel,
    ar_orders: [usize; 2],
    mode: MarginMode,
    opts: &FitOptions,
    init: [Option<&margins::RealGarchParams>; 2],
) -> Result<MarginStage> {
    panel.check_estimable()?;
    let fit = |i: usize| {
        let o = FitOptions {
            seed: seed::derive(opts.seed, "margin", i as u64),
            ..opts.clone()
        };
        margins::rg_fit_with(panel.asset(i), ar_orders[i], init[i], &o)
    };
    let m1 = fit(0)?;
    let m2 = fit(1)?;
    let mut stage = MarginStage {
        mode,
        pairs: vec![],
        margins: [m1, m2],
    };
    let u1 = match mode {
        MarginMode::Parametric => stage.margins[0].u.clone(),
        MarginMode::Semiparametric => stage.pit(0, &stage.margins[0].z)?,
    };
    let u2 = match mode {
        MarginMode::Parametric => stage.margins[1].u.clone(),
        MarginMode::Semiparametric => stage.pit(1, &stage.margins[1].z)?,
    };
    stage.pairs = u1.into_iter().zip(u2).collect();
    Ok(stage)
}

/// Stage two: fit a copula on PIT pairs only.
pub fn fit_copula(pairs: &[(f64, f64)], spec: CopulaSpec) -> Result<CopulaFit> {
    fit_copula_from(pairs, spec, None)
}

fn fit_copula_from(pairs: &[(f64, f64)], spec: CopulaSpec, init: Option<&CopulaFit>) -> Result<CopulaFit> {
    spec.validate()?;
    match spec.dynamics {
        Dynamics::Constant => copulas::constant_fit(spec.family, pairs),
        Dynamics::Gas => copulas::gas_fit(spec.family, pairs, init.and_then(|f| f.gas.as_ref())),
    }
}

/// Two-step estimation of margins and copula.
pub fn msml_fit(panel: &ReturnPanel, spec: &MsmlSpec) -> Result<JointModel> {
    let opts = FitOptions {
        starts: spec.margin_starts,
        seed: spec.seed,
        ..FitOptions::default()
    };
    let stage = fit_margins(panel, spec.ar_orders, spec.margin_mode, &opts)?;
    let copula = fit_copula(&stage.pairs, spec.copula)?;
    Ok(JointModel::new(stage, copula))
}

/// Named parameter vector of a joint model: margin 1, margin 2, copula.
pub fn parameter_vector(model: &JointModel) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (i, m) in model.stage.margins.iter().enumerate() {
        let p = &m.params;
        let tag = |n: &str| format!("m{}.{n}", i + 1);
        out.push((tag("mu"), p.mu));
        for (k, a) in p.ar.iter().enumerate() {
            out.push((tag(&format!("ar{}", k + 1)), *a));
        }
        for (n, v) in [
            ("omega", p.omega),
            ("beta", p.beta),
            ("gamma", p.gamma),
            ("psi", p.psi),
            ("phi", p.phi),
            ("tau1", p.tau1),
            ("tau2", p.tau2),
            ("sigma_u2", p.sigma_u2),
            ("nu_inv", p.innov.nu_inv()),
            ("lambda", p.innov.lambda),
        ] {
            out.push((tag(n), v));
        }
    }
    for (n, v) in model.copula.named_params() {
        out.push((format!("copula.{n}"), v));
    }
    out
}

/// Inverse degrees of freedom below this are reported as sitting on the
/// normal-limit boundary.
pub const NU_INV_BOUNDARY: f64 = 1e-4;

/// Names of estimates on the edge of their admissible region: `nu_inv` at
/// the normal limit or next to its upper bound. Such estimates are kept
/// and only flagged.
pub fn boundary_estimates(model: &JointModel) -> Vec<String> {
    parameter_vector(model)
        .into_iter()
        .filter(|(n, v)| n.ends_with("nu_inv") && (*v < NU_INV_BOUNDARY || *v > 0.48))
        .map(|(n, _)| n)
        .collect()
}

/// Stationary-bootstrap row indices with geometric block lengths of mean `mean_block`.
pub fn stationary_bootstrap_indices<R: Rng + ?Sized>(n: usize, mean_block: f64, rng: &mut R) -> Vec<usize> {
    let p = 1.0 / mean_block.max(1.0);
    let mut idx = Vec::with_capacity(n);
    let mut cur = rng.random_range(0..n);
    while idx.len() < n {
        idx.push(cur);
        if rng.random::<f64>() < p {
            cur = rng.random_range(0..n);
        } else {
            cur = (cur + 1) % n;
        }
    }
    idx
}

/// Default mean block length `ceil(T^(1/3))`.
pub fn default_block_len(n: usize) -> f64 {
    (n as f64).cbrt().ceil()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub names: Vec<String>,
    pub estimate: Vec<f64>,
    pub replicates: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    /// Percentile interval (5%, 95%).
    pub ci90: Vec<(f64, f64)>,
    pub failed: usize,
}

/// Generic stationary bootstrap of a vector statistic over row indices.
///
/// Replicates run in parallel with seeds derived from `(seed, index)`; failed
/// replicates are dropped, and more than 10% failures is an error.
pub fn bootstrap<F>(
    n: usize,
    estimate: Vec<f64>,
    names: Vec<String>,
    replicates: usize,
    mean_block: f64,
    seed: u64,
    stat: F,
) -> Result<BootstrapResult>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    let results: Vec<Result<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::rng(seed, "bootstrap", b as u64);
            let idx = stationary_bootstrap_indices(n, mean_block, &mut rng);
            stat(&idx)
        })
        .collect();
    let total = results.len();
    let mut reps = Vec::with_capacity(total);
    for r in results {
        match r {
            Ok(v) if v.len() == estimate.len() && v.iter().all(|x| x.is_finite()) => reps.push(v),
            Ok(_) => {}
            Err(e) => log::debug!("bootstrap replicate failed: {e}"),
        }
    }
    let failed = total - reps.len();
    if failed * 10 > total || reps.len() < 2 {
        return Err(Error::ReplicateFailures { failed, total });
    }
    let k = estimate.len();
    let mut se = Vec::with_capacity(k);
    let mut ci90 = Vec::with_capacity(k);
    for j in 0..k {
        let mut col: Vec<f64> = reps.iter().map(|r| r[j]).collect();
        se.push(stats::std_dev(&col));
        col.sort_by(f64::total_cmp);
        ci90.push((stats::quantile_sorted(&col, 0.05), stats::quantile_sorted(&col, 0.95)));
    }
    Ok(BootstrapResult {
        names,
        estimate,
        replicates: reps,
        se,
        ci90,
        failed,
    })
}

/// Block-bootstrap standard errors of every MSML parameter.
///
/// Rows (both assets' return and realized variance) are resampled jointly;
/// each replicate refits from the original estimates.
pub fn block_bootstrap_se(
    panel: &ReturnPanel,
    model: &JointModel,
    replicates: usize,
    block_len: Option<f64>,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicates < 200 {
        return Err(Error::Input(format!("at least 200 bootstrap replicates are required, got {replicates}")));
    }
    let named = parameter_vector(model);
    let (names, estimate): (Vec<String>, Vec<f64>) = named.into_iter().unzip();
    let orders = [model.stage.margins[0].params.ar.len(), model.stage.margins[1].params.ar.len()];
    let opts = FitOptions {
        starts: 1,
        seed,
        ..FitOptions::default()
    };
    let spec = model.copula.spec;
    bootstrap(
        panel.len(),
        estimate,
        names,
        replicates,
        block_len.unwrap_or_else(|| default_block_len(panel.len())),
        seed,
        |idx| {
            let p = panel.select_rows(idx);
            let stage = fit_margins_from(
                &p,
                orders,
                model.stage.mode,
                &opts,
                [Some(&model.stage.margins[0].params), Some(&model.stage.margins[1].params)],
            )?;
            let copula = fit_copula_from(&stage.pairs, spec, Some(&model.copula))?;
            Ok(parameter_vector(&JointModel::new(stage, copula))
                .into_iter()
                .map(|(_, v)| v)
                .collect())
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_indices_cover_range() {
        let mut rng = seed::rng_from(1);
        let idx = stationary_bootstrap_indices(100, 5.0, &mut rng);
        assert_eq!(idx.len(), 100);
        assert!(idx.iter().all(|&i| i < 100));
        // mean block length close to 5: count breaks
        let breaks = idx.windows(2).filter(|w| w[1] != (w[0] + 1) % 100).count();
        assert!(breaks > 5 && breaks < 40);
    }

    #[test]
    fn failures_above_ten_percent_are_an_error() {
        let r = bootstrap(50, vec![0.0], vec!["x".into()], 20, 3.0, 1, |idx| {
            if idx[0] % 3 == 0 {
                Err(Error::Input("fail".into()))
            } else {
                Ok(vec![1.0])
            }
        });
        assert!(matches!(r, Err(Error::ReplicateFailures { .. })));
    }

    #[test]
    fn boundary_flags_name_the_parameter() {
        let obs = crate::simulate::simulate_rg(&margins::RealGarchParams::reference_dax(), 300, &mut seed::rng_from(2));
        let mut fit = margins::MarginFit::evaluate(&obs, margins::RealGarchParams::reference_dax()).unwrap();
        let u = fit.u.clone();
        let pairs: Vec<(f64, f64)> = u.iter().map(|&x| (x, x)).collect();
        fit.params.innov = crate::distributions::SkewTParams::normal();
        let stage = MarginStage {
            mode: MarginMode::Parametric,
            margins: [fit.clone(), margins::MarginFit::evaluate(&obs, margins::RealGarchParams::reference_dax()).unwrap()],
            pairs,
        };
        let copula = copulas::constant_fit(copulas::CopulaFamily::Normal, &stage.pairs[..50]).unwrap();
        assert_eq!(boundary_estimates(&JointModel::new(stage, copula)), vec!["m1.nu_inv".to_string()]);
    }
}
