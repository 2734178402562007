//! Maximum-likelihood fitting of constant and GAS copulas on PIT pairs.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::gas::{gas_filter, CopulaPath, GasParams, KAPPA_LIMIT};
use super::{clamp_pit, inverse_transform, nu_of, CopulaFamily, CopulaParams};
use crate::distributions::{t_ppf, NU_NORMAL};
use crate::error::{Error, Result};
use crate::optim::{self, Bound, Convergence, MinimizeOptions};
use crate::stats;

const NU_INV_LO: f64 = 1e-7;
const NU_INV_HI: f64 = 0.49;
const GAS_MIN_OBS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Constant,
    Gas,
}

impl std::fmt::Display for Dynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dynamics::Constant => "constant",
            Dynamics::Gas => "gas",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
    pub dynamics: Dynamics,
}

impl CopulaSpec {
    pub fn new(family: CopulaFamily, dynamics: Dynamics) -> Self {
        Self { family, dynamics }
    }

    /// Short label such as `normal` or `normal_gas`.
    pub fn label(&self) -> String {
        match self.dynamics {
            Dynamics::Constant => self.family.tag().to_string(),
            Dynamics::Gas => format!("{}_gas", self.family.tag()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dynamics == Dynamics::Gas && !self.family.supports_gas() {
            return Err(Error::Input(format!(
                "GAS dynamics are not available for the {} copula",
                self.family
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for CopulaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.strip_suffix("_gas") {
            Some(f) => CopulaSpec::new(f.parse()?, Dynamics::Gas),
            None => CopulaSpec::new(s.parse()?, Dynamics::Constant),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A fitted copula with its in-sample path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaFit {
    pub spec: CopulaSpec,
    /// Constant-parameter MLE; for GAS fits it sets `κ_1`.
    pub constant: CopulaParams,
    pub constant_loglik: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<GasParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_init: Option<f64>,
    pub loglik: f64,
    pub n_obs: usize,
    /// In-sample path of the dynamic (or single) natural parameter.
    pub delta_path: Vec<f64>,
    pub convergence: Convergence,
}

impl CopulaFit {
    pub fn family(&self) -> CopulaFamily {
        self.spec.family
    }

    pub fn n_params(&self) -> usize {
        match (self.spec.dynamics, self.spec.family) {
            (Dynamics::Gas, CopulaFamily::StudentT) => 4,
            (Dynamics::Gas, _) => 3,
            (_, CopulaFamily::StudentT | CopulaFamily::Sjc) => 2,
            _ => 1,
        }
    }

    /// Named estimated parameters in a fixed order.
    pub fn named_params(&self) -> Vec<(&'static str, f64)> {
        if let Some(g) = &self.gas {
            let mut v = vec![("w", g.w), ("a", g.a), ("b", g.b)];
            if let Some(n) = g.nu_inv {
                v.push(("nu_inv", n));
            }
            return v;
        }
        match self.constant {
            CopulaParams::Normal { rho } => vec![("rho", rho)],
            CopulaParams::StudentT { rho, nu_inv } => vec![("rho", rho), ("nu_inv", nu_inv)],
            CopulaParams::Clayton { theta } => vec![("theta", theta)],
            CopulaParams::RotatedGumbel { delta } => vec![("delta", delta)],
            CopulaParams::Sjc { tau_upper, tau_lower } => {
                vec![("tau_upper", tau_upper), ("tau_lower", tau_lower)]
            }
        }
    }

    /// Run the fitted model over `pairs`; GAS paths restart from `κ_1`.
    pub fn filter(&self, pairs: &[(f64, f64)]) -> Result<CopulaPath> {
        match (&self.gas, self.kappa_init) {
            (Some(g), Some(k1)) => gas_filter(self.spec.family, g, pairs, k1),
            _ => {
                let ev = self.constant.evaluator()?;
                let ln_c: Vec<f64> = pairs.iter().map(|&(a, b)| ev.ln_density(a, b)).collect();
                let value = constant_value(&self.constant);
                let kappa = value.and_then(|v| inverse_transform(self.spec.family, v).ok());
                Ok(CopulaPath {
                    kappa: kappa.map(|k| vec![k; pairs.len()]).unwrap_or_default(),
                    delta: value.map(|v| vec![v; pairs.len()]).unwrap_or_default(),
                    loglik: ln_c.iter().sum(),
                    ln_c,
                    kappa_next: kappa.unwrap_or(f64::NAN),
                    delta_next: value.unwrap_or(f64::NAN),
                })
            }
        }
    }

    /// Natural parameters at dynamic value `delta` (ignored for constant fits).
    pub fn params_at(&self, delta: f64) -> CopulaParams {
        match &self.gas {
            Some(g) => g.params_at(self.spec.family, delta),
            None => self.constant,
        }
    }
}

fn constant_value(p: &CopulaParams) -> Option<f64> {
    match *p {
        CopulaParams::Clayton { theta } => Some(theta),
        other => other.dynamic_value(),
    }
}

/// `Σ ln c(u_t; params)`.
pub fn copula_loglik(params: &CopulaParams, pairs: &[(f64, f64)]) -> Result<f64> {
    let ev = params.evaluator()?;
    Ok(pairs.iter().map(|&(a, b)| ev.ln_density(a, b)).sum())
}

fn check_pairs(pairs: &[(f64, f64)], min: usize) -> Result<()> {
    if pairs.len() < min {
        return Err(Error::InsufficientData {
            needed: min,
            have: pairs.len(),
        });
    }
    if pairs
        .iter()
        .any(|&(a, b)| !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0))
    {
        return Err(Error::Input("PIT values must lie strictly inside (0, 1)".into()));
    }
    Ok(())
}

/// Cache of t scores keyed by `ν`, so finite-difference steps that leave `ν`
/// unchanged do not recompute `2T` quantiles.
struct TScores {
    pairs: Vec<(f64, f64)>,
    last: Mutex<Option<(f64, Arc<Vec<(f64, f64)>>)>>,
}

impl TScores {
    fn new(pairs: &[(f64, f64)]) -> Self {
        Self {
            pairs: pairs.iter().map(|&(a, b)| (clamp_pit(a), clamp_pit(b))).collect(),
            last: Mutex::new(None),
        }
    }

    fn get(&self, nu: f64) -> Arc<Vec<(f64, f64)>> {
        let mut guard = self.last.lock().expect("score cache lock");
        if let Some((n, v)) = guard.as_ref() {
            if *n == nu {
                return v.clone();
            }
        }
        let v: Arc<Vec<(f64, f64)>> = Arc::new(
            self.pairs
                .iter()
                .map(|&(a, b)| (t_ppf(a, nu), t_ppf(b, nu)))
                .collect(),
        );
        *guard = Some((nu, v.clone()));
        v
    }
}

fn t_loglik(cache: &TScores, rho: f64, nu_inv: f64) -> f64 {
    let p = CopulaParams::StudentT { rho, nu_inv };
    let Ok(ev) = p.evaluator() else {
        return f64::NEG_INFINITY;
    };
    let nu = nu_of(nu_inv);
    if nu >= NU_NORMAL {
        return copula_loglik(&CopulaParams::Normal { rho }, &cache.pairs).unwrap_or(f64::NEG_INFINITY);
    }
    cache.get(nu).iter().map(|&(x, y)| ev.ln_density_xy(rho, x, y)).sum()
}

fn unpack_constant(family: CopulaFamily, v: &[f64]) -> CopulaParams {
    match family {
        CopulaFamily::Normal => CopulaParams::Normal { rho: v[0] },
        CopulaFamily::StudentT => CopulaParams::StudentT { rho: v[0], nu_inv: v[1] },
        CopulaFamily::Clayton => CopulaParams::Clayton { theta: v[0] },
        CopulaFamily::RotatedGumbel => CopulaParams::RotatedGumbel { delta: v[0] },
        CopulaFamily::Sjc => CopulaParams::Sjc {
            tau_upper: v[0],
            tau_lower: v[1],
        },
    }
}

/// Maximum-likelihood fit of a constant copula.
pub fn constant_fit(family: CopulaFamily, pairs: &[(f64, f64)]) -> Result<CopulaFit> {
    check_pairs(pairs, 10)?;
    let (u1, u2): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let tau = stats::kendall_tau(&u1, &u2);
    let rho0 = (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.95, 0.95);
    let pos_tau = tau.clamp(0.02, 0.9);
    let (bounds, starts): (Vec<Bound>, Vec<Vec<f64>>) = match family {
        CopulaFamily::Normal => (vec![Bound::Interval(-0.9999, 0.9999)], vec![vec![rho0]]),
        CopulaFamily::StudentT => (
            vec![Bound::Interval(-0.9999, 0.9999), Bound::Interval(NU_INV_LO, NU_INV_HI)],
            vec![vec![rho0, 0.1], vec![rho0, 0.02]],
        ),
        CopulaFamily::Clayton => (
            vec![Bound::Interval(1e-6, 50.0)],
            vec![vec![2.0 * pos_tau / (1.0 - pos_tau)]],
        ),
        CopulaFamily::RotatedGumbel => (
            vec![Bound::Interval(1.0 + 1e-9, 50.0)],
            vec![vec![1.0 / (1.0 - pos_tau)]],
        ),
        CopulaFamily::Sjc => {
            let t = pos_tau.clamp(0.05, 0.8);
            (
                vec![Bound::Interval(1e-4, 0.99); 2],
                vec![vec![t, t], vec![0.1, 0.4], vec![0.4, 0.1]],
            )
        }
    };
    let n = pairs.len() as f64;
    let cache = TScores::new(pairs);
    let objective = |v: &[f64]| -> f64 {
        let ll = if family == CopulaFamily::StudentT {
            t_loglik(&cache, v[0], v[1])
        } else {
            copula_loglik(&unpack_constant(family, v), pairs).unwrap_or(f64::NEG_INFINITY)
        };
        -ll / n
    };
    let best = optim::minimize_multistart(objective, &starts, &bounds, &MinimizeOptions::default())?;
    let params = unpack_constant(family, &best.x);
    let ev = params.evaluator()?;
    let loglik: f64 = pairs.iter().map(|&(a, b)| ev.ln_density(a, b)).sum();
    let value = constant_value(&params);
    Ok(CopulaFit {
        spec: CopulaSpec::new(family, Dynamics::Constant),
        constant: params,
        constant_loglik: loglik,
        gas: None,
        kappa_init: None,
        loglik,
        n_obs: pairs.len(),
        delta_path: value.map(|v| vec![v; pairs.len()]).unwrap_or_default(),
        convergence: best.convergence(starts.len()),
    })
}

fn unpack_gas(family: CopulaFamily, v: &[f64]) -> GasParams {
    GasParams {
        w: v[0],
        a: v[1],
        b: v[2],
        nu_inv: (family == CopulaFamily::StudentT).then(|| v[3]),
    }
}

/// Maximum-likelihood fit of a GAS(1,1) copula; `κ_1` is the transformed
/// constant-copula estimate.
pub fn gas_fit(family: CopulaFamily, pairs: &[(f64, f64)], init: Option<&GasParams>) -> Result<CopulaFit> {
    if !family.supports_gas() {
        return Err(Error::Input(format!("GAS dynamics are not available for the {family} copula")));
    }
    check_pairs(pairs, 50)?;
    if pairs.len() < GAS_MIN_OBS {
        log::warn!("GAS copula fit on only {} observations", pairs.len());
    }
    let constant = constant_fit(family, pairs)?;
    let delta0 = constant
        .constant
        .dynamic_value()
        .expect("GAS families have a dynamic parameter");
    let k1 = inverse_transform(family, delta0)?.clamp(-KAPPA_LIMIT + 1.0, KAPPA_LIMIT - 1.0);
    let nu0 = match constant.constant {
        CopulaParams::StudentT { nu_inv, .. } => Some(nu_inv.clamp(NU_INV_LO * 2.0, NU_INV_HI * 0.99)),
        _ => None,
    };

    let mut bounds = vec![Bound::Free, Bound::Interval(0.0, 2.0), Bound::Interval(-0.9999, 0.9999)];
    if nu0.is_some() {
        bounds.push(Bound::Interval(NU_INV_LO, NU_INV_HI));
    }
    let mk = |w: f64, a: f64, b: f64| {
        let mut v = vec![w, a, b];
        v.extend(nu0);
        v
    };
    let mut starts = Vec::new();
    if let Some(g) = init {
        let mut v = vec![g.w, g.a.max(1e-6), g.b];
        if nu0.is_some() {
            v.push(g.nu_inv.unwrap_or(nu0.unwrap_or(0.1)));
        }
        starts.push(v);
    }
    // the first grid start reproduces the constant model
    for (a, b) in [(0.0, 0.5), (0.05, 0.97), (0.02, 0.99), (0.1, 0.9)] {
        starts.push(mk(k1 * (1.0 - b), a, b));
    }

    let n = pairs.len() as f64;
    let cache = TScores::new(pairs);
    let clamped = &cache.pairs;
    let objective = |v: &[f64]| -> f64 {
        let g = unpack_gas(family, v);
        if g.validate(family).is_err() {
            return f64::INFINITY;
        }
        let ll = if family == CopulaFamily::StudentT {
            gas_loglik_t(&cache, &g, k1)
        } else {
            gas_filter(family, &g, clamped, k1).map(|p| p.loglik)
        };
        match ll {
            Ok(ll) => -ll / n,
            Err(_) => f64::INFINITY,
        }
    };
    let best = optim::minimize_multistart(objective, &starts, &bounds, &MinimizeOptions::default())?;
    let gas = unpack_gas(family, &best.x);
    let path = gas_filter(family, &gas, pairs, k1)?;
    Ok(CopulaFit {
        spec: CopulaSpec::new(family, Dynamics::Gas),
        constant: constant.constant,
        constant_loglik: constant.loglik,
        gas: Some(gas),
        kappa_init: Some(k1),
        loglik: path.loglik,
        n_obs: pairs.len(),
        delta_path: path.delta,
        convergence: best.convergence(starts.len()),
    })
}

/// t-GAS log-likelihood reusing cached scores; mirrors [`gas_filter`].
fn gas_loglik_t(cache: &TScores, g: &GasParams, k1: f64) -> Result<f64> {
    let nu_inv = g.nu_inv.unwrap_or(0.0);
    let nu = nu_of(nu_inv);
    if nu >= NU_NORMAL {
        return gas_filter(CopulaFamily::StudentT, g, &cache.pairs, k1).map(|p| p.loglik);
    }
    let base = CopulaParams::StudentT { rho: 0.0, nu_inv }.evaluator()?;
    let xy = cache.get(nu);
    let mut kappa = k1;
    let mut ll = 0.0;
    for (t, &(x, y)) in xy.iter().enumerate() {
        if !kappa.is_finite() || kappa.abs() > KAPPA_LIMIT {
            return Err(Error::Overflow {
                index: t,
                what: "copula state".into(),
            });
        }
        let rho = (0.5 * kappa).tanh();
        let lc = base.ln_density_xy(rho, x, y);
        let s = base.score_xy(rho, x, y);
        if !lc.is_finite() || !s.is_finite() {
            return Err(Error::Overflow {
                index: t,
                what: "copula log-density".into(),
            });
        }
        ll += lc;
        let info = super::families::t_info(rho, base.nu());
        kappa = g.w + g.b * kappa + g.a * s / info.sqrt();
    }
    Ok(ll)
}
