//! Data-generating processes used for recovery studies and the `simulate`
//! command.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;

use serde::{Deserialize, Serialize};

use crate::copulas::{transform, CopulaFamily, CopulaParams, CopulaSpec, Dynamics, GasParams};
use crate::distributions::{QuantileTable, SkewT};
use crate::error::{Error, Result};
use crate::margins::{GarchParams, RealGarchParams};
use crate::market_data::{is_low_activity_day, DailyObservation, ReturnPanel};
use crate::seed;

const BURN_IN: usize = 500;

/// `n` trading dates from 2008-01-03, skipping weekends and year-end days.
pub fn business_dates(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2008, 1, 3).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !is_low_activity_day(d) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Realized-GARCH path driven by given innovations `z` and measurement
/// shocks `e` (standard normal); the first `burn` steps are discarded.
pub fn rg_path(params: &RealGarchParams, z: &[f64], e: &[f64], burn: usize) -> Vec<DailyObservation> {
    assert_eq!(z.len(), e.len());
    let p = params.ar.len();
    let sd_u = params.sigma_u2.sqrt();
    let mut lh = params.unconditional_log_h();
    let x_bar = params.mu / (1.0 - params.ar.iter().sum::<f64>());
    let mut x_hist = vec![x_bar; p];
    let dates = business_dates(z.len().saturating_sub(burn));
    let mut out = Vec::with_capacity(dates.len());
    for t in 0..z.len() {
        let mean = params.mu
            + params
                .ar
                .iter()
                .enumerate()
                .map(|(k, a)| a * x_hist[x_hist.len() - 1 - k])
                .sum::<f64>();
        let x = mean + (0.5 * lh).exp() * z[t];
        let lrv = params.psi
            + params.phi * lh
            + params.tau1 * z[t]
            + params.tau2 * (z[t] * z[t] - 1.0)
            + sd_u * e[t];
        if p > 0 {
            x_hist.remove(0);
            x_hist.push(x);
        }
        if t >= burn {
            out.push(DailyObservation {
                date: dates[t - burn],
                ret: x,
                rv: lrv.exp(),
            });
        }
        lh = params.omega + params.beta * lh + params.gamma * lrv;
    }
    out
}

/// Simulate `n` days of a Realized-GARCH margin with skewed-t innovations.
pub fn simulate_rg<R: Rng>(params: &RealGarchParams, n: usize, rng: &mut R) -> Vec<DailyObservation> {
    let dist = SkewT::new(params.innov).expect("valid innovation parameters");
    let total = n + BURN_IN;
    let z = dist.sample(rng, total);
    let e: Vec<f64> = (0..total).map(|_| rng.sample(StandardNormal)).collect();
    rg_path(params, &z, &e, BURN_IN)
}

/// Simulate `n` days of GARCH(1,1) with Gaussian innovations. The realized
/// variance column is set to the squared return (floored).
pub fn simulate_garch<R: Rng>(params: &GarchParams, n: usize, rng: &mut R) -> Vec<DailyObservation> {
    let p = params.ar.len();
    let mut h = params.kappa / (1.0 - params.phi_arch - params.psi_garch);
    let mut eps_prev = 0.0;
    let x_bar = params.mu / (1.0 - params.ar.iter().sum::<f64>());
    let mut x_hist = vec![x_bar; p];
    let dates = business_dates(n);
    let mut out = Vec::with_capacity(n);
    for t in 0..n + BURN_IN {
        if t > 0 {
            h = params.kappa + params.phi_arch * eps_prev * eps_prev + params.psi_garch * h;
        }
        let mean = params.mu
            + params
                .ar
                .iter()
                .enumerate()
                .map(|(k, a)| a * x_hist[x_hist.len() - 1 - k])
                .sum::<f64>();
        let z: f64 = rng.sample(StandardNormal);
        let eps = h.sqrt() * z;
        let x = mean + eps;
        eps_prev = eps;
        if p > 0 {
            x_hist.remove(0);
            x_hist.push(x);
        }
        if t >= BURN_IN {
            out.push(DailyObservation {
                date: dates[t - BURN_IN],
                ret: x,
                rv: (x * x).max(crate::market_data::RV_FLOOR),
            });
        }
    }
    out
}

/// Copula part of a joint data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dynamics", rename_all = "snake_case")]
pub enum CopulaDgp {
    Constant { params: CopulaParams },
    Gas { family: CopulaFamily, params: GasParams },
}

impl CopulaDgp {
    /// Normal GAS copula with the reference estimates for the index pair.
    pub fn reference_normal_gas() -> Self {
        CopulaDgp::Gas {
            family: CopulaFamily::Normal,
            params: GasParams {
                w: 0.0121,
                a: 0.0244,
                b: 0.9911,
                nu_inv: None,
            },
        }
    }

    /// Reference estimates for the index pair under any supported spec.
    pub fn reference(spec: CopulaSpec) -> Result<Self> {
        spec.validate()?;
        let gas = |w, a, b, nu_inv| CopulaDgp::Gas {
            family: spec.family,
            params: GasParams { w, a, b, nu_inv },
        };
        Ok(match (spec.dynamics, spec.family) {
            (Dynamics::Gas, CopulaFamily::Normal) => Self::reference_normal_gas(),
            (Dynamics::Gas, CopulaFamily::RotatedGumbel) => gas(-0.0466, 0.0466, 0.9139, None),
            (Dynamics::Gas, CopulaFamily::StudentT) => gas(0.1466, 0.0662, 0.8936, Some(0.0115)),
            (Dynamics::Gas, f) => return Err(Error::Input(format!("no GAS dynamics for {f}"))),
            (Dynamics::Constant, f) => CopulaDgp::Constant {
                params: match f {
                    CopulaFamily::Normal => CopulaParams::Normal { rho: 0.6042 },
                    CopulaFamily::StudentT => CopulaParams::StudentT { rho: 0.5960, nu_inv: 0.0100 },
                    CopulaFamily::Clayton => CopulaParams::Clayton { theta: 0.8596 },
                    CopulaFamily::RotatedGumbel => CopulaParams::RotatedGumbel { delta: 1.5819 },
                    CopulaFamily::Sjc => CopulaParams::Sjc {
                        tau_upper: 0.3514,
                        tau_lower: 0.3667,
                    },
                },
            },
        })
    }

    /// Pairs and the dynamic-parameter path; GAS paths start at the
    /// unconditional level and run `burn` unreported steps first.
    pub fn sample_path<R: Rng>(&self, n: usize, burn: usize, rng: &mut R) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
        match *self {
            CopulaDgp::Constant { params } => {
                let pairs = params.sample(rng, n + burn)?.split_off(burn);
                let d = params.dynamic_value().unwrap_or(f64::NAN);
                Ok((pairs, vec![d; n]))
            }
            CopulaDgp::Gas { family, params } => {
                params.validate(family)?;
                let mut kappa = params.w / (1.0 - params.b);
                let mut pairs = Vec::with_capacity(n);
                let mut path = Vec::with_capacity(n);
                for t in 0..n + burn {
                    let delta = transform(family, kappa)?;
                    let (u1, u2) = params.params_at(family, delta).sample_one(rng);
                    if t >= burn {
                        pairs.push((u1, u2));
                        path.push(delta);
                    }
                    kappa = params.step(family, kappa, u1, u2)?;
                }
                Ok((pairs, path))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDgp {
    pub margin1: RealGarchParams,
    pub margin2: RealGarchParams,
    pub copula: CopulaDgp,
}

impl JointDgp {
    /// Reference margins (PX-like first asset, DAX-like second) with the
    /// given copula.
    pub fn reference(copula: CopulaDgp) -> Self {
        Self {
            margin1: RealGarchParams::reference_px(),
            margin2: RealGarchParams::reference_dax(),
            copula,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: ReturnPanel,
    /// True copula parameter path (`NaN` for SJC).
    pub delta: Vec<f64>,
    /// True copula draws (the PITs of the true innovations).
    pub pairs: Vec<(f64, f64)>,
}

/// Simulate `n` aligned days from a joint DGP.
pub fn simulate_joint(dgp: &JointDgp, n: usize, seed: u64) -> Result<SimulatedPanel> {
    dgp.margin1.validate()?;
    dgp.margin2.validate()?;
    let total = n + BURN_IN;
    let mut rng = seed::rng(seed, "simulate-copula", 0);
    let (pairs, delta) = dgp.copula.sample_path(total, 0, &mut rng)?;
    let mut rng_e = seed::rng(seed, "simulate-measurement", 0);
    let mut margin = |params: &RealGarchParams, pick: fn(&(f64, f64)) -> f64| -> Result<Vec<DailyObservation>> {
        let table = QuantileTable::new(params.innov)?;
        let z: Vec<f64> = pairs.iter().map(|p| table.quantile(pick(p))).collect();
        let e: Vec<f64> = (0..total).map(|_| rng_e.sample(StandardNormal)).collect();
        Ok(rg_path(params, &z, &e, BURN_IN))
    };
    let a = margin(&dgp.margin1, |p| p.0)?;
    let b = margin(&dgp.margin2, |p| p.1)?;
    let panel = ReturnPanel {
        dates: a.iter().map(|o| o.date).collect(),
        asset1: a,
        asset2: b,
    };
    Ok(SimulatedPanel {
        panel,
        delta: delta[BURN_IN..].to_vec(),
        pairs: pairs[BURN_IN..].to_vec(),
    })
}
