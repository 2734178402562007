//! Score-driven GAS(1,1) filtering:
//! `κ_{t+1} = w + b κ_t + a s_t / sqrt(I(δ_t))`, `δ_t = h⁻¹(κ_t)`.

use serde::{Deserialize, Serialize};

use super::{copula_score, fisher_info, transform, CopulaFamily, CopulaParams};
use crate::error::{Error, Result};

/// Largest admissible `|κ_t|` before the path is declared divergent.
pub const KAPPA_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    pub w: f64,
    /// Loading on the scaled score, `a >= 0`.
    pub a: f64,
    /// Persistence, `|b| < 1`.
    pub b: f64,
    /// Inverse degrees of freedom (t copula only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_inv: Option<f64>,
}

impl GasParams {
    pub fn validate(&self, family: CopulaFamily) -> Result<()> {
        if !family.supports_gas() {
            return Err(Error::Domain(format!("GAS dynamics are not available for the {family} copula")));
        }
        if !(self.a >= 0.0) || !(self.b.abs() < 1.0) || !self.w.is_finite() {
            return Err(Error::Domain(format!("inadmissible GAS parameters {self:?}")));
        }
        match (family, self.nu_inv) {
            (CopulaFamily::StudentT, Some(v)) if (0.0..0.5).contains(&v) => Ok(()),
            (CopulaFamily::StudentT, _) => Err(Error::Domain("t-GAS needs nu_inv in [0, 0.5)".into())),
            (_, None) => Ok(()),
            (_, Some(_)) => Err(Error::Domain("nu_inv is only used by the t copula".into())),
        }
    }

    /// Natural parameters at dynamic value `delta`.
    pub fn params_at(&self, family: CopulaFamily, delta: f64) -> CopulaParams {
        match family {
            CopulaFamily::Normal => CopulaParams::Normal { rho: delta },
            CopulaFamily::StudentT => CopulaParams::StudentT {
                rho: delta,
                nu_inv: self.nu_inv.unwrap_or(0.0),
            },
            CopulaFamily::RotatedGumbel => CopulaParams::RotatedGumbel { delta },
            CopulaFamily::Clayton => CopulaParams::Clayton { theta: delta },
            CopulaFamily::Sjc => unreachable!("SJC has no GAS dynamics"),
        }
    }

    /// One GAS step from `κ_t` given the observation at `t`.
    pub fn step(&self, family: CopulaFamily, kappa: f64, u1: f64, u2: f64) -> Result<f64> {
        let delta = transform(family, kappa)?;
        let p = self.params_at(family, delta);
        let s = copula_score(&p, u1, u2)?;
        let info = fisher_info(&p)?;
        Ok(self.w + self.b * kappa + self.a * s / info.sqrt())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaPath {
    pub kappa: Vec<f64>,
    pub delta: Vec<f64>,
    /// Per-observation log-density.
    pub ln_c: Vec<f64>,
    pub loglik: f64,
    /// One-step-ahead values after the last observation.
    pub kappa_next: f64,
    pub delta_next: f64,
}

/// Filter the GAS path for `pairs`, starting at `κ_1 = kappa_init`.
pub fn gas_filter(
    family: CopulaFamily,
    params: &GasParams,
    pairs: &[(f64, f64)],
    kappa_init: f64,
) -> Result<CopulaPath> {
    params.validate(family)?;
    let n = pairs.len();
    let mut path = CopulaPath {
        kappa: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        ln_c: Vec::with_capacity(n),
        loglik: 0.0,
        kappa_next: kappa_init,
        delta_next: 0.0,
    };
    // elliptical families: the marginal scores do not depend on δ_t
    let base = params.params_at(family, transform(family, 0.0)?);
    let ev = base.evaluator()?;
    let elliptical = matches!(family, CopulaFamily::Normal | CopulaFamily::StudentT);
    let mut kappa = kappa_init;
    for (t, &(u1, u2)) in pairs.iter().enumerate() {
        if !kappa.is_finite() || kappa.abs() > KAPPA_LIMIT {
            return Err(Error::Overflow {
                index: t,
                what: format!("copula state kappa = {kappa}"),
            });
        }
        let delta = transform(family, kappa)?;
        let p = params.params_at(family, delta);
        let (lc, s) = if elliptical {
            let (x, y) = ev.scores(u1, u2);
            (ev.ln_density_xy(delta, x, y), ev.score_xy(delta, x, y))
        } else {
            (p.ln_density(u1, u2)?, copula_score(&p, u1, u2)?)
        };
        if !lc.is_finite() || !s.is_finite() {
            return Err(Error::Overflow {
                index: t,
                what: format!("copula log-density at delta = {delta}"),
            });
        }
        let info = fisher_info(&p)?;
        path.kappa.push(kappa);
        path.delta.push(delta);
        path.ln_c.push(lc);
        path.loglik += lc;
        kappa = params.w + params.b * kappa + params.a * s / info.sqrt();
    }
    path.kappa_next = kappa;
    path.delta_next = transform(family, kappa.clamp(-KAPPA_LIMIT, KAPPA_LIMIT))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<(f64, f64)> {
        CopulaParams::Normal { rho: 0.5 }
            .sample(&mut crate::seed::rng_from(3), 300)
            .unwrap()
    }

    #[test]
    fn frozen_dynamics_constant_path() {
        let p = GasParams { w: 0.4, a: 0.0, b: 0.0, nu_inv: None };
        let path = gas_filter(CopulaFamily::Normal, &p, &pairs(), 0.4).unwrap();
        assert!(path.kappa.iter().all(|&k| k == 0.4));
    }

    #[test]
    fn fixed_point_at_unconditional_level() {
        let p = GasParams { w: 0.02, a: 0.0, b: 0.98, nu_inv: None };
        let k = p.w / (1.0 - p.b);
        let path = gas_filter(CopulaFamily::RotatedGumbel, &p, &pairs(), k).unwrap();
        assert!(path.kappa.iter().all(|&x| (x - k).abs() < 1e-12));
    }

    #[test]
    fn step_agrees_with_filter() {
        let p = GasParams { w: 0.01, a: 0.05, b: 0.97, nu_inv: None };
        let d = pairs();
        let path = gas_filter(CopulaFamily::Normal, &p, &d, 1.1).unwrap();
        let k1 = p.step(CopulaFamily::Normal, 1.1, d[0].0, d[0].1).unwrap();
        assert!((k1 - path.kappa[1]).abs() < 1e-14);
    }

    #[test]
    fn divergent_path_reports_index() {
        let p = GasParams { w: 5.0, a: 0.0, b: 0.9, nu_inv: None };
        let err = gas_filter(CopulaFamily::Normal, &p, &pairs(), 0.0).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }
}
