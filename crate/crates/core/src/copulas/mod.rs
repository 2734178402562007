//! Bivariate copulas: Normal, Student-t, Clayton, rotated Gumbel and
//! symmetrized Joe–Clayton, with constant parameters or score-driven
//! (GAS(1,1)) dynamics.
//!
//! Each dynamic family has one time-varying natural parameter `δ` (the
//! correlation for Normal and t, the Gumbel parameter for rotated Gumbel),
//! linked to an unbounded `κ` by [`transform`]. The t copula's degrees of
//! freedom stay constant.

mod families;
mod fit;
mod gas;
mod info;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{norm_ppf, t_ppf, NU_NORMAL};
use crate::error::{Error, Result};

pub use fit::{constant_fit, copula_loglik, gas_fit, CopulaFit, CopulaSpec, Dynamics};
pub use gas::{gas_filter, CopulaPath, GasParams};
pub use info::fisher_info;

/// PIT values are clamped to `[PIT_CLAMP, 1 - PIT_CLAMP]` before any evaluation.
pub const PIT_CLAMP: f64 = 1e-10;

pub fn clamp_pit(u: f64) -> f64 {
    u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Normal,
    StudentT,
    Clayton,
    RotatedGumbel,
    Sjc,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 5] = [
        CopulaFamily::Normal,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::RotatedGumbel,
        CopulaFamily::Sjc,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CopulaFamily::Normal => "normal",
            CopulaFamily::StudentT => "student_t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::RotatedGumbel => "rotated_gumbel",
            CopulaFamily::Sjc => "sjc",
        }
    }

    /// Whether GAS dynamics are available for this family.
    pub fn supports_gas(self) -> bool {
        matches!(
            self,
            CopulaFamily::Normal | CopulaFamily::StudentT | CopulaFamily::RotatedGumbel
        )
    }
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::Input(format!("unknown copula family `{s}`")))
    }
}

/// Natural parameters of a copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaParams {
    Normal { rho: f64 },
    StudentT { rho: f64, nu_inv: f64 },
    Clayton { theta: f64 },
    RotatedGumbel { delta: f64 },
    Sjc { tau_upper: f64, tau_lower: f64 },
}

impl CopulaParams {
    pub fn family(&self) -> CopulaFamily {
        match self {
            CopulaParams::Normal { .. } => CopulaFamily::Normal,
            CopulaParams::StudentT { .. } => CopulaFamily::StudentT,
            CopulaParams::Clayton { .. } => CopulaFamily::Clayton,
            CopulaParams::RotatedGumbel { .. } => CopulaFamily::RotatedGumbel,
            CopulaParams::Sjc { .. } => CopulaFamily::Sjc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CopulaParams::Normal { rho } => rho.abs() < 1.0,
            CopulaParams::StudentT { rho, nu_inv } => rho.abs() < 1.0 && (0.0..0.5).contains(&nu_inv),
            CopulaParams::Clayton { theta } => theta > 0.0 && theta.is_finite(),
            CopulaParams::RotatedGumbel { delta } => delta >= 1.0 && delta.is_finite(),
            CopulaParams::Sjc { tau_upper, tau_lower } => {
                tau_upper > 0.0 && tau_upper < 1.0 && tau_lower > 0.0 && tau_lower < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("inadmissible copula parameters {self:?}")))
        }
    }

    /// The parameter that GAS dynamics act on, if the family has one.
    pub fn dynamic_value(&self) -> Option<f64> {
        match *self {
            CopulaParams::Normal { rho } | CopulaParams::StudentT { rho, .. } => Some(rho),
            CopulaParams::RotatedGumbel { delta } => Some(delta),
            _ => None,
        }
    }

    /// Copy with the dynamic parameter replaced.
    pub fn with_dynamic(&self, value: f64) -> Self {
        match *self {
            CopulaParams::Normal { .. } => CopulaParams::Normal { rho: value },
            CopulaParams::StudentT { nu_inv, .. } => CopulaParams::StudentT { rho: value, nu_inv },
            CopulaParams::RotatedGumbel { .. } => CopulaParams::RotatedGumbel { delta: value },
            other => other,
        }
    }

    /// Population Kendall's tau where available in closed form.
    pub fn kendall_tau(&self) -> Option<f64> {
        match *self {
            CopulaParams::Normal { rho } | CopulaParams::StudentT { rho, .. } => {
                Some(2.0 / std::f64::consts::PI * rho.asin())
            }
            CopulaParams::Clayton { theta } => Some(theta / (theta + 2.0)),
            CopulaParams::RotatedGumbel { delta } => Some(1.0 - 1.0 / delta),
            CopulaParams::Sjc { .. } => None,
        }
    }

    /// Build an evaluator that caches per-parameter constants.
    pub fn evaluator(&self) -> Result<Evaluator> {
        self.validate()?;
        Ok(Evaluator::new(*self))
    }

    /// Log-density at one pair (clamped).
    pub fn ln_density(&self, u1: f64, u2: f64) -> Result<f64> {
        Ok(self.evaluator()?.ln_density(u1, u2))
    }

    /// `P(U2 <= u2 | U1 = u1)`.
    pub fn h_function(&self, u1: f64, u2: f64) -> Result<f64> {
        self.validate()?;
        let (u1, u2) = (clamp_pit(u1), clamp_pit(u2));
        Ok(match *self {
            CopulaParams::Normal { rho } => families::normal_h(rho, u1, u2),
            CopulaParams::StudentT { rho, nu_inv } => families::t_h(rho, nu_of(nu_inv), u1, u2),
            CopulaParams::Clayton { theta } => families::clayton_h(theta, u1, u2),
            CopulaParams::RotatedGumbel { delta } => {
                1.0 - families::gumbel_h(delta, 1.0 - u1, 1.0 - u2)
            }
            CopulaParams::Sjc { tau_upper, tau_lower } => {
                families::sjc_h(tau_upper, tau_lower, u1, u2)
            }
        }
        .clamp(0.0, 1.0))
    }

    /// One draw from the copula.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (a, b) = match *self {
            CopulaParams::Normal { rho } => families::normal_sample(rho, rng),
            CopulaParams::StudentT { rho, nu_inv } => families::t_sample(rho, nu_of(nu_inv), rng),
            CopulaParams::Clayton { theta } => families::clayton_sample(theta, rng),
            CopulaParams::RotatedGumbel { delta } => {
                let (a, b) = families::gumbel_sample(delta, rng);
                (1.0 - a, 1.0 - b)
            }
            CopulaParams::Sjc { tau_upper, tau_lower } => {
                families::sjc_sample(tau_upper, tau_lower, rng)
            }
        };
        (clamp_pit(a), clamp_pit(b))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        Ok((0..n).map(|_| self.sample_one(rng)).collect())
    }
}

pub(crate) fn nu_of(nu_inv: f64) -> f64 {
    if nu_inv <= 1.0 / NU_NORMAL {
        NU_NORMAL
    } else {
        1.0 / nu_inv
    }
}

/// Copula density `c(u1, u2; δ)`.
pub fn copula_density(params: &CopulaParams, u1: f64, u2: f64) -> Result<f64> {
    Ok(params.ln_density(u1, u2)?.exp())
}

/// `n` pairs drawn with a generator seeded from `seed`.
pub fn copula_sample(params: &CopulaParams, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    params.sample(&mut crate::seed::rng_from(seed), n)
}

/// Log-density evaluator with per-parameter constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator {
    params: CopulaParams,
    nu: f64,
    t_const: f64,
}

impl Evaluator {
    fn new(params: CopulaParams) -> Self {
        let nu = match params {
            CopulaParams::StudentT { nu_inv, .. } => nu_of(nu_inv),
            _ => NU_NORMAL,
        };
        Self {
            params,
            nu,
            t_const: families::t_const(nu),
        }
    }

    pub fn params(&self) -> CopulaParams {
        self.params
    }

    /// Marginal scores used by elliptical families (`Φ⁻¹` or `t_ν⁻¹`).
    pub fn scores(&self, u1: f64, u2: f64) -> (f64, f64) {
        let (u1, u2) = (clamp_pit(u1), clamp_pit(u2));
        match self.params {
            CopulaParams::StudentT { .. } if self.nu < NU_NORMAL => (t_ppf(u1, self.nu), t_ppf(u2, self.nu)),
            _ => (norm_ppf(u1), norm_ppf(u2)),
        }
    }

    pub fn ln_density(&self, u1: f64, u2: f64) -> f64 {
        let (u1, u2) = (clamp_pit(u1), clamp_pit(u2));
        match self.params {
            CopulaParams::Normal { rho } => {
                families::normal_ln_c_xy(rho, norm_ppf(u1), norm_ppf(u2))
            }
            CopulaParams::StudentT { rho, .. } => {
                let (x, y) = self.scores(u1, u2);
                families::t_ln_c_xy(rho, self.nu, self.t_const, x, y)
            }
            CopulaParams::Clayton { theta } => families::clayton_ln_c(theta, u1, u2),
            CopulaParams::RotatedGumbel { delta } => {
                families::gumbel_ln_c(delta, 1.0 - u1, 1.0 - u2)
            }
            CopulaParams::Sjc { tau_upper, tau_lower } => {
                families::sjc_density(tau_upper, tau_lower, u1, u2).ln()
            }
        }
    }

    /// Log-density from precomputed marginal scores (elliptical families only).
    pub(crate) fn ln_density_xy(&self, rho: f64, x: f64, y: f64) -> f64 {
        match self.params {
            CopulaParams::StudentT { .. } => families::t_ln_c_xy(rho, self.nu, self.t_const, x, y),
            _ => families::normal_ln_c_xy(rho, x, y),
        }
    }

    pub(crate) fn score_xy(&self, rho: f64, x: f64, y: f64) -> f64 {
        match self.params {
            CopulaParams::StudentT { .. } => families::t_score_xy(rho, self.nu, x, y),
            _ => families::normal_score_xy(rho, x, y),
        }
    }

    pub(crate) fn nu(&self) -> f64 {
        self.nu
    }
}

/// Normal/t: `ρ = (1 - e^{-κ}) / (1 + e^{-κ})`; rotated Gumbel: `δ = 1 + e^κ`;
/// Clayton: `θ = e^κ`.
pub fn transform(family: CopulaFamily, kappa: f64) -> Result<f64> {
    match family {
        CopulaFamily::Normal | CopulaFamily::StudentT => Ok((0.5 * kappa).tanh()),
        CopulaFamily::RotatedGumbel => Ok(1.0 + kappa.exp()),
        CopulaFamily::Clayton => Ok(kappa.exp()),
        CopulaFamily::Sjc => Err(Error::Domain("the SJC copula has no scalar transform".into())),
    }
}

pub fn inverse_transform(family: CopulaFamily, delta: f64) -> Result<f64> {
    match family {
        CopulaFamily::Normal | CopulaFamily::StudentT => {
            if delta.abs() >= 1.0 {
                return Err(Error::Domain(format!("correlation {delta} outside (-1, 1)")));
            }
            Ok(delta.ln_1p() - (-delta).ln_1p())
        }
        CopulaFamily::RotatedGumbel => {
            if delta <= 1.0 {
                return Err(Error::Domain(format!("Gumbel parameter {delta} must exceed 1")));
            }
            Ok((delta - 1.0).ln())
        }
        CopulaFamily::Clayton => {
            if delta <= 0.0 {
                return Err(Error::Domain(format!("Clayton parameter {delta} must be positive")));
            }
            Ok(delta.ln())
        }
        CopulaFamily::Sjc => Err(Error::Domain("the SJC copula has no scalar transform".into())),
    }
}

/// `∂ ln c / ∂δ` in the family's dynamic (or single) natural parameter.
///
/// Analytic for Normal, t and rotated Gumbel; central differences with step
/// `1e-6 max(1, |δ|)` for Clayton. Not defined for SJC.
pub fn copula_score(params: &CopulaParams, u1: f64, u2: f64) -> Result<f64> {
    let ev = params.evaluator()?;
    let (u1, u2) = (clamp_pit(u1), clamp_pit(u2));
    Ok(match *params {
        CopulaParams::Normal { rho } | CopulaParams::StudentT { rho, .. } => {
            let (x, y) = ev.scores(u1, u2);
            ev.score_xy(rho, x, y)
        }
        CopulaParams::RotatedGumbel { delta } => families::gumbel_score(delta, 1.0 - u1, 1.0 - u2),
        CopulaParams::Clayton { theta } => {
            let e = 1e-6 * theta.abs().max(1.0);
            let lo = (theta - e).max(theta * 0.5);
            (families::clayton_ln_c(theta + e, u1, u2) - families::clayton_ln_c(lo, u1, u2))
                / (theta + e - lo)
        }
        CopulaParams::Sjc { .. } => {
            return Err(Error::Domain("score is not defined for the SJC copula".into()))
        }
    })
}
