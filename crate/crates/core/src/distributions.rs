//! Univariate distributions: Hansen's skewed Student-t, normal and Student-t
//! helpers, and the rescaled empirical distribution.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::{beta, erf, gamma::ln_gamma};

use crate::error::{Error, Result};
use crate::seed;

/// Degrees of freedom at and above which the normal limit is used.
pub const NU_NORMAL: f64 = 1e7;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

pub fn norm_ppf(p: f64) -> f64 {
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// `ln Γ(x + 1/2) − ln Γ(x)`, stable for large `x`.
fn ln_gamma_half_ratio(x: f64) -> f64 {
    if x > 1e3 {
        0.5 * x.ln() - 1.0 / (8.0 * x) + 1.0 / (192.0 * x.powi(3))
    } else {
        ln_gamma(x + 0.5) - ln_gamma(x)
    }
}

pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return -0.5 * x * x - LN_SQRT_2PI;
    }
    ln_gamma_half_ratio(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Student-t CDF with `nu` degrees of freedom (`nu` > 0, may be huge).
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return norm_cdf(x);
    }
    if nu > 1e6 {
        let phi = norm_pdf(x);
        let x2 = x * x;
        return norm_cdf(x)
            - phi * x * (x2 + 1.0) / (4.0 * nu)
            - phi * x * (((3.0 * x2 + 19.0) * x2 + 17.0) * x2 - 3.0) / (96.0 * nu * nu);
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta::beta_reg(0.5 * nu, 0.5, nu / (nu + x * x));
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Student-t quantile; `0 < p < 1`.
pub fn t_ppf(p: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return norm_ppf(p);
    }
    if nu > 1e6 {
        let z = norm_ppf(p);
        let z2 = z * z;
        return z
            + z * (z2 + 1.0) / (4.0 * nu)
            + z * ((5.0 * z2 + 16.0) * z2 + 3.0) / (96.0 * nu * nu);
    }
    let lower = p.min(1.0 - p);
    let y = beta::inv_beta_reg(0.5 * nu, 0.5, 2.0 * lower);
    let mut x = (nu * (1.0 - y) / y).sqrt();
    if p < 0.5 {
        x = -x;
    }
    // two Newton steps on the CDF remove the inverse-beta approximation error
    for _ in 0..2 {
        let f = t_ln_pdf(x, nu).exp();
        if f <= 0.0 || !f.is_finite() {
            break;
        }
        let step = (t_cdf(x, nu) - p) / f;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Shape parameters of the standardized skewed-t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTParams {
    /// Degrees of freedom, `nu > 2`; values at or above [`NU_NORMAL`] mean the normal limit.
    pub nu: f64,
    /// Skewness, `|lambda| < 1`.
    pub lambda: f64,
}

impl SkewTParams {
    pub fn new(nu: f64, lambda: f64) -> Result<Self> {
        let p = Self { nu, lambda };
        p.validate()?;
        Ok(p)
    }

    /// Build from `1/nu`; `nu_inv = 0` is the normal limit.
    pub fn from_nu_inv(nu_inv: f64, lambda: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&nu_inv) {
            return Err(Error::Domain(format!("nu_inv = {nu_inv} outside [0, 0.5)")));
        }
        let nu = if nu_inv <= 1.0 / NU_NORMAL {
            NU_NORMAL
        } else {
            1.0 / nu_inv
        };
        Self::new(nu, lambda)
    }

    pub fn normal() -> Self {
        Self {
            nu: NU_NORMAL,
            lambda: 0.0,
        }
    }

    pub fn nu_inv(&self) -> f64 {
        if self.nu >= NU_NORMAL {
            0.0
        } else {
            1.0 / self.nu
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 2.0) || self.nu.is_nan() {
            return Err(Error::Domain(format!("skew-t nu = {} must exceed 2", self.nu)));
        }
        if !(self.lambda.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "skew-t lambda = {} must lie in (-1, 1)",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Hansen's zero-mean, unit-variance skewed Student-t with precomputed constants.
#[derive(Debug, Clone, Copy)]
pub struct SkewT {
    params: SkewTParams,
    nu: f64,
    a: f64,
    b: f64,
    ln_bc: f64,
    /// `sqrt(nu / (nu - 2))`; 1 in the normal limit.
    t_scale: f64,
    normal_limit: bool,
}

impl SkewT {
    pub fn new(params: SkewTParams) -> Result<Self> {
        params.validate()?;
        let normal_limit = params.nu >= NU_NORMAL;
        let nu = params.nu.min(NU_NORMAL);
        let lam = params.lambda;
        let (ln_c, a) = if normal_limit {
            let ln_c = -LN_SQRT_2PI;
            (ln_c, 4.0 * lam * ln_c.exp())
        } else {
            let ln_c = ln_gamma_half_ratio(0.5 * nu) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
            (ln_c, 4.0 * lam * ln_c.exp() * (nu - 2.0) / (nu - 1.0))
        };
        let b = (1.0 + 3.0 * lam * lam - a * a).sqrt();
        let t_scale = if normal_limit {
            1.0
        } else {
            (nu / (nu - 2.0)).sqrt()
        };
        Ok(Self {
            params,
            nu,
            a,
            b,
            ln_bc: b.ln() + ln_c,
            t_scale,
            normal_limit,
        })
    }

    pub fn params(&self) -> SkewTParams {
        self.params
    }

    /// Mode-side boundary `-a/b` where the two halves meet.
    fn kink(&self) -> f64 {
        -self.a / self.b
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        let lam = self.params.lambda;
        let side = if z < self.kink() { 1.0 - lam } else { 1.0 + lam };
        let w = (self.b * z + self.a) / side;
        if self.normal_limit {
            self.ln_bc - 0.5 * w * w
        } else {
            self.ln_bc - 0.5 * (self.nu + 1.0) * (w * w / (self.nu - 2.0)).ln_1p()
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    fn t_cdf(&self, w: f64) -> f64 {
        if self.normal_limit {
            norm_cdf(w)
        } else {
            t_cdf(w, self.nu)
        }
    }

    fn t_ppf(&self, p: f64) -> f64 {
        if self.normal_limit {
            norm_ppf(p)
        } else {
            t_ppf(p, self.nu)
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        let lam = self.params.lambda;
        let v = if z < self.kink() {
            let w = (self.b * z + self.a) / (1.0 - lam) * self.t_scale;
            (1.0 - lam) * self.t_cdf(w)
        } else {
            let w = (self.b * z + self.a) / (1.0 + lam) * self.t_scale;
            0.5 * (1.0 - lam) + (1.0 + lam) * (self.t_cdf(w) - 0.5)
        };
        v.clamp(0.0, 1.0)
    }

    /// Closed-form piecewise inverse, before polishing.
    fn quantile_seed(&self, u: f64) -> f64 {
        let lam = self.params.lambda;
        let split = 0.5 * (1.0 - lam);
        let (side, w) = if u < split {
            (1.0 - lam, self.t_ppf(u / (1.0 - lam)))
        } else {
            (1.0 + lam, self.t_ppf(0.5 + (u - split) / (1.0 + lam)))
        };
        (side * w / self.t_scale - self.a) / self.b
    }

    /// Inverse CDF, polished by safeguarded Newton steps to `|F(z) - u| < 1e-12`
/// and a relative z-step below `1e-12`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level {u} outside (0, 1)")));
        }
        Ok(self.quantile_unchecked(u))
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        let mut z = self.quantile_seed(u);
        if !z.is_finite() {
            z = 0.0;
        }
        // bracket [lo, hi] around the root, grown geometrically from the seed
        let mut lo = z - 1.0;
        let mut hi = z + 1.0;
        let mut width = 1.0;
        while self.cdf(lo) > u {
            width *= 2.0;
            lo = z - width;
        }
        width = 1.0;
        while self.cdf(hi) < u {
            width *= 2.0;
            hi = z + width;
        }
        for _ in 0..100 {
            let err = self.cdf(z) - u;
            let dens = self.pdf(z);
            // in the far tails a tiny u-error is still a large z-error
            if err.abs() < 1e-12 && err.abs() < 1e-12 * dens * z.abs().max(1.0) {
                return z;
            }
            if err > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let newton = z - err / dens;
            z = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 * z.abs().max(1.0) {
                return z;
            }
        }
        z
    }

    /// Draw `n` i.i.d. variates by inverting uniform draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| self.quantile_unchecked(rng.sample(Open01)))
            .collect()
    }
}

pub fn skewt_pdf(z: f64, p: SkewTParams) -> Result<f64> {
    Ok(SkewT::new(p)?.pdf(z))
}

pub fn skewt_cdf(z: f64, p: SkewTParams) -> Result<f64> {
    Ok(SkewT::new(p)?.cdf(z))
}

pub fn skewt_quantile(u: f64, p: SkewTParams) -> Result<f64> {
    SkewT::new(p)?.quantile(u)
}

/// `n` reproducible skewed-t draws from `seed`.
pub fn skewt_sample(n: usize, p: SkewTParams, seed: u64) -> Result<Vec<f64>> {
    let dist = SkewT::new(p)?;
    let mut rng = seed::rng_from(seed);
    Ok(dist.sample(&mut rng, n))
}

/// Tabulated skewed-t quantile for bulk Monte-Carlo inversion.
///
/// Nodes sit on a uniform grid in `logit(u)` over `[-25, 25]`; between nodes
/// the quantile is a cubic Hermite interpolant using the exact derivative
/// `dz/dlogit(u) = u (1 - u) / f(z)`. Levels outside the grid fall back to
/// the exact solver.
#[derive(Debug, Clone)]
pub struct QuantileTable {
    dist: SkewT,
    z: Vec<f64>,
    dz: Vec<f64>,
}

const TABLE_HALF_WIDTH: f64 = 25.0;
const TABLE_INTERVALS: usize = 8192;

impl QuantileTable {
    pub fn new(params: SkewTParams) -> Result<Self> {
        let dist = SkewT::new(params)?;
        let step = 2.0 * TABLE_HALF_WIDTH / TABLE_INTERVALS as f64;
        let mut z = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut dz = Vec::with_capacity(TABLE_INTERVALS + 1);
        for k in 0..=TABLE_INTERVALS {
            let g = -TABLE_HALF_WIDTH + k as f64 * step;
            let u = 1.0 / (1.0 + (-g).exp());
            let zk = dist.quantile_unchecked(u);
            z.push(zk);
            dz.push(u * (1.0 - u) / dist.pdf(zk));
        }
        Ok(Self { dist, z, dz })
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let g = (u / (1.0 - u)).ln();
        if !(g.abs() < TABLE_HALF_WIDTH) {
            return self.dist.quantile_unchecked(u);
        }
        let step = 2.0 * TABLE_HALF_WIDTH / TABLE_INTERVALS as f64;
        let pos = (g + TABLE_HALF_WIDTH) / step;
        let k = (pos as usize).min(TABLE_INTERVALS - 1);
        let t = pos - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.z[k] + h10 * step * self.dz[k] + h01 * self.z[k + 1] + h11 * step * self.dz[k + 1]
    }
}

/// Rescaled empirical distribution of a sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Input("empirical distribution needs a nonempty sample".into()));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("empirical distribution sample must be finite".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_sample(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_t <= z} / (T + 1)`.
    pub fn eval(&self, z: f64) -> f64 {
        let count = self.sorted.partition_point(|&x| x <= z);
        count as f64 / (self.sorted.len() as f64 + 1.0)
    }

    /// Inverse of the rescaled ECDF, linear between order statistics placed
    /// at levels `k / (T + 1)`; clamped to the sample range outside them.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let pos = u * (n as f64 + 1.0) - 1.0;
        if pos <= 0.0 {
            return self.sorted[0];
        }
        if pos >= (n - 1) as f64 {
            return self.sorted[n - 1];
        }
        let k = pos as usize;
        let frac = pos - k as f64;
        self.sorted[k] + frac * (self.sorted[k + 1] - self.sorted[k])
    }
}

pub fn ecdf_eval(z: f64, d: &EmpiricalDist) -> f64 {
    d.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_limit_pdf_at_zero() {
        let v = skewt_pdf(0.0, SkewTParams::new(1e6, 0.0).unwrap()).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-6, "{v}");
        let v = skewt_pdf(0.0, SkewTParams::normal()).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn symmetric_when_lambda_zero() {
        let d = SkewT::new(SkewTParams::new(5.0, 0.0).unwrap()).unwrap();
        for z in [0.1, 0.7, 1.9, 4.2] {
            assert!((d.pdf(z) - d.pdf(-z)).abs() < 1e-14);
        }
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-14);
        assert!(d.quantile(0.5).unwrap().abs() < 1e-10);
    }

    #[test]
    fn cdf_limits() {
        let d = SkewT::new(SkewTParams::new(7.3569, -0.083).unwrap()).unwrap();
        assert_eq!(d.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(d.cdf(f64::INFINITY), 1.0);
        assert!(d.cdf(-1e6) < 1e-20);
        assert!(d.cdf(1e6) > 1.0 - 1e-12);
    }

    #[test]
    fn dax_left_tail_heavier_than_normal() {
        let q = skewt_quantile(0.01, SkewTParams::new(13.6919, -0.1161).unwrap()).unwrap();
        assert!(q < -2.326, "{q}");
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SkewTParams::new(2.0, 0.0).is_err());
        assert!(SkewTParams::new(5.0, 1.0).is_err());
        assert!(SkewTParams::from_nu_inv(0.5, 0.0).is_err());
        assert!(skewt_quantile(0.0, SkewTParams::normal()).is_err());
        assert!(skewt_quantile(1.0, SkewTParams::normal()).is_err());
    }

    #[test]
    fn t_helpers_consistent() {
        for nu in [3.0, 8.0, 40.0, 5e5, 5e6] {
            for p in [1e-6, 0.01, 0.3, 0.5, 0.8, 0.999] {
                let x = t_ppf(p, nu);
                assert!((t_cdf(x, nu) - p).abs() < 1e-11 * p.max(1e-3) / 1e-3, "nu={nu} p={p}");
            }
        }
    }

    #[test]
    fn ecdf_rank_formula() {
        let d = EmpiricalDist::new(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.eval(2.0), 0.5);
        assert_eq!(d.eval(0.0), 0.0);
        assert_eq!(d.eval(10.0), 0.75);
        let ranks: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&z| d.eval(z)).collect();
        assert_eq!(ranks, vec![0.25, 0.5, 0.75]);
        assert_eq!(d.quantile(0.5), 2.0);
        assert_eq!(d.quantile(0.01), 1.0);
    }

    #[test]
    fn table_matches_exact_quantile() {
        let p = SkewTParams::new(7.3569, -0.083).unwrap();
        let t = QuantileTable::new(p).unwrap();
        let d = SkewT::new(p).unwrap();
        for &u in &[1e-9, 1e-4, 0.013, 0.25, 0.5, 0.77, 0.99, 1.0 - 1e-7] {
            let exact = d.quantile(u).unwrap();
            assert!((t.quantile(u) - exact).abs() < 1e-8 * exact.abs().max(1.0), "u={u}");
        }
    }
}
