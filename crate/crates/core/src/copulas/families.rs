//! Closed-form pieces of each family: log-density, conditional distribution
//! `C(v | u) = ∂C/∂u`, natural-parameter score and conditional sampling.

use rand::Rng;
use rand_distr::{ChiSquared, Exp1, Open01, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{norm_cdf, norm_ppf, t_cdf, t_ppf, NU_NORMAL};

// ---------- normal ----------

/// Log-density in terms of normal scores `x = Φ⁻¹(u1)`, `y = Φ⁻¹(u2)`.
pub(crate) fn normal_ln_c_xy(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

pub(crate) fn normal_score_xy(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    (rho * r2 - rho * (x * x + y * y) + (1.0 + rho * rho) * x * y) / (r2 * r2)
}

pub(crate) fn normal_h(rho: f64, u1: f64, u2: f64) -> f64 {
    let (x, y) = (norm_ppf(u1), norm_ppf(u2));
    norm_cdf((y - rho * x) / (1.0 - rho * rho).sqrt())
}

pub(crate) fn normal_sample<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> (f64, f64) {
    let x: f64 = rng.sample(StandardNormal);
    let e: f64 = rng.sample(StandardNormal);
    let y = rho * x + (1.0 - rho * rho).sqrt() * e;
    (norm_cdf(x), norm_cdf(y))
}

// ---------- Student t ----------

pub(crate) fn t_const(nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return 0.0;
    }
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

/// Log-density in terms of t scores; `konst` is [`t_const`]`(nu)`.
pub(crate) fn t_ln_c_xy(rho: f64, nu: f64, konst: f64, x: f64, y: f64) -> f64 {
    if nu >= NU_NORMAL {
        return normal_ln_c_xy(rho, x, y);
    }
    let r2 = 1.0 - rho * rho;
    let q = (x * x + y * y - 2.0 * rho * x * y) / r2;
    konst - 0.5 * r2.ln() - 0.5 * (nu + 2.0) * (q / nu).ln_1p()
        + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

pub(crate) fn t_score_xy(rho: f64, nu: f64, x: f64, y: f64) -> f64 {
    if nu >= NU_NORMAL {
        return normal_score_xy(rho, x, y);
    }
    let r2 = 1.0 - rho * rho;
    let s = x * x + y * y;
    let p = x * y;
    let q = (s - 2.0 * rho * p) / r2;
    rho / r2 - (nu + 2.0) * (rho * s - (1.0 + rho * rho) * p) / (r2 * r2 * (nu + q))
}

/// Fisher information of the t copula in `rho` with `nu` known.
pub(crate) fn t_info(rho: f64, nu: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    if nu >= NU_NORMAL {
        return (1.0 + rho * rho) / (r2 * r2);
    }
    ((nu + 2.0) * (1.0 + rho * rho) - 2.0 * rho * rho) / ((nu + 4.0) * r2 * r2)
}

pub(crate) fn t_h(rho: f64, nu: f64, u1: f64, u2: f64) -> f64 {
    let (x, y) = (t_ppf(u1, nu), t_ppf(u2, nu));
    let scale = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
    t_cdf((y - rho * x) / scale, nu + 1.0)
}

pub(crate) fn t_sample<R: Rng + ?Sized>(rho: f64, nu: f64, rng: &mut R) -> (f64, f64) {
    let x: f64 = rng.sample(StandardNormal);
    let e: f64 = rng.sample(StandardNormal);
    let y = rho * x + (1.0 - rho * rho).sqrt() * e;
    if nu >= NU_NORMAL {
        return (norm_cdf(x), norm_cdf(y));
    }
    let w: f64 = rng.sample(ChiSquared::new(nu).expect("nu > 0"));
    let s = (nu / w).sqrt();
    (t_cdf(x * s, nu), t_cdf(y * s, nu))
}

// ---------- Clayton ----------

/// `ln(u^-θ + v^-θ - 1)` without overflow.
fn clayton_ln_a(theta: f64, lu: f64, lv: f64) -> f64 {
    let (a, b) = (-theta * lu, -theta * lv);
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

pub(crate) fn clayton_ln_c(theta: f64, u1: f64, u2: f64) -> f64 {
    let (lu, lv) = (u1.ln(), u2.ln());
    (1.0 + theta).ln() - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * clayton_ln_a(theta, lu, lv)
}

pub(crate) fn clayton_h(theta: f64, u1: f64, u2: f64) -> f64 {
    let (lu, lv) = (u1.ln(), u2.ln());
    (-(theta + 1.0) * lu - (1.0 / theta + 1.0) * clayton_ln_a(theta, lu, lv)).exp()
}

pub(crate) fn clayton_sample<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> (f64, f64) {
    let u: f64 = rng.sample(Open01);
    let w: f64 = rng.sample(Open01);
    // v = [(w^(-θ/(1+θ)) - 1) u^-θ + 1]^(-1/θ), evaluated in logs
    let a = (-theta / (1.0 + theta) * w.ln()).exp_m1();
    let ln_inner = (a.ln() - theta * u.ln()).exp().ln_1p();
    let v = (-ln_inner / theta).exp();
    (u, v.clamp(f64::MIN_POSITIVE, 1.0))
}

// ---------- Gumbel (unrotated) ----------

/// Log-space building blocks for the Gumbel copula at `ln x = ln(-ln u)`.
struct GumbelParts {
    ln_a: f64,
    m: f64,
    /// Weight of the `x` term in `A`: `x^δ / A`.
    wx: f64,
}

fn gumbel_parts(delta: f64, lnx: f64, lny: f64) -> GumbelParts {
    let (hi, lo) = if lnx >= lny { (lnx, lny) } else { (lny, lnx) };
    let r = (delta * (lo - hi)).exp();
    let ln_a = delta * hi + r.ln_1p();
    let w_hi = 1.0 / (1.0 + r);
    let wx = if lnx >= lny { w_hi } else { 1.0 - w_hi };
    GumbelParts {
        ln_a,
        m: (ln_a / delta).exp(),
        wx,
    }
}

/// Gumbel log-density given `ln x = ln(-ln u1)`, `ln y`, and `ln u1 + ln u2`.
fn gumbel_ln_c_parts(delta: f64, lnx: f64, lny: f64, ln_uv: f64) -> f64 {
    let g = gumbel_parts(delta, lnx, lny);
    -g.m - ln_uv + (delta - 1.0) * (lnx + lny) + (2.0 / delta - 2.0) * g.ln_a
        + (g.m + delta - 1.0).ln()
        - g.m.ln()
}

pub(crate) fn gumbel_ln_c(delta: f64, u1: f64, u2: f64) -> f64 {
    let (l1, l2) = (u1.ln(), u2.ln());
    gumbel_ln_c_parts(delta, (-l1).ln(), (-l2).ln(), l1 + l2)
}

/// `∂ ln c / ∂δ` for the Gumbel copula at `ln x`, `ln y`.
pub(crate) fn gumbel_score_parts(delta: f64, lnx: f64, lny: f64) -> f64 {
    let g = gumbel_parts(delta, lnx, lny);
    // A'/A = wx ln x + wy ln y
    let a_ratio = g.wx * lnx + (1.0 - g.wx) * lny;
    let dln_m = -g.ln_a / (delta * delta) + a_ratio / delta;
    let dm = g.m * dln_m;
    -dm + (lnx + lny) - 2.0 / (delta * delta) * g.ln_a
        + (2.0 / delta - 2.0) * a_ratio
        + (dm + 1.0) / (g.m + delta - 1.0)
        - dln_m
}

pub(crate) fn gumbel_score(delta: f64, u1: f64, u2: f64) -> f64 {
    gumbel_score_parts(delta, (-u1.ln()).ln(), (-u2.ln()).ln())
}

/// `∂C/∂u1` for the Gumbel copula.
pub(crate) fn gumbel_h(delta: f64, u1: f64, u2: f64) -> f64 {
    let l1 = u1.ln();
    let (lnx, lny) = ((-l1).ln(), (-u2.ln()).ln());
    let g = gumbel_parts(delta, lnx, lny);
    (-g.m + (delta - 1.0) * (lnx - g.m.ln()) - l1).exp()
}

/// Log of a positive stable variate with Laplace transform `exp(-t^α)`
/// (Kanter's representation) from `theta ~ U(0, π)` and `w ~ Exp(1)`.
pub(crate) fn ln_positive_stable(alpha: f64, theta: f64, w: f64) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    (alpha * theta).sin().ln() - theta.sin().ln() / alpha
        + (1.0 - alpha) / alpha * (((1.0 - alpha) * theta).sin().ln() - w.ln())
}

/// Marshall–Olkin draw returned as `(ln x1, ln x2)` where `x_i = -ln u_i`.
pub(crate) fn gumbel_sample_lnx<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> (f64, f64) {
    let alpha = 1.0 / delta;
    let theta = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let ln_v = ln_positive_stable(alpha, theta, w);
    let e1: f64 = rng.sample(Exp1);
    let e2: f64 = rng.sample(Exp1);
    (alpha * (e1.ln() - ln_v), alpha * (e2.ln() - ln_v))
}

pub(crate) fn gumbel_sample<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> (f64, f64) {
    let (a, b) = gumbel_sample_lnx(delta, rng);
    ((-a.exp()).exp(), (-b.exp()).exp())
}

// ---------- Joe–Clayton and its symmetrized version ----------

#[derive(Clone, Copy)]
struct Jc {
    k: f64,
    g: f64,
}

impl Jc {
    fn new(tau_u: f64, tau_l: f64) -> Self {
        Self {
            k: 1.0 / (2.0 - tau_u).log2(),
            g: -1.0 / tau_l.log2(),
        }
    }

    /// `(X, X_u, 1 - X)` with `X = 1 - (1-u)^k`.
    fn inner(&self, u: f64) -> (f64, f64, f64) {
        let ub = 1.0 - u;
        let p = ub.powf(self.k - 1.0);
        let a = p * ub;
        (1.0 - a, self.k * p, a)
    }

    /// `(S - 1, 1 - W)` with `S = X^-g + Y^-g - 1`, `W = S^(-1/g)`, both kept
    /// accurate when `X` and `Y` round to one.
    fn excess(&self, ax: f64, ay: f64) -> (f64, f64) {
        let g = self.g;
        let s1 = (-g * (-ax).ln_1p()).exp_m1() + (-g * (-ay).ln_1p()).exp_m1();
        (s1, -(-s1.ln_1p() / g).exp_m1())
    }

    fn density(&self, u: f64, v: f64) -> f64 {
        let (x, xu, ax) = self.inner(u);
        let (y, yv, ay) = self.inner(v);
        let (g, k) = (self.g, self.k);
        let (s1, omw) = self.excess(ax, ay);
        let s = 1.0 + s1;
        let xg = x.powf(-g);
        let yg = y.powf(-g);
        let wx = xg / x * s.powf(-1.0 / g - 1.0);
        let wy = yg / y * s.powf(-1.0 / g - 1.0);
        let wxy = (1.0 + g) * xg / x * yg / y * s.powf(-1.0 / g - 2.0);
        xu * yv / k * omw.powf(1.0 / k - 2.0) * (omw * wxy + (1.0 - 1.0 / k) * wx * wy)
    }

    /// `∂C/∂u`.
    fn h(&self, u: f64, v: f64) -> f64 {
        let (x, xu, ax) = self.inner(u);
        let (_, _, ay) = self.inner(v);
        let g = self.g;
        let (s1, omw) = self.excess(ax, ay);
        let wx = x.powf(-g) / x * (1.0 + s1).powf(-1.0 / g - 1.0);
        omw.powf(1.0 / self.k - 1.0) / self.k * wx * xu
    }

    /// Invert `h(u, ·) = p` by bisection.
    fn h_inv(&self, u: f64, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let hv = self.h(u, mid);
            if hv.is_nan() || hv < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub(crate) fn sjc_density(tau_u: f64, tau_l: f64, u1: f64, u2: f64) -> f64 {
    0.5 * (Jc::new(tau_u, tau_l).density(u1, u2) + Jc::new(tau_l, tau_u).density(1.0 - u1, 1.0 - u2))
}

pub(crate) fn sjc_h(tau_u: f64, tau_l: f64, u1: f64, u2: f64) -> f64 {
    0.5 * (Jc::new(tau_u, tau_l).h(u1, u2) - Jc::new(tau_l, tau_u).h(1.0 - u1, 1.0 - u2) + 1.0)
}

pub(crate) fn sjc_sample<R: Rng + ?Sized>(tau_u: f64, tau_l: f64, rng: &mut R) -> (f64, f64) {
    let u: f64 = rng.sample(Open01);
    let p: f64 = rng.sample(Open01);
    if rng.random_bool(0.5) {
        (u, Jc::new(tau_u, tau_l).h_inv(u, p))
    } else {
        let v = Jc::new(tau_l, tau_u).h_inv(u, p);
        (1.0 - u, 1.0 - v)
    }
}
