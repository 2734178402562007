//! Fisher information of the dynamic copula parameter.
//!
//! Normal and rotated Gumbel use a Monte-Carlo table over 201 points spanning
//! the transform image of `κ ∈ [-6, 6]` (50,000 draws each, common random
//! numbers, fixed seed), interpolated linearly in `δ`. The t copula uses the
//! closed form for elliptical t distributions with known `ν`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Exp1, Open01};

use super::families;
use super::{inverse_transform, transform, CopulaFamily, CopulaParams};
use crate::distributions::norm_ppf;
use crate::error::{Error, Result};
use crate::seed;

const GRID_POINTS: usize = 201;
const KAPPA_MAX: f64 = 6.0;
const STRATA: (usize, usize) = (250, 200);
const INFO_SEED: u64 = 0x1f0_6a5;

struct InfoGrid {
    family: CopulaFamily,
    delta: Vec<f64>,
    info: Vec<f64>,
}

fn kappa_grid() -> impl Iterator<Item = f64> {
    let step = 2.0 * KAPPA_MAX / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(move |i| -KAPPA_MAX + step * i as f64)
}

fn normal_grid() -> InfoGrid {
    let mut rng = seed::rng(INFO_SEED, "fisher-normal", 0);
    let (n1, n2) = STRATA;
    let mut xe = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let v1 = (i as f64 + rng.sample::<f64, _>(Open01)) / n1 as f64;
            let v2 = (j as f64 + rng.sample::<f64, _>(Open01)) / n2 as f64;
            xe.push((norm_ppf(v1), norm_ppf(v2)));
        }
    }
    let delta: Vec<f64> = kappa_grid()
        .map(|k| transform(CopulaFamily::Normal, k).expect("normal transform"))
        .collect();
    let info = delta
        .iter()
        .map(|&rho| {
            let sd = (1.0 - rho * rho).sqrt();
            let s2: f64 = xe
                .iter()
                .map(|&(x, e)| {
                    let s = families::normal_score_xy(rho, x, rho * x + sd * e);
                    s * s
                })
                .sum();
            s2 / xe.len() as f64
        })
        .collect();
    InfoGrid {
        family: CopulaFamily::Normal,
        delta,
        info,
    }
}

fn gumbel_grid() -> InfoGrid {
    let mut rng = seed::rng(INFO_SEED, "fisher-gumbel", 0);
    let n = STRATA.0 * STRATA.1;
    let draws: Vec<[f64; 4]> = (0..n)
        .map(|_| {
            let theta = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
            let w: f64 = rng.sample(Exp1);
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            [theta, w, e1.ln(), e2.ln()]
        })
        .collect();
    let delta: Vec<f64> = kappa_grid()
        .map(|k| transform(CopulaFamily::RotatedGumbel, k).expect("gumbel transform"))
        .collect();
    let info = delta
        .iter()
        .map(|&d| {
            let alpha = 1.0 / d;
            let mut acc = 0.0;
            let mut used = 0usize;
            for &[theta, w, l1, l2] in &draws {
                let ln_v = families::ln_positive_stable(alpha, theta, w);
                // the rotated density at (1-u1, 1-u2) is the Gumbel density at a Gumbel draw
                let s = families::gumbel_score_parts(d, alpha * (l1 - ln_v), alpha * (l2 - ln_v));
                if s.is_finite() {
                    acc += s * s;
                    used += 1;
                }
            }
            acc / used as f64
        })
        .collect();
    InfoGrid {
        family: CopulaFamily::RotatedGumbel,
        delta,
        info,
    }
}

static NORMAL_GRID: OnceLock<InfoGrid> = OnceLock::new();
static GUMBEL_GRID: OnceLock<InfoGrid> = OnceLock::new();
static WARNED: AtomicBool = AtomicBool::new(false);

impl InfoGrid {
    fn lookup(&self, delta: f64) -> f64 {
        let kappa = inverse_transform(self.family, delta).unwrap_or(if delta > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        });
        if kappa.abs() > KAPPA_MAX && !WARNED.swap(true, Ordering::Relaxed) {
            log::warn!(
                "{} copula parameter {delta} outside the information grid; clamping to its edge",
                self.family
            );
        }
        let last = GRID_POINTS - 1;
        if delta <= self.delta[0] {
            return self.info[0];
        }
        if delta >= self.delta[last] {
            return self.info[last];
        }
        let pos = (kappa.clamp(-KAPPA_MAX, KAPPA_MAX) + KAPPA_MAX) / (2.0 * KAPPA_MAX) * last as f64;
        let mut i = (pos.floor() as usize).min(last - 1);
        // guard against rounding at cell borders
        while i > 0 && delta < self.delta[i] {
            i -= 1;
        }
        while i + 1 < last && delta > self.delta[i + 1] {
            i += 1;
        }
        let w = (delta - self.delta[i]) / (self.delta[i + 1] - self.delta[i]);
        (1.0 - w) * self.info[i] + w * self.info[i + 1]
    }
}

/// Expected squared score `I(δ)` of the dynamic parameter.
pub fn fisher_info(params: &CopulaParams) -> Result<f64> {
    params.validate()?;
    Ok(match *params {
        CopulaParams::Normal { rho } => NORMAL_GRID.get_or_init(normal_grid).lookup(rho),
        CopulaParams::RotatedGumbel { delta } => GUMBEL_GRID.get_or_init(gumbel_grid).lookup(delta),
        CopulaParams::StudentT { rho, nu_inv } => families::t_info(rho, super::nu_of(nu_inv)),
        _ => {
            return Err(Error::Domain(format!(
                "no information table for the {} copula",
                params.family()
            )))
        }
    })
}
