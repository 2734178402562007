//! Quasi-Newton minimization on transformed, unconstrained parameters.
//!
//! Callers describe each parameter's admissible set with a [`Bound`]; the
//! optimizer works on internal coordinates where every parameter is free and
//! maps back before each objective call. Gradients are central finite
//! differences in internal coordinates.

use crate::error::{Error, Result};

/// Admissible set of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Free,
    /// `x > 0`, via `x = exp(u)`.
    Positive,
    /// `lo < x < hi`, via a logistic map.
    Interval(f64, f64),
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl Bound {
    pub fn to_external(self, u: f64) -> f64 {
        match self {
            Bound::Free => u,
            Bound::Positive => u.exp(),
            Bound::Interval(lo, hi) => lo + (hi - lo) * sigmoid(u),
        }
    }

    pub fn to_internal(self, x: f64) -> f64 {
        const EPS: f64 = 1e-12;
        match self {
            Bound::Free => x,
            Bound::Positive => x.max(1e-300).ln(),
            Bound::Interval(lo, hi) => {
                let t = ((x - lo) / (hi - lo)).clamp(EPS, 1.0 - EPS);
                (t / (1.0 - t)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Converged when the internal-coordinate gradient ∞-norm drops below this.
    pub gtol: f64,
    /// A stalled line search is accepted as converged below this gradient norm.
    pub stall_gtol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            stall_gtol: 1e-3,
            max_iter: 500,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Gradient tolerance reached.
    Converged,
    /// Line search could not improve further; gradient small but above `gtol`.
    Stalled,
    /// Iteration cap reached with a small gradient.
    MaxIterations,
}

/// Optimizer metadata stored with every fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Convergence {
    pub status: Status,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub starts: usize,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    /// Minimizer in external (constrained) coordinates.
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

impl Minimum {
    pub fn convergence(&self, starts: usize) -> Convergence {
        Convergence {
            status: self.status,
            iterations: self.iterations,
            evaluations: self.evaluations,
            grad_norm: self.grad_norm,
            starts,
        }
    }
}

/// Central finite-difference gradient with step `rel * max(1, |x_i|)`.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], rel: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel * x[i].abs().max(1.0);
            work[i] = x[i] + h;
            let fp = f(&work);
            work[i] = x[i] - h;
            let fm = f(&work);
            work[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` starting from `x0` (external coordinates) subject to `bounds`.
///
/// Non-finite objective values are treated as infeasible and rejected by the
/// line search.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &[Bound], opts: &MinimizeOptions) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x0.len(), bounds.len(), "one bound per parameter");
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let to_ext = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(&ui, b)| b.to_external(ui))
            .collect()
    };
    let obj = |u: &[f64]| -> f64 {
        evals.set(evals.get() + 1);
        let v = f(&to_ext(u));
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut u: Vec<f64> = x0
        .iter()
        .zip(bounds)
        .map(|(&xi, b)| b.to_internal(xi))
        .collect();
    let mut fu = obj(&u);
    if !fu.is_finite() {
        return Err(Error::Domain(
            "objective is not finite at the starting point".into(),
        ));
    }
    let mut g = numeric_gradient(&obj, &u, opts.fd_step);
    // Inverse Hessian approximation, row-major.
    let mut hinv = identity(n);
    let mut fresh = true;
    let mut iter = 0;
    let mut status = None;

    while iter < opts.max_iter {
        let gnorm = inf_norm(&g);
        if !gnorm.is_finite() {
            break;
        }
        if gnorm < opts.gtol {
            status = Some(Status::Converged);
            break;
        }
        iter += 1;

        let mut d: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hinv = identity(n);
            fresh = true;
            d = g.iter().map(|x| -x).collect();
            slope = dot(&g, &d);
        }
        let dmax = inf_norm(&d);
        let mut step = if dmax > 5.0 { 5.0 / dmax } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let ft = obj(&trial);
            if ft.is_finite() && ft <= fu + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }

        let Some((unew, fnew)) = accepted else {
            if !fresh {
                hinv = identity(n);
                fresh = true;
                continue;
            }
            status = Some(Status::Stalled);
            break;
        };

        let gnew = numeric_gradient(&obj, &unew, opts.fd_step);
        let s: Vec<f64> = unew.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|h| *h *= scale);
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }
        let improvement = fu - fnew;
        u = unew;
        fu = fnew;
        g = gnew;
        if improvement.abs() <= 1e-15 * fu.abs().max(1.0) && inf_norm(&g) < opts.stall_gtol {
            status = Some(Status::Stalled);
            break;
        }
    }

    let grad_norm = inf_norm(&g);
    let status = match status {
        Some(Status::Converged) => Status::Converged,
        Some(_) if grad_norm < opts.stall_gtol => Status::Stalled,
        None if grad_norm < opts.stall_gtol => Status::MaxIterations,
        _ => {
            return Err(Error::NonConvergence {
                best: to_ext(&u),
                objective: fu,
                grad_norm,
                iterations: iter,
            })
        }
    };
    Ok(Minimum {
        x: to_ext(&u),
        value: fu,
        grad_norm,
        iterations: iter,
        evaluations: evals.get(),
        status,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

// H+ = (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
        .collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Minimize from several starting points and keep the best successful run.
///
/// Returns the error of the best failed run only when every start fails.
pub fn minimize_multistart<F>(
    f: F,
    starts: &[Vec<f64>],
    bounds: &[Bound],
    opts: &MinimizeOptions,
) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut best: Option<Minimum> = None;
    let mut last_err = None;
    for x0 in starts {
        match minimize(&f, x0, bounds, opts) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.value < b.value) {
                    best = Some(m);
                }
            }
            Err(e) => {
                let keep = match (&last_err, &e) {
                    (
                        Some(Error::NonConvergence { objective: a, .. }),
                        Error::NonConvergence { objective: b, .. },
                    ) => b < a,
                    (None, _) => true,
                    _ => false,
                };
                if keep {
                    last_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Input("no starting points".into())))
}
