//! Small descriptive-statistics and regression helpers shared across modules.

use nalgebra::{DMatrix, DVector};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Linear-interpolation quantile of an ascending-sorted sample (`(n-1) p` rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let k = h.floor() as usize;
    if k + 1 >= n {
        return sorted[n - 1];
    }
    sorted[k] + (h - k as f64) * (sorted[k + 1] - sorted[k])
}

/// Kendall's tau-a in `O(n log n)` (Knight's algorithm, no tie correction).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]).then(ys[i].total_cmp(&ys[j])));
    let mut y: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut y, &mut buf);
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    (pairs - 2.0 * swaps as f64) / pairs
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coef: DVector<f64>,
    /// `s² (X'X)⁻¹` with `s² = RSS / (n - k)`.
    pub cov: DMatrix<f64>,
    pub rss: f64,
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Ols> {
    let (n, k) = x.shape();
    if n <= k {
        return None;
    }
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky()?;
    let coef = chol.solve(&(x.transpose() * y));
    let resid = y - x * &coef;
    let rss = resid.norm_squared();
    let s2 = rss / (n - k) as f64;
    let cov = chol.inverse() * s2;
    Some(Ols { coef, cov, rss })
}

/// Newey–West long-run variance of `d` with Bartlett weights and `lags` lags.
pub fn newey_west_variance(d: &[f64], lags: usize) -> f64 {
    let n = d.len();
    let m = mean(d);
    let c: Vec<f64> = d.iter().map(|x| x - m).collect();
    let gamma = |k: usize| c[k..].iter().zip(&c[..n - k]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let mut v = gamma(0);
    for k in 1..=lags.min(n.saturating_sub(1)) {
        let w = 1.0 - k as f64 / (lags as f64 + 1.0);
        v += 2.0 * w * gamma(k);
    }
    v.max(0.0)
}

/// HAC lag `floor(T^(1/3))`.
pub fn hac_lag(n: usize) -> usize {
    (n as f64).cbrt().floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kendall_naive(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += ((x[i] - x[j]) * (y[i] - y[j])).signum();
            }
        }
        s / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn kendall_matches_naive() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 + 0.1 * i as f64).collect();
        let y: Vec<f64> = (0..200).map(|i| ((i * 53) % 97) as f64 * 0.5 + x[i] * 0.3).collect();
        assert!((kendall_tau(&x, &y) - kendall_naive(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        let s = [-1.0, 0.0, 1.0];
        assert_eq!(quantile_sorted(&s, 0.5), 0.0);
        assert_eq!(quantile_sorted(&s, 0.25), -0.5);
        assert_eq!(quantile_sorted(&s, 1.0), 1.0);
    }

    #[test]
    fn ols_recovers_line() {
        let n = 50;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(n, |i, _| 2.0 + 0.5 * i as f64);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-10);
        assert!((fit.coef[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn newey_west_white_noise_equals_variance_without_lags() {
        let d = [1.0, -1.0, 2.0, -2.0];
        assert!((newey_west_variance(&d, 0) - 2.5).abs() < 1e-12);
    }
}
