#![allow(dead_code)]

/// `∫_c^∞ f` by the exp-sinh substitution `z = c + exp(π/2 sinh t)`.
pub fn half_line<F: Fn(f64) -> f64>(f: F, c: f64, sign: f64) -> f64 {
    let h = 1.0 / 128.0;
    let mut sum = 0.0;
    let mut k = -(6.0 / h) as i64;
    loop {
        let t = k as f64 * h;
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        if s > 140.0 {
            break;
        }
        let e = s.exp();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() * e;
        let v = f(c + sign * e) * w;
        if v.is_finite() {
            sum += v;
        }
        k += 1;
    }
    sum * h
}

/// `∫_{-∞}^{∞} f`, split at `c` where `f` may have a kink.
pub fn real_line<F: Fn(f64) -> f64>(f: F, c: f64) -> f64 {
    half_line(&f, c, 1.0) + half_line(&f, c, -1.0)
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
    }
    out
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal pieces.
pub fn composite(panels: usize, order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let step = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| gauss_legendre(order, a + p as f64 * step, a + (p + 1) as f64 * step))
        .collect()
}
