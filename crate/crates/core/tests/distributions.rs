mod common;

use copula_risk::distributions::{
    ecdf_eval, norm_pdf, skewt_cdf, skewt_pdf, skewt_quantile, skewt_sample, EmpiricalDist, QuantileTable, SkewT,
    SkewTParams,
};
use statrs::function::gamma::ln_gamma;

const NUS: [f64; 4] = [2.5, 5.0, 10.0, 50.0];
const LAMBDAS: [f64; 5] = [-0.9, -0.3, 0.0, 0.3, 0.9];

/// Mode-side boundary of the density, from the textbook constants.
fn kink(nu: f64, lambda: f64) -> f64 {
    let c = (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu)).exp() / (std::f64::consts::PI * (nu - 2.0)).sqrt();
    let a = 4.0 * lambda * c * (nu - 2.0) / (nu - 1.0);
    let b = (1.0 + 3.0 * lambda * lambda - a * a).sqrt();
    -a / b
}

#[test]
fn density_integrates_to_one_with_unit_variance() {
    for nu in NUS {
        for lambda in LAMBDAS {
            let p = SkewTParams::new(nu, lambda).unwrap();
            let d = SkewT::new(p).unwrap();
            let c = kink(nu, lambda);
            let mass = common::real_line(|z| d.pdf(z), c);
            let mean = common::real_line(|z| z * d.pdf(z), c);
            let second = common::real_line(|z| z * z * d.pdf(z), c);
            assert!((mass - 1.0).abs() < 1e-6, "nu={nu} lambda={lambda}: mass {mass}");
            assert!(mean.abs() < 1e-4, "nu={nu} lambda={lambda}: mean {mean}");
            assert!((second - mean * mean - 1.0).abs() < 1e-4, "nu={nu} lambda={lambda}: var {second}");
        }
    }
}

#[test]
fn px_innovations_integrate_to_one() {
    let p = SkewTParams::new(7.3569, -0.0830).unwrap();
    let mass = common::real_line(|z| skewt_pdf(z, p).unwrap(), kink(7.3569, -0.0830));
    assert!((mass - 1.0).abs() < 1e-6);
}

#[test]
fn cdf_matches_integrated_density() {
    let p = SkewTParams::new(5.0, -0.3).unwrap();
    let d = SkewT::new(p).unwrap();
    for z in [-3.0, -1.0, -0.2, 0.4, 2.5] {
        let c = kink(5.0, -0.3);
        // ∫_{-∞}^{z} f, splitting at the kink when it lies below z
        let lower = if z > c {
            common::half_line(|x| d.pdf(x), c, -1.0) + common::composite(20, 10, c, z).iter().map(|&(x, w)| w * d.pdf(x)).sum::<f64>()
        } else {
            common::half_line(|x| d.pdf(x), z, -1.0)
        };
        assert!((lower - d.cdf(z)).abs() < 1e-8, "z={z}: {lower} vs {}", d.cdf(z));
    }
}

#[test]
fn round_trips() {
    for nu in NUS {
        for lambda in LAMBDAS {
            let p = SkewTParams::new(nu, lambda).unwrap();
            for k in 1..=99 {
                let u = k as f64 / 100.0;
                let z = skewt_quantile(u, p).unwrap();
                assert!((skewt_cdf(z, p).unwrap() - u).abs() < 1e-8);
            }
            for k in -50..=50 {
                let z = k as f64 / 10.0;
                let u = skewt_cdf(z, p).unwrap();
                if u == 0.0 || u == 1.0 {
                    // beyond double precision in the tail
                    continue;
                }
                let back = skewt_quantile(u, p).unwrap();
                // u itself carries an absolute rounding error of a few ulps near 1
                let tol = 1e-8_f64.max(4.0 * f64::EPSILON / skewt_pdf(z, p).unwrap());
                assert!((back - z).abs() < tol, "nu={nu} lambda={lambda} z={z}: {back}");
            }
        }
    }
}

#[test]
fn quantile_table_tracks_exact_inverse() {
    let p = SkewTParams::new(13.6919, -0.1161).unwrap();
    let t = QuantileTable::new(p).unwrap();
    for k in 1..2000 {
        let u = k as f64 / 2000.0;
        assert!((t.quantile(u) - skewt_quantile(u, p).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn limits_and_symmetry() {
    let n = SkewTParams::new(1e6, 0.0).unwrap();
    assert!((skewt_pdf(0.0, n).unwrap() - 0.398942).abs() < 1e-6);
    assert!((skewt_pdf(1.3, n).unwrap() - norm_pdf(1.3)).abs() < 1e-6);
    let s = SkewTParams::new(5.0, 0.0).unwrap();
    assert_eq!(skewt_cdf(0.0, s).unwrap(), 0.5);
    assert!(skewt_quantile(0.5, s).unwrap().abs() < 1e-12);
    for z in [0.3, 1.0, 4.0] {
        assert!((skewt_pdf(z, s).unwrap() - skewt_pdf(-z, s).unwrap()).abs() < 1e-15);
    }
    assert_eq!(skewt_cdf(f64::NEG_INFINITY, s).unwrap(), 0.0);
    assert_eq!(skewt_cdf(f64::INFINITY, s).unwrap(), 1.0);
    let dax = SkewTParams::new(13.6919, -0.1161).unwrap();
    assert!(skewt_quantile(0.01, dax).unwrap() < -2.326);
    assert!(skewt_quantile(0.0, dax).is_err());
    assert!(skewt_quantile(1.0, dax).is_err());
    assert!(SkewTParams::new(2.0, 0.0).is_err());
    assert!(SkewTParams::new(5.0, 1.0).is_err());
}

#[test]
fn sampler_moments_and_determinism() {
    let p = SkewTParams::new(8.0, 0.0).unwrap();
    let x = skewt_sample(1_000_000, p, 11).unwrap();
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64;
    assert!(m.abs() < 0.01, "mean {m}");
    assert!((v - 1.0).abs() < 0.02, "var {v}");
    let skewed = SkewTParams::new(6.0, -0.4).unwrap();
    let y = skewt_sample(1_000_000, skewed, 12).unwrap();
    let vy = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    assert!((vy - 1.0).abs() < 0.02, "var {vy}");
    assert_eq!(skewt_sample(100, p, 3).unwrap(), skewt_sample(100, p, 3).unwrap());
}

#[test]
fn rescaled_ecdf() {
    let d = EmpiricalDist::new(&[3.0, 1.0, 2.0]).unwrap();
    assert_eq!(ecdf_eval(2.0, &d), 0.5);
    assert_eq!(ecdf_eval(0.5, &d), 0.0);
    assert_eq!(ecdf_eval(10.0, &d), 0.75);
    let ranks: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&z| d.eval(z)).collect();
    assert_eq!(ranks, vec![0.25, 0.5, 0.75]);
    assert!(EmpiricalDist::new(&[]).is_err());
}
