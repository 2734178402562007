use copula_risk::copulas::{self, CopulaFamily, CopulaParams, CopulaSpec, Dynamics};
use copula_risk::{seed, simulate::CopulaDgp};

const T: usize = 5000;

#[test]
fn constant_normal_recovers_rho() {
    let truth = 0.6042;
    let pairs = copulas::copula_sample(&CopulaParams::Normal { rho: truth }, T, 11).unwrap();
    let fit = copulas::constant_fit(CopulaFamily::Normal, &pairs).unwrap();
    let CopulaParams::Normal { rho } = fit.constant else { panic!("wrong family") };
    assert!((rho - truth).abs() < 0.03, "rho {rho}");
}

#[test]
fn constant_rotated_gumbel_recovers_delta() {
    let truth = 1.5819;
    let pairs = copulas::copula_sample(&CopulaParams::RotatedGumbel { delta: truth }, T, 12).unwrap();
    let fit = copulas::constant_fit(CopulaFamily::RotatedGumbel, &pairs).unwrap();
    let CopulaParams::RotatedGumbel { delta } = fit.constant else { panic!("wrong family") };
    assert!((delta - truth).abs() < 0.06, "delta {delta}");
}

#[test]
fn constant_sjc_recovers_tails() {
    let pairs = copulas::copula_sample(&CopulaParams::Sjc { tau_upper: 0.3514, tau_lower: 0.3667 }, T, 13).unwrap();
    let fit = copulas::constant_fit(CopulaFamily::Sjc, &pairs).unwrap();
    let CopulaParams::Sjc { tau_upper, tau_lower } = fit.constant else { panic!("wrong family") };
    assert!((tau_upper - 0.3514).abs() < 0.06, "tau_upper {tau_upper}");
    assert!((tau_lower - 0.3667).abs() < 0.06, "tau_lower {tau_lower}");
}

#[test]
fn normal_gas_recovers_persistence() {
    let dgp = CopulaDgp::reference(CopulaSpec::new(CopulaFamily::Normal, Dynamics::Gas)).unwrap();
    let (pairs, _) = dgp.sample_path(T, 500, &mut seed::rng(14, "recovery", 0)).unwrap();
    let fit = copulas::gas_fit(CopulaFamily::Normal, &pairs, None).unwrap();
    let g = fit.gas.unwrap();
    assert!((g.b - 0.9911).abs() < 0.05, "b {}", g.b);
    assert!(fit.loglik > fit.constant_loglik);
}

#[test]
fn gas_on_constant_data_gains_little() {
    // nested model: the likelihood-ratio statistic should be small
    let pairs = copulas::copula_sample(&CopulaParams::RotatedGumbel { delta: 1.5819 }, T, 15).unwrap();
    let fit = copulas::gas_fit(CopulaFamily::RotatedGumbel, &pairs, None).unwrap();
    let lr = 2.0 * (fit.loglik - fit.constant_loglik);
    assert!((-1e-6..15.0).contains(&lr), "LR {lr}");
}
