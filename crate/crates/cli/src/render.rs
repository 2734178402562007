//! Plain-text parameter and backtest tables.

use std::fmt::Write;

use copula_risk::estimation::BootstrapResult;

use crate::commands::{EvaluationReport, FitReport};

fn se_lookup<'a>(boot: Option<&'a BootstrapResult>) -> impl Fn(&str) -> Option<f64> + 'a {
    move |name| {
        let b = boot?;
        b.names.iter().position(|n| n == name).map(|i| b.se[i])
    }
}

fn cell(v: f64, se: Option<f64>) -> String {
    if v.is_nan() {
        return format!("{:>9}         ", "-");
    }
    match se {
        Some(s) => format!("{v:>9.4} ({s:.4})"),
        None => format!("{v:>9.4}         "),
    }
}

pub fn margin_table(r: &FitReport) -> String {
    let boot = r.models.iter().find_map(|m| m.bootstrap.as_ref());
    let se = se_lookup(boot);
    let mut out = String::new();
    let _ = writeln!(out, "Realized-GARCH margins (AR orders {:?}, {} obs)", r.ar_orders, r.n_in_sample);
    let _ = writeln!(out, "{:<10}{:>20}{:>20}", "", "asset 1", "asset 2");
    let m = &r.stage.margins;
    let mut row = |name: &str, key: &str, a: f64, b: f64| {
        let _ = writeln!(
            out,
            "{name:<10}{:>20}{:>20}",
            cell(a, se(&format!("m1.{key}"))),
            cell(b, se(&format!("m2.{key}")))
        );
    };
    row("mu", "mu", m[0].params.mu, m[1].params.mu);
    for k in 0..m[0].params.ar.len().max(m[1].params.ar.len()) {
        let get = |i: usize| m[i].params.ar.get(k).copied().unwrap_or(f64::NAN);
        row(&format!("ar{}", k + 1), &format!("ar{}", k + 1), get(0), get(1));
    }
    let p = |i: usize| &m[i].params;
    row("omega", "omega", p(0).omega, p(1).omega);
    row("beta", "beta", p(0).beta, p(1).beta);
    row("gamma", "gamma", p(0).gamma, p(1).gamma);
    row("psi", "psi", p(0).psi, p(1).psi);
    row("phi", "phi", p(0).phi, p(1).phi);
    row("tau1", "tau1", p(0).tau1, p(1).tau1);
    row("tau2", "tau2", p(0).tau2, p(1).tau2);
    row("sigma_u2", "sigma_u2", p(0).sigma_u2, p(1).sigma_u2);
    row("nu_inv", "nu_inv", p(0).innov.nu_inv(), p(1).innov.nu_inv());
    row("lambda", "lambda", p(0).innov.lambda, p(1).innov.lambda);
    let stat = |name: &str, a: f64, b: f64, out: &mut String| {
        let _ = writeln!(out, "{name:<10}{a:>11.2}{b:>20.2}");
    };
    stat("LL_r", m[0].loglik_partial, m[1].loglik_partial, &mut out);
    stat("LL_rx", m[0].loglik_joint, m[1].loglik_joint, &mut out);
    stat("AIC", m[0].aic, m[1].aic, &mut out);
    stat("BIC", m[0].bic, m[1].bic, &mut out);
    if r.garch.iter().any(Option::is_some) {
        let _ = writeln!(out, "GARCH(1,1) benchmark");
        let g = |i: usize, f: fn(&crate::commands::GarchSummary) -> f64| r.garch[i].as_ref().map_or(f64::NAN, f);
        stat("kappa", g(0, |s| s.params.kappa), g(1, |s| s.params.kappa), &mut out);
        stat("arch", g(0, |s| s.params.phi_arch), g(1, |s| s.params.phi_arch), &mut out);
        stat("garch", g(0, |s| s.params.psi_garch), g(1, |s| s.params.psi_garch), &mut out);
        stat("LL_r", g(0, |s| s.loglik), g(1, |s| s.loglik), &mut out);
        stat("AIC", g(0, |s| s.aic), g(1, |s| s.aic), &mut out);
        stat("BIC", g(0, |s| s.bic), g(1, |s| s.bic), &mut out);
    }
    out.push('\n');
    out
}

pub fn copula_table(r: &FitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Copulas ({:?} margins)", r.stage.mode);
    let _ = writeln!(out, "{:<20}{:<10}{:>20}{:>10}{:>10}", "model", "param", "estimate", "logL", "AIC");
    for m in &r.models {
        let se = se_lookup(m.bootstrap.as_ref());
        for (i, (name, v)) in m.copula.named_params().into_iter().enumerate() {
            let label = if i == 0 { m.label.as_str() } else { "" };
            let tail = if i == 0 {
                format!("{:>10.2}{:>10.2}", m.loglik_copula, m.aic)
            } else {
                String::new()
            };
            let _ = writeln!(out, "{label:<20}{name:<10}{:>20}{tail}", cell(v, se(&format!("copula.{name}"))));
        }
    }
    if !r.boundary.is_empty() {
        let _ = writeln!(out, "on the boundary: {}", r.boundary.join(", "));
    }
    out.push('\n');
    out
}

pub fn var_table(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Out-of-sample VaR, {} to {} ({} days, {} draws), benchmark {}",
        r.first_date, r.last_date, r.n_out_of_sample, r.draws, r.benchmark
    );
    let _ = write!(out, "{:<20}{:<8}", "model", "");
    for q in &r.models[0].quantiles {
        let _ = write!(out, "{:>10}", format!("{}%", q.alpha * 100.0));
    }
    out.push('\n');
    for m in &r.models {
        let rows: [(&str, Box<dyn Fn(&crate::commands::QuantileEval) -> String>); 4] = [
            ("cover", Box::new(|q| format!("{:.3}", q.coverage))),
            ("DQ p", Box::new(|q| format!("{:.3}", q.dq.p_value))),
            ("loss", Box::new(|q| format!("{:.5}", q.gk_loss))),
            ("DM p", Box::new(|q| q.dm.as_ref().map_or("-".into(), |t| format!("{:.3}", t.p_value)))),
        ];
        for (i, (name, f)) in rows.iter().enumerate() {
            let label = if i == 0 { m.label.as_str() } else { "" };
            let _ = write!(out, "{label:<20}{name:<8}");
            for q in &m.quantiles {
                let _ = write!(out, "{:>10}", f(q));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{:<20}{:<8}{:>10.2}", "", "logL", m.oos_loglik);
    }
    if !r.cpa.is_empty() {
        let _ = writeln!(out, "CPA (positive favors the first model)");
        for c in &r.cpa {
            let _ = writeln!(
                out,
                "  {} vs {}: {:.3} (p {:.3})",
                c.model1, c.model2, c.test.statistic, c.test.p_value
            );
        }
    }
    out
}
