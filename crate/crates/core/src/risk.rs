//! Monte-Carlo one-step-ahead forecasts of the joint return distribution,
//! portfolio VaR and expected shortfall, and the conditional
//! diversification benefit (CDB).
//!
//! Everything is in return units: VaR and ES are typically negative, and
//! the CDB bounds are ordered `es_upper <= es_port <= es_lower`.

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::copulas::CopulaParams;
use crate::distributions::{norm_ppf, EmpiricalDist, QuantileTable, SkewT, SkewTParams};
use crate::error::{Error, Result};
use crate::estimation::{JointModel, MarginMode};
use crate::margins::rg_filter;
use crate::market_data::ReturnPanel;
use crate::{seed, stats};

/// Quantile levels reported per forecast date.
pub const VAR_LEVELS: [f64; 6] = [0.01, 0.05, 0.10, 0.90, 0.95, 0.99];
pub const DEFAULT_DRAWS: usize = 5000;
pub const MIN_DRAWS: usize = 1000;
/// Tail draws below which an ES estimate is flagged as noisy.
const MIN_TAIL_DRAWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub w1: f64,
    pub w2: f64,
}

impl PortfolioSpec {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        let p = Self { w1, w2 };
        p.validate()?;
        Ok(p)
    }

    pub fn equal() -> Self {
        Self { w1: 0.5, w2: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w1.is_finite() && self.w2.is_finite()) || (self.w1 + self.w2 - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "portfolio weights {} and {} must sum to 1",
                self.w1, self.w2
            )));
        }
        Ok(())
    }

    pub fn combine(&self, x1: f64, x2: f64) -> f64 {
        self.w1 * x1 + self.w2 * x2
    }
}

impl Default for PortfolioSpec {
    fn default() -> Self {
        Self::equal()
    }
}

/// Information set at the close of day `t - 1` for forecasting day `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastState {
    pub date: NaiveDate,
    pub index: usize,
    pub mean: [f64; 2],
    pub h: [f64; 2],
    pub copula: CopulaParams,
    /// Dynamic copula parameter, absent for SJC.
    pub delta: Option<f64>,
    /// Returns realized on `date`.
    pub realized: [f64; 2],
    /// Log predictive score of the realized pair (copula only when the
    /// margins are semiparametric).
    pub log_score: f64,
}

/// Filter a fitted model over `panel` (estimation and evaluation sample
/// together), returning the state for every date.
pub fn forecast_states(model: &JointModel, panel: &ReturnPanel) -> Result<Vec<ForecastState>> {
    let margins = &model.stage.margins;
    let f1 = rg_filter(&panel.asset1, &margins[0].params)?;
    let f2 = rg_filter(&panel.asset2, &margins[1].params)?;
    let u1 = model.stage.pit(0, &f1.z)?;
    let u2 = model.stage.pit(1, &f2.z)?;
    let pairs: Vec<(f64, f64)> = u1.into_iter().zip(u2).collect();
    let path = model.copula.filter(&pairs)?;
    let dens = match model.margin_mode() {
        MarginMode::Parametric => Some([
            SkewT::new(margins[0].params.innov)?,
            SkewT::new(margins[1].params.innov)?,
        ]),
        MarginMode::Semiparametric => None,
    };
    Ok((0..panel.len())
        .map(|t| {
            let delta = path.delta.get(t).copied();
            let copula = match delta {
                Some(d) => model.copula.params_at(d),
                None => model.copula.constant,
            };
            let margin_score = dens.as_ref().map_or(0.0, |d| {
                d[0].ln_pdf(f1.z[t]) - 0.5 * f1.h[t].ln() + d[1].ln_pdf(f2.z[t]) - 0.5 * f2.h[t].ln()
            });
            ForecastState {
                date: panel.dates[t],
                index: t,
                mean: [f1.mean[t], f2.mean[t]],
                h: [f1.h[t], f2.h[t]],
                copula,
                delta,
                realized: [panel.asset1[t].ret, panel.asset2[t].ret],
                log_score: path.ln_c[t] + margin_score,
            }
        })
        .collect())
}

/// Standardized innovation law of one margin.
#[derive(Debug, Clone)]
pub enum MarginLaw {
    SkewT(SkewTParams),
    Empirical(EmpiricalDist),
}

#[derive(Debug, Clone)]
enum Inverter {
    Table(Box<QuantileTable>),
    Empirical(EmpiricalDist),
}

impl Inverter {
    fn new(law: &MarginLaw) -> Result<Self> {
        Ok(match law {
            MarginLaw::SkewT(p) => Inverter::Table(Box::new(QuantileTable::new(*p)?)),
            MarginLaw::Empirical(e) => Inverter::Empirical(e.clone()),
        })
    }

    fn quantile(&self, u: f64) -> f64 {
        match self {
            Inverter::Table(t) => t.quantile(u),
            Inverter::Empirical(e) => e.quantile(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDraws {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub h1_next: f64,
    pub h2_next: f64,
    pub delta_next: Option<f64>,
}

/// Draws joint next-day returns for a fitted model.
#[derive(Debug, Clone)]
pub struct Forecaster {
    inverters: [Inverter; 2],
    pub portfolio: PortfolioSpec,
}

impl Forecaster {
    pub fn new(laws: [MarginLaw; 2], portfolio: PortfolioSpec) -> Result<Self> {
        portfolio.validate()?;
        Ok(Self {
            inverters: [Inverter::new(&laws[0])?, Inverter::new(&laws[1])?],
            portfolio,
        })
    }

    pub fn for_model(model: &JointModel, portfolio: PortfolioSpec) -> Result<Self> {
        Self::new(margin_laws(model)?, portfolio)
    }

    /// `s` draws from the one-step-ahead joint distribution at `state`.
    pub fn forecast_joint(&self, state: &ForecastState, s: usize, seed: u64) -> Result<ForecastDraws> {
        if s < MIN_DRAWS {
            return Err(Error::Domain(format!("need at least {MIN_DRAWS} draws, got {s}")));
        }
        state.copula.validate()?;
        let mut rng = seed::rng_from(seed);
        let (sd1, sd2) = (state.h[0].sqrt(), state.h[1].sqrt());
        let mut out = ForecastDraws {
            x1: Vec::with_capacity(s),
            x2: Vec::with_capacity(s),
            y: Vec::with_capacity(s),
            h1_next: state.h[0],
            h2_next: state.h[1],
            delta_next: state.delta,
        };
        for _ in 0..s {
            let (u1, u2) = state.copula.sample_one(&mut rng);
            let a = state.mean[0] + sd1 * self.inverters[0].quantile(u1);
            let b = state.mean[1] + sd2 * self.inverters[1].quantile(u2);
            out.x1.push(a);
            out.x2.push(b);
            out.y.push(self.portfolio.combine(a, b));
        }
        Ok(out)
    }
}

/// Innovation laws implied by the model's margin mode.
pub fn margin_laws(model: &JointModel) -> Result<[MarginLaw; 2]> {
    let law = |i: usize| -> Result<MarginLaw> {
        Ok(match model.margin_mode() {
            MarginMode::Parametric => MarginLaw::SkewT(model.stage.margins[i].params.innov),
            MarginMode::Semiparametric => MarginLaw::Empirical(model.stage.ecdf(i)?),
        })
    };
    Ok([law(0)?, law(1)?])
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical `alpha`-quantile of the portfolio draws.
pub fn var_forecast(draws: &ForecastDraws, alpha: f64) -> Result<f64> {
    quantile(&draws.y, alpha)
}

/// Empirical `alpha`-quantile of any sample.
pub fn quantile(x: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if x.is_empty() {
        return Err(Error::Input("empty sample".into()));
    }
    Ok(stats::quantile_sorted(&sorted(x), alpha))
}

/// Portfolio expected shortfall at level `alpha`.
pub fn es_forecast(draws: &ForecastDraws, alpha: f64) -> Result<f64> {
    expected_shortfall(&draws.y, alpha)
}

/// Mean of the draws at or below the `alpha`-quantile.
pub fn expected_shortfall(x: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if x.is_empty() {
        return Err(Error::Input("empty sample".into()));
    }
    Ok(es_sorted(&sorted(x), alpha))
}

fn es_sorted(s: &[f64], alpha: f64) -> f64 {
    let q = stats::quantile_sorted(s, alpha);
    let k = s.partition_point(|&v| v <= q);
    if k < MIN_TAIL_DRAWS {
        log::warn!("expected shortfall at {alpha} uses only {k} tail draws");
    }
    if k == 0 {
        return q;
    }
    s[..k].iter().sum::<f64>() / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdbPoint {
    pub date: NaiveDate,
    /// Missing when the bounds coincide.
    pub cdb: Option<f64>,
    pub es_port: f64,
    /// Weighted individual shortfalls (no diversification).
    pub es_upper: f64,
    /// Portfolio quantile (full diversification).
    pub es_lower: f64,
    pub clipped: bool,
}

/// CDB from a draw set: `(ES̄ - ES) / (ES̄ - ES̲)`, clipped to `[0, 1]`.
/// Returns `(cdb, es_port, es_upper, es_lower, clipped)`.
fn cdb_from_draws(x1: &[f64], x2: &[f64], y: &[f64], portfolio: PortfolioSpec, alpha: f64) -> (Option<f64>, f64, f64, f64, bool) {
    let ys = sorted(y);
    let es_port = es_sorted(&ys, alpha);
    let es_lower = stats::quantile_sorted(&ys, alpha);
    let es_upper = portfolio.combine(es_sorted(&sorted(x1), alpha), es_sorted(&sorted(x2), alpha));
    let denom = es_upper - es_lower;
    let scale = es_upper.abs().max(es_lower.abs()).max(f64::MIN_POSITIVE);
    if denom.abs() <= 1e-12 * scale {
        return (None, es_port, es_upper, es_lower, false);
    }
    let raw = (es_upper - es_port) / denom;
    let c = raw.clamp(0.0, 1.0);
    (Some(c), es_port, es_upper, es_lower, c != raw)
}

/// CDB at one date from a set of joint draws.
pub fn cdb_point(date: NaiveDate, draws: &ForecastDraws, portfolio: PortfolioSpec, alpha: f64) -> Result<CdbPoint> {
    check_alpha(alpha)?;
    let (cdb, es_port, es_upper, es_lower, clipped) = cdb_from_draws(&draws.x1, &draws.x2, &draws.y, portfolio, alpha);
    Ok(CdbPoint {
        date,
        cdb,
        es_port,
        es_upper,
        es_lower,
        clipped,
    })
}

/// One row of the risk report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub date: NaiveDate,
    /// Portfolio quantiles at the report's `levels`.
    pub var: Vec<f64>,
    pub es05: f64,
    pub cdb05: CdbPoint,
    pub realized: f64,
    pub log_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Quantile levels, ascending; always a superset of [`VAR_LEVELS`].
    pub levels: Vec<f64>,
    pub rows: Vec<RiskRow>,
    pub draws: usize,
    pub n_clipped: usize,
    pub n_missing: usize,
}

impl RiskReport {
    fn level_index(&self, alpha: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - alpha).abs() < 1e-12)
    }

    /// Forecast quantile path at level `alpha`, if it was computed.
    pub fn var_path(&self, alpha: f64) -> Option<Vec<f64>> {
        let k = self.level_index(alpha)?;
        Some(self.rows.iter().map(|r| r.var[k]).collect())
    }

    pub fn realized(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.realized).collect()
    }

    pub fn cdb_path(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.cdb05.cdb).collect()
    }

    pub fn clipped_share(&self) -> f64 {
        self.n_clipped as f64 / self.rows.len().max(1) as f64
    }
}

/// VaR (at [`VAR_LEVELS`] plus `extra_levels`), ES and CDB forecasts for
/// each state; date `index` draws from the sub-stream `("forecast", index)`
/// of `root_seed`.
pub fn run_forecasts(
    forecaster: &Forecaster,
    states: &[ForecastState],
    extra_levels: &[f64],
    s: usize,
    root_seed: u64,
) -> Result<RiskReport> {
    let mut levels = VAR_LEVELS.to_vec();
    for &a in extra_levels {
        check_alpha(a)?;
        if !levels.iter().any(|&l| (l - a).abs() < 1e-12) {
            levels.push(a);
        }
    }
    levels.sort_by(f64::total_cmp);
    let rows = states
        .par_iter()
        .map(|st| {
            let d = forecaster.forecast_joint(st, s, seed::derive(root_seed, "forecast", st.index as u64))?;
            let ys = sorted(&d.y);
            let var = levels.iter().map(|&a| stats::quantile_sorted(&ys, a)).collect();
            Ok(RiskRow {
                date: st.date,
                var,
                es05: es_sorted(&ys, 0.05),
                cdb05: cdb_point(st.date, &d, forecaster.portfolio, 0.05)?,
                realized: forecaster.portfolio.combine(st.realized[0], st.realized[1]),
                log_score: st.log_score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_clipped = rows.iter().filter(|r| r.cdb05.clipped).count();
    let n_missing = rows.iter().filter(|r| r.cdb05.cdb.is_none()).count();
    if n_clipped > 0 {
        log::info!("CDB clipped to [0, 1] on {n_clipped} of {} dates", rows.len());
    }
    Ok(RiskReport {
        levels,
        rows,
        draws: s,
        n_clipped,
        n_missing,
    })
}

/// CDB path at level `alpha` for each state.
pub fn cdb(forecaster: &Forecaster, states: &[ForecastState], alpha: f64, s: usize, root_seed: u64) -> Result<Vec<CdbPoint>> {
    check_alpha(alpha)?;
    states
        .par_iter()
        .map(|st| {
            let d = forecaster.forecast_joint(st, s, seed::derive(root_seed, "forecast", st.index as u64))?;
            cdb_point(st.date, &d, forecaster.portfolio, alpha)
        })
        .collect()
}

/// `date,var01,var05,var10,var90,var95,var99,es05,cdb05`; a missing CDB is
/// an empty field.
pub fn write_risk_csv<W: Write>(report: &RiskReport, mut w: W) -> Result<()> {
    writeln!(w, "date,var01,var05,var10,var90,var95,var99,es05,cdb05")?;
    let cols: Vec<usize> = VAR_LEVELS
        .iter()
        .map(|&a| report.level_index(a).ok_or_else(|| Error::Input(format!("report lacks level {a}"))))
        .collect::<Result<_>>()?;
    for r in &report.rows {
        write!(w, "{}", r.date)?;
        for &k in &cols {
            write!(w, ",{}", r.var[k])?;
        }
        write!(w, ",{}", r.es05)?;
        match r.cdb05.cdb {
            Some(c) => writeln!(w, ",{c}")?,
            None => writeln!(w, ",")?,
        }
    }
    Ok(())
}

/// I.i.d. reference model for the constant-CDB band.
#[derive(Debug, Clone)]
pub struct BandSpec {
    pub copula: CopulaParams,
    pub laws: [MarginLaw; 2],
    pub scale: [f64; 2],
    pub portfolio: PortfolioSpec,
}

impl BandSpec {
    /// Gaussian margins with unit scale, normal copula at `rho`, equal weights.
    pub fn gaussian(rho: f64) -> Self {
        Self {
            copula: CopulaParams::Normal { rho },
            laws: [MarginLaw::SkewT(SkewTParams::normal()), MarginLaw::SkewT(SkewTParams::normal())],
            scale: [1.0, 1.0],
            portfolio: PortfolioSpec::equal(),
        }
    }

    /// Constant-dependence counterpart of a fitted model: normal copula at
    /// the in-sample correlation of the normal scores of the PITs, the
    /// model's innovation laws, and the in-sample average variances.
    pub fn from_model(model: &JointModel, portfolio: PortfolioSpec) -> Result<Self> {
        let (a, b): (Vec<f64>, Vec<f64>) = model
            .stage
            .pairs
            .iter()
            .map(|&(u, v)| (norm_ppf(u), norm_ppf(v)))
            .unzip();
        let rho = stats::correlation(&a, &b);
        let scale = [0, 1].map(|i| stats::mean(&model.stage.margins[i].h).sqrt());
        Ok(Self {
            copula: CopulaParams::Normal { rho },
            laws: margin_laws(model)?,
            scale,
            portfolio,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdbBand {
    pub rho: Option<f64>,
    pub len: usize,
    pub n_sim: usize,
    pub mean: f64,
    pub lo90: f64,
    pub hi90: f64,
}

/// Band for the CDB of i.i.d. Gaussian data at correlation `rho`.
pub fn cdb_constant_band(rho: f64, len: usize, alpha: f64, n_sim: usize, seed: u64) -> Result<CdbBand> {
    cdb_constant_band_with(&BandSpec::gaussian(rho), len, alpha, n_sim, seed)
}

/// Distribution of the CDB computed from `len` i.i.d. draws of `spec`:
/// mean and 5% / 95% quantiles over `n_sim` replications.
pub fn cdb_constant_band_with(spec: &BandSpec, len: usize, alpha: f64, n_sim: usize, seed: u64) -> Result<CdbBand> {
    check_alpha(alpha)?;
    spec.copula.validate()?;
    spec.portfolio.validate()?;
    if len < 2 || n_sim < 2 {
        return Err(Error::Domain("band needs len >= 2 and at least 2 simulations".into()));
    }
    let inv = [Inverter::new(&spec.laws[0])?, Inverter::new(&spec.laws[1])?];
    let reps: Vec<Option<f64>> = (0..n_sim)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, "cdb-band", r as u64);
            let mut x1 = Vec::with_capacity(len);
            let mut x2 = Vec::with_capacity(len);
            let mut y = Vec::with_capacity(len);
            for _ in 0..len {
                let (u1, u2) = spec.copula.sample_one(&mut rng);
                let a = spec.scale[0] * inv[0].quantile(u1);
                let b = spec.scale[1] * inv[1].quantile(u2);
                x1.push(a);
                x2.push(b);
                y.push(spec.portfolio.combine(a, b));
            }
            cdb_from_draws(&x1, &x2, &y, spec.portfolio, alpha).0
        })
        .collect();
    let mut ok: Vec<f64> = reps.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Domain("every band replication was degenerate".into()));
    }
    ok.sort_by(f64::total_cmp);
    Ok(CdbBand {
        rho: match spec.copula {
            CopulaParams::Normal { rho } => Some(rho),
            _ => None,
        },
        len,
        n_sim,
        mean: stats::mean(&ok),
        lo90: stats::quantile_sorted(&ok, 0.05),
        hi90: stats::quantile_sorted(&ok, 0.95),
    })
}

/// Share of available CDB values outside `[band.lo90, band.hi90]`.
pub fn band_exceedance(points: &[CdbPoint], band: &CdbBand) -> f64 {
    let vals: Vec<f64> = points.iter().filter_map(|p| p.cdb).collect();
    if vals.is_empty() {
        return 0.0;
    }
    vals.iter().filter(|&&c| c < band.lo90 || c > band.hi90).count() as f64 / vals.len() as f64
}

/// Closed-form `alpha`-quantile of `w1 X1 + w2 X2` for jointly normal
/// returns with means `m`, standard deviations `s` and correlation `rho`.
pub fn gaussian_portfolio_quantile(m: [f64; 2], s: [f64; 2], rho: f64, portfolio: PortfolioSpec, alpha: f64) -> f64 {
    let mean = portfolio.combine(m[0], m[1]);
    let var = (portfolio.w1 * s[0]).powi(2)
        + (portfolio.w2 * s[1]).powi(2)
        + 2.0 * rho * portfolio.w1 * portfolio.w2 * s[0] * s[1];
    mean + var.sqrt() * norm_ppf(alpha)
}

/// A standalone state for driving the forecaster directly.
pub fn manual_state(mean: [f64; 2], h: [f64; 2], copula: CopulaParams) -> ForecastState {
    ForecastState {
        date: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
        index: 0,
        mean,
        h,
        delta: copula.dynamic_value(),
        copula,
        realized: [0.0, 0.0],
        log_score: 0.0,
    }
}

/// Draw `n` i.i.d. standard normals; used by oracle tests.
pub fn normal_draws<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}
