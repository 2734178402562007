use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use copula_risk::copulas::{CopulaFit, CopulaSpec, Dynamics};
use copula_risk::error::{Error, Result};
use copula_risk::estimation::{self, BootstrapResult, JointModel, MarginStage};
use copula_risk::margins::{self, FitOptions, GarchParams};
use copula_risk::market_data::{self, ReturnPanel, MIN_ESTIMATION_LEN};
use copula_risk::optim::Convergence;
use copula_risk::risk::{self, BandSpec, CdbBand, Forecaster};
use copula_risk::simulate::{self, CopulaDgp, JointDgp};
use copula_risk::stat_tests::{self, HitSequence, TestReport};
use copula_risk::seed;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, DEFAULT_BAND_SIMS, DEFAULT_DQ_SIMS};
use crate::render;

const DQ_LAGS: usize = 4;
const CDB_ALPHA: f64 = 0.05;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Input(format!("cannot create {}: {e}", path.display()))
    })?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Domain(format!("serializing {}: {e}", path.display())))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Error::Input(format!("malformed {}: {e}", path.display())))
}

fn read_panel(path: &Path) -> Result<ReturnPanel> {
    let f = File::open(path).map_err(|e| Error::Input(format!("cannot open panel {}: {e}", path.display())))?;
    market_data::read_panel(f)
}

// ---------- ingest ----------

#[derive(Debug, Serialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    /// Mean annualized volatility in percent, per asset.
    pub mean_annualized_vol: [f64; 2],
}

pub fn ingest(cfg: &RunConfig, out: &Path, summary: Option<&Path>) -> Result<()> {
    let holidays = match &cfg.holidays {
        Some(p) => market_data::read_holidays_file(p)
            .map_err(|e| Error::Input(format!("holiday file {}: {e}", p.display())))?,
        None => Default::default(),
    };
    let load = |field: &Option<PathBuf>, name: &str| -> Result<Vec<market_data::DailyObservation>> {
        let path = cfg.require_path(field, name)?;
        let bars = market_data::read_bars_file(&path)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        market_data::daily_observations(&market_data::filter_calendar(&bars, &holidays)?)
    };
    let a = load(&cfg.asset1, "asset1")?;
    let b = load(&cfg.asset2, "asset2")?;
    let panel = market_data::align_panel_min(&a, &b, 1)?;
    let mut w = create(out)?;
    market_data::write_panel(&panel, &mut w)?;
    w.flush()?;
    let vol = |obs: &[market_data::DailyObservation]| {
        obs.iter().map(|o| market_data::annualized_vol(o.rv)).sum::<f64>() / obs.len() as f64
    };
    let s = IngestSummary {
        rows: panel.len(),
        first_date: panel.dates[0],
        last_date: panel.dates[panel.len() - 1],
        mean_annualized_vol: [vol(&panel.asset1), vol(&panel.asset2)],
    };
    println!(
        "{} rows, {} to {}, mean annualized vol {:.2}% / {:.2}%",
        s.rows, s.first_date, s.last_date, s.mean_annualized_vol[0], s.mean_annualized_vol[1]
    );
    if let Some(p) = summary {
        write_json(p, &s)?;
    }
    Ok(())
}

// ---------- fit ----------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GarchSummary {
    pub params: GarchParams,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub convergence: Convergence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub copula: CopulaFit,
    pub loglik_copula: f64,
    pub loglik_total: f64,
    pub aic: f64,
    pub bic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapResult>,
}

/// Everything `fit` produces; `evaluate` and `cdb` consume it unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub seed: u64,
    pub split_date: Option<NaiveDate>,
    pub first_date: NaiveDate,
    pub last_in_sample: NaiveDate,
    pub n_in_sample: usize,
    pub ar_orders: [usize; 2],
    pub stage: MarginStage,
    pub garch: [Option<GarchSummary>; 2],
    pub models: Vec<ModelEntry>,
    /// Estimates on the edge of their admissible region, kept but flagged.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<String>,
}

impl FitReport {
    pub fn joint_model(&self, k: usize) -> JointModel {
        JointModel::new(self.stage.clone(), self.models[k].copula.clone())
    }

    fn find(&self, label: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::Input(format!("model `{label}` not in the fit file")))
    }

    /// Rows of `panel` that belong to the estimation sample, after checking
    /// that the panel is the one the models were fitted on.
    fn check_panel(&self, panel: &ReturnPanel) -> Result<usize> {
        let n = self.n_in_sample;
        if panel.len() < n || panel.dates[0] != self.first_date || panel.dates[n - 1] != self.last_in_sample {
            return Err(Error::Input("panel does not match the estimation sample of the fit file".into()));
        }
        Ok(n)
    }
}

fn in_sample_rows(panel: &ReturnPanel, split: Option<NaiveDate>) -> Result<usize> {
    let Some(date) = split else {
        return Ok(panel.len());
    };
    let n = panel.split_index(date);
    if n == 0 || n >= panel.len() {
        return Err(Error::Input(format!(
            "split date {date} must fall strictly inside {}..{}",
            panel.dates[0],
            panel.dates[panel.len() - 1]
        )));
    }
    if n < MIN_ESTIMATION_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_ESTIMATION_LEN,
            have: n,
        });
    }
    Ok(n)
}

fn information_criteria(ll: f64, k: usize, n: usize) -> (f64, f64) {
    (2.0 * k as f64 - 2.0 * ll, k as f64 * (n as f64).ln() - 2.0 * ll)
}

pub fn fit(cfg: &RunConfig, out: &Path) -> Result<FitReport> {
    let panel = read_panel(&cfg.require_path(&cfg.panel, "panel")?)?;
    panel.check_estimable()?;
    let n_in = in_sample_rows(&panel, cfg.split_date)?;
    let sample = panel.slice(0..n_in);
    let root = cfg.seed();
    let mode = cfg.margin_mode()?;
    let specs = cfg.copula_specs()?;
    let replicates = cfg.bootstrap()?;
    let ar_orders = match cfg.ar_orders {
        Some(o) if o.iter().any(|&p| p > 5) => return Err(Error::Input("AR orders must be at most 5".into())),
        Some(o) => o,
        None => {
            let max_p = cfg.ar_max()?;
            [
                margins::ar_order_select(&sample.asset1, max_p)?,
                margins::ar_order_select(&sample.asset2, max_p)?,
            ]
        }
    };
    log::info!("AR orders {ar_orders:?}");
    let opts = FitOptions {
        starts: cfg.margin_starts.unwrap_or(5),
        seed: seed::derive(root, "margins", 0),
        ..FitOptions::default()
    };
    let stage = estimation::fit_margins(&sample, ar_orders, mode, &opts)?;
    let garch = [0, 1].map(|i| match margins::garch_fit(sample.asset(i), ar_orders[i]) {
        Ok(g) => Some(GarchSummary {
            params: g.params,
            loglik: g.loglik,
            aic: g.aic,
            bic: g.bic,
            convergence: g.convergence,
        }),
        Err(e) => {
            log::warn!("benchmark GARCH for asset {} failed: {e}", i + 1);
            None
        }
    });
    let mut models = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let copula = estimation::fit_copula(&stage.pairs, *spec)
            .map_err(|e| tag_error(e, &spec.label()))?;
        let model = JointModel::new(stage.clone(), copula);
        let (aic, bic) = information_criteria(model.copula.loglik, model.copula.n_params(), n_in);
        let bootstrap = if replicates > 0 {
            let b = estimation::block_bootstrap_se(&sample, &model, replicates, None, seed::derive(root, "bootstrap", k as u64))
                .map_err(|e| tag_error(e, &spec.label()))?;
            Some(b)
        } else {
            None
        };
        models.push(ModelEntry {
            label: spec.label(),
            loglik_copula: model.copula.loglik,
            loglik_total: model.loglik_total,
            copula: model.copula,
            aic,
            bic,
            bootstrap,
        });
    }
    let mut boundary: Vec<String> = Vec::new();
    for m in &models {
        for name in estimation::boundary_estimates(&JointModel::new(stage.clone(), m.copula.clone())) {
            let name = if name.starts_with("copula.") { format!("{}:{name}", m.label) } else { name };
            if !boundary.contains(&name) {
                boundary.push(name);
            }
        }
    }
    for b in &boundary {
        log::warn!("{b} is on the boundary of its admissible region");
    }
    let report = FitReport {
        boundary,
        seed: root,
        split_date: cfg.split_date,
        first_date: sample.dates[0],
        last_in_sample: sample.dates[n_in - 1],
        n_in_sample: n_in,
        ar_orders,
        stage,
        garch,
        models,
    };
    write_json(out, &report)?;
    print!("{}", render::margin_table(&report));
    print!("{}", render::copula_table(&report));
    Ok(report)
}

fn tag_error(e: Error, label: &str) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("{label}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{label}: {m}")),
        other => {
            log::error!("model {label} failed");
            other
        }
    }
}

// ---------- evaluate ----------

#[derive(Debug, Clone, Serialize)]
pub struct QuantileEval {
    pub alpha: f64,
    pub coverage: f64,
    pub dq: TestReport,
    pub gk_loss: f64,
    /// Against the benchmark; absent for the benchmark itself.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dm: Option<TestReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEval {
    pub label: String,
    pub oos_loglik: f64,
    pub cdb_clipped: usize,
    pub quantiles: Vec<QuantileEval>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CpaEntry {
    pub model1: String,
    pub model2: String,
    pub test: TestReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub n_out_of_sample: usize,
    pub draws: usize,
    pub benchmark: String,
    pub models: Vec<ModelEval>,
    pub cpa: Vec<CpaEntry>,
}

pub fn evaluate(cfg: &RunConfig, model_files: &[PathBuf], out: &Path, risk_dir: Option<&Path>) -> Result<EvaluationReport> {
    if model_files.is_empty() {
        return Err(Error::Input("no model files given".into()));
    }
    let reports: Vec<FitReport> = model_files.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let first = &reports[0];
    if reports.iter().any(|r| {
        r.split_date != first.split_date || r.n_in_sample != first.n_in_sample || r.last_in_sample != first.last_in_sample
    }) {
        return Err(Error::Input("model files have mismatched out-of-sample windows".into()));
    }
    let panel = read_panel(&cfg.require_path(&cfg.panel, "panel")?)?;
    let n_in = first.check_panel(&panel)?;
    if n_in >= panel.len() {
        return Err(Error::Input("no out-of-sample rows: fit with a split date inside the panel".into()));
    }
    let root = cfg.seed();
    let draws = cfg.draws()?;
    let alphas = cfg.alphas()?;
    let dq_sims = cfg.dq_sims.unwrap_or(DEFAULT_DQ_SIMS);
    let portfolio = cfg.portfolio()?;

    let mut labels = Vec::new();
    let mut forecasts = Vec::new();
    for r in &reports {
        for k in 0..r.models.len() {
            let model = r.joint_model(k);
            let states = risk::forecast_states(&model, &panel).map_err(|e| tag_error(e, &r.models[k].label))?;
            let f = Forecaster::for_model(&model, portfolio)?;
            // common random numbers across models
            let rep = risk::run_forecasts(&f, &states[n_in..], &alphas, draws, root)?;
            if labels.contains(&r.models[k].label) {
                return Err(Error::Input(format!("model `{}` appears twice", r.models[k].label)));
            }
            labels.push(r.models[k].label.clone());
            forecasts.push(rep);
        }
    }
    let benchmark = cfg.benchmark.clone().unwrap_or_else(|| {
        labels
            .iter()
            .find(|l| l.as_str() == "normal_gas")
            .unwrap_or(&labels[0])
            .clone()
    });
    let b = labels
        .iter()
        .position(|l| *l == benchmark)
        .ok_or_else(|| Error::Input(format!("benchmark `{benchmark}` is not among the models")))?;

    let realized = forecasts[0].realized();
    let losses = |rep: &risk::RiskReport, a: f64| -> Vec<f64> {
        let q = rep.var_path(a).expect("level computed");
        realized.iter().zip(&q).map(|(&y, &q)| stat_tests::gk_loss(y, q, a)).collect()
    };
    let mut models = Vec::with_capacity(labels.len());
    for (m, rep) in forecasts.iter().enumerate() {
        let mut quantiles = Vec::with_capacity(alphas.len());
        for (j, &a) in alphas.iter().enumerate() {
            let q = rep.var_path(a).expect("level computed");
            let hits = HitSequence::new(&realized, &q, a)?;
            let dq = stat_tests::dq_test(&hits, DQ_LAGS, dq_sims, seed::derive(root, "dq", (m * 64 + j) as u64))?;
            let loss = losses(rep, a);
            let dm = if m == b { None } else { Some(stat_tests::dm_test(&losses(&forecasts[b], a), &loss)?) };
            quantiles.push(QuantileEval {
                alpha: a,
                coverage: hits.coverage(),
                dq,
                gk_loss: loss.iter().sum::<f64>() / loss.len() as f64,
                dm,
            });
        }
        models.push(ModelEval {
            label: labels[m].clone(),
            oos_loglik: rep.rows.iter().map(|r| r.log_score).sum(),
            cdb_clipped: rep.n_clipped,
            quantiles,
        });
        if let Some(dir) = risk_dir {
            let mut w = create(&dir.join(format!("{}.csv", labels[m])))?;
            risk::write_risk_csv(rep, &mut w)?;
            w.flush()?;
        }
    }
    let scores: Vec<Vec<f64>> = forecasts
        .iter()
        .map(|r| r.rows.iter().map(|row| row.log_score).collect())
        .collect();
    let mut cpa = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            cpa.push(CpaEntry {
                model1: labels[i].clone(),
                model2: labels[j].clone(),
                test: stat_tests::cpa_test(&scores[i], &scores[j])?,
            });
        }
    }
    let report = EvaluationReport {
        first_date: panel.dates[n_in],
        last_date: panel.dates[panel.len() - 1],
        n_out_of_sample: panel.len() - n_in,
        draws,
        benchmark,
        models,
        cpa,
    };
    write_json(out, &report)?;
    print!("{}", render::var_table(&report));
    Ok(report)
}

// ---------- cdb ----------

#[derive(Debug, Clone, Serialize)]
pub struct CdbSummary {
    pub model: String,
    pub alpha: f64,
    pub draws: usize,
    pub band: CdbBand,
    pub n_dates: usize,
    pub n_clipped: usize,
    pub n_missing: usize,
    /// Share of dates whose CDB lies outside the band.
    pub outside_band: f64,
}

pub fn cdb(cfg: &RunConfig, model_file: &Path, label: Option<&str>, out: &Path, band_out: &Path) -> Result<CdbSummary> {
    let report: FitReport = read_json(model_file)?;
    if report.models.is_empty() {
        return Err(Error::Input("fit file holds no models".into()));
    }
    let k = match label {
        Some(l) => report.find(l)?,
        None => report
            .models
            .iter()
            .position(|m| m.copula.spec.dynamics == Dynamics::Gas)
            .unwrap_or(0),
    };
    let panel = read_panel(&cfg.require_path(&cfg.panel, "panel")?)?;
    let n_in = report.check_panel(&panel)?;
    let start = if n_in < panel.len() { n_in } else { 0 };
    let root = cfg.seed();
    let draws = cfg.draws()?;
    let portfolio = cfg.portfolio()?;
    let model = report.joint_model(k);
    let states = risk::forecast_states(&model, &panel)?;
    let f = Forecaster::for_model(&model, portfolio)?;
    let points = risk::cdb(&f, &states[start..], CDB_ALPHA, draws, root)?;
    let band = risk::cdb_constant_band_with(
        &BandSpec::from_model(&model, portfolio)?,
        draws,
        CDB_ALPHA,
        cfg.band_sims.unwrap_or(DEFAULT_BAND_SIMS),
        seed::derive(root, "cdb-band", 0),
    )?;
    let mut w = create(out)?;
    writeln!(w, "date,cdb,es_port,es_upper,es_lower,clipped,band_lo90,band_hi90")?;
    for p in &points {
        let c = p.cdb.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{c},{},{},{},{},{},{}",
            p.date, p.es_port, p.es_upper, p.es_lower, p.clipped as u8, band.lo90, band.hi90
        )?;
    }
    w.flush()?;
    let summary = CdbSummary {
        model: report.models[k].label.clone(),
        alpha: CDB_ALPHA,
        draws,
        n_dates: points.len(),
        n_clipped: points.iter().filter(|p| p.clipped).count(),
        n_missing: points.iter().filter(|p| p.cdb.is_none()).count(),
        outside_band: risk::band_exceedance(&points, &band),
        band,
    };
    write_json(band_out, &summary)?;
    println!(
        "{}: {} dates, band [{:.4}, {:.4}] mean {:.4}, {:.1}% of dates outside, {} clipped",
        summary.model,
        summary.n_dates,
        summary.band.lo90,
        summary.band.hi90,
        summary.band.mean,
        100.0 * summary.outside_band,
        summary.n_clipped
    );
    Ok(summary)
}

// ---------- simulate ----------

#[derive(Debug, Serialize)]
pub struct SimulationTruth {
    pub seed: u64,
    pub dgp: JointDgp,
    pub dates: Vec<NaiveDate>,
    /// True dynamic copula parameter per date (`null` for SJC).
    pub delta: Vec<f64>,
}

pub fn simulate(cfg: &RunConfig, spec: CopulaSpec, n: usize, out: &Path, truth: Option<&Path>) -> Result<()> {
    if n < 1 {
        return Err(Error::Input("need at least one simulated day".into()));
    }
    let dgp = JointDgp::reference(CopulaDgp::reference(spec)?);
    let root = cfg.seed();
    let sim = simulate::simulate_joint(&dgp, n, root)?;
    let mut w = create(out)?;
    market_data::write_panel(&sim.panel, &mut w)?;
    w.flush()?;
    if let Some(p) = truth {
        write_json(
            p,
            &SimulationTruth {
                seed: root,
                dgp,
                dates: sim.panel.dates.clone(),
                delta: sim.delta,
            },
        )?;
    }
    println!("simulated {n} days from the {} reference process", spec.label());
    Ok(())
}
