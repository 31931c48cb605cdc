//! Config-driven pipeline: data, folds, training, backtest and reports.
//!
//! Layout under `output_dir`:
//!
//! ```text
//! report.csv, report.txt
//! <symbol>/plot_data.csv
//! <symbol>/<family>/fold_plan.csv, train_log.jsonl, predictions.csv, equity.csv
//! <symbol>/<family>/checkpoints/fold_NNN.ckpt
//! ```
//!
//! Everything except the `wall_ms` field of the training logs is a pure
//! function of the config, the input files and the seed.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde_json::json;

pub use config::{asset_seed, AssetSpec, FamilyOverrides, ModelChoice, RunConfig, SCHEMA_VERSION};

use crate::backtest::{
    buy_and_hold, run_backtest, signals_from_predictions, EquityLine, SignalSeries, StrategyMode,
};
use crate::data::{load_csv, to_returns, AssetClass, ReturnSeries};
use crate::error::{Error, Result};
use crate::metrics::{format_table, MetricsReport, REPORT_COLUMNS, UNDEFINED};
use crate::models::Family;
use crate::walkforward::{plan_folds, walk_forward, FoldPlan, FoldResult};

/// Receives one structured progress record per event.
pub type Logger<'a> = &'a (dyn Fn(serde_json::Value) + Sync);

pub const BENCHMARK_LABEL: &str = "B&H";

pub struct LoadedAsset {
    pub spec: AssetSpec,
    pub returns: ReturnSeries,
}

pub fn load_assets(cfg: &RunConfig) -> Result<Vec<LoadedAsset>> {
    cfg.validate()?;
    cfg.assets
        .iter()
        .map(|spec| {
            let prices = load_csv(&spec.path, &spec.schema()).map_err(|e| match e {
                Error::Data { line, message } => Error::Data {
                    line,
                    message: format!("{}: {message}", spec.path.display()),
                },
                other => other,
            })?;
            let returns =
                to_returns(&prices).map_err(|e| Error::data(None, format!("{}: {e}", spec.symbol)))?;
            Ok(LoadedAsset {
                spec: spec.clone(),
                returns,
            })
        })
        .collect()
}

pub struct PlannedJob {
    pub symbol: String,
    pub family: Family,
    pub asset_class: AssetClass,
    pub folds: Vec<FoldPlan>,
    pub dates: Vec<NaiveDate>,
}

/// Fold plans of every asset × family pair, in report order.
pub fn plan_run(cfg: &RunConfig, assets: &[LoadedAsset]) -> Result<Vec<PlannedJob>> {
    let mut jobs = Vec::new();
    for asset in assets {
        for family in cfg.families() {
            let model = cfg.model_config(family)?;
            let train = cfg.train_config(family, asset.spec.asset_class, &asset.spec.symbol)?;
            let folds =
                plan_folds(asset.returns.len(), model.sequence_length, &train).map_err(|e| match e {
                    Error::Planning(m) => Error::Planning(format!("{}: {m}", asset.spec.symbol)),
                    other => other,
                })?;
            jobs.push(PlannedJob {
                symbol: asset.spec.symbol.clone(),
                family,
                asset_class: asset.spec.asset_class,
                folds,
                dates: asset.returns.dates().to_vec(),
            });
        }
    }
    Ok(jobs)
}

/// Fold plan as CSV with index ranges and the calendar span of each test window.
pub fn fold_plan_csv(job: &PlannedJob) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "fold",
        "train_start",
        "train_end",
        "validation_start",
        "validation_end",
        "test_start",
        "test_end",
        "test_first_date",
        "test_last_date",
    ])
    .map_err(csv_err)?;
    for f in &job.folds {
        w.write_record([
            f.index.to_string(),
            f.train.start.to_string(),
            f.train.end.to_string(),
            f.validation.start.to_string(),
            f.validation.end.to_string(),
            f.test.start.to_string(),
            f.test.end.to_string(),
            job.dates[f.test.start].to_string(),
            job.dates[f.test.end - 1].to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub symbol: String,
    pub label: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub rows: Vec<ReportRow>,
}

struct JobOutput {
    equity: EquityLine,
    report: MetricsReport,
}

/// Runs every asset × family job on a pool of `cfg.jobs` workers (all cores
/// when unset) and writes the artifacts.
pub fn run(cfg: &RunConfig, log: Logger<'_>) -> Result<RunSummary> {
    let assets = load_assets(cfg)?;
    let jobs = plan_run(cfg, &assets)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;

    let outputs: Vec<Result<JobOutput>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let asset = assets
                    .iter()
                    .find(|a| a.spec.symbol == job.symbol)
                    .expect("planned from loaded assets");
                run_job(cfg, asset, job, log)
            })
            .collect()
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let per_asset = cfg.families().len();
    for (asset, outs) in assets.iter().zip(outputs.chunks(per_asset)) {
        let w = jobs
            .iter()
            .find(|j| j.symbol == asset.spec.symbol)
            .map(|j| j.folds[0].test.start)
            .expect("planned");
        let scale = asset.spec.asset_class.periods_per_year() as f64;
        let benchmark = buy_and_hold(&asset.returns.values()[w..])?;
        rows.push(ReportRow {
            symbol: asset.spec.symbol.clone(),
            label: BENCHMARK_LABEL.into(),
            report: MetricsReport::from_equity(&benchmark, scale)?,
        });
        let mut series = vec![(BENCHMARK_LABEL.to_string(), benchmark.equity().to_vec())];
        for (family, out) in cfg.families().into_iter().zip(outs) {
            rows.push(ReportRow {
                symbol: asset.spec.symbol.clone(),
                label: family.report_label().into(),
                report: out.report.clone(),
            });
            series.push((family.report_label().into(), out.equity.equity().to_vec()));
        }
        let plot = plot_data_csv(&asset.returns.dates()[w..], &series)?;
        write(
            &cfg.output_dir.join(&asset.spec.symbol).join("plot_data.csv"),
            plot.as_bytes(),
        )?;
    }

    write(&cfg.output_dir.join("report.csv"), report_csv(&rows)?.as_bytes())?;
    write(&cfg.output_dir.join("report.txt"), report_text(&rows).as_bytes())?;
    log(
        json!({"event": "run_complete", "output_dir": cfg.output_dir.display().to_string(), "rows": rows.len()}),
    );
    Ok(RunSummary {
        output_dir: cfg.output_dir.clone(),
        rows,
    })
}

fn run_job(cfg: &RunConfig, asset: &LoadedAsset, job: &PlannedJob, log: Logger<'_>) -> Result<JobOutput> {
    let symbol = &asset.spec.symbol;
    let model = cfg.model_config(job.family)?;
    let train = cfg.train_config(job.family, asset.spec.asset_class, symbol)?;
    let dir = cfg.output_dir.join(symbol).join(job.family.as_str());
    log(json!({
        "event": "job_start",
        "asset": symbol,
        "model": job.family.as_str(),
        "folds": job.folds.len(),
    }));
    write(&dir.join("fold_plan.csv"), fold_plan_csv(job)?.as_bytes())?;

    let values = asset.returns.values();
    let folds = walk_forward(&model, values, &train)?;

    let mut train_log = String::new();
    for f in &folds {
        let name = format!("fold_{:03}.ckpt", f.plan.index);
        write(&dir.join("checkpoints").join(name), &f.outcome.checkpoint)?;
        for rec in &f.outcome.history {
            let mut line = serde_json::to_value(rec).expect("record serializes");
            line["asset"] = json!(symbol);
            line["model"] = json!(job.family.as_str());
            train_log.push_str(&line.to_string());
            train_log.push('\n');
        }
        log(json!({
            "event": "fold_done",
            "asset": symbol,
            "model": job.family.as_str(),
            "fold": f.plan.index,
            "best_epoch": f.outcome.best_epoch,
            "best_validation": f.outcome.best_validation,
        }));
    }
    write(&dir.join("train_log.jsonl"), train_log.as_bytes())?;

    let w = job.folds[0].test.start;
    let predictions: Vec<(usize, usize, f64)> = folds
        .iter()
        .flat_map(|f: &FoldResult| f.predictions.iter().map(move |&(d, p)| (f.plan.index, d, p)))
        .collect();
    let expected: Vec<usize> = (w..values.len()).collect();
    if predictions.iter().map(|p| p.1).ne(expected.iter().copied()) {
        return Err(Error::Usage(format!(
            "{symbol}: predictions do not cover every out-of-sample day"
        )));
    }
    write(
        &dir.join("predictions.csv"),
        predictions_csv(&asset.returns, &predictions)?.as_bytes(),
    )?;

    let preds: Vec<f64> = predictions.iter().map(|p| p.2).collect();
    let signals = signals_from_predictions(&preds, cfg.strategy_mode);
    let oos = &values[w..];
    let equity = run_backtest(&signals, oos, cfg.cost_bps)?.close_out();
    let benchmark = buy_and_hold(oos)?;
    let csv = equity_csv(&asset.returns.dates()[w..], &equity, &benchmark)?;
    write(&dir.join("equity.csv"), csv.as_bytes())?;

    let report = MetricsReport::from_equity(&equity, asset.spec.asset_class.periods_per_year() as f64)?;
    log(json!({"event": "job_done", "asset": symbol, "model": job.family.as_str()}));
    Ok(JobOutput { equity, report })
}

fn predictions_csv(returns: &ReturnSeries, rows: &[(usize, usize, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "day", "fold", "prediction", "realized_return"])
        .map_err(csv_err)?;
    for &(fold, day, pred) in rows {
        w.write_record([
            returns.dates()[day].to_string(),
            day.to_string(),
            fold.to_string(),
            pred.to_string(),
            returns.values()[day].to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// One row per out-of-sample day with the equity after that day's return.
pub fn equity_csv(dates: &[NaiveDate], line: &EquityLine, benchmark: &EquityLine) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "date",
        "position",
        "strategy_return",
        "equity",
        "benchmark_equity",
    ])
    .map_err(csv_err)?;
    for (i, date) in dates.iter().enumerate() {
        w.write_record([
            date.to_string(),
            line.positions()[i].to_string(),
            line.strategy_returns()[i].to_string(),
            line.equity()[i + 1].to_string(),
            benchmark.equity()[i + 1].to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Rebuilds an equity line from an exported equity CSV and checks the stored levels.
pub fn read_equity_csv(path: &Path) -> Result<EquityLine> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::data(None, format!("cannot open {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(Some(1), e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(Some(1), format!("missing column '{name}'")))
    };
    let (pos_idx, ret_idx, eq_idx) = (col("position")?, col("strategy_return")?, col("equity")?);
    let mut positions = Vec::new();
    let mut returns = Vec::new();
    let mut stored = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map(|p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str, v: &str| Error::data(line, format!("unparsable {what} '{v}'"));
        positions.push(
            field(pos_idx)
                .parse::<i8>()
                .map_err(|_| bad("position", field(pos_idx)))?,
        );
        returns.push(
            field(ret_idx)
                .parse::<f64>()
                .map_err(|_| bad("strategy_return", field(ret_idx)))?,
        );
        stored.push(
            field(eq_idx)
                .parse::<f64>()
                .map_err(|_| bad("equity", field(eq_idx)))?,
        );
    }
    let signals = SignalSeries::new(positions, StrategyMode::LongShort)
        .map_err(|e| Error::data(None, e.to_string()))?;
    let line = EquityLine::from_strategy_returns(&signals, returns)?.close_out();
    for (i, (a, b)) in line.equity()[1..].iter().zip(&stored).enumerate() {
        if (a - b).abs() > 1e-9 * b.abs().max(1.0) {
            return Err(Error::data(
                Some(i as u64 + 2),
                format!("equity {b} disagrees with compounded strategy returns ({a})"),
            ));
        }
    }
    Ok(line)
}

/// Long-format equity series restricted to the out-of-sample dates.
pub fn plot_data_csv(dates: &[NaiveDate], series: &[(String, Vec<f64>)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "series_name", "equity"])
        .map_err(csv_err)?;
    for (name, equity) in series {
        for (date, level) in dates.iter().zip(&equity[1..]) {
            w.write_record([date.to_string(), name.clone(), level.to_string()])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Machine-readable report: percentages and ratios at full precision.
pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("Asset").chain(REPORT_COLUMNS).collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let r = &row.report;
        let ir = |v: Option<f64>| v.map_or(UNDEFINED.to_owned(), |x| x.to_string());
        w.write_record([
            row.symbol.clone(),
            row.label.clone(),
            (r.arc * 100.0).to_string(),
            (r.asd * 100.0).to_string(),
            (r.md * 100.0).to_string(),
            r.mld.to_string(),
            ir(r.ir.ir1),
            ir(r.ir.ir2),
            ir(r.ir.ir3),
            r.n_obs.to_string(),
            r.n_trades.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// One table per asset, rows in B&H, LSTM, TRANS order.
pub fn report_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < rows.len() {
        let symbol = &rows[i].symbol;
        let group: Vec<(String, MetricsReport)> = rows[i..]
            .iter()
            .take_while(|r| &r.symbol == symbol)
            .map(|r| (r.label.clone(), r.report.clone()))
            .collect();
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(symbol);
        out.push('\n');
        out.push_str(&format_table(&group));
        i += group.len();
    }
    out
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
