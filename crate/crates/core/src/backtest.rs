//! Walk-forward link-prediction experiment.
//!
//! For every prediction time `t` (a window index) and lag `h` (in window
//! steps), restricted and full models are fitted on rows whose features
//! come from source windows `t' <= t - h` and whose labels come from
//! `t' + h <= t`, so nothing after `t` enters a fit. The fitted full model
//! then scores every pair from the features at `t`, and the scores are
//! evaluated against the realized graph at `t + h`.
//!
//! Each (lag, split) sequence of cells is fitted in time order with warm
//! starts; lags run in parallel and the report is assembled in fixed order.

use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlate::{correlation_matrix, to_distance, TauVariant, WindowedMatrix};
use crate::error::{Error, Result};
use crate::evaluate::{auc_of, auc_star, split, Split, Summary};
use crate::model::{
    build_training_set, fit_with, is_significant, likelihood_ratio, FitOptions, FitResult, ModelSpec,
    ModelVariant, RowFilter,
};
use crate::multiplex::{pair_features, DuplexSnapshot, PairFeatures};
use crate::netbuild::{filter_graph, jaccard, new_edge_fraction, EdgeBudget, Layer, LayerGraph};
use crate::output::write_atomic;
use crate::panel::{windows, PanelSeries, WindowPolicy, WindowSpec};

/// Window indices delimiting a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    /// Earliest window whose features may enter a training set.
    pub train_start: usize,
    /// First prediction time.
    pub first_prediction: usize,
    /// Last window whose realized graph may be used as a label.
    pub last: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PeriodDates {
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub test_end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub target: Layer,
    /// Prediction lags in weeks (= window steps).
    pub lags: Vec<usize>,
    pub train_policy: WindowPolicy,
    /// Source windows per rolling training span.
    pub train_windows: usize,
    pub dates: PeriodDates,
    /// Explicit sweep; overrides `dates` when set.
    pub sweep: Option<Sweep>,
    pub window: WindowSpec,
    pub edge_budget: EdgeBudget,
    pub tau: TauVariant,
    /// Evaluate every `test_stride`-th prediction time.
    pub test_stride: usize,
    /// Fit separate models for the new-edge and deletion splits.
    pub split_models: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            target: Layer::Financial,
            lags: (1..=20).collect(),
            train_policy: WindowPolicy::Rolling,
            train_windows: 25,
            dates: PeriodDates::default(),
            sweep: None,
            window: WindowSpec::default(),
            edge_budget: EdgeBudget::Quartile,
            tau: TauVariant::B,
            test_stride: 1,
            split_models: true,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(Error::Config("lags must be a non-empty list of positive integers".into()));
        }
        if self.train_windows == 0 {
            return Err(Error::Config("train_windows must be positive".into()));
        }
        if self.test_stride == 0 {
            return Err(Error::Config("test_stride must be positive".into()));
        }
        if let (Some(a), Some(b)) = (self.dates.train_end, self.dates.test_end) {
            if a >= b {
                return Err(Error::Config(format!("train_end {a} is not before test_end {b}")));
            }
        }
        if let (Some(a), Some(b)) = (self.dates.train_start, self.dates.train_end) {
            if a > b {
                return Err(Error::Config(format!("train_start {a} is after train_end {b}")));
            }
        }
        Ok(())
    }

    fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(1)
    }

    /// Resolve the sweep against `n_windows` windows whose last trading
    /// days are `window_ends` (when known).
    pub fn resolve_sweep(&self, n_windows: usize, window_ends: Option<&[NaiveDate]>) -> Result<Sweep> {
        if let Some(s) = self.sweep {
            return Ok(s);
        }
        if n_windows == 0 {
            return Err(Error::InsufficientHistory("no windows".into()));
        }
        let dated = self.dates.train_start.is_some()
            || self.dates.train_end.is_some()
            || self.dates.test_end.is_some();
        let ends = match (dated, window_ends) {
            (false, _) => None,
            (true, Some(e)) => Some(e),
            (true, None) => {
                return Err(Error::Config("dates given but the input windows carry no calendar".into()))
            }
        };
        let train_start = match (ends, self.dates.train_start) {
            (Some(e), Some(d)) => e.iter().position(|x| *x >= d).ok_or_else(|| {
                Error::InsufficientHistory(format!("no window ends on or after {d}"))
            })?,
            _ => 0,
        };
        let first_prediction = match (ends, self.dates.train_end) {
            (Some(e), Some(d)) => e.iter().rposition(|x| *x <= d).ok_or_else(|| {
                Error::InsufficientHistory(format!("no window ends on or before {d}"))
            })?,
            _ => train_start + self.train_windows - 1 + self.max_lag(),
        };
        let last = match (ends, self.dates.test_end) {
            (Some(e), Some(d)) => e.iter().rposition(|x| *x <= d).ok_or_else(|| {
                Error::InsufficientHistory(format!("no window ends on or before {d}"))
            })?,
            _ => n_windows - 1,
        };
        Ok(Sweep {
            train_start,
            first_prediction,
            last,
        })
    }

    /// Source windows of the training set for prediction time `t` at lag
    /// `h`; `None` when no source window is available.
    pub fn training_span(&self, sweep: &Sweep, t: usize, h: usize) -> Option<std::ops::Range<usize>> {
        let end = (t + 1).checked_sub(h)?;
        if end <= sweep.train_start {
            return None;
        }
        let start = match self.train_policy {
            WindowPolicy::Expanding => sweep.train_start,
            WindowPolicy::Rolling => end.saturating_sub(self.train_windows).max(sweep.train_start),
        };
        Some(start..end)
    }
}

/// Toggle the predicted layer; the restricted model always uses the target
/// layer's own features, so the roles of the two layers swap with it.
pub fn layer_swap(config: &BacktestConfig) -> BacktestConfig {
    BacktestConfig {
        target: config.target.other(),
        ..config.clone()
    }
}

/// Build duplex snapshots for every window of two aligned panels.
pub fn build_snapshots(
    returns: &PanelSeries,
    opinion: &PanelSeries,
    window: &WindowSpec,
    budget: EdgeBudget,
    tau: TauVariant,
) -> Result<Vec<DuplexSnapshot>> {
    build_snapshots_with(returns, opinion, window, budget, tau, &|_, _| Ok(()))
}

/// As [`build_snapshots`], handing every correlation matrix to `inspect`.
pub fn build_snapshots_with(
    returns: &PanelSeries,
    opinion: &PanelSeries,
    window: &WindowSpec,
    budget: EdgeBudget,
    tau: TauVariant,
    inspect: &(dyn Fn(Layer, &WindowedMatrix) -> Result<()> + Sync),
) -> Result<Vec<DuplexSnapshot>> {
    if returns.dates() != opinion.dates() || returns.tickers() != opinion.tickers() {
        return Err(Error::Shape("return and opinion panels are not aligned".into()));
    }
    let grid = windows(window, returns.len())?;
    let layer_graph = |panel: &PanelSeries, w, layer| -> Result<LayerGraph> {
        let c = correlation_matrix(panel, w, tau)?;
        if !c.degenerate_pairs.is_empty() {
            log::debug!("{layer} window {}..{}: {} degenerate pairs", w.start, w.end, c.degenerate_pairs.len());
        }
        inspect(layer, &c)?;
        filter_graph(&to_distance(&c)?, budget, layer)
    };
    grid.par_iter()
        .map(|&w| {
            DuplexSnapshot::new(
                layer_graph(returns, w, Layer::Financial)?,
                layer_graph(opinion, w, Layer::Social)?,
            )
        })
        .collect()
}

/// Pair features of every snapshot.
pub fn feature_store(snapshots: &[DuplexSnapshot]) -> Vec<Vec<PairFeatures>> {
    snapshots.par_iter().map(pair_features).collect()
}

/// One fitted model, as dumped to JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub variant: ModelVariant,
    pub split: Split,
    pub lag_h: usize,
    pub prediction_window: usize,
    pub train_start: usize,
    pub train_end: usize,
    pub coefficients: Vec<(String, f64)>,
    pub loglik: f64,
    pub lambda: Option<f64>,
    pub converged: bool,
    pub ridge_fallback: bool,
    pub iterations: usize,
}

impl FitRecord {
    fn new(fit: &FitResult, split: Split, t: usize, span: &std::ops::Range<usize>, lambda: Option<f64>) -> Self {
        Self {
            variant: fit.spec.variant,
            split,
            lag_h: fit.spec.lag_h,
            prediction_window: t,
            train_start: span.start,
            train_end: span.end - 1,
            coefficients: fit.spec.regressors().into_iter().zip(fit.coefficients.iter().copied()).collect(),
            loglik: fit.loglik,
            lambda,
            converged: fit.converged,
            ridge_fallback: fit.ridge_fallback,
            iterations: fit.iterations,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coefficients: serde_json::Map<String, serde_json::Value> = self
            .coefficients
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::json!(v)))
            .collect();
        serde_json::json!({
            "variant": self.variant.name(),
            "split": self.split.name(),
            "lag_h": self.lag_h,
            "prediction_window": self.prediction_window,
            "train_start": self.train_start,
            "train_end": self.train_end,
            "coefficients": coefficients,
            "loglik": self.loglik,
            "lambda": self.lambda,
            "converged": self.converged,
            "ridge_fallback": self.ridge_fallback,
            "iterations": self.iterations,
        })
    }
}

/// Evaluation of one split of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub split: Split,
    /// Scores in row order (pairs admitted by the split, lexicographic).
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub auc: Option<f64>,
    pub auc_benchmark: Option<f64>,
    pub auc_star: Option<f64>,
    pub lambda: Option<f64>,
    pub failure: Option<String>,
}

impl SplitOutcome {
    fn counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (pos, self.labels.len() - pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub lag: usize,
    pub t: usize,
    pub splits: Vec<SplitOutcome>,
    pub fits: Vec<FitRecord>,
}

fn model_filter(split: Split) -> RowFilter {
    match split {
        Split::FullGraph => RowFilter::All,
        Split::NewEdges => RowFilter::AbsentNow,
        Split::Deletions => RowFilter::PresentNow,
    }
}

type WarmStarts = HashMap<(Split, ModelVariant), Vec<f64>>;

struct FittedPair {
    full: FitResult,
    lambda: f64,
}

fn fit_pair(
    features: &[Vec<PairFeatures>],
    cfg: &BacktestConfig,
    span: &std::ops::Range<usize>,
    t: usize,
    h: usize,
    split: Split,
    warm: &mut WarmStarts,
    records: &mut Vec<FitRecord>,
) -> Result<FittedPair> {
    let data = build_training_set(features, cfg.target, h, span.clone(), model_filter(split))?;
    let opts = FitOptions::default();
    let mut fit_one = |variant| -> Result<FitResult> {
        let spec = ModelSpec::new(variant, h, cfg.target);
        let start = warm.get(&(split, variant)).map(Vec::as_slice);
        let fit = fit_with(&spec, &data, start, &opts)?;
        if fit.converged && !fit.ridge_fallback {
            warm.insert((split, variant), fit.coefficients.clone());
        } else {
            warm.remove(&(split, variant));
        }
        Ok(fit)
    };
    let restricted = fit_one(ModelVariant::Restricted)?;
    let full = fit_one(ModelVariant::Full)?;
    let lr = likelihood_ratio(&full, &restricted)?;
    records.push(FitRecord::new(&restricted, split, t, span, Some(lr.lambda)));
    records.push(FitRecord::new(&full, split, t, span, Some(lr.lambda)));
    if !(full.converged && restricted.converged) {
        return Err(Error::Numeric(format!(
            "{} fit did not converge",
            if full.converged { "restricted" } else { "full" }
        )));
    }
    Ok(FittedPair {
        full,
        lambda: lr.lambda,
    })
}

fn evaluate_rows(split: Split, scores: Vec<f64>, labels: Vec<bool>, bench: Vec<f64>, lambda: Option<f64>) -> SplitOutcome {
    let auc = auc_of(scores.iter().copied().zip(labels.iter().copied())).ok();
    let auc_benchmark = auc_of(bench.iter().copied().zip(labels.iter().copied())).ok();
    let star = match (auc, auc_benchmark) {
        (Some(a), Some(b)) => auc_star(a, b).ok(),
        _ => None,
    };
    SplitOutcome {
        split,
        scores,
        labels,
        auc,
        auc_benchmark,
        auc_star: star,
        lambda,
        failure: None,
    }
}

/// Rows of one split at prediction time `t`: (features, present at t+h).
fn split_rows<'a>(
    features: &'a [Vec<PairFeatures>],
    target: Layer,
    t: usize,
    h: usize,
    split: Split,
) -> impl Iterator<Item = (&'a PairFeatures, bool)> + 'a {
    let filter = model_filter(split);
    features[t]
        .iter()
        .zip(&features[t + h])
        .filter(move |(f, _)| filter.admits(f.edge(target)))
        .map(move |(f, g)| (f, g.edge(target)))
}

/// Orient one split's rows: deletions count a removed edge as the
/// positive class and score it with `1 - p`.
fn orient(split: Split, p: f64, present_later: bool) -> (f64, bool) {
    match split {
        Split::Deletions => (1.0 - p, !present_later),
        _ => (p, present_later),
    }
}

fn failed(split: Split, rows: impl Iterator<Item = bool>, err: &Error) -> SplitOutcome {
    let labels: Vec<bool> = rows.collect();
    SplitOutcome {
        split,
        scores: Vec::new(),
        labels,
        auc: None,
        auc_benchmark: None,
        auc_star: None,
        lambda: None,
        failure: Some(err.to_string()),
    }
}

/// Fit, score and evaluate one (prediction time, lag) cell.
pub fn run_cell(
    features: &[Vec<PairFeatures>],
    cfg: &BacktestConfig,
    sweep: &Sweep,
    t: usize,
    h: usize,
) -> Result<CellOutcome> {
    run_cell_warm(features, cfg, sweep, t, h, &mut WarmStarts::new())
}

fn run_cell_warm(
    features: &[Vec<PairFeatures>],
    cfg: &BacktestConfig,
    sweep: &Sweep,
    t: usize,
    h: usize,
    warm: &mut WarmStarts,
) -> Result<CellOutcome> {
    if t + h >= features.len() {
        return Err(Error::InsufficientHistory(format!("no window {} to evaluate against", t + h)));
    }
    let span = cfg
        .training_span(sweep, t, h)
        .ok_or_else(|| Error::InsufficientHistory(format!("no training window before {t} at lag {h}")))?;
    // labels of the training set must be observable at t
    assert!(span.end - 1 + h <= t, "training labels reach past the prediction time");

    let target = cfg.target;
    let mut records = Vec::new();
    let mut splits = Vec::with_capacity(3);

    let fitted_splits: &[Split] = if cfg.split_models { &Split::ALL } else { &[Split::FullGraph] };
    for &s in fitted_splits {
        let outcome = match fit_pair(features, cfg, &span, t, h, s, warm, &mut records) {
            Ok(pair) => {
                let (scores, labels): (Vec<f64>, Vec<bool>) = split_rows(features, target, t, h, s)
                    .map(|(f, later)| orient(s, pair.full.predict(f), later))
                    .unzip();
                let bench = split_rows(features, target, t, h, s)
                    .map(|(f, later)| orient(s, f64::from(u8::from(f.edge(target))), later).0)
                    .collect();
                evaluate_rows(s, scores, labels, bench, Some(pair.lambda))
            }
            Err(e) => {
                log::debug!("cell t={t} h={h} {}: {e}", s.name());
                failed(s, split_rows(features, target, t, h, s).map(|(_, l)| orient(s, 0.0, l).1), &e)
            }
        };
        splits.push(outcome);
    }

    if !cfg.split_models {
        let full_failure = splits[0].failure.clone();
        let full_scores = std::mem::take(&mut splits[0].scores);
        for s in [Split::NewEdges, Split::Deletions] {
            let labels = || split_rows(features, target, t, h, s).map(|(_, l)| orient(s, 0.0, l).1);
            if let Some(reason) = &full_failure {
                splits.push(failed(s, labels(), &Error::Numeric(reason.clone())));
                continue;
            }
            let future: Vec<bool> = features[t + h].iter().map(|f| f.edge(target)).collect();
            let now = LayerGraph::new(
                target,
                crate::panel::Window { start: t, end: t + 1 },
                features_n(&features[t]),
                features[t].iter().filter(|f| f.edge(target)).map(|f| (f.u, f.v)),
            )?;
            let views = split(&full_scores, &future, &now)?;
            let view = views.get(s);
            let bench = split_rows(features, target, t, h, s)
                .map(|(f, later)| orient(s, f64::from(u8::from(f.edge(target))), later).0)
                .collect();
            splits.push(evaluate_rows(
                s,
                view.rows.iter().map(|r| r.score).collect(),
                view.rows.iter().map(|r| r.label).collect(),
                bench,
                None,
            ));
        }
        splits[0].scores = full_scores;
    }

    Ok(CellOutcome {
        lag: h,
        t,
        splits,
        fits: records,
    })
}

fn features_n(rows: &[PairFeatures]) -> usize {
    rows.last().map_or(0, |f| f.v + 1)
}

/// One report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub lag: usize,
    pub split: Split,
    pub window_end: usize,
    pub auc: Option<f64>,
    pub auc_benchmark: Option<f64>,
    pub auc_star: Option<f64>,
    pub lambda: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub const REPORT_HEADER: &str = "lag,split,window_end,auc,auc_benchmark,auc_star,lambda,n_pos,n_neg";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.lag,
            self.split.name(),
            self.window_end,
            opt(self.auc),
            opt(self.auc_benchmark),
            opt(self.auc_star),
            opt(self.lambda),
            self.n_pos,
            self.n_neg
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: String| Error::Parse {
            path: "report.csv".into(),
            line: 0,
            message: m,
        };
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields in {line:?}")));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let real = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|e| bad(format!("{s:?}: {e}")))
            }
        };
        Ok(Self {
            lag: int(f[0])?,
            split: f[1].parse().map_err(bad)?,
            window_end: int(f[2])?,
            auc: real(f[3])?,
            auc_benchmark: real(f[4])?,
            auc_star: real(f[5])?,
            lambda: real(f[6])?,
            n_pos: int(f[7])?,
            n_neg: int(f[8])?,
        })
    }
}

/// Per (lag, split) means, standard deviations and standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub lag: usize,
    pub split: Split,
    pub cells: usize,
    pub auc: Option<Summary>,
    pub auc_benchmark: Option<Summary>,
    pub auc_star: Option<Summary>,
    pub lambda: Option<Summary>,
    /// Share of cells with a lambda above the significance threshold.
    pub significant_fraction: Option<f64>,
}

/// Aggregate rows in their given order.
pub fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(usize, Split)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.lag, r.split)) {
            keys.push((r.lag, r.split));
        }
    }
    keys.into_iter()
        .map(|(lag, split)| {
            let group: Vec<&ReportRow> = rows.iter().filter(|r| r.lag == lag && r.split == split).collect();
            let collect = |f: fn(&ReportRow) -> Option<f64>| -> Vec<f64> { group.iter().filter_map(|r| f(r)).collect() };
            let lambdas = collect(|r| r.lambda);
            let significant_fraction = (!lambdas.is_empty()).then(|| {
                lambdas.iter().filter(|&&l| is_significant(l)).count() as f64 / lambdas.len() as f64
            });
            Aggregate {
                lag,
                split,
                cells: group.len(),
                auc: Summary::of(&collect(|r| r.auc)),
                auc_benchmark: Summary::of(&collect(|r| r.auc_benchmark)),
                auc_star: Summary::of(&collect(|r| r.auc_star)),
                lambda: Summary::of(&lambdas),
                significant_fraction,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnRow {
    pub layer: Layer,
    pub h: usize,
    pub new_edge_fraction: Summary,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChurnTable {
    pub rows: Vec<ChurnRow>,
    /// Jaccard similarity between every pair of financial graphs.
    pub jaccard: Vec<Vec<f64>>,
}

/// Mean and standard error of the new-edge fraction over all `(t, t + h)`
/// for `h = 1..=max_h`.
pub fn churn_diagnostics(graphs: &[LayerGraph], max_h: usize) -> Result<Vec<ChurnRow>> {
    if graphs.len() < max_h + 1 {
        return Err(Error::InsufficientHistory(format!(
            "{} graphs cannot span a lag of {max_h}",
            graphs.len()
        )));
    }
    let layer = graphs.first().map_or(Layer::Financial, |g| g.layer);
    (1..=max_h)
        .map(|h| {
            let fractions: Vec<f64> = graphs
                .iter()
                .zip(&graphs[h..])
                .map(|(now, later)| new_edge_fraction(now, later))
                .collect::<Result<_>>()?;
            Ok(ChurnRow {
                layer,
                h,
                new_edge_fraction: Summary::of(&fractions).expect("at least one pair"),
            })
        })
        .collect()
}

/// Full cross-similarity matrix; the diagonal is 1.
pub fn jaccard_matrix(graphs: &[LayerGraph]) -> Result<Vec<Vec<f64>>> {
    let m = graphs.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| jaccard(&graphs[i], &graphs[j])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|i| (0..m).map(|j| if j >= i { upper[i][j - i] } else { upper[j][i - j] }).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BacktestReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
    pub churn: ChurnTable,
    pub fits: Vec<FitRecord>,
    /// `(lag, prediction window, split, reason)` of failed cells.
    pub failures: Vec<(usize, usize, Split, String)>,
    pub sweep: Option<Sweep>,
}

impl BacktestReport {
    pub fn write_report_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "{REPORT_HEADER}")?;
            for r in &self.rows {
                writeln!(w, "{}", r.to_csv())?;
            }
            Ok(())
        })
    }

    pub fn aggregates_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sweep": self.sweep,
            "cells": self.rows.len(),
            "failed_cells": self.failures.len(),
            "aggregates": self.aggregates,
        })
    }

    pub fn write_report_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.aggregates_json())
            .map_err(|e| Error::Numeric(format!("serializing report: {e}")))?;
        crate::output::write_string(path, &(text + "\n"))
    }

    pub fn write_churn_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            writeln!(w, "layer,h,mean,sd,se,n")?;
            for r in &self.churn.rows {
                let s = &r.new_edge_fraction;
                writeln!(w, "{},{},{},{},{},{}", r.layer, r.h, s.mean, s.sd, s.se, s.n)?;
            }
            Ok(())
        })
    }

    pub fn write_jaccard_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            for row in &self.churn.jaccard {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            Ok(())
        })
    }
}

/// Run the sweep over precomputed snapshots. `window_ends` gives the last
/// trading day of each window when the snapshots come from dated panels.
pub fn run_on_snapshots(
    config: &BacktestConfig,
    snapshots: &[DuplexSnapshot],
    window_ends: Option<&[NaiveDate]>,
) -> Result<BacktestReport> {
    config.validate()?;
    let features = feature_store(snapshots);
    let mut report = run_on_features(config, &features, &window_end_indices(snapshots), window_ends)?;
    report.churn = churn_table(snapshots, config.max_lag())?;
    Ok(report)
}

fn window_end_indices(snapshots: &[DuplexSnapshot]) -> Vec<usize> {
    snapshots.iter().map(|s| s.window().end).collect()
}

/// Churn of both layers (lags capped by the number of snapshots) and the
/// financial Jaccard matrix.
pub fn churn_table(snapshots: &[DuplexSnapshot], max_h: usize) -> Result<ChurnTable> {
    let fin: Vec<LayerGraph> = snapshots.iter().map(|s| s.financial.clone()).collect();
    let soc: Vec<LayerGraph> = snapshots.iter().map(|s| s.social.clone()).collect();
    let h = max_h.min(snapshots.len().saturating_sub(1));
    let mut rows = Vec::new();
    let budget_positive = snapshots.iter().all(|s| s.financial.edge_count() > 0 && s.social.edge_count() > 0);
    if h > 0 && budget_positive {
        rows.extend(churn_diagnostics(&fin, h)?);
        rows.extend(churn_diagnostics(&soc, h)?);
    }
    Ok(ChurnTable {
        rows,
        jaccard: jaccard_matrix(&fin)?,
    })
}

/// Sweep over precomputed pair features. `window_end[t]` labels report
/// rows.
pub fn run_on_features(
    config: &BacktestConfig,
    features: &[Vec<PairFeatures>],
    window_end: &[usize],
    window_ends: Option<&[NaiveDate]>,
) -> Result<BacktestReport> {
    config.validate()?;
    if features.is_empty() {
        return Ok(BacktestReport::default());
    }
    let sweep = config.resolve_sweep(features.len(), window_ends)?;
    if sweep.last >= features.len() {
        return Err(Error::InsufficientHistory(format!(
            "sweep ends at window {} of {}",
            sweep.last,
            features.len()
        )));
    }
    let per_lag: Vec<Vec<CellOutcome>> = config
        .lags
        .par_iter()
        .map(|&h| {
            let mut warm = WarmStarts::new();
            let mut cells = Vec::new();
            let mut t = sweep.first_prediction;
            while t + h <= sweep.last {
                if config.training_span(&sweep, t, h).is_some() {
                    let mut cell = run_cell_warm(features, config, &sweep, t, h, &mut warm)?;
                    for s in &mut cell.splits {
                        s.scores = Vec::new();
                        s.labels.shrink_to_fit();
                    }
                    cells.push(cell);
                }
                t += config.test_stride;
            }
            log::info!("lag {h}: {} cells", cells.len());
            Ok(cells)
        })
        .collect::<Result<_>>()?;

    let mut report = BacktestReport {
        sweep: Some(sweep),
        ..BacktestReport::default()
    };
    for cells in per_lag {
        for cell in cells {
            for s in &cell.splits {
                let (n_pos, n_neg) = s.counts();
                if let Some(reason) = &s.failure {
                    report.failures.push((cell.lag, cell.t, s.split, reason.clone()));
                }
                report.rows.push(ReportRow {
                    lag: cell.lag,
                    split: s.split,
                    window_end: window_end[cell.t],
                    auc: s.auc,
                    auc_benchmark: s.auc_benchmark,
                    auc_star: s.auc_star,
                    lambda: s.lambda,
                    n_pos,
                    n_neg,
                });
            }
            report.fits.extend(cell.fits);
        }
    }
    report.aggregates = aggregate(&report.rows);
    Ok(report)
}

/// End-to-end run from aligned return and opinion panels.
pub fn run(config: &BacktestConfig, returns: &PanelSeries, opinion: &PanelSeries) -> Result<BacktestReport> {
    config.validate()?;
    let snapshots = build_snapshots(returns, opinion, &config.window, config.edge_budget, config.tau)?;
    let ends: Vec<NaiveDate> = snapshots
        .iter()
        .map(|s| returns.dates()[s.window().end - 1])
        .collect();
    run_on_snapshots(config, &snapshots, Some(&ends))
}
