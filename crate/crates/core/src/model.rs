//! Logistic link-prediction models fitted by maximum likelihood.
//!
//! The restricted model uses the target layer's own persistence and closure;
//! the full model adds the other layer and the cross-layer terms. Both are
//! fitted by Newton-Raphson with step halving on the Bernoulli
//! log-likelihood summed over every (pair, source window) row of a
//! [`TrainingSet`]. Internally the objective is the per-row mean so that
//! tolerances do not scale with the number of rows.

use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiplex::PairFeatures;
use crate::netbuild::Layer;

/// Critical value of a chi-square with 4 degrees of freedom at p = 0.001.
pub const LAMBDA_THRESHOLD: f64 = 18.47;

pub const MAX_COEFFICIENTS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Own-layer persistence and closure only.
    Restricted,
    /// Own layer, other layer and cross-layer terms.
    Full,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Restricted => "restricted",
            ModelVariant::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    /// Prediction lag in window steps (weeks).
    pub lag_h: usize,
    /// Layer whose future edges are predicted.
    pub target: Layer,
}

impl ModelSpec {
    pub fn new(variant: ModelVariant, lag_h: usize, target: Layer) -> Self {
        Self {
            variant,
            lag_h,
            target,
        }
    }

    pub fn n_coefficients(&self) -> usize {
        match self.variant {
            ModelVariant::Restricted => 3,
            ModelVariant::Full => 7,
        }
    }

    /// Column names in coefficient order.
    pub fn regressors(&self) -> Vec<String> {
        let own = short(self.target);
        let other = short(self.target.other());
        let mut names = vec![
            "intercept".to_string(),
            format!("t_{own}"),
            format!("e_{own}"),
        ];
        if self.variant == ModelVariant::Full {
            names.extend([
                format!("t_{other}"),
                format!("e_{other}"),
                "t_multi".to_string(),
                "e_any".to_string(),
            ]);
        }
        names
    }

    /// Fill `out[..n_coefficients()]` with the design row of `f`.
    pub fn design(&self, f: &PairFeatures, out: &mut [f64]) {
        let own = self.target;
        let other = own.other();
        out[0] = 1.0;
        out[1] = f.closure(own);
        out[2] = f64::from(u8::from(f.edge(own)));
        if self.variant == ModelVariant::Full {
            out[3] = f.closure(other);
            out[4] = f64::from(u8::from(f.edge(other)));
            out[5] = f.t_multi;
            out[6] = f64::from(u8::from(f.e_any));
        }
    }
}

fn short(layer: Layer) -> &'static str {
    match layer {
        Layer::Financial => "fin",
        Layer::Social => "soc",
        Layer::Aggregated => "any",
    }
}

/// Which rows of a snapshot enter a training set or evaluation split,
/// judged by the target layer's edge at the source window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RowFilter {
    All,
    /// Pairs not connected at the source window.
    AbsentNow,
    /// Pairs connected at the source window.
    PresentNow,
}

impl RowFilter {
    pub fn admits(self, present_now: bool) -> bool {
        match self {
            RowFilter::All => true,
            RowFilter::AbsentNow => !present_now,
            RowFilter::PresentNow => present_now,
        }
    }
}

/// Identity of a training set, used to refuse comparing fits estimated on
/// different data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrainingId {
    pub fingerprint: u64,
    pub rows: usize,
    pub lag_h: usize,
    pub target: Layer,
    pub first_window: usize,
    pub last_window: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: Vec<PairFeatures>,
    pub labels: Vec<bool>,
    /// Window index of each row's features.
    pub row_windows: Vec<usize>,
    pub source_windows: Vec<usize>,
    pub lag_h: usize,
    pub target: Layer,
    id: TrainingId,
}

impl TrainingSet {
    pub fn from_rows(
        rows: Vec<(PairFeatures, bool)>,
        lag_h: usize,
        target: Layer,
    ) -> Self {
        let n = rows.len();
        let (features, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        Self::assemble(features, labels, vec![0; n], vec![0], lag_h, target)
    }

    fn assemble(
        features: Vec<PairFeatures>,
        labels: Vec<bool>,
        row_windows: Vec<usize>,
        source_windows: Vec<usize>,
        lag_h: usize,
        target: Layer,
    ) -> Self {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for (f, y) in features.iter().zip(&labels) {
            (f.u, f.v, f.e_fin, f.e_soc, f.e_any, *y).hash(&mut hasher);
            f.t_fin.to_bits().hash(&mut hasher);
            f.t_soc.to_bits().hash(&mut hasher);
            f.t_multi.to_bits().hash(&mut hasher);
        }
        row_windows.hash(&mut hasher);
        let id = TrainingId {
            fingerprint: hasher.finish(),
            rows: labels.len(),
            lag_h,
            target,
            first_window: source_windows.first().copied().unwrap_or(0),
            last_window: source_windows.last().copied().unwrap_or(0),
        };
        Self {
            features,
            labels,
            row_windows,
            source_windows,
            lag_h,
            target,
            id,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self) -> TrainingId {
        self.id
    }
}

/// Rows for every pair and every source window `t'` in `span`, labelled by
/// the target layer's edge at `t' + lag_h`.
///
/// `features[t]` must hold the pair features of window `t` in pair order.
pub fn build_training_set(
    features: &[Vec<PairFeatures>],
    target: Layer,
    lag_h: usize,
    span: std::ops::Range<usize>,
    filter: RowFilter,
) -> Result<TrainingSet> {
    if span.is_empty() {
        return Err(Error::InsufficientHistory("empty training span".into()));
    }
    if span.end - 1 + lag_h >= features.len() {
        return Err(Error::InsufficientHistory(format!(
            "source window {} needs a label at window {}, but only {} windows exist",
            span.end - 1,
            span.end - 1 + lag_h,
            features.len()
        )));
    }
    let mut rows_f = Vec::new();
    let mut labels = Vec::new();
    let mut row_windows = Vec::new();
    for t in span.clone() {
        let now = &features[t];
        let future = &features[t + lag_h];
        if now.len() != future.len() {
            return Err(Error::Shape(format!("windows {t} and {} differ in size", t + lag_h)));
        }
        for (f, g) in now.iter().zip(future) {
            if filter.admits(f.edge(target)) {
                rows_f.push(*f);
                labels.push(g.edge(target));
                row_windows.push(t);
            }
        }
    }
    Ok(TrainingSet::assemble(
        rows_f,
        labels,
        row_windows,
        span.collect(),
        lag_h,
        target,
    ))
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn logistic(eta: f64) -> f64 {
    let e = (-eta.abs()).exp();
    if eta >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// `(log(1 + e^eta), logistic(eta))` from a single exponential.
fn softplus_logistic(eta: f64) -> (f64, f64) {
    let e = (-eta.abs()).exp();
    let sp = eta.max(0.0) + e.ln_1p();
    let p = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (sp, p)
}

/// Neumaier compensated sum; plain summation of ~10^5 log-likelihood terms
/// is too noisy for the line search near the optimum.
#[derive(Default, Clone, Copy)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(self) -> f64 {
        self.total + self.carry
    }
}

fn check_coefficients(spec: &ModelSpec, coefficients: &[f64]) -> Result<()> {
    if coefficients.len() != spec.n_coefficients() {
        return Err(Error::Shape(format!(
            "{} coefficients for a {}-coefficient model",
            coefficients.len(),
            spec.n_coefficients()
        )));
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite coefficient".into()));
    }
    Ok(())
}

/// Dense row-major design matrix.
struct Design {
    k: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Design {
    fn new(spec: &ModelSpec, data: &TrainingSet) -> Self {
        let k = spec.n_coefficients();
        let mut x = vec![0.0; data.len() * k];
        for (row, f) in x.chunks_exact_mut(k).zip(&data.features) {
            spec.design(f, row);
        }
        let y = data.labels.iter().map(|&l| f64::from(u8::from(l))).collect();
        Self { k, x, y }
    }

    fn rows(&self) -> usize {
        self.y.len()
    }

    fn loglik(&self, beta: &[f64]) -> f64 {
        let mut ll = Sum::default();
        for (row, &y) in self.x.chunks_exact(self.k).zip(&self.y) {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            ll.add(y * eta - softplus(eta));
        }
        ll.value()
    }

    /// Summed log-likelihood, gradient and negative Hessian.
    fn derivatives(&self, beta: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let k = self.k;
        let mut ll = Sum::default();
        let mut grad = [0.0; MAX_COEFFICIENTS];
        let mut info = [[0.0; MAX_COEFFICIENTS]; MAX_COEFFICIENTS];
        for (row, &y) in self.x.chunks_exact(k).zip(&self.y) {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let (sp, p) = softplus_logistic(eta);
            ll.add(y * eta - sp);
            let resid = y - p;
            let w = p * (1.0 - p);
            for a in 0..k {
                grad[a] += row[a] * resid;
                let wa = w * row[a];
                for b in a..k {
                    info[a][b] += wa * row[b];
                }
            }
        }
        let hess = DMatrix::from_fn(k, k, |a, b| if a <= b { info[a][b] } else { info[b][a] });
        (ll.value(), grad[..k].to_vec(), hess)
    }
}

/// Bernoulli log-likelihood `sum y*eta - log(1 + e^eta)`.
pub fn loglik(spec: &ModelSpec, coefficients: &[f64], data: &TrainingSet) -> Result<f64> {
    check_coefficients(spec, coefficients)?;
    Ok(Design::new(spec, data).loglik(coefficients))
}

/// Analytic gradient of [`loglik`].
pub fn loglik_gradient(spec: &ModelSpec, coefficients: &[f64], data: &TrainingSet) -> Result<Vec<f64>> {
    check_coefficients(spec, coefficients)?;
    Ok(Design::new(spec, data).derivatives(coefficients).1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Max-norm tolerance on the gradient of the mean log-likelihood.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Coefficient magnitude that triggers the ridge refit.
    pub separation_bound: f64,
    /// L2 penalty on the mean log-likelihood used after separation.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            separation_bound: 30.0,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub coefficients: Vec<f64>,
    /// Maximized (unpenalized) log-likelihood.
    pub loglik: f64,
    pub iterations: usize,
    /// Max-norm of the mean-scale gradient at the solution.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Set when separation forced the ridge refit.
    pub ridge_fallback: bool,
    pub training: TrainingId,
}

impl FitResult {
    pub fn linear_predictor(&self, features: &PairFeatures) -> f64 {
        let mut row = [0.0; MAX_COEFFICIENTS];
        self.spec.design(features, &mut row);
        row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    /// Link probability in (0, 1).
    pub fn predict(&self, features: &PairFeatures) -> f64 {
        logistic(self.linear_predictor(features))
    }
}

/// Solve `h * x = g` through the eigen-decomposition of the symmetric `h`,
/// ignoring directions whose eigenvalue is negligible (collinear columns).
fn pseudo_solve(h: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let eig = h.symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = largest * 1e-12;
    let g = DVector::from_column_slice(g);
    let mut step = DVector::zeros(k);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(i);
            step += v * (v.dot(&g) / lambda);
        }
    }
    step.iter().copied().collect()
}

fn pseudo_inverse(h: DMatrix<f64>) -> DMatrix<f64> {
    let k = h.nrows();
    let eig = h.symmetric_eigen();
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = largest * 1e-12;
    let mut out = DMatrix::zeros(k, k);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(i);
            out += v * v.transpose() / lambda;
        }
    }
    out
}

struct Newton<'a> {
    design: &'a Design,
    ridge: f64,
}

struct Point {
    beta: Vec<f64>,
    objective: f64,
    loglik: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

impl Newton<'_> {
    fn evaluate(&self, beta: Vec<f64>) -> Point {
        let m = self.design.rows() as f64;
        let (ll, grad, info) = self.design.derivatives(&beta);
        let norm2: f64 = beta.iter().map(|b| b * b).sum();
        let objective = ll / m - 0.5 * self.ridge * norm2;
        let grad = grad
            .iter()
            .zip(&beta)
            .map(|(g, b)| g / m - self.ridge * b)
            .collect();
        let k = beta.len();
        let hess = info / m + DMatrix::identity(k, k) * self.ridge;
        Point {
            beta,
            objective,
            loglik: ll,
            grad,
            hess,
        }
    }
}

enum Outcome {
    Done { point: Point, iterations: usize, converged: bool },
    Separated,
}

fn newton(design: &Design, start: Vec<f64>, ridge: f64, opts: &FitOptions) -> Outcome {
    let solver = Newton { design, ridge };
    let mut point = solver.evaluate(start);
    let max_abs = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for iteration in 0..opts.max_iterations {
        if max_abs(&point.grad) <= opts.tolerance {
            return Outcome::Done {
                point,
                iterations: iteration,
                converged: true,
            };
        }
        let step = pseudo_solve(point.hess.clone(), &point.grad);
        let slack = 4.0 * f64::EPSILON * point.objective.abs();
        // predicted gain below rounding noise: judge the step by the gradient
        let gain: f64 = step.iter().zip(&point.grad).map(|(s, g)| s * g).sum();
        let flat = gain <= 1e-12 * (1.0 + point.objective.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let beta: Vec<f64> = point.beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let trial = solver.evaluate(beta);
            let uphill = trial.objective >= point.objective - slack;
            let smaller_gradient = max_abs(&trial.grad) < max_abs(&point.grad);
            if trial.objective.is_finite() && (uphill || (flat && smaller_gradient)) {
                accepted = Some(trial);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            return Outcome::Done {
                point,
                iterations: iteration,
                converged: false,
            };
        };
        point = next;
        if ridge == 0.0 && point.beta.iter().any(|b| b.abs() > opts.separation_bound) {
            return Outcome::Separated;
        }
    }
    let converged = max_abs(&point.grad) <= opts.tolerance;
    Outcome::Done {
        point,
        iterations: opts.max_iterations,
        converged,
    }
}

/// Maximum-likelihood fit from the default start (intercept at the label
/// log-odds, other coefficients zero).
pub fn fit(spec: &ModelSpec, data: &TrainingSet) -> Result<FitResult> {
    fit_with(spec, data, None, &FitOptions::default())
}

/// Maximum-likelihood fit with an optional warm start.
pub fn fit_with(
    spec: &ModelSpec,
    data: &TrainingSet,
    start: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::InsufficientHistory("empty training set".into()));
    }
    let positives = data.labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::DegenerateLabels);
    }
    let k = spec.n_coefficients();
    let default_start = || {
        let rate = positives as f64 / data.len() as f64;
        let mut b = vec![0.0; k];
        b[0] = (rate / (1.0 - rate)).ln();
        b
    };
    let start = match start {
        Some(s) => {
            check_coefficients(spec, s)?;
            s.to_vec()
        }
        None => default_start(),
    };
    let design = Design::new(spec, data);

    let (outcome, ridge_fallback) = match newton(&design, start, 0.0, opts) {
        Outcome::Separated => (newton(&design, default_start(), opts.ridge, opts), true),
        done => (done, false),
    };
    let Outcome::Done {
        point,
        iterations,
        converged,
    } = outcome
    else {
        unreachable!("ridge-penalized fits never report separation");
    };
    if point.beta.iter().any(|b| !b.is_finite()) || !point.loglik.is_finite() {
        return Err(Error::Numeric(format!("{} fit diverged", spec.variant.name())));
    }
    let gradient_norm = point.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(FitResult {
        spec: *spec,
        coefficients: point.beta,
        loglik: point.loglik,
        iterations,
        gradient_norm,
        converged,
        ridge_fallback,
        training: data.id(),
    })
}

/// Asymptotic standard errors from the inverse observed information.
pub fn standard_errors(fit: &FitResult, data: &TrainingSet) -> Result<Vec<f64>> {
    if fit.training != data.id() {
        return Err(Error::IncomparableFits);
    }
    let design = Design::new(&fit.spec, data);
    let (_, _, info) = design.derivatives(&fit.coefficients);
    let cov = pseudo_inverse(info);
    Ok((0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodRatio {
    pub lambda: f64,
    pub significant: bool,
}

/// Wilks statistic `2 (L_full - L_restricted)`; significant when it exceeds
/// [`LAMBDA_THRESHOLD`].
pub fn likelihood_ratio(full: &FitResult, restricted: &FitResult) -> Result<LikelihoodRatio> {
    if full.training != restricted.training
        || full.spec.variant != ModelVariant::Full
        || restricted.spec.variant != ModelVariant::Restricted
        || full.spec.target != restricted.spec.target
        || full.spec.lag_h != restricted.spec.lag_h
    {
        return Err(Error::IncomparableFits);
    }
    // nested maximization makes the gap non-negative up to rounding
    let lambda = (2.0 * (full.loglik - restricted.loglik)).max(0.0);
    Ok(LikelihoodRatio {
        lambda,
        significant: is_significant(lambda),
    })
}

/// Strict comparison against [`LAMBDA_THRESHOLD`].
pub fn is_significant(lambda: f64) -> bool {
    lambda > LAMBDA_THRESHOLD
}
