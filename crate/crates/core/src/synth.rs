//! Synthetic duplex data with known ground truth.
//!
//! Two generators:
//!
//! * [`generate_graph_dynamics`] runs a Markov edge process directly on the
//!   financial layer. Each step, current edges survive with probability
//!   `persistence`; the budget is then refilled from the remaining pairs by
//!   weighted sampling without replacement, with weights
//!   `logistic(base_logit + closure_strength * T_uv)` so pairs with high
//!   triadic closure are favoured. The social layer is either the financial
//!   layer `social_lead` steps ahead with a share `social_noise` of its edges
//!   rewired at random, or an independent uniform random graph per window.
//! * [`generate_timeseries`] draws block-factor returns whose block
//!   memberships drift over time, and bullish-message counts driven by the
//!   factor structure `social_lead` window steps ahead.
//!
//! Every window draws from its own ChaCha stream, so outputs depend on the
//! seed alone.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplex::{ClosureProfile, DuplexSnapshot};
use crate::netbuild::{all_pairs, pair_count, EdgeBudget, Layer, LayerGraph};
use crate::output::write_atomic;
use crate::panel::{PanelKind, PanelSeries, Window, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    GraphDynamics,
    TimeSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SocialMode {
    /// Social layer previews the financial layer `social_lead` steps ahead.
    Lead,
    /// Social layer is an independent uniform random graph every window.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub n_windows: usize,
    pub edge_budget: EdgeBudget,
    pub persistence: f64,
    pub closure_strength: f64,
    pub base_logit: f64,
    /// Lead of the social layer over the financial layer, in window steps.
    pub social_lead: usize,
    /// Share of social edges rewired at random.
    pub social_noise: f64,
    pub social_mode: SocialMode,
    pub seed: u64,
    pub mode: SynthMode,
    /// Steps discarded before the first emitted window.
    pub burn_in: usize,
    pub window: WindowSpec,
    pub n_blocks: usize,
    /// Probability that an asset changes block at each window step.
    pub switch_prob: f64,
    /// Idiosyncratic return noise relative to the block factor.
    pub return_noise: f64,
    /// Idiosyncratic opinion noise relative to the block factor.
    pub opinion_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 100,
            n_windows: 250,
            edge_budget: EdgeBudget::Quartile,
            persistence: 0.9,
            closure_strength: 4.0,
            base_logit: -2.0,
            social_lead: 0,
            social_noise: 0.3,
            social_mode: SocialMode::Lead,
            seed: 1,
            mode: SynthMode::GraphDynamics,
            burn_in: 50,
            window: WindowSpec::default(),
            n_blocks: 5,
            switch_prob: 0.05,
            return_noise: 1.0,
            opinion_noise: 1.0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Config(format!("need at least 4 assets, got {}", self.n)));
        }
        for (name, p) in [
            ("persistence", self.persistence),
            ("social_noise", self.social_noise),
            ("switch_prob", self.switch_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.n_windows == 0 {
            return Err(Error::Config("need at least one window".into()));
        }
        Ok(())
    }

    fn window_at(&self, t: usize) -> Window {
        let start = t * self.window.step;
        Window {
            start,
            end: start + self.window.width,
        }
    }
}

// stream families; the low 32 bits carry the step index
const FINANCIAL_STREAM: u64 = 0;
const SOCIAL_NOISE_STREAM: u64 = 1 << 32;
const SOCIAL_INDEPENDENT_STREAM: u64 = 2 << 32;
const SERIES_STREAM: u64 = 3 << 32;

fn stream(seed: u64, family: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(family | index as u64);
    rng
}

/// Uniformly random `k` pairs out of `pool` (partial Fisher-Yates).
fn sample_uniform(pool: &mut [(usize, usize)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool[..k].to_vec()
}

fn random_graph(n: usize, k: usize, layer: Layer, window: Window, rng: &mut ChaCha8Rng) -> Result<LayerGraph> {
    let mut pool: Vec<(usize, usize)> = all_pairs(n).collect();
    LayerGraph::new(layer, window, n, sample_uniform(&mut pool, k, rng))
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One step of the financial edge process.
fn evolve(g: &LayerGraph, spec: &SynthSpec, k: usize, rng: &mut ChaCha8Rng) -> Result<LayerGraph> {
    let survivors: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|_| rng.random_bool(spec.persistence))
        .collect();
    let need = k - survivors.len();
    let closure = ClosureProfile::new(g);
    let kept = LayerGraph::new(g.layer, g.window, g.n(), survivors.iter().copied())?;
    // Efraimidis-Spirakis: the largest ln(u)/w keys form a weighted sample
    // without replacement
    let mut keyed: Vec<(f64, usize, usize)> = all_pairs(g.n())
        .filter(|&(u, v)| !kept.has_edge(u, v))
        .map(|(u, v)| {
            let w = logistic(spec.base_logit + spec.closure_strength * closure.triadic_closure(u, v));
            let draw: f64 = rng.random();
            (draw.max(f64::MIN_POSITIVE).ln() / w, u, v)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    LayerGraph::new(
        g.layer,
        g.window,
        g.n(),
        survivors
            .into_iter()
            .chain(keyed.into_iter().take(need).map(|(_, u, v)| (u, v))),
    )
}

/// Keep each edge with probability `1 - noise`, then top the graph up to
/// `k` edges with uniformly random pairs.
fn rewire(g: &LayerGraph, noise: f64, k: usize, layer: Layer, window: Window, rng: &mut ChaCha8Rng) -> Result<LayerGraph> {
    let kept: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|_| !rng.random_bool(noise))
        .collect();
    let base = LayerGraph::new(layer, window, g.n(), kept.iter().copied())?;
    let mut pool: Vec<(usize, usize)> = all_pairs(g.n()).filter(|&(u, v)| !base.has_edge(u, v)).collect();
    let fill = sample_uniform(&mut pool, k - kept.len(), rng);
    LayerGraph::new(layer, window, g.n(), kept.into_iter().chain(fill))
}

/// Time-indexed duplex snapshots from the Markov edge process.
pub fn generate_graph_dynamics(spec: &SynthSpec) -> Result<Vec<DuplexSnapshot>> {
    spec.validate()?;
    let k = spec.edge_budget.edges_for(spec.n)?;
    let lead = match spec.social_mode {
        SocialMode::Lead => spec.social_lead,
        SocialMode::Independent => 0,
    };
    let total = spec.burn_in + spec.n_windows + lead;

    let mut rng = stream(spec.seed, FINANCIAL_STREAM, 0);
    let origin = spec.window_at(0);
    let mut current = random_graph(spec.n, k, Layer::Financial, origin, &mut rng)?;
    let mut financial = Vec::with_capacity(spec.n_windows + lead);
    for step in 1..=total {
        let mut rng = stream(spec.seed, FINANCIAL_STREAM, step);
        current = evolve(&current, spec, k, &mut rng)?;
        if step > spec.burn_in {
            let mut g = current.clone();
            g.window = spec.window_at(step - spec.burn_in - 1);
            financial.push(g);
        }
    }

    (0..spec.n_windows)
        .map(|t| {
            let window = spec.window_at(t);
            let social = match spec.social_mode {
                SocialMode::Lead => {
                    let mut rng = stream(spec.seed, SOCIAL_NOISE_STREAM, t);
                    rewire(&financial[t + lead], spec.social_noise, k, Layer::Social, window, &mut rng)?
                }
                SocialMode::Independent => {
                    let mut rng = stream(spec.seed, SOCIAL_INDEPENDENT_STREAM, t);
                    random_graph(spec.n, k, Layer::Social, window, &mut rng)?
                }
            };
            DuplexSnapshot::new(financial[t].clone(), social)
        })
        .collect()
}

/// Raw synthetic market data: adjusted closes and bullish-message counts on
/// a weekday calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSeries {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `closes[i]` has one more entry than the return panel (`dates.len()`).
    pub closes: Vec<Vec<f64>>,
    /// Counts aligned with `dates[1..]`.
    pub counts: Vec<Vec<u64>>,
}

pub fn synthetic_tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:03}")).collect()
}

fn weekdays(from: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = from;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("calendar overflow");
    }
    out
}

pub fn generate_timeseries_raw(spec: &SynthSpec) -> Result<SynthSeries> {
    spec.validate()?;
    if spec.n_blocks == 0 {
        return Err(Error::Config("need at least one block".into()));
    }
    let n = spec.n;
    let step = spec.window.step;
    let days = spec.window.width + step * (spec.n_windows - 1);
    let lead_days = spec.social_lead * step;
    let horizon = days + lead_days;

    // block membership, redrawn at window-step boundaries
    let mut membership = Vec::with_capacity(horizon);
    let mut blocks: Vec<usize> = (0..n).map(|i| i % spec.n_blocks).collect();
    for day in 0..horizon {
        if day > 0 && day % step == 0 {
            let mut rng = stream(spec.seed, SERIES_STREAM, 2 * day);
            for b in blocks.iter_mut() {
                if rng.random_bool(spec.switch_prob) {
                    *b = rng.random_range(0..spec.n_blocks);
                }
            }
        }
        membership.push(blocks.clone());
    }
    let factors: Vec<Vec<f64>> = (0..horizon)
        .map(|day| {
            let mut rng = stream(spec.seed, SERIES_STREAM, 2 * day + 1);
            (0..spec.n_blocks).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect();

    let mut closes = vec![vec![100.0]; n];
    let mut counts = vec![Vec::with_capacity(days); n];
    let mut rng = stream(spec.seed, SERIES_STREAM | (1 << 31), 0);
    for day in 0..days {
        let ahead = day + lead_days;
        for i in 0..n {
            let eps: f64 = rng.sample(StandardNormal);
            let ret = 0.01 * (factors[day][membership[day][i]] + spec.return_noise * eps);
            let last = *closes[i].last().unwrap();
            closes[i].push(last * ret.exp());

            let eta: f64 = rng.sample(StandardNormal);
            let latent = factors[ahead][membership[ahead][i]] + spec.opinion_noise * eta;
            let rate = (1.5 + 0.6 * latent).exp();
            let draw: f64 = Poisson::new(rate)
                .map_err(|e| Error::Numeric(format!("poisson rate {rate}: {e}")))?
                .sample(&mut rng);
            counts[i].push(draw as u64);
        }
    }
    let start = NaiveDate::from_ymd_opt(2012, 1, 2).expect("valid date");
    Ok(SynthSeries {
        dates: weekdays(start, days + 1),
        tickers: synthetic_tickers(n),
        closes,
        counts,
    })
}

impl SynthSeries {
    /// Log-return and opinion panels, identical to loading the files
    /// written by [`SynthSeries::write`].
    pub fn to_panels(&self) -> Result<(PanelSeries, PanelSeries)> {
        let returns = self
            .closes
            .iter()
            .map(|c| c.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
            .collect();
        let opinion = self
            .counts
            .iter()
            .map(|c| c.iter().map(|&v| v as f64).collect())
            .collect();
        let dates = self.dates[1..].to_vec();
        Ok((
            PanelSeries::new(dates.clone(), self.tickers.clone(), returns, PanelKind::Returns)?,
            PanelSeries::new(dates, self.tickers.clone(), opinion, PanelKind::Opinion)?,
        ))
    }

    /// Writes `prices.csv`, `opinions.csv` and `tickers.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("prices.csv"), |w| {
            writeln!(w, "date,ticker,close")?;
            for (k, date) in self.dates.iter().enumerate() {
                for (i, t) in self.tickers.iter().enumerate() {
                    writeln!(w, "{date},{t},{}", self.closes[i][k])?;
                }
            }
            Ok(())
        })?;
        write_atomic(&dir.join("opinions.csv"), |w| {
            writeln!(w, "date,ticker,bullish_count")?;
            for (k, date) in self.dates[1..].iter().enumerate() {
                for (i, t) in self.tickers.iter().enumerate() {
                    if self.counts[i][k] > 0 {
                        writeln!(w, "{date},{t},{}", self.counts[i][k])?;
                    }
                }
            }
            Ok(())
        })?;
        write_tickers(&dir.join("tickers.txt"), &self.tickers)
    }
}

pub fn write_tickers(path: &Path, tickers: &[String]) -> Result<()> {
    write_atomic(path, |w| {
        for t in tickers {
            writeln!(w, "{t}")?;
        }
        Ok(())
    })
}

/// Block-factor return and opinion panels.
pub fn generate_timeseries(spec: &SynthSpec) -> Result<(PanelSeries, PanelSeries)> {
    if spec.mode != SynthMode::TimeSeries {
        return Err(Error::Config("generate_timeseries needs mode = timeseries".into()));
    }
    generate_timeseries_raw(spec)?.to_panels()
}

/// Expected new-edge fraction between two independent uniform budget-`k`
/// graphs on `n` vertices.
pub fn iid_churn_expectation(n: usize, k: usize) -> f64 {
    1.0 - k as f64 / pair_count(n) as f64
}
