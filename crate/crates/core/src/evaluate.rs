//! Out-of-sample discrimination: tie-aware AUC, the relative improvement
//! AUC* over the time-invariance benchmark, and the new-edge / deletion
//! evaluation splits.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netbuild::{all_pairs, LayerGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Every pair; positive class is presence at `t + h`.
    FullGraph,
    /// Pairs absent at `t`; positive class is an inserted edge.
    NewEdges,
    /// Pairs present at `t`; positive class is a deleted edge.
    Deletions,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::FullGraph, Split::NewEdges, Split::Deletions];

    pub fn name(self) -> &'static str {
        match self {
            Split::FullGraph => "full_graph",
            Split::NewEdges => "new_edges",
            Split::Deletions => "deletions",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredPair {
    pub u: usize,
    pub v: usize,
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPairs {
    pub split: Split,
    pub rows: Vec<ScoredPair>,
}

impl ScoredPairs {
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.rows.iter().filter(|r| r.label).count();
        (pos, self.rows.len() - pos)
    }
}

/// Mann-Whitney AUC from the rank sum of the positives, with tied scores
/// given their average rank (half credit per tied positive-negative pair).
pub fn auc(s: &ScoredPairs) -> Result<f64> {
    auc_of(s.rows.iter().map(|r| (r.score, r.label)))
}

pub(crate) fn auc_of(rows: impl Iterator<Item = (f64, bool)>) -> Result<f64> {
    let mut rows: Vec<(f64, bool)> = rows.collect();
    if rows.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }
    let positives = rows.iter().filter(|r| r.1).count();
    let negatives = rows.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc {
            positives,
            negatives,
        });
    }
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < rows.len() {
        let mut end = k + 1;
        while end < rows.len() && rows[end].0 == rows[k].0 {
            end += 1;
        }
        // ranks k+1 ..= end share their mean
        let mean_rank = (k + 1 + end) as f64 / 2.0;
        let tied_pos = rows[k..end].iter().filter(|r| r.1).count();
        rank_sum += mean_rank * tied_pos as f64;
        k = end;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// `(AUC - 0.5) / (AUC_benchmark - 0.5) - 1`.
pub fn auc_star(auc_model: f64, auc_benchmark: f64) -> Result<f64> {
    if !(auc_benchmark > 0.5) {
        return Err(Error::BenchmarkDegenerate(auc_benchmark));
    }
    Ok((auc_model - 0.5) / (auc_benchmark - 0.5) - 1.0)
}

/// Time-invariance benchmark: score 1 for current edges, 0 otherwise, in
/// pair order.
pub fn benchmark_scores(g_now: &LayerGraph) -> Vec<f64> {
    g_now
        .indicator()
        .into_iter()
        .map(|e| if e { 1.0 } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitViews {
    pub full_graph: ScoredPairs,
    pub new_edges: ScoredPairs,
    pub deletions: ScoredPairs,
}

impl SplitViews {
    pub fn get(&self, split: Split) -> &ScoredPairs {
        match split {
            Split::FullGraph => &self.full_graph,
            Split::NewEdges => &self.new_edges,
            Split::Deletions => &self.deletions,
        }
    }
}

/// Partition pair-ordered presence scores against the graph at `t`.
///
/// `scores[k]` is the predicted probability that pair `k` is an edge at
/// `t + h` and `future[k]` whether it is. In the deletion view the positive
/// class is "edge removed" and the score is `1 - p`.
pub fn split(scores: &[f64], future: &[bool], g_now: &LayerGraph) -> Result<SplitViews> {
    let now = g_now.indicator();
    if scores.len() != now.len() || future.len() != now.len() {
        return Err(Error::Shape(format!(
            "{} scores and {} labels for {} pairs",
            scores.len(),
            future.len(),
            now.len()
        )));
    }
    let mut full = Vec::with_capacity(now.len());
    let mut new_edges = Vec::new();
    let mut deletions = Vec::new();
    for (k, (u, v)) in all_pairs(g_now.n()).enumerate() {
        let row = ScoredPair {
            u,
            v,
            score: scores[k],
            label: future[k],
        };
        full.push(row);
        if now[k] {
            deletions.push(ScoredPair {
                score: 1.0 - scores[k],
                label: !future[k],
                ..row
            });
        } else {
            new_edges.push(row);
        }
    }
    Ok(SplitViews {
        full_graph: ScoredPairs {
            split: Split::FullGraph,
            rows: full,
        },
        new_edges: ScoredPairs {
            split: Split::NewEdges,
            rows: new_edges,
        },
        deletions: ScoredPairs {
            split: Split::Deletions,
            rows: deletions,
        },
    })
}

/// Mean with sample standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    /// `None` for an empty sample; `sd` and `se` are 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            n: values.len(),
            mean,
            sd,
            se: sd / n.sqrt(),
        })
    }
}
