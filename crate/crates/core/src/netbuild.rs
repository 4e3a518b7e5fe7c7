//! Asset graphs: keep the `K` shortest distances of a window as edges, plus
//! the edge-turnover diagnostics used to describe how fast structure changes.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlate::{MatrixKind, WindowedMatrix};
use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::panel::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Financial,
    Social,
    /// OR-union of the financial and social layers.
    Aggregated,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Layer::Financial => "financial",
            Layer::Social => "social",
            Layer::Aggregated => "aggregated",
        }
    }

    /// The other layer of the duplex.
    pub fn other(self) -> Layer {
        match self {
            Layer::Financial => Layer::Social,
            Layer::Social => Layer::Financial,
            Layer::Aggregated => Layer::Aggregated,
        }
    }
}

impl std::str::FromStr for Layer {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "financial" => Ok(Layer::Financial),
            "social" => Ok(Layer::Social),
            other => Err(format!("unknown layer {other:?} (financial|social)")),
        }
    }
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How many of the `n(n-1)/2` candidate edges a filtered graph keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EdgeBudget {
    /// Bottom quartile of all pairs: `floor(n(n-1)/8)`.
    #[default]
    Quartile,
    /// Fixed number of edges.
    Count(usize),
}

impl EdgeBudget {
    pub fn edges_for(self, n: usize) -> Result<usize> {
        let pairs = pair_count(n);
        let k = match self {
            EdgeBudget::Quartile => pairs / 4,
            EdgeBudget::Count(k) => k,
        };
        if k > pairs {
            return Err(Error::BudgetTooLarge { budget: k, pairs });
        }
        Ok(k)
    }
}

impl std::str::FromStr for EdgeBudget {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "quartile" {
            return Ok(EdgeBudget::Quartile);
        }
        match s.strip_prefix("count:").map(str::parse) {
            Some(Ok(k)) => Ok(EdgeBudget::Count(k)),
            _ => Err(format!("bad edge budget {s:?} (quartile|count:K)")),
        }
    }
}

impl std::fmt::Display for EdgeBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeBudget::Quartile => f.write_str("quartile"),
            EdgeBudget::Count(k) => write!(f, "count:{k}"),
        }
    }
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the unordered pair `(i, j)`, `i < j`, in lexicographic order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// All unordered pairs in lexicographic order.
pub fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Undirected simple graph on `n` vertices for one layer and window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGraph {
    pub layer: Layer,
    pub window: Window,
    n: usize,
    // sorted, unique, each (u, v) with u < v
    edges: Vec<(usize, usize)>,
}

impl LayerGraph {
    /// Normalizes edge orientation and order; rejects self-loops and
    /// out-of-range vertices. Duplicates are merged.
    pub fn new(
        layer: Layer,
        window: Window,
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Shape(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Shape(format!("edge ({a}, {b}) outside {n} vertices")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self {
            layer,
            window,
            n,
            edges: list,
        })
    }

    pub fn empty(layer: Layer, window: Window, n: usize) -> Self {
        Self {
            layer,
            window,
            n,
            edges: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Presence indicator per pair, in [`all_pairs`] order.
    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; pair_count(self.n)];
        for &(u, v) in &self.edges {
            out[pair_index(self.n, u, v)] = true;
        }
        out
    }

    pub fn union(&self, other: &LayerGraph, layer: Layer) -> Result<LayerGraph> {
        if self.n != other.n {
            return Err(Error::Shape(format!("vertex counts {} and {}", self.n, other.n)));
        }
        LayerGraph::new(
            layer,
            self.window,
            self.n,
            self.edges.iter().chain(&other.edges).copied(),
        )
    }

    fn shared_edges(&self, other: &LayerGraph) -> usize {
        let (mut a, mut b, mut shared) = (0, 0, 0);
        while a < self.edges.len() && b < other.edges.len() {
            match self.edges[a].cmp(&other.edges[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        shared
    }

    /// `ticker_a ticker_b` per line, sorted by vertex index.
    pub fn write_edgelist(&self, path: &Path, tickers: &[String]) -> Result<()> {
        if tickers.len() != self.n {
            return Err(Error::Shape(format!("{} tickers for {} vertices", tickers.len(), self.n)));
        }
        write_atomic(path, |w| {
            for &(u, v) in &self.edges {
                writeln!(w, "{} {}", tickers[u], tickers[v])?;
            }
            Ok(())
        })
    }

    pub fn read_edgelist(path: &Path, layer: Layer, window: Window, tickers: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> =
            tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut edges = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.into(),
                line: k as u64 + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!("expected two tickers, got {line:?}")));
            };
            let lookup = |t: &str| {
                index
                    .get(t)
                    .copied()
                    .ok_or_else(|| parse_err(format!("unknown ticker {t}")))
            };
            edges.push((lookup(a)?, lookup(b)?));
        }
        Self::new(layer, window, tickers.len(), edges)
    }
}

/// Keep the `K` shortest upper-triangular distances as edges. Equal
/// distances at the cutoff are resolved in lexicographic `(i, j)` order.
pub fn filter_graph(d: &WindowedMatrix, budget: EdgeBudget, layer: Layer) -> Result<LayerGraph> {
    if d.kind != MatrixKind::Distance {
        return Err(Error::Shape("expected a distance matrix".into()));
    }
    let n = d.n();
    let k = budget.edges_for(n)?;
    let mut candidates: Vec<(f64, usize, usize)> =
        all_pairs(n).map(|(i, j)| (d.get(i, j), i, j)).collect();
    // total order on (distance, i, j)
    let key = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    if k < candidates.len() && k > 0 {
        candidates.select_nth_unstable_by(k - 1, key);
    }
    candidates.truncate(k);
    LayerGraph::new(layer, d.window, n, candidates.into_iter().map(|(_, i, j)| (i, j)))
}

/// Share of `g_future`'s edges that are absent from `g_now`.
pub fn new_edge_fraction(g_now: &LayerGraph, g_future: &LayerGraph) -> Result<f64> {
    if g_now.n != g_future.n {
        return Err(Error::Shape(format!("vertex counts {} and {}", g_now.n, g_future.n)));
    }
    if g_future.edges.is_empty() {
        return Err(Error::DegenerateGraph);
    }
    let fresh = g_future.edges.len() - g_future.shared_edges(g_now);
    Ok(fresh as f64 / g_future.edges.len() as f64)
}

/// Jaccard similarity of two edge sets; 1 when both are empty.
pub fn jaccard(g1: &LayerGraph, g2: &LayerGraph) -> Result<f64> {
    if g1.n != g2.n {
        return Err(Error::Shape(format!("vertex counts {} and {}", g1.n, g2.n)));
    }
    let inter = g1.shared_edges(g2);
    let union = g1.edges.len() + g2.edges.len() - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
