//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use duplexnet::netbuild::{Layer, LayerGraph};
use duplexnet::panel::Window;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const W0: Window = Window { start: 0, end: 1 };

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Kendall tau by comparing every pair; `None` when a denominator is zero.
pub fn kendall_brute(x: &[f64], y: &[f64], tau_b: bool) -> Option<f64> {
    let n = x.len();
    let (mut s, mut tx, mut ty) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = sign(x[i] - x[j]);
            let b = sign(y[i] - y[j]);
            s += a * b;
            tx += i64::from(a == 0);
            ty += i64::from(b == 0);
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if tx == n0 || ty == n0 {
        return None;
    }
    Some(if tau_b {
        s as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
    } else {
        s as f64 / n0 as f64
    })
}

/// AUC as the share of positive/negative pairs ranked correctly, ties half.
pub fn auc_brute(rows: &[(f64, bool)]) -> Option<f64> {
    let pos: Vec<f64> = rows.iter().filter(|r| r.1).map(|r| r.0).collect();
    let neg: Vec<f64> = rows.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut credit = 0.0;
    for p in &pos {
        for q in &neg {
            credit += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(credit / (pos.len() * neg.len()) as f64)
}

pub fn neighbours(g: &LayerGraph, i: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..g.n()).filter(|&j| j != i && g.has_edge(i, j)).collect();
    out.sort_unstable();
    out
}

/// Clustering coefficient by enumerating neighbour pairs.
pub fn clustering_brute(g: &LayerGraph, i: usize) -> f64 {
    let nb = neighbours(g, i);
    let k = nb.len();
    if k < 2 {
        return 0.0;
    }
    let mut triangles = 0usize;
    for a in 0..k {
        for b in a + 1..k {
            if g.has_edge(nb[a], nb[b]) {
                triangles += 1;
            }
        }
    }
    triangles as f64 / (k * (k - 1) / 2) as f64
}

/// Mean clustering coefficient of the common neighbours, ascending order.
pub fn triadic_brute(g: &LayerGraph, u: usize, v: usize) -> f64 {
    let common: Vec<usize> = (0..g.n())
        .filter(|&w| w != u && w != v && g.has_edge(u, w) && g.has_edge(v, w))
        .collect();
    if common.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &w in &common {
        sum += clustering_brute(g, w);
    }
    sum / common.len() as f64
}

/// Union graph built edge by edge.
pub fn union_brute(a: &LayerGraph, b: &LayerGraph) -> LayerGraph {
    let mut edges = Vec::new();
    for u in 0..a.n() {
        for v in u + 1..a.n() {
            if a.has_edge(u, v) || b.has_edge(u, v) {
                edges.push((u, v));
            }
        }
    }
    LayerGraph::new(Layer::Aggregated, a.window, a.n(), edges).unwrap()
}

/// Erdos-Renyi graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, layer: Layer, rng: &mut ChaCha8Rng) -> LayerGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    LayerGraph::new(layer, W0, n, edges).unwrap()
}

/// Random series of length `len`; with `ties`, values come from a small
/// alphabet.
pub fn random_series(len: usize, ties: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len)
        .map(|_| {
            if ties {
                f64::from(rng.random_range(0..5u8))
            } else {
                rng.random::<f64>()
            }
        })
        .collect()
}
