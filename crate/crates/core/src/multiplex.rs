//! Duplex snapshots and the per-pair predictors: edge persistence and
//! triadic closure within each layer and across layers.
//!
//! Cross-layer closure is evaluated on the OR-aggregated graph, so a
//! triangle may use edges from either layer. Conventions for empty
//! denominators: a vertex of degree < 2 has clustering 0, and a pair with no
//! common neighbour has closure 0.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netbuild::{all_pairs, Layer, LayerGraph};
use crate::output::write_atomic;
use crate::panel::Window;

/// Bitset adjacency rows.
#[derive(Debug, Clone)]
pub struct Adjacency {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Adjacency {
    pub fn new(g: &LayerGraph) -> Self {
        let n = g.n();
        let words = n.div_ceil(64).max(1);
        let mut bits = vec![0u64; n * words];
        for &(u, v) in g.edges() {
            bits[u * words + v / 64] |= 1 << (v % 64);
            bits[v * words + u / 64] |= 1 << (u % 64);
        }
        Self { n, words, bits }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    fn overlap(&self, a: usize, b: usize) -> usize {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(x, y)| (x & y).count_ones() as usize)
            .sum()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        ones(self.row(i).iter().copied())
    }

    /// Common neighbours of `u` and `v`, ascending.
    pub fn common(&self, u: usize, v: usize) -> impl Iterator<Item = usize> + '_ {
        ones(self.row(u).iter().zip(self.row(v)).map(|(a, b)| a & b))
    }

    pub fn clustering(&self, i: usize) -> f64 {
        let k = self.degree(i);
        if k < 2 {
            return 0.0;
        }
        // each closed neighbour pair (j, l) is seen from both j and l
        let closed_twice: usize = self.neighbours(i).map(|j| self.overlap(i, j)).sum();
        closed_twice as f64 / (k * (k - 1)) as f64
    }
}

fn ones(words: impl Iterator<Item = u64>) -> impl Iterator<Item = usize> {
    words.enumerate().flat_map(|(w, mut word)| {
        std::iter::from_fn(move || {
            if word == 0 {
                return None;
            }
            let bit = word.trailing_zeros() as usize;
            word &= word - 1;
            Some(w * 64 + bit)
        })
    })
}

/// Adjacency plus cached clustering coefficients of every vertex.
#[derive(Debug, Clone)]
pub struct ClosureProfile {
    adjacency: Adjacency,
    clustering: Vec<f64>,
}

impl ClosureProfile {
    pub fn new(g: &LayerGraph) -> Self {
        let adjacency = Adjacency::new(g);
        let clustering = (0..adjacency.n).map(|i| adjacency.clustering(i)).collect();
        Self {
            adjacency,
            clustering,
        }
    }

    pub fn clustering(&self, i: usize) -> f64 {
        self.clustering[i]
    }

    pub fn triadic_closure(&self, u: usize, v: usize) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for w in self.adjacency.common(u, v) {
            sum += self.clustering[w];
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

/// Fraction of the neighbour pairs of `i` that are themselves connected.
pub fn clustering_coefficient(g: &LayerGraph, i: usize) -> f64 {
    assert!(i < g.n(), "vertex {i} out of range");
    Adjacency::new(g).clustering(i)
}

/// Mean clustering coefficient over the common neighbours of `u` and `v`.
pub fn triadic_closure(g: &LayerGraph, u: usize, v: usize) -> f64 {
    assert!(u != v && u < g.n() && v < g.n(), "invalid pair ({u}, {v})");
    ClosureProfile::new(g).triadic_closure(u, v)
}

/// Financial and social layers over one vertex set, with their union.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplexSnapshot {
    pub financial: LayerGraph,
    pub social: LayerGraph,
    pub aggregated: LayerGraph,
}

impl DuplexSnapshot {
    pub fn new(financial: LayerGraph, social: LayerGraph) -> Result<Self> {
        if financial.n() != social.n() {
            return Err(Error::Shape(format!(
                "layers have {} and {} vertices",
                financial.n(),
                social.n()
            )));
        }
        let aggregated = financial.union(&social, Layer::Aggregated)?;
        Ok(Self {
            financial,
            social,
            aggregated,
        })
    }

    pub fn n(&self) -> usize {
        self.financial.n()
    }

    pub fn window(&self) -> Window {
        self.financial.window
    }

    pub fn layer(&self, layer: Layer) -> &LayerGraph {
        match layer {
            Layer::Financial => &self.financial,
            Layer::Social => &self.social,
            Layer::Aggregated => &self.aggregated,
        }
    }
}

/// Triadic closure of `(u, v)` with triangles allowed to span layers.
pub fn multiplex_triadic_closure(d: &DuplexSnapshot, u: usize, v: usize) -> f64 {
    triadic_closure(&d.aggregated, u, v)
}

/// Predictors of one vertex pair at one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub u: usize,
    pub v: usize,
    pub e_fin: bool,
    pub e_soc: bool,
    pub e_any: bool,
    pub t_fin: f64,
    pub t_soc: f64,
    pub t_multi: f64,
}

impl PairFeatures {
    /// Persistence indicator of `layer`.
    pub fn edge(&self, layer: Layer) -> bool {
        match layer {
            Layer::Financial => self.e_fin,
            Layer::Social => self.e_soc,
            Layer::Aggregated => self.e_any,
        }
    }

    /// Triadic closure on `layer`.
    pub fn closure(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Financial => self.t_fin,
            Layer::Social => self.t_soc,
            Layer::Aggregated => self.t_multi,
        }
    }
}

/// Features for all `n(n-1)/2` pairs in lexicographic order.
pub fn pair_features(d: &DuplexSnapshot) -> Vec<PairFeatures> {
    let fin = ClosureProfile::new(&d.financial);
    let soc = ClosureProfile::new(&d.social);
    let multi = ClosureProfile::new(&d.aggregated);
    let e_fin = d.financial.indicator();
    let e_soc = d.social.indicator();
    all_pairs(d.n())
        .enumerate()
        .map(|(k, (u, v))| PairFeatures {
            u,
            v,
            e_fin: e_fin[k],
            e_soc: e_soc[k],
            e_any: e_fin[k] || e_soc[k],
            t_fin: fin.triadic_closure(u, v),
            t_soc: soc.triadic_closure(u, v),
            t_multi: multi.triadic_closure(u, v),
        })
        .collect()
}

pub fn write_features_csv(path: &Path, rows: &[PairFeatures]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "u,v,e_fin,e_soc,e_any,t_fin,t_soc,t_multi")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.u,
                r.v,
                u8::from(r.e_fin),
                u8::from(r.e_soc),
                u8::from(r.e_any),
                r.t_fin,
                r.t_soc,
                r.t_multi
            )?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: Window = Window { start: 0, end: 1 };

    fn g(layer: Layer, n: usize, edges: &[(usize, usize)]) -> LayerGraph {
        LayerGraph::new(layer, W, n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn clustering_examples() {
        let tri = g(Layer::Financial, 3, &[(0, 1), (1, 2), (0, 2)]);
        for i in 0..3 {
            assert_eq!(clustering_coefficient(&tri, i), 1.0);
        }
        let star = g(Layer::Financial, 5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(clustering_coefficient(&star, 0), 0.0);
        assert_eq!(clustering_coefficient(&star, 1), 0.0);
        // a-b-c-d-a with chord b-d; vertex b = 1 has neighbours {a, c, d}
        // and closed pairs (a, d), (c, d)
        let chord = g(Layer::Financial, 4, &[(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)]);
        assert_eq!(clustering_coefficient(&chord, 1), 2.0 / 3.0);
        // a-b-c-d-a with chord a-c: b has neighbours {a, c}, closed pair (a, c)
        let other = g(Layer::Financial, 4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        assert_eq!(clustering_coefficient(&other, 1), 1.0);
        // vertex a = 0 of the first graph: neighbours {b, d}, closed (b, d)
        assert_eq!(clustering_coefficient(&chord, 0), 1.0);
    }

    #[test]
    fn triadic_examples() {
        let path = g(Layer::Financial, 4, &[(0, 1), (2, 3)]);
        assert_eq!(triadic_closure(&path, 0, 3), 0.0);
        let k4 = g(Layer::Financial, 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(triadic_closure(&k4, 0, 3), 1.0);
        // u=0, v=4 share only w=1; w has neighbours {0, 4, 2, 3} with one closed pair (2, 3)
        // plus (0, 2): closed pairs {(2,3), (0,2)} of 6 -> 1/3
        let h = g(Layer::Financial, 5, &[(0, 1), (1, 4), (1, 2), (1, 3), (2, 3), (0, 2)]);
        assert_eq!(clustering_coefficient(&h, 1), 1.0 / 3.0);
        assert_eq!(triadic_closure(&h, 0, 4), 1.0 / 3.0);
        assert_eq!(triadic_closure(&h, 4, 0), 1.0 / 3.0);
    }

    #[test]
    fn multiplex_examples() {
        let empty = DuplexSnapshot::new(g(Layer::Financial, 4, &[]), g(Layer::Social, 4, &[])).unwrap();
        assert_eq!(multiplex_triadic_closure(&empty, 0, 1), 0.0);

        let edges = [(0, 1), (1, 2), (0, 2), (2, 3)];
        let same = DuplexSnapshot::new(g(Layer::Financial, 4, &edges), g(Layer::Social, 4, &edges)).unwrap();
        for (u, v) in all_pairs(4) {
            assert_eq!(
                multiplex_triadic_closure(&same, u, v),
                triadic_closure(&same.financial, u, v)
            );
        }

        // financial u-w, w-x; social w-v, u-x. Union closes u-w-x.
        let cross = DuplexSnapshot::new(
            g(Layer::Financial, 4, &[(0, 2), (2, 3)]),
            g(Layer::Social, 4, &[(2, 1), (0, 3)]),
        )
        .unwrap();
        assert_eq!(triadic_closure(&cross.financial, 0, 1), 0.0);
        // w=2 has neighbours {0, 3, 1} in the union, closed pair (0, 3): 1/3
        assert_eq!(multiplex_triadic_closure(&cross, 0, 1), 1.0 / 3.0);
    }

    #[test]
    fn features_layout() {
        let empty = DuplexSnapshot::new(g(Layer::Financial, 3, &[]), g(Layer::Social, 3, &[])).unwrap();
        let rows = pair_features(&empty);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| !r.e_any && r.t_fin == 0.0 && r.t_soc == 0.0 && r.t_multi == 0.0));

        let d = DuplexSnapshot::new(
            g(Layer::Financial, 4, &[(0, 1), (1, 2), (0, 2)]),
            g(Layer::Social, 4, &[(2, 3), (1, 3)]),
        )
        .unwrap();
        let rows = pair_features(&d);
        let pairs: Vec<(usize, usize)> = rows.iter().map(|r| (r.u, r.v)).collect();
        assert_eq!(pairs, all_pairs(4).collect::<Vec<_>>());
        for r in &rows {
            assert_eq!(r.e_fin, d.financial.has_edge(r.u, r.v));
            assert_eq!(r.e_soc, d.social.has_edge(r.u, r.v));
            assert_eq!(r.e_any, r.e_fin || r.e_soc);
            assert_eq!(r.t_fin, triadic_closure(&d.financial, r.u, r.v));
            assert_eq!(r.t_soc, triadic_closure(&d.social, r.u, r.v));
            assert_eq!(r.t_multi, multiplex_triadic_closure(&d, r.u, r.v));
        }
    }

    #[test]
    fn mismatched_layers() {
        assert!(DuplexSnapshot::new(g(Layer::Financial, 3, &[]), g(Layer::Social, 4, &[])).is_err());
    }
}
