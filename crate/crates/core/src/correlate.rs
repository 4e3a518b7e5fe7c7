//! Kendall rank correlation matrices and the correlation-to-distance map.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::write_atomic;
use crate::panel::{PanelSeries, Window};

/// Tie convention for Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauVariant {
    /// Denominator is the total number of pairs.
    A,
    /// Tie-adjusted denominator `sqrt((n0 - n1)(n0 - n2))`.
    #[default]
    B,
}

impl std::str::FromStr for TauVariant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "a" => Ok(TauVariant::A),
            "b" => Ok(TauVariant::B),
            other => Err(format!("unknown tau variant {other:?} (a|b)")),
        }
    }
}

impl std::fmt::Display for TauVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TauVariant::A => "a",
            TauVariant::B => "b",
        })
    }
}

/// Dense ranks (0-based, ties share a rank). Fails on NaN.
pub fn dense_ranks(values: &[f64]) -> Result<Vec<u32>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in series".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0u32; values.len()];
    let mut rank = 0u32;
    for k in 0..order.len() {
        if k > 0 && values[order[k]] != values[order[k - 1]] {
            rank += 1;
        }
        ranks[order[k]] = rank;
    }
    Ok(ranks)
}

/// Kendall's tau between two equally long sequences.
///
/// Returns [`Error::DegenerateCorrelation`] when either sequence is
/// completely tied, since the coefficient is undefined there.
pub fn kendall(x: &[f64], y: &[f64], variant: TauVariant) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Shape(format!("need at least 2 observations, got {}", x.len())));
    }
    kendall_ranked(&dense_ranks(x)?, &dense_ranks(y)?, variant)
}

fn tied_pairs(sorted: impl Iterator<Item = u64>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev = None;
    for v in sorted {
        if Some(v) == prev {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
            prev = Some(v);
        }
    }
    total + run * (run.saturating_sub(1)) / 2
}

/// Count strict inversions of `v` while sorting it in place.
fn merge_count(v: &mut [u32], buf: &mut [u32]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        merge_count(lo, &mut buf[..mid]) + merge_count(hi, &mut buf[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Knight's O(n log n) algorithm on integer ranks.
pub(crate) fn kendall_ranked(rx: &[u32], ry: &[u32], variant: TauVariant) -> Result<f64> {
    let n = rx.len() as u64;
    let n0 = n * (n - 1) / 2;
    let mut keys: Vec<u64> = rx
        .iter()
        .zip(ry)
        .map(|(&a, &b)| (u64::from(a) << 32) | u64::from(b))
        .collect();
    keys.sort_unstable();
    let ties_x = tied_pairs(keys.iter().map(|k| k >> 32));
    let ties_xy = tied_pairs(keys.iter().copied());
    let mut ys: Vec<u32> = keys.iter().map(|k| (k & 0xffff_ffff) as u32).collect();
    let mut buf = vec![0u32; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);
    let ties_y = tied_pairs(ys.iter().map(|&v| u64::from(v)));
    if ties_x == n0 || ties_y == n0 {
        return Err(Error::DegenerateCorrelation);
    }
    let score = n0 as i64 - ties_x as i64 - ties_y as i64 + ties_xy as i64 - 2 * swaps as i64;
    let tau = match variant {
        TauVariant::A => score as f64 / n0 as f64,
        TauVariant::B => score as f64 / (((n0 - ties_x) as f64) * ((n0 - ties_y) as f64)).sqrt(),
    };
    Ok(tau.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    Correlation,
    Distance,
}

/// Symmetric `n x n` matrix attached to one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedMatrix {
    pub window: Window,
    pub kind: MatrixKind,
    n: usize,
    values: Vec<f64>,
    /// Pairs `(i, j)`, `i < j`, whose correlation was undefined and set to 0.
    pub degenerate_pairs: Vec<(usize, usize)>,
}

impl WindowedMatrix {
    /// Build from a full row-major matrix, checking symmetry and range.
    pub fn from_rows(window: Window, kind: MatrixKind, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix is not square".into()));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = Self {
            window,
            kind,
            n,
            values,
            degenerate_pairs: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi, diag) = match self.kind {
            MatrixKind::Correlation => (-1.0, 1.0, 1.0),
            MatrixKind::Distance => (0.0, 2.0, 0.0),
        };
        for i in 0..self.n {
            if self.get(i, i) != diag {
                return Err(Error::Shape(format!("diagonal entry {i} is not {diag}")));
            }
            for j in 0..self.n {
                let v = self.get(i, j);
                if !(lo..=hi).contains(&v) || v != self.get(j, i) {
                    return Err(Error::Shape(format!("entry ({i}, {j}) = {v} invalid")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Dump as `n` rows of `n` comma-separated values with 17 significant
    /// digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            for i in 0..self.n {
                let row: Vec<String> = (0..self.n)
                    .map(|j| format!("{:.16e}", self.get(i, j)))
                    .collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })
    }
}

/// Pairwise Kendall correlations of every asset over one window.
///
/// Pairs with an all-tied series get correlation 0 and are listed in
/// `degenerate_pairs`.
pub fn correlation_matrix(
    panel: &PanelSeries,
    window: Window,
    variant: TauVariant,
) -> Result<WindowedMatrix> {
    if window.end > panel.len() || window.len() < 2 {
        return Err(Error::Shape(format!(
            "window {}..{} outside panel of length {}",
            window.start,
            window.end,
            panel.len()
        )));
    }
    let n = panel.n_assets();
    let ranks: Vec<Vec<u32>> = (0..n)
        .map(|i| dense_ranks(&panel.row(i)[window.start..window.end]))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let taus: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| match kendall_ranked(&ranks[i], &ranks[j], variant) {
            Ok(t) => Ok(Some(t)),
            Err(Error::DegenerateCorrelation) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; n * n];
    let mut degenerate_pairs = Vec::new();
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (&(i, j), tau) in pairs.iter().zip(taus) {
        let v = tau.unwrap_or_else(|| {
            degenerate_pairs.push((i, j));
            0.0
        });
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
    Ok(WindowedMatrix {
        window,
        kind: MatrixKind::Correlation,
        n,
        values,
        degenerate_pairs,
    })
}

/// `d = sqrt(2 (1 - rho))`, elementwise.
pub fn to_distance(c: &WindowedMatrix) -> Result<WindowedMatrix> {
    if c.kind != MatrixKind::Correlation {
        return Err(Error::Shape("expected a correlation matrix".into()));
    }
    let values = c
        .values
        .iter()
        .map(|&rho| (2.0 * (1.0 - rho)).max(0.0).sqrt())
        .collect();
    Ok(WindowedMatrix {
        window: c.window,
        kind: MatrixKind::Distance,
        n: c.n,
        values,
        degenerate_pairs: c.degenerate_pairs.clone(),
    })
}
