//! Exact optimal transport between one-dimensional empirical measures.
//!
//! Between `P_n` (n atoms of mass 1/n) and `Q_m` (m atoms of mass 1/m) the
//! optimal plan for any convex cost is the quantile coupling: order statistic
//! `i` of the source shares mass with order statistic `j` of the target equal
//! to the length of `((i-1)/n, i/n] ∩ ((j-1)/m, j/m]`. The cells with positive
//! mass are found by merging the two breakpoint grids, comparing `i*m` with
//! `j*n` in integers so that cell boundaries are exact.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// A one-dimensional sample sorted in nondecreasing order, remembering where
/// each value came from: `values[r] == original[perm[r]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProjection {
    values: Vec<f64>,
    perm: Vec<usize>,
}

impl SortedProjection {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sorted rank -> original index.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Scatters a vector indexed by sorted rank back to original order.
    pub fn unsort(&self, by_rank: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; by_rank.len()];
        for (r, &orig) in self.perm.iter().enumerate() {
            out[orig] = by_rank[r];
        }
        out
    }
}

/// Maps a finite float to an integer with the same order. `-0.0` and `0.0`
/// share a key. Integer comparisons sort several times faster than float
/// comparators.
#[inline]
fn order_key(v: f64) -> u64 {
    let bits = (v + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | 1 << 63
    }
}

#[inline]
fn from_order_key(k: u64) -> f64 {
    f64::from_bits(if k >> 63 == 1 { k & !(1 << 63) } else { !k })
}

/// Sorts finite `values` in place, reusing `keys` as scratch.
pub(crate) fn sort_finite(values: &mut [f64], keys: &mut Vec<u64>) {
    keys.clear();
    keys.extend(values.iter().map(|&v| order_key(v)));
    keys.sort_unstable();
    for (v, &k) in values.iter_mut().zip(keys.iter()) {
        *v = from_order_key(k);
    }
}

/// Stable sort of `values`; ties keep their input order.
pub fn sort_projection(values: &[f64]) -> Result<SortedProjection> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    // (key, index) is distinct per element, so the unstable sort is stable.
    let mut keyed: Vec<u128> =
        values.iter().enumerate().map(|(i, &v)| ((order_key(v) as u128) << 64) | i as u128).collect();
    keyed.sort_unstable();
    let perm: Vec<usize> = keyed.iter().map(|&k| k as u64 as usize).collect();
    let values = perm.iter().map(|&i| values[i]).collect();
    Ok(SortedProjection { values, perm })
}

/// One positive-mass cell of the quantile coupling (0-based order indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCell {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// Streams the positive-mass cells of the `n x m` quantile coupling in
/// increasing quantile order. There are at most `n + m - 1` of them.
#[derive(Debug, Clone)]
pub struct CouplingCells {
    n: u64,
    m: u64,
    i: u64,
    j: u64,
    scale: f64,
}

pub fn coupling_cells(n: usize, m: usize) -> Result<CouplingCells> {
    if n == 0 || m == 0 {
        return Err(invalid(format!("coupling needs n, m >= 1 (n={n}, m={m})")));
    }
    let (n, m) = (n as u64, m as u64);
    Ok(CouplingCells { n, m, i: 0, j: 0, scale: 1.0 / (n as f64 * m as f64) })
}

impl Iterator for CouplingCells {
    type Item = CouplingCell;

    fn next(&mut self) -> Option<CouplingCell> {
        if self.i >= self.n || self.j >= self.m {
            return None;
        }
        // Breakpoints on the common grid of 1/(n*m).
        let src_hi = (self.i + 1) * self.m;
        let tgt_hi = (self.j + 1) * self.n;
        let lo = (self.i * self.m).max(self.j * self.n);
        let hi = src_hi.min(tgt_hi);
        let cell = CouplingCell { i: self.i as usize, j: self.j as usize, mass: (hi - lo) as f64 * self.scale };
        if src_hi <= tgt_hi {
            self.i += 1;
        }
        if tgt_hi <= src_hi {
            self.j += 1;
        }
        Some(cell)
    }
}

/// Transport cost exponent `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(f64);

impl Exponent {
    pub const TWO: Exponent = Exponent(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p <= 1.0 || p.is_infinite() {
            return Err(invalid(format!("exponent p must be a finite real > 1, got {p}")));
        }
        Ok(Self(p))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_two(self) -> bool {
        self.0 == 2.0
    }

    /// `|diff|^p`.
    #[inline]
    pub fn cost(self, diff: f64) -> f64 {
        if self.0 == 2.0 {
            diff * diff
        } else {
            libm::pow(libm::fabs(diff), self.0)
        }
    }
}

/// `W_p^p` between two empirical measures given their sorted samples.
pub fn wasserstein_pp(s: &SortedProjection, t: &SortedProjection, p: f64) -> Result<f64> {
    let p = Exponent::new(p)?;
    if s.is_empty() || t.is_empty() {
        return Err(invalid("wasserstein_pp needs nonempty samples"));
    }
    Ok(wasserstein_pp_sorted(s.values(), t.values(), p))
}

/// Hot-path variant on plain sorted slices. Both slices must be nonempty and
/// sorted; neither is checked.
pub fn wasserstein_pp_sorted(s: &[f64], t: &[f64], p: Exponent) -> f64 {
    let (n, m) = (s.len() as u64, t.len() as u64);
    let (mut i, mut j) = (0u64, 0u64);
    let mut acc = 0.0;
    let mut lo = 0u64;
    while i < n && j < m {
        let src_hi = (i + 1) * m;
        let tgt_hi = (j + 1) * n;
        let hi = src_hi.min(tgt_hi);
        acc += (hi - lo) as f64 * p.cost(s[i as usize] - t[j as usize]);
        lo = hi;
        if src_hi <= tgt_hi {
            i += 1;
        }
        if tgt_hi <= src_hi {
            j += 1;
        }
    }
    acc / (n as f64 * m as f64)
}

/// Left-continuous quantile `s_(ceil(u n))` for `u` in `(0, 1)`.
pub fn quantile(s: &SortedProjection, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1), got {u}")));
    }
    if s.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    let n = s.len();
    let rank = libm::ceil(u * n as f64) as usize;
    Ok(s.values[rank.clamp(1, n) - 1])
}
