//! Optimal transport potentials for the quadratic cost on projected samples.
//!
//! For `c(x, y) = |x - y|^2` a potential is c-concave exactly when it can be
//! written `phi(x) = x^2 - 2 conv(x)` with `conv` convex and lower
//! semicontinuous, and it is optimal when the support of the quantile
//! coupling lies in the subdifferential of `conv`. We take the piecewise
//! linear `conv` anchored at `conv(s_(1)) = 0` whose slope between
//! `s_(i)` and `s_(i+1)` is `t_(r(i))`, where `r(i)` is the last target order
//! statistic sharing mass with source block `i`. Only its values at the
//! source atoms are ever needed.
//!
//! Potentials are defined up to an additive constant (and are not even
//! unique beyond that); everything downstream is invariant to the constant.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::geometry::{project_into, DirectionSet, SampleMatrix};
use crate::ot1d::{sort_projection, wasserstein_pp_sorted, Exponent, SortedProjection};
use crate::sum::pairwise_sum;

/// `r(i)` for every source block, as 0-based target order indices:
/// `ceil((i + 1) m / n) - 1`. Nondecreasing, ends at `m - 1`.
pub fn row_assignment(n: usize, m: usize) -> Result<Vec<usize>> {
    if n == 0 || m == 0 {
        return Err(invalid(format!("row_assignment needs n, m >= 1 (n={n}, m={m})")));
    }
    Ok((0..n).map(|i| last_target(i, n, m)).collect())
}

#[inline]
fn last_target(i: usize, n: usize, m: usize) -> usize {
    ((i + 1) * m).div_ceil(n) - 1
}

/// Potential values at the sorted source atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialRow {
    /// `conv(s_(i))`, the convex part, with `conv(s_(1)) = 0`.
    pub convex: Vec<f64>,
    /// `phi(s_(i)) = s_(i)^2 - 2 conv(s_(i))`.
    pub phi: Vec<f64>,
}

/// The c-concave optimal potential from `s` to `t` (quadratic cost),
/// evaluated at the sorted source atoms.
pub fn potential_values(s: &SortedProjection, t: &SortedProjection) -> Result<PotentialRow> {
    if s.is_empty() || t.is_empty() {
        return Err(invalid("potential_values needs nonempty samples"));
    }
    let mut convex = Vec::new();
    let mut phi = Vec::new();
    fill_potential(s.values(), t.values(), &mut convex, &mut phi);
    Ok(PotentialRow { convex, phi })
}

/// Writes `conv` and `phi` at the sorted atoms of `s` into the buffers.
pub(crate) fn fill_potential(s: &[f64], t: &[f64], convex: &mut Vec<f64>, phi: &mut Vec<f64>) {
    let (n, m) = (s.len(), t.len());
    convex.clear();
    phi.clear();
    let mut acc = 0.0;
    convex.push(acc);
    for i in 0..n - 1 {
        acc += t[last_target(i, n, m)] * (s[i + 1] - s[i]);
        convex.push(acc);
    }
    phi.extend(s.iter().zip(convex.iter()).map(|(&x, &c)| x * x - 2.0 * c));
}

/// How [`c_conjugate`] searches for the minimizing source atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConjugateMethod {
    /// Lower convex envelope plus a monotone pointer, `O(n + m log m)`.
    #[default]
    MonotoneArgmin,
    /// Direct minimum over all source atoms, `O(n m)`. Test oracle.
    BruteForce,
}

/// Discrete c-conjugate `phi^c(t) = min_i (|s_(i) - t|^2 - phi(s_(i)))` at each
/// of `t_points` (any order). `phi_at_s` is indexed by sorted rank of `s`.
pub fn c_conjugate(
    phi_at_s: &[f64],
    s: &SortedProjection,
    t_points: &[f64],
    method: ConjugateMethod,
) -> Result<Vec<f64>> {
    if phi_at_s.len() != s.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), found: phi_at_s.len() });
    }
    if s.is_empty() {
        return Err(invalid("c_conjugate needs a nonempty source"));
    }
    if let Some(index) = t_points.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let xs = s.values();
    Ok(match method {
        ConjugateMethod::BruteForce => t_points
            .iter()
            .map(|&t| xs.iter().zip(phi_at_s).map(|(&x, &f)| gap(x, f, t)).fold(f64::INFINITY, f64::min))
            .collect(),
        ConjugateMethod::MonotoneArgmin => conjugate_monotone(xs, phi_at_s, t_points),
    })
}

#[inline]
fn gap(x: f64, phi: f64, t: f64) -> f64 {
    (x - t) * (x - t) - phi
}

fn conjugate_monotone(xs: &[f64], phi: &[f64], t_points: &[f64]) -> Vec<f64> {
    // Collapse tied atoms: with equal x the largest phi always wins.
    let mut ux: Vec<f64> = Vec::with_capacity(xs.len());
    let mut uphi: Vec<f64> = Vec::with_capacity(xs.len());
    for (&x, &f) in xs.iter().zip(phi) {
        match ux.last() {
            Some(&last) if last == x => {
                let top = uphi.last_mut().unwrap();
                if f > *top {
                    *top = f;
                }
            }
            _ => {
                ux.push(x);
                uphi.push(f);
            }
        }
    }

    // |x - t|^2 - phi(x) = t^2 + (x^2 - phi(x)) - 2 x t, so the minimizer is
    // a vertex of the lower convex hull of (x, x^2 - phi(x)) and moves right
    // as t grows.
    let b: Vec<f64> = ux.iter().zip(&uphi).map(|(&x, &f)| x * x - f).collect();
    let mut hull: Vec<usize> = Vec::with_capacity(ux.len());
    for c in 0..ux.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let m = hull[hull.len() - 1];
            let cross = (ux[m] - ux[a]) * (b[c] - b[a]) - (b[m] - b[a]) * (ux[c] - ux[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(c);
    }

    let mut order: Vec<usize> = (0..t_points.len()).collect();
    order.sort_unstable_by(|&a, &b| t_points[a].partial_cmp(&t_points[b]).unwrap().then(a.cmp(&b)));

    let mut out = alloc::vec![0.0; t_points.len()];
    let mut h = 0;
    for &q in &order {
        let t = t_points[q];
        while h + 1 < hull.len() && gap(ux[hull[h + 1]], uphi[hull[h + 1]], t) <= gap(ux[hull[h]], uphi[hull[h]], t) {
            h += 1;
        }
        // Atoms dropped from the hull as (nearly) collinear can tie with the
        // vertex; scan the neighbourhood so rounding picks the same minimum
        // as a direct search.
        let centre = hull[h];
        let mut best = gap(ux[centre], uphi[centre], t);
        let tol = 1e-12 * (1.0 + libm::fabs(best) + libm::fabs(uphi[centre]) + t * t);
        let mut j = centre;
        while j > 0 {
            j -= 1;
            let v = gap(ux[j], uphi[j], t);
            if v > best + tol {
                break;
            }
            best = best.min(v);
        }
        for j in centre + 1..ux.len() {
            let v = gap(ux[j], uphi[j], t);
            if v > best + tol {
                break;
            }
            best = best.min(v);
        }
        out[q] = best;
    }
    out
}

/// `W_2^2(s, t)` minus the dual objective of the constructed potential and
/// its discrete conjugate. Zero up to rounding.
pub fn duality_gap(s: &SortedProjection, t: &SortedProjection) -> Result<f64> {
    let row = potential_values(s, t)?;
    let conj = c_conjugate(&row.phi, s, t.values(), ConjugateMethod::MonotoneArgmin)?;
    let primal = wasserstein_pp_sorted(s.values(), t.values(), Exponent::TWO);
    let dual = pairwise_sum(&row.phi) / s.len() as f64 + pairwise_sum(&conj) / t.len() as f64;
    Ok(primal - dual)
}

/// Per-direction potentials at the source sample points, in original row
/// order: `phi[l * n + i]` is the potential for direction `l` at `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    phi: Vec<f64>,
    k: usize,
    n: usize,
}

impl PotentialTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.phi[l * self.n..(l + 1) * self.n]
    }

    /// Adds `c` to every entry of row `l` (potentials are defined up to a
    /// constant).
    pub fn shift_row(&mut self, l: usize, c: f64) {
        for v in &mut self.phi[l * self.n..(l + 1) * self.n] {
            *v += c;
        }
    }

    /// `(1/k^2) sum_{a,b} Cov_{P_n}(phi_a, phi_b)`, computed as the population
    /// variance over points of the direction-averaged potential.
    pub fn averaged_variance(&self) -> f64 {
        let mut g = alloc::vec![0.0; self.n];
        for l in 0..self.k {
            for (gi, v) in g.iter_mut().zip(self.row(l)) {
                *gi += v;
            }
        }
        for gi in &mut g {
            *gi /= self.k as f64;
        }
        crate::sum::population_variance(&g)
    }
}

/// Builds the `k x n` potential table from `x` to `y` (quadratic cost).
pub fn potential_table(x: &SampleMatrix, y: &SampleMatrix, dirs: &DirectionSet) -> Result<PotentialTable> {
    if x.d() != dirs.d() || y.d() != dirs.d() {
        return Err(Error::DimensionMismatch {
            expected: dirs.d(),
            found: if x.d() != dirs.d() { x.d() } else { y.d() },
        });
    }
    let (n, k) = (x.n(), dirs.k());
    let mut phi = Vec::with_capacity(k * n);
    let mut px = Vec::new();
    let mut py = Vec::new();
    for theta in dirs.iter() {
        project_into(x, theta, &mut px)?;
        project_into(y, theta, &mut py)?;
        let s = sort_projection(&px)?;
        let t = sort_projection(&py)?;
        let row = potential_values(&s, &t)?;
        phi.extend(s.unsort(&row.phi));
    }
    Ok(PotentialTable { phi, k, n })
}
