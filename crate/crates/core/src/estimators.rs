//! The Monte Carlo sliced estimate `SW_{p,k}^p` and its variance components.
//!
//! Directions are processed in fixed chunks of [`CHUNK`] directions. Each
//! chunk yields a [`ChunkPartial`]; partials are merged strictly in chunk
//! order. A parallel driver only has to evaluate chunks concurrently and hand
//! them to [`Analysis::assemble`] in order to reproduce the sequential bits.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::geometry::{project_into, DirectionSet, SampleMatrix};
use crate::ot1d::{sort_finite, sort_projection, wasserstein_pp_sorted, Exponent};
use crate::potentials::fill_potential;
use crate::sum::{mean, pairwise_sum, population_variance};

/// Directions per work unit.
pub const CHUNK: usize = 32;

/// Largest `tau_hat` accepted for the slicing-only studentization.
pub const SLICING_ONLY_MAX_TAU: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SlicedEstimate {
    /// Mean of `per_direction`.
    pub sw_pp: f64,
    /// `W_p^p` between the projected samples, one entry per direction.
    pub per_direction: Vec<f64>,
    pub p: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

/// Dispersion of the per-direction costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WHat {
    pub value: f64,
    /// The raw difference of means came out negative (rounding) and was
    /// clamped to zero.
    pub clamped: bool,
}

/// Which potential sums a chunk accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialSides {
    None,
    Source,
    Both,
}

/// Per-chunk work product.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPartial {
    pub range: Range<usize>,
    pub per_direction: Vec<f64>,
    /// Sum over the chunk's directions of the potential at each `x_i`.
    pub source_sums: Option<Vec<f64>>,
    /// Same from `y` to `x`, at each `y_j`.
    pub target_sums: Option<Vec<f64>>,
}

/// Chunk boundaries for `k` directions.
pub fn chunk_ranges(k: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    (0..k.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(k))
}

pub(crate) fn check_inputs(x: &SampleMatrix, y: &SampleMatrix, dirs: &DirectionSet) -> Result<()> {
    for d in [x.d(), y.d()] {
        if d != dirs.d() {
            return Err(Error::DimensionMismatch { expected: dirs.d(), found: d });
        }
    }
    Ok(())
}

/// Evaluates directions `range` of `dirs`.
pub fn analyze_chunk(
    x: &SampleMatrix,
    y: &SampleMatrix,
    dirs: &DirectionSet,
    p: Exponent,
    sides: PotentialSides,
    range: Range<usize>,
) -> Result<ChunkPartial> {
    check_inputs(x, y, dirs)?;
    if sides != PotentialSides::None && !p.is_two() {
        return Err(Error::Unsupported(format!(
            "optimal potentials are only available for p = 2 (got p = {})",
            p.get()
        )));
    }
    let (n, m) = (x.n(), y.n());
    let mut per_direction = Vec::with_capacity(range.len());
    let mut source_sums = (sides != PotentialSides::None).then(|| alloc::vec![0.0; n]);
    let mut target_sums = (sides == PotentialSides::Both).then(|| alloc::vec![0.0; m]);
    let (mut px, mut py) = (Vec::with_capacity(n), Vec::with_capacity(m));
    let (mut conv, mut phi, mut keys) = (Vec::new(), Vec::new(), Vec::new());
    for l in range.clone() {
        let theta = dirs.direction(l);
        project_into(x, theta, &mut px)?;
        project_into(y, theta, &mut py)?;
        if sides == PotentialSides::None {
            sort_finite(&mut px, &mut keys);
            sort_finite(&mut py, &mut keys);
            per_direction.push(wasserstein_pp_sorted(&px, &py, p));
            continue;
        }
        let s = sort_projection(&px)?;
        let t = sort_projection(&py)?;
        per_direction.push(wasserstein_pp_sorted(s.values(), t.values(), p));
        if let Some(sums) = source_sums.as_mut() {
            fill_potential(s.values(), t.values(), &mut conv, &mut phi);
            for (&orig, &v) in s.perm().iter().zip(&phi) {
                sums[orig] += v;
            }
        }
        if let Some(sums) = target_sums.as_mut() {
            fill_potential(t.values(), s.values(), &mut conv, &mut phi);
            for (&orig, &v) in t.perm().iter().zip(&phi) {
                sums[orig] += v;
            }
        }
    }
    Ok(ChunkPartial { range, per_direction, source_sums, target_sums })
}

/// Everything computed from one pass over the directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub estimate: SlicedEstimate,
    /// `None` when `k < 2`.
    pub w_hat: Option<WHat>,
    /// `v_hat^2_{P_n,Q_m}`; needs `p = 2`.
    pub v_hat_pq_sq: Option<f64>,
    /// `v_hat^2_{Q_m,P_n}`; needs `p = 2`.
    pub v_hat_qp_sq: Option<f64>,
}

impl Analysis {
    /// Merges chunk partials, which must cover `0..k` in order.
    pub fn assemble(n: usize, m: usize, k: usize, p: Exponent, chunks: Vec<ChunkPartial>) -> Result<Self> {
        let mut per_direction = Vec::with_capacity(k);
        let mut source: Option<Vec<f64>> = None;
        let mut target: Option<Vec<f64>> = None;
        let mut next = 0;
        for chunk in chunks {
            if chunk.range.start != next {
                return Err(invalid("chunk partials are not contiguous"));
            }
            next = chunk.range.end;
            per_direction.extend_from_slice(&chunk.per_direction);
            merge_sums(&mut source, chunk.source_sums);
            merge_sums(&mut target, chunk.target_sums);
        }
        if next != k {
            return Err(invalid(format!("chunk partials cover {next} of {k} directions")));
        }
        let estimate = SlicedEstimate { sw_pp: mean(&per_direction), per_direction, p: p.get(), n, m, k };
        let w_hat = if k >= 2 { Some(w_hat_sq(&estimate)?) } else { None };
        let collapse = |sums: Vec<f64>| {
            let g: Vec<f64> = sums.iter().map(|s| s / k as f64).collect();
            population_variance(&g)
        };
        Ok(Self { estimate, w_hat, v_hat_pq_sq: source.map(collapse), v_hat_qp_sq: target.map(collapse) })
    }

    /// Variance components for the full studentization (`p = 2`).
    pub fn variance(&self) -> Result<VarianceComponents> {
        let w = self.w_hat.ok_or_else(|| invalid("variance estimation needs k >= 2 directions"))?;
        match (self.v_hat_pq_sq, self.v_hat_qp_sq) {
            (Some(pq), Some(qp)) => {
                let e = &self.estimate;
                combined_variance(e.n, e.m, e.k, w.value, pq, qp)
            }
            _ => Err(Error::Unsupported(format!(
                "potential-based variance needs p = 2 (got p = {}); the slicing-only variance must be requested explicitly",
                self.estimate.p
            ))),
        }
    }

    /// Variance from the slicing term alone; see [`VarianceComponents::slicing_only`].
    pub fn slicing_only_variance(&self) -> Result<VarianceComponents> {
        let w = self.w_hat.ok_or_else(|| invalid("variance estimation needs k >= 2 directions"))?;
        let e = &self.estimate;
        VarianceComponents::slicing_only(e.n, e.m, e.k, w.value)
    }
}

fn merge_sums(acc: &mut Option<Vec<f64>>, part: Option<Vec<f64>>) {
    match (acc.as_mut(), part) {
        (Some(a), Some(p)) => a.iter_mut().zip(p).for_each(|(a, p)| *a += p),
        (None, Some(p)) => *acc = Some(p),
        _ => {}
    }
}

/// Sequential driver: all chunks in order.
pub fn analyze(
    x: &SampleMatrix,
    y: &SampleMatrix,
    dirs: &DirectionSet,
    p: f64,
    sides: PotentialSides,
) -> Result<Analysis> {
    let p = Exponent::new(p)?;
    check_inputs(x, y, dirs)?;
    let chunks = chunk_ranges(dirs.k()).map(|r| analyze_chunk(x, y, dirs, p, sides, r)).collect::<Result<Vec<_>>>()?;
    Analysis::assemble(x.n(), y.n(), dirs.k(), p, chunks)
}

/// `SW_{p,k}^p(P_n, Q_m)` with the per-direction costs.
pub fn sliced_estimate(x: &SampleMatrix, y: &SampleMatrix, dirs: &DirectionSet, p: f64) -> Result<SlicedEstimate> {
    Ok(analyze(x, y, dirs, p, PotentialSides::None)?.estimate)
}

/// `(1/k) sum W^{2p} - SW_{p,k}^{2p}`, clamped at zero.
pub fn w_hat_sq(est: &SlicedEstimate) -> Result<WHat> {
    let k = est.per_direction.len();
    if k < 2 {
        return Err(invalid(format!("w_hat needs at least 2 directions, got {k}")));
    }
    // Mean of squares minus squared mean, on data shifted by the first value
    // (the same quantity, without the cancellation).
    let origin = est.per_direction[0];
    let dev: Vec<f64> = est.per_direction.iter().map(|w| w - origin).collect();
    let sq: Vec<f64> = dev.iter().map(|w| w * w).collect();
    let mu = mean(&dev);
    let raw = pairwise_sum(&sq) / k as f64 - mu * mu;
    Ok(if raw < 0.0 { WHat { value: 0.0, clamped: true } } else { WHat { value: raw, clamped: false } })
}

/// `v_hat^2_{P_n,Q_m}` for `p = 2`: variance under `P_n` of the
/// direction-averaged potential. Swap the arguments for `v_hat^2_{Q_m,P_n}`.
pub fn v_hat_sq(x: &SampleMatrix, y: &SampleMatrix, dirs: &DirectionSet) -> Result<f64> {
    let a = analyze(x, y, dirs, 2.0, PotentialSides::Source)?;
    Ok(a.v_hat_pq_sq.expect("source sums requested"))
}

/// How the combined variance was formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    /// Slicing and sampling terms blended by `tau_hat`.
    Full,
    /// Slicing term only; valid when `k` is negligible against
    /// `nm / (n + m)`.
    SlicingOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    pub w_hat_sq: f64,
    pub v_hat_pq_sq: f64,
    pub v_hat_qp_sq: f64,
    /// `k / (k + nm/(n+m))`.
    pub tau_hat: f64,
    /// `n / (n + m)`.
    pub lambda_hat: f64,
    pub combined: f64,
    pub mode: VarianceMode,
}

fn check_sizes(n: usize, m: usize, k: usize) -> Result<()> {
    if n == 0 || m == 0 || k == 0 {
        return Err(invalid(format!("sizes must be positive (n={n}, m={m}, k={k})")));
    }
    Ok(())
}

/// `nm / (n + m)`.
pub fn harmonic_size(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    n * m / (n + m)
}

/// `(1 - tau) w^2 + tau ((1 - lambda) v_pq^2 + lambda v_qp^2)` at the finite
/// sample plug-in weights.
pub fn combined_variance(
    n: usize,
    m: usize,
    k: usize,
    w_hat_sq: f64,
    v_hat_pq_sq: f64,
    v_hat_qp_sq: f64,
) -> Result<VarianceComponents> {
    check_sizes(n, m, k)?;
    for (name, v) in [("w_hat_sq", w_hat_sq), ("v_hat_pq_sq", v_hat_pq_sq), ("v_hat_qp_sq", v_hat_qp_sq)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    let r = harmonic_size(n, m);
    let tau_hat = k as f64 / (k as f64 + r);
    let lambda_hat = n as f64 / (n as f64 + m as f64);
    let inner = (1.0 - lambda_hat) * v_hat_pq_sq + lambda_hat * v_hat_qp_sq;
    let combined = (1.0 - tau_hat) * w_hat_sq + tau_hat * inner;
    Ok(VarianceComponents {
        w_hat_sq,
        v_hat_pq_sq,
        v_hat_qp_sq,
        tau_hat,
        lambda_hat,
        combined,
        mode: VarianceMode::Full,
    })
}

impl VarianceComponents {
    /// Studentize with `w_hat^2` alone. Only sound when the projection noise
    /// dominates, so it is refused unless `tau_hat <= SLICING_ONLY_MAX_TAU`.
    /// The potential terms are reported as zero.
    pub fn slicing_only(n: usize, m: usize, k: usize, w_hat_sq: f64) -> Result<Self> {
        check_sizes(n, m, k)?;
        if !(w_hat_sq >= 0.0 && w_hat_sq.is_finite()) {
            return Err(invalid(format!("w_hat_sq must be finite and nonnegative, got {w_hat_sq}")));
        }
        let r = harmonic_size(n, m);
        let tau_hat = k as f64 / (k as f64 + r);
        if tau_hat > SLICING_ONLY_MAX_TAU {
            return Err(Error::Unsupported(format!(
                "slicing-only variance needs k << nm/(n+m): tau_hat = {tau_hat:.4} exceeds {SLICING_ONLY_MAX_TAU}"
            )));
        }
        Ok(Self {
            w_hat_sq,
            v_hat_pq_sq: 0.0,
            v_hat_qp_sq: 0.0,
            tau_hat,
            lambda_hat: n as f64 / (n as f64 + m as f64),
            combined: w_hat_sq,
            mode: VarianceMode::SlicingOnly,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_directions;
    use crate::potentials::potential_table;
    use alloc::vec;

    fn est(values: &[f64]) -> SlicedEstimate {
        SlicedEstimate { sw_pp: mean(values), per_direction: values.to_vec(), p: 2.0, n: 2, m: 2, k: values.len() }
    }

    fn grid(n: usize, d: usize, offset: f64, salt: f64) -> SampleMatrix {
        let data = (0..n * d).map(|i| libm::sin(i as f64 * 1.37 + salt) * 2.0 + offset).collect();
        SampleMatrix::new(data, n, d).unwrap()
    }

    #[test]
    fn w_hat_examples() {
        assert_eq!(w_hat_sq(&est(&[0.0, 2.0])).unwrap(), WHat { value: 1.0, clamped: false });
        let flat = w_hat_sq(&est(&[0.3, 0.3, 0.3])).unwrap();
        assert_eq!(flat.value, 0.0);
        assert!(w_hat_sq(&est(&[1.0])).is_err());
    }

    #[test]
    fn w_hat_equals_two_pass_variance() {
        let values: Vec<f64> = (0..257).map(|i| libm::cos(i as f64) * 3.0 + 5.0).collect();
        let w = w_hat_sq(&est(&values)).unwrap().value;
        assert!((w - population_variance(&values)).abs() <= 1e-12);
    }

    #[test]
    fn identical_samples_give_zero_estimate() {
        let x = grid(30, 3, 0.0, 0.0);
        let dirs = sample_directions(3, 40, 5, 0).unwrap();
        let e = sliced_estimate(&x, &x, &dirs, 2.0).unwrap();
        assert_eq!(e.sw_pp, 0.0);
        assert!(e.per_direction.iter().all(|&w| w == 0.0));
        let v = v_hat_sq(&x, &x, &dirs).unwrap();
        assert!(v >= 0.0);
    }

    #[test]
    fn one_dimensional_slicing_ignores_k() {
        let x = grid(17, 1, 0.0, 0.0);
        let y = grid(11, 1, 0.8, 0.4);
        let raw = {
            let s = sort_projection(x.as_slice()).unwrap();
            let t = sort_projection(y.as_slice()).unwrap();
            crate::ot1d::wasserstein_pp(&s, &t, 3.0).unwrap()
        };
        for k in [1, 2, 7, 100] {
            let dirs = sample_directions(1, k, 9, 1).unwrap();
            let e = sliced_estimate(&x, &y, &dirs, 3.0).unwrap();
            assert!((e.sw_pp - raw).abs() <= 1e-12 * raw);
        }
    }

    #[test]
    fn dimension_mismatch_and_bad_exponent() {
        let x = grid(10, 2, 0.0, 0.0);
        let y = grid(10, 3, 0.0, 0.0);
        let dirs = sample_directions(2, 4, 1, 0).unwrap();
        assert!(matches!(sliced_estimate(&x, &y, &dirs, 2.0), Err(Error::DimensionMismatch { .. })));
        assert!(sliced_estimate(&x, &x, &dirs, 1.0).is_err());
        assert!(matches!(analyze(&x, &x, &dirs, 3.0, PotentialSides::Both), Err(Error::Unsupported(_))));
    }

    #[test]
    fn single_direction_v_hat_is_row_variance() {
        let x = grid(23, 2, 0.0, 0.0);
        let y = grid(19, 2, 1.0, 0.7);
        let dirs = sample_directions(2, 1, 3, 0).unwrap();
        let table = potential_table(&x, &y, &dirs).unwrap();
        let direct = population_variance(table.row(0));
        assert!((v_hat_sq(&x, &y, &dirs).unwrap() - direct).abs() <= 1e-12);
    }

    /// Brute force `(1/k^2) sum_{a,b} Cov_{P_n}(phi_a, phi_b)`.
    fn double_sum(table: &crate::potentials::PotentialTable) -> f64 {
        let (k, n) = (table.k(), table.n());
        let means: Vec<f64> = (0..k).map(|l| table.row(l).iter().sum::<f64>() / n as f64).collect();
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                let mut cov = 0.0;
                for i in 0..n {
                    cov += (table.row(a)[i] - means[a]) * (table.row(b)[i] - means[b]);
                }
                acc += cov / n as f64;
            }
        }
        acc / (k * k) as f64
    }

    #[test]
    fn row_mean_collapse_equals_covariance_double_sum() {
        for (k, n, m, d) in [(1, 2, 3, 1), (3, 10, 7, 2), (10, 50, 40, 4), (7, 33, 50, 3)] {
            let x = grid(n, d, 0.0, 0.1);
            let y = grid(m, d, 0.5, 2.0);
            let dirs = sample_directions(d, k, 77, 0).unwrap();
            let table = potential_table(&x, &y, &dirs).unwrap();
            let v = v_hat_sq(&x, &y, &dirs).unwrap();
            assert!((v - double_sum(&table)).abs() <= 1e-12, "k={k} n={n}");
            assert!((table.averaged_variance() - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn sliced_estimate_is_row_permutation_invariant() {
        let x = grid(31, 3, 0.0, 0.0);
        let y = grid(20, 3, 0.6, 1.1);
        let dirs = sample_directions(3, 50, 8, 0).unwrap();
        let base = sliced_estimate(&x, &y, &dirs, 2.0).unwrap();
        let rev = |s: &SampleMatrix| {
            let rows: Vec<&[f64]> = s.rows().rev().collect();
            SampleMatrix::from_rows(&rows).unwrap()
        };
        let swapped = sliced_estimate(&rev(&x), &rev(&y), &dirs, 2.0).unwrap();
        assert_eq!(base.per_direction, swapped.per_direction);
    }

    #[test]
    fn chunked_assembly_checks_coverage() {
        let x = grid(12, 2, 0.0, 0.0);
        let dirs = sample_directions(2, 70, 1, 0).unwrap();
        let p = Exponent::TWO;
        let mut chunks: Vec<_> =
            chunk_ranges(70).map(|r| analyze_chunk(&x, &x, &dirs, p, PotentialSides::Both, r).unwrap()).collect();
        assert_eq!(chunks.len(), 3);
        let last = chunks.pop().unwrap();
        assert!(Analysis::assemble(12, 12, 70, p, chunks.clone()).is_err());
        chunks.insert(0, last);
        assert!(Analysis::assemble(12, 12, 70, p, chunks).is_err());
    }

    #[test]
    fn combined_limits() {
        let big_k = combined_variance(10, 10, 1_000_000_000, 5.0, 2.0, 4.0).unwrap();
        let inner = 0.5 * 2.0 + 0.5 * 4.0;
        assert!((big_k.combined - inner).abs() <= 1e-6 * inner);
        let small_k = combined_variance(1_000_000, 1_000_000, 1, 5.0, 2.0, 4.0).unwrap();
        assert!((small_k.combined - 5.0).abs() <= 1e-5);
        let half = combined_variance(40, 40, 20, 5.0, 2.0, 4.0).unwrap();
        assert_eq!(half.tau_hat, 0.5);
        assert_eq!(half.combined, 0.5 * 5.0 + 0.5 * inner);
        assert_eq!(half.lambda_hat, 0.5);
        assert!(combined_variance(0, 1, 1, 1.0, 1.0, 1.0).is_err());
        assert!(combined_variance(1, 1, 1, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn slicing_only_requires_small_tau() {
        assert!(matches!(VarianceComponents::slicing_only(100, 100, 40, 1.0), Err(Error::Unsupported(_))));
        let vc = VarianceComponents::slicing_only(1000, 1000, 10, 2.5).unwrap();
        assert_eq!(vc.combined, 2.5);
        assert_eq!(vc.mode, VarianceMode::SlicingOnly);
    }

    #[test]
    fn chunked_and_single_pass_agree() {
        let x = grid(40, 3, 0.0, 0.0);
        let y = grid(25, 3, 0.3, 0.9);
        let dirs = sample_directions(3, 100, 4, 0).unwrap();
        let full = analyze(&x, &y, &dirs, 2.0, PotentialSides::Both).unwrap();
        let table_pq = potential_table(&x, &y, &dirs).unwrap().averaged_variance();
        let table_qp = potential_table(&y, &x, &dirs).unwrap().averaged_variance();
        assert!((full.v_hat_pq_sq.unwrap() - table_pq).abs() <= 1e-12);
        assert!((full.v_hat_qp_sq.unwrap() - table_qp).abs() <= 1e-12);
        let vc = full.variance().unwrap();
        let lo = vc.w_hat_sq.min((1.0 - vc.lambda_hat) * vc.v_hat_pq_sq + vc.lambda_hat * vc.v_hat_qp_sq);
        let hi = vc.w_hat_sq.max((1.0 - vc.lambda_hat) * vc.v_hat_pq_sq + vc.lambda_hat * vc.v_hat_qp_sq);
        assert!(lo - 1e-15 <= vc.combined && vc.combined <= hi + 1e-15);
        assert_eq!(vec![full.estimate.k], vec![100]);
    }
}
