//! Sample matrices, random directions on the unit sphere, and projections.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::substream;

/// `n` observations in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleMatrix {
    /// Requires `n >= 2`, `d >= 1`, `data.len() == n * d` and finite entries.
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("a sample needs at least 2 rows, got {n}")));
        }
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, found: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `k` unit vectors in `R^d` together with the seed material that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    dirs: Vec<f64>,
    k: usize,
    d: usize,
    seed: u64,
    stream_id: u64,
}

impl DirectionSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn direction(&self, l: usize) -> &[f64] {
        &self.dirs[l * self.d..(l + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.dirs.chunks_exact(self.d)
    }
}

/// Draws `k` independent uniform directions on `S^{d-1}` by normalizing
/// standard Gaussian vectors.
///
/// Direction `l` comes from its own substream `(seed, stream_id, l)`, so the
/// set can be generated in any order or in parallel with the same bits.
pub fn sample_directions(d: usize, k: usize, seed: u64, stream_id: u64) -> Result<DirectionSet> {
    if d == 0 || k == 0 {
        return Err(invalid(format!("sample_directions needs d >= 1 and k >= 1 (d={d}, k={k})")));
    }
    let mut dirs = Vec::with_capacity(k * d);
    let mut buf = alloc::vec![0.0; d];
    for l in 0..k {
        let mut rng = substream(seed, stream_id, l as u64);
        loop {
            let mut sq = 0.0;
            for v in buf.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
                sq += *v * *v;
            }
            let norm = libm::sqrt(sq);
            // Zero-norm draws have probability zero but are redrawn anyway.
            if norm > 0.0 && norm.is_finite() {
                dirs.extend(buf.iter().map(|v| v / norm));
                break;
            }
        }
    }
    Ok(DirectionSet { dirs, k, d, seed, stream_id })
}

/// `<theta, x_i>` for every row. The direction need not be normalized.
pub fn project(samples: &SampleMatrix, direction: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.n());
    project_into(samples, direction, &mut out)?;
    Ok(out)
}

/// Like [`project`], reusing `out`'s allocation.
pub fn project_into(samples: &SampleMatrix, direction: &[f64], out: &mut Vec<f64>) -> Result<()> {
    if direction.len() != samples.d() {
        return Err(Error::DimensionMismatch { expected: samples.d(), found: direction.len() });
    }
    out.clear();
    out.extend(samples.rows().map(|row| dot(row, direction)));
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
