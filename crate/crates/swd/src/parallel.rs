//! Rayon driver over direction chunks. Chunks are evaluated concurrently and
//! merged in index order, so the result is bit-identical to
//! [`swd_core::analyze`] for any pool size.

use rayon::prelude::*;
use swd_core::estimators::{analyze_chunk, chunk_ranges, PotentialSides};
use swd_core::{Analysis, DirectionSet, Exponent, SampleMatrix};

use crate::error::Result;

pub fn analyze(
    x: &SampleMatrix,
    y: &SampleMatrix,
    dirs: &DirectionSet,
    p: f64,
    sides: PotentialSides,
) -> Result<Analysis> {
    let p = Exponent::new(p)?;
    let ranges: Vec<_> = chunk_ranges(dirs.k()).collect();
    let chunks =
        ranges.into_par_iter().map(|r| analyze_chunk(x, y, dirs, p, sides, r)).collect::<swd_core::Result<Vec<_>>>()?;
    Ok(Analysis::assemble(x.n(), y.n(), dirs.k(), p, chunks)?)
}
