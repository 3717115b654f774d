//! Monte Carlo replication harness for the studentized two-sample statistic.
//!
//! Each replication draws `X ~ N(0, I_d)` with `n` rows,
//! `Y ~ N((sqrt(d) + h) e_1, I_d)` with `m` rows and `k` fresh directions,
//! then tests `H0: SW_2^2 = delta`. All randomness comes from substreams of
//! `master_seed` keyed by `(cell, replication, role)`, and results are
//! gathered by replication index, so output bits do not depend on the number
//! of worker threads.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swd_core::distributions::{sample_gaussian, GaussianSpec};
use swd_core::estimators::PotentialSides;
use swd_core::inference::critical_value;
use swd_core::rng::{derive_stream_id, GAUSSIAN_METHOD, GENERATOR};
use swd_core::sum::{mean, population_variance};
use swd_core::{sample_directions, DirectionSet, InferenceReport};

use crate::error::{Error, Result};

const ROLE_X: u64 = 0;
const ROLE_Y: u64 = 1;
const ROLE_DIRS: u64 = 2;

fn default_level() -> f64 {
    0.95
}

fn default_bins() -> usize {
    40
}

/// One `k` or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KValues {
    One(usize),
    Many(Vec<usize>),
}

impl KValues {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            KValues::One(k) => vec![*k],
            KValues::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    pub p: f64,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: KValues,
    pub h_values: Vec<f64>,
    pub delta: f64,
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub master_seed: u64,
    /// Draw one direction set per cell instead of one per replication.
    #[serde(default)]
    pub reuse_directions: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Plan(m));
        if self.p != 2.0 {
            return fail(format!("p must be 2 (potential-based variance), got {}", self.p));
        }
        if self.d == 0 {
            return fail("d must be at least 1".into());
        }
        if self.n < 2 || self.m < 2 {
            return fail(format!("n and m must be at least 2 (n={}, m={})", self.n, self.m));
        }
        let ks = self.k.to_vec();
        if ks.is_empty() || ks.iter().any(|&k| k < 2) {
            return fail("every k must be at least 2".into());
        }
        if self.h_values.is_empty() || self.h_values.iter().any(|h| !h.is_finite()) {
            return fail("h_values must be a nonempty list of finite numbers".into());
        }
        if !self.delta.is_finite() {
            return fail("delta must be finite".into());
        }
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("level must lie in (0, 1), got {}", self.level));
        }
        if self.bins == 0 {
            return fail("bins must be at least 1".into());
        }
        Ok(())
    }

    /// `(k, h)` for every cell, `k`-major.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        let ks = self.k.to_vec();
        ks.iter().flat_map(|&k| self.h_values.iter().map(move |&h| (k, h))).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: SimulationPlan =
            serde_json::from_str(&text).map_err(|e| Error::Plan(format!("{}: {e}", path.display())))?;
        plan.validate()?;
        Ok(plan)
    }
}

/// One replication's outcome. `statistic` and `reject` are `None` when the
/// combined variance was zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub cell: usize,
    pub k: usize,
    pub h: f64,
    pub replication: usize,
    pub estimate: f64,
    pub combined_variance: f64,
    pub statistic: Option<f64>,
    pub reject: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Equal-width bins over `[min, max]`; the last bin is closed on the right.
pub fn histogram(values: &[f64], bin_count: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Plan("histogram of an empty vector".into()));
    }
    if bin_count == 0 {
        return Err(Error::Plan("histogram needs at least one bin".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bin_count as f64;
    let edges = (0..=bin_count).map(|b| if b == bin_count { hi } else { lo + b as f64 * width }).collect();
    let mut counts = vec![0u64; bin_count];
    for &v in values {
        let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        counts[b.min(bin_count - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub k: usize,
    pub h: f64,
    /// Replications with a usable statistic.
    pub replications: usize,
    /// Replications dropped for a degenerate (zero) variance.
    pub excluded: usize,
    pub rejections: usize,
    /// `rejections / replications`.
    pub rejection_rate: f64,
    pub mean_statistic: Option<f64>,
    pub variance_statistic: Option<f64>,
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub generator: String,
    pub gaussian_method: String,
    pub critical_value: f64,
    pub plan: SimulationPlan,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub summary: SimulationSummary,
    pub records: Vec<ReplicationRecord>,
}

impl SimulationResult {
    /// Statistics of one cell in replication order.
    pub fn statistics(&self, cell: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.cell == cell).filter_map(|r| r.statistic).collect()
    }
}

fn replicate(
    plan: &SimulationPlan,
    cell: usize,
    k: usize,
    h: f64,
    rep: usize,
    shared_dirs: Option<&DirectionSet>,
    z: f64,
) -> Result<ReplicationRecord> {
    let stream = |role: u64| derive_stream_id(&[cell as u64, rep as u64, role]);
    let d = plan.d;
    let x = sample_gaussian(&GaussianSpec::standard(d)?, plan.n, plan.master_seed, stream(ROLE_X))?;
    let shift = (d as f64).sqrt() + h;
    let y = sample_gaussian(&GaussianSpec::shifted_first_axis(d, shift)?, plan.m, plan.master_seed, stream(ROLE_Y))?;
    let fresh;
    let dirs = match shared_dirs {
        Some(dirs) => dirs,
        None => {
            fresh = sample_directions(d, k, plan.master_seed, stream(ROLE_DIRS))?;
            &fresh
        }
    };
    let analysis = swd_core::analyze(&x, &y, dirs, plan.p, PotentialSides::Both)?;
    let variance = analysis.variance()?;
    let estimate = analysis.estimate.sw_pp;
    let report = InferenceReport::new(estimate, plan.n, plan.m, k, variance, plan.delta, plan.level);
    let (statistic, reject) = match report {
        Ok(r) => (Some(r.statistic), Some(r.statistic.abs() > z)),
        Err(swd_core::Error::DegenerateVariance) => (None, None),
        Err(e) => return Err(e.into()),
    };
    Ok(ReplicationRecord {
        cell,
        k,
        h,
        replication: rep,
        estimate,
        combined_variance: variance.combined,
        statistic,
        reject,
    })
}

/// Runs every cell of the plan on the current rayon pool.
pub fn run_plan(plan: &SimulationPlan) -> Result<SimulationResult> {
    plan.validate()?;
    let z = critical_value(plan.level)?;
    let mut records = Vec::with_capacity(plan.cells().len() * plan.replications);
    let mut cells = Vec::new();
    for (cell, (k, h)) in plan.cells().into_iter().enumerate() {
        let shared = if plan.reuse_directions {
            Some(sample_directions(plan.d, k, plan.master_seed, derive_stream_id(&[cell as u64, ROLE_DIRS]))?)
        } else {
            None
        };
        let cell_records = (0..plan.replications)
            .into_par_iter()
            .map(|rep| replicate(plan, cell, k, h, rep, shared.as_ref(), z))
            .collect::<Result<Vec<_>>>()?;
        let stats: Vec<f64> = cell_records.iter().filter_map(|r| r.statistic).collect();
        let rejections = cell_records.iter().filter(|r| r.reject == Some(true)).count();
        let used = stats.len();
        cells.push(CellSummary {
            cell,
            k,
            h,
            replications: used,
            excluded: plan.replications - used,
            rejections,
            rejection_rate: if used > 0 { rejections as f64 / used as f64 } else { 0.0 },
            mean_statistic: (used > 0).then(|| mean(&stats)),
            variance_statistic: (used > 0).then(|| population_variance(&stats)),
            histogram: if used > 0 { Some(histogram(&stats, plan.bins)?) } else { None },
        });
        records.extend(cell_records);
    }
    Ok(SimulationResult {
        summary: SimulationSummary {
            generator: GENERATOR.into(),
            gaussian_method: GAUSSIAN_METHOD.into(),
            critical_value: z,
            plan: plan.clone(),
            cells,
        },
        records,
    })
}

pub const RECORDS_FILE: &str = "replications.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `replications.csv` and `summary.json` into `dir`.
pub fn write_result(dir: &Path, result: &SimulationResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(RECORDS_FILE);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &result.records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json_path = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&result.summary)?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
}

/// Reads back what [`write_result`] wrote.
pub fn read_result(dir: &Path) -> Result<SimulationResult> {
    let mut r = csv::Reader::from_path(dir.join(RECORDS_FILE))?;
    let records = r.deserialize().collect::<std::result::Result<Vec<ReplicationRecord>, _>>()?;
    let json_path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    Ok(SimulationResult { summary: serde_json::from_str(&text)?, records })
}

/// Plain-text table of rejection rates.
pub fn rate_table(summary: &SimulationSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>8} {:>10} {:>8} {:>8} {:>10}", "k", "h", "used", "excl", "r");
    for c in &summary.cells {
        let _ = writeln!(
            out,
            "{:>8} {:>10.4} {:>8} {:>8} {:>10.4}",
            c.k, c.h, c.replications, c.excluded, c.rejection_rate
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> SimulationPlan {
        SimulationPlan {
            p: 2.0,
            d: 3,
            n: 40,
            m: 30,
            k: KValues::Many(vec![4, 20]),
            h_values: vec![0.0, 1.0],
            delta: 1.0,
            replications: 6,
            level: 0.95,
            master_seed: 17,
            reuse_directions: false,
            bins: 5,
        }
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(h.counts, vec![3]);
        let h = histogram(&[0.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        let h = histogram(&[2.0, 2.0], 4).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 2);
        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&[1.0], 0).is_err());
    }

    #[test]
    fn histogram_of_normal_quantiles() {
        // deterministic N(0,1)-like vector: normal quantiles of a uniform grid
        let n = 4000;
        let values: Vec<f64> = (0..n).map(|i| swd_core::normal::quantile((i as f64 + 0.5) / n as f64)).collect();
        let h = histogram(&values, 200).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), n as u64);
        let q = swd_core::normal::quantile(0.975);
        let inside = values.iter().filter(|v| v.abs() <= q).count() as f64 / n as f64;
        assert!((inside - 0.95).abs() < 1e-3);
    }

    #[test]
    fn plan_validation() {
        let mut p = small_plan();
        p.p = 3.0;
        assert!(matches!(run_plan(&p), Err(Error::Plan(_))));
        let mut p = small_plan();
        p.replications = 0;
        assert!(p.validate().is_err());
        let mut p = small_plan();
        p.level = 1.0;
        assert!(p.validate().is_err());
        let mut p = small_plan();
        p.k = KValues::One(1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn plan_json_accepts_scalar_or_list_k() {
        let text = r#"{"p":2,"d":2,"n":10,"m":10,"k":5,"h_values":[0],"delta":1,"replications":1,"master_seed":3}"#;
        let plan: SimulationPlan = serde_json::from_str(text).unwrap();
        assert_eq!(plan.k.to_vec(), vec![5]);
        assert_eq!(plan.level, 0.95);
        assert!(!plan.reuse_directions);
        let text = r#"{"p":2,"d":2,"n":10,"m":10,"k":[5,6],"h_values":[0],"delta":1,"replications":1,"master_seed":3,"bogus":1}"#;
        assert!(serde_json::from_str::<SimulationPlan>(text).is_err());
    }

    #[test]
    fn single_replication() {
        let mut p = small_plan();
        p.replications = 1;
        let res = run_plan(&p).unwrap();
        for c in &res.summary.cells {
            assert_eq!(c.replications + c.excluded, 1);
            assert!(c.rejection_rate == 0.0 || c.rejection_rate == 1.0);
        }
        assert_eq!(res.statistics(0).len(), 1);
    }

    #[test]
    fn rates_recompute_from_statistics() {
        let res = run_plan(&small_plan()).unwrap();
        let z = res.summary.critical_value;
        for c in &res.summary.cells {
            let stats = res.statistics(c.cell);
            let r = stats.iter().filter(|t| t.abs() > z).count() as f64 / stats.len() as f64;
            assert_eq!(r, c.rejection_rate);
        }
    }

    #[test]
    fn reproducible_across_pools_and_reused_directions() {
        let plan = small_plan();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(5).build().unwrap();
        let a = one.install(|| run_plan(&plan)).unwrap();
        let b = many.install(|| run_plan(&plan)).unwrap();
        assert_eq!(a, b);
        let mut reuse = plan.clone();
        reuse.reuse_directions = true;
        let c = run_plan(&reuse).unwrap();
        assert_ne!(c.records, a.records);
    }

    #[test]
    fn files_round_trip() {
        let res = run_plan(&small_plan()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_result(dir.path(), &res).unwrap();
        assert_eq!(read_result(dir.path()).unwrap(), res);
        assert!(rate_table(&res.summary).lines().count() == 1 + res.summary.cells.len());
    }
}
