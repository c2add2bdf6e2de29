//! Search for the capability delta that maximizes validation satisfaction.
//!
//! The expected capability of a reformulation is parameterized as the
//! predicted capability of the input prompt plus a fixed integer delta. The
//! delta lattice is searched by GP-based Bayesian optimization with
//! expected improvement, or exhaustively by [`brute_force_oracle`].

mod acquisition;
mod gp;
mod objective;

use std::collections::HashSet;
use std::path::Path;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CaprError, Result};

pub use acquisition::{expected_improvement, DEFAULT_XI};
pub use gp::{GpHyper, GpState, Posterior};
pub use objective::{target_condition, ObjectiveEstimator, DEFAULT_TUNING_STEPS};

/// Offsets added to the predicted capability bins and phrase count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeltaVector {
    pub overall: i64,
    pub similarity: i64,
    pub aesthetic: i64,
    pub length: i64,
}

impl DeltaVector {
    pub const fn new(overall: i64, similarity: i64, aesthetic: i64, length: i64) -> Self {
        Self {
            overall,
            similarity,
            aesthetic,
            length,
        }
    }

    /// Overall pinned to the top bin, others at the sweep baseline
    /// (similarity 0, aesthetic 9, length 5).
    pub const REFERENCE: DeltaVector = DeltaVector::new(9, 0, 9, 5);

    fn as_array(&self) -> [i64; 4] {
        [self.overall, self.similarity, self.aesthetic, self.length]
    }

    fn from_array(a: [i64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Inclusive integer range of one delta component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimBounds {
    pub lo: i64,
    pub hi: i64,
}

impl DimBounds {
    pub const fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: i64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn is_free(&self) -> bool {
        self.hi > self.lo
    }
}

/// Integer lattice of candidate deltas, enumerated lexicographically in
/// (overall, similarity, aesthetic, length) order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub overall: DimBounds,
    pub similarity: DimBounds,
    pub aesthetic: DimBounds,
    pub length: DimBounds,
}

impl SearchSpace {
    /// Overall pinned to `k - 1`; similarity and aesthetic free in
    /// `[0, k - 1]`, length in `[0, 9]`.
    pub fn default_for(k: usize) -> Self {
        let kmax = k as i64 - 1;
        Self {
            overall: DimBounds::fixed(kmax),
            similarity: DimBounds::new(0, kmax),
            aesthetic: DimBounds::new(0, kmax),
            length: DimBounds::new(0, 9),
        }
    }

    fn dims(&self) -> [DimBounds; 4] {
        [self.overall, self.similarity, self.aesthetic, self.length]
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let kmax = k as i64 - 1;
        for (i, d) in self.dims().iter().enumerate() {
            if d.is_empty() {
                return Err(CaprError::invalid(format!("empty bounds {d:?}")));
            }
            if i < 3 && (d.lo < -kmax || d.hi > kmax) {
                return Err(CaprError::invalid(format!(
                    "bin delta bounds {d:?} exceed ±{kmax}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims().iter().map(DimBounds::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.dims().iter().any(DimBounds::is_empty)
    }

    pub fn contains(&self, d: &DeltaVector) -> bool {
        self.dims()
            .iter()
            .zip(d.as_array())
            .all(|(b, v)| (b.lo..=b.hi).contains(&v))
    }

    /// Point at lexicographic position `index`.
    pub fn point(&self, mut index: usize) -> DeltaVector {
        let dims = self.dims();
        let mut out = [0i64; 4];
        for i in (0..4).rev() {
            let n = dims[i].len();
            out[i] = dims[i].lo + (index % n) as i64;
            index /= n;
        }
        DeltaVector::from_array(out)
    }

    pub fn points(&self) -> impl Iterator<Item = DeltaVector> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Free coordinates scaled to `[0, 1]`; pinned dimensions are dropped.
    pub fn normalize(&self, d: &DeltaVector) -> Vec<f64> {
        self.dims()
            .iter()
            .zip(d.as_array())
            .filter(|(b, _)| b.is_free())
            .map(|(b, v)| (v - b.lo) as f64 / (b.hi - b.lo) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub delta: DeltaVector,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_delta: DeltaVector,
    pub best_value: f64,
    pub trace: Vec<TracePoint>,
    pub calls_used: usize,
}

/// `delta.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaArtifact {
    pub k: usize,
    pub best_delta: DeltaVector,
    pub best_value: f64,
    pub trace: Vec<TracePoint>,
    pub calls_used: usize,
    pub seed: u64,
    pub budget: usize,
}

impl DeltaArtifact {
    pub fn new(result: &TuneResult, k: usize, seed: u64, budget: usize) -> Self {
        Self {
            k,
            best_delta: result.best_delta,
            best_value: result.best_value,
            trace: result.trace.clone(),
            calls_used: result.calls_used,
            seed,
            budget,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| CaprError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerConfig {
    pub budget: usize,
    pub n_initial: usize,
    pub seed: u64,
    pub hyper: GpHyper<f64>,
    pub xi: f64,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            budget: 50,
            n_initial: 10,
            seed: 0,
            hyper: GpHyper::default(),
            xi: DEFAULT_XI,
        }
    }
}

/// Best of a trace: highest value, ties to the lexicographically smallest delta.
fn best_of(trace: &[TracePoint]) -> Option<TracePoint> {
    trace.iter().copied().reduce(|a, b| {
        if b.value > a.value || (b.value == a.value && b.delta < a.delta) {
            b
        } else {
            a
        }
    })
}

/// Bayesian optimization over the lattice.
///
/// `n_initial` distinct points are drawn uniformly without replacement; each
/// later call fits a GP to all observations and evaluates the unvisited
/// point of highest expected improvement (ties to the lexicographically
/// smallest). A budget at or above the lattice size evaluates the remaining
/// points in lattice order instead of refitting the GP for each.
pub fn tune<F>(space: &SearchSpace, config: &TunerConfig, mut objective: F) -> Result<TuneResult>
where
    F: FnMut(&DeltaVector) -> Result<f64>,
{
    if config.n_initial == 0 || config.budget < config.n_initial {
        return Err(CaprError::invalid(format!(
            "need budget >= n_initial >= 1, got budget {} and n_initial {}",
            config.budget, config.n_initial
        )));
    }
    let n_points = space.len();
    if n_points < config.n_initial {
        return Err(CaprError::invalid(format!(
            "search space has {n_points} points, fewer than n_initial {}",
            config.n_initial
        )));
    }
    let budget = config.budget.min(n_points);
    let coords: Vec<Vec<f64>> = space.points().map(|p| space.normalize(&p)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = rand::seq::index::sample(&mut rng, n_points, config.n_initial);

    let mut visited = HashSet::with_capacity(budget);
    let mut trace: Vec<TracePoint> = Vec::with_capacity(budget);
    let mut observe = |idx: usize, trace: &mut Vec<TracePoint>| -> Result<()> {
        let delta = space.point(idx);
        let value = objective(&delta)?;
        if !value.is_finite() {
            return Err(CaprError::Numerical(format!("objective returned {value} at {delta:?}")));
        }
        debug!("tune: {delta:?} -> {value}");
        trace.push(TracePoint { delta, value });
        Ok(())
    };
    let mut visited_idx = Vec::with_capacity(budget);
    for idx in initial.iter() {
        visited.insert(idx);
        visited_idx.push(idx);
        observe(idx, &mut trace)?;
    }

    if budget == n_points {
        // Every point gets evaluated; acquisition would only reorder the calls.
        for idx in 0..n_points {
            if visited.insert(idx) {
                observe(idx, &mut trace)?;
            }
        }
    }
    while trace.len() < budget {
        let xs: Vec<Vec<f64>> = visited_idx.iter().map(|&i| coords[i].clone()).collect();
        let ys: Vec<f64> = trace.iter().map(|t| t.value).collect();
        let gp = GpState::fit(&xs, &ys, config.hyper)?;
        let best = gp.best_standardized().expect("at least one observation");
        let mut pick: Option<(usize, f64)> = None;
        for (idx, x) in coords.iter().enumerate() {
            if visited.contains(&idx) {
                continue;
            }
            let ei = gp.expected_improvement(x, best, config.xi);
            if pick.is_none_or(|(_, top)| ei > top) {
                pick = Some((idx, ei));
            }
        }
        let (idx, _) = pick.expect("budget is capped at the lattice size");
        visited.insert(idx);
        visited_idx.push(idx);
        observe(idx, &mut trace)?;
    }

    let best = best_of(&trace).expect("non-empty trace");
    Ok(TuneResult {
        best_delta: best.delta,
        best_value: best.value,
        calls_used: trace.len(),
        trace,
    })
}

pub const DEFAULT_ORACLE_CAP: usize = 10_000;

/// Every lattice point with its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    pub table: Vec<TracePoint>,
    pub argmax: DeltaVector,
    pub best_value: f64,
}

impl OracleTable {
    /// Smallest value still inside the top `fraction` of the table
    /// (at least one entry).
    pub fn top_fraction_threshold(&self, fraction: f64) -> f64 {
        let mut values: Vec<f64> = self.table.iter().map(|t| t.value).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let keep = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
        values[keep - 1]
    }

    pub fn value_of(&self, d: &DeltaVector) -> Option<f64> {
        self.table.iter().find(|t| t.delta == *d).map(|t| t.value)
    }
}

/// Exhaustive evaluation of the lattice, refused above `cap` points.
pub fn brute_force_oracle<F>(space: &SearchSpace, cap: usize, mut objective: F) -> Result<OracleTable>
where
    F: FnMut(&DeltaVector) -> Result<f64>,
{
    let n = space.len();
    if n > cap {
        return Err(CaprError::SpaceTooLarge { points: n, cap });
    }
    let table = space
        .points()
        .map(|delta| Ok(TracePoint { delta, value: objective(&delta)? }))
        .collect::<Result<Vec<_>>>()?;
    let best = best_of(&table).ok_or_else(|| CaprError::invalid("empty search space"))?;
    Ok(OracleTable {
        argmax: best.delta,
        best_value: best.value,
        table,
    })
}
