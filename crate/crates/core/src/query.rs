//! Threshold queries on the earth mover's distance.
//!
//! The union of both sets is decomposed level by level into balls of
//! halving radius. At each level every ball is collapsed onto its center,
//! the mass that cancels inside a ball is dropped, and the small leftover
//! instance is solved. Its cost brackets the true distance tightly enough to
//! stop as soon as the threshold falls outside the bracket.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cover::{next_level, CoverLevel, SplitMode, MAX_RHO};
use crate::error::{EmdError, Result};
use crate::geometry::{approx_radius, check_dims, euclidean, JointPoints, PointSource, WeightedPointSet};
use crate::tolerance::Tolerances;
use crate::transport::{cancel_colocated, sinkhorn_cost, solve_exact_with, SinkhornParams, TransportInstance};

/// Sub-solver used on each level's surplus instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolverChoice {
    #[default]
    Exact,
    Sinkhorn(SinkhornParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    /// `T`, in distance units.
    pub threshold: f64,
    pub epsilon: f64,
    pub solver: SolverChoice,
    /// In fixed mode `rho` is the doubling dimension of each input set; the
    /// union is split with `rho + 1`.
    pub mode: SplitMode,
    pub tolerances: Tolerances,
}

impl QueryParams {
    pub fn new(threshold: f64, epsilon: f64) -> Self {
        Self {
            threshold,
            epsilon,
            solver: SolverChoice::Exact,
            mode: SplitMode::Adaptive,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(EmdError::InvalidArgument(format!("epsilon must be in (0, 1), got {}", self.epsilon)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(EmdError::InvalidArgument(format!(
                "threshold must be finite and nonnegative, got {}",
                self.threshold
            )));
        }
        if let SplitMode::Fixed { rho } = self.mode {
            if rho == 0 || rho >= MAX_RHO {
                return Err(EmdError::InvalidArgument(format!("rho must be in 1..{MAX_RHO}, got {rho}")));
            }
        }
        Ok(())
    }

    fn union_mode(&self) -> SplitMode {
        match self.mode {
            SplitMode::Fixed { rho } => SplitMode::Fixed { rho: rho + 1 },
            SplitMode::Adaptive => SplitMode::Adaptive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// The distance exceeds the threshold.
    #[serde(rename = "CASE1")]
    Case1,
    /// The distance is below the threshold.
    #[serde(rename = "CASE2")]
    Case2,
    /// The distance is within `ε·Δ̃` of the threshold.
    #[serde(rename = "CASE3")]
    Case3,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Case1 => "CASE1",
            Verdict::Case2 => "CASE2",
            Verdict::Case3 => "CASE3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: u32,
    pub node_count: usize,
    pub surplus_sources: usize,
    pub surplus_sinks: usize,
    /// Surplus transport cost divided by the original total weight.
    pub estimate: f64,
    pub band: f64,
    pub target_radius: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub verdict: Verdict,
    pub levels: Vec<LevelTrace>,
    pub delta_tilde: f64,
    pub h_max: u32,
}

impl QueryOutcome {
    /// Level at which the loop stopped; 0 when no level was built.
    pub fn final_level(&self) -> u32 {
        self.levels.last().map_or(0, |t| t.level)
    }
}

/// Mass left at ball centers after cancelling what each ball holds of both
/// sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SurplusInstance {
    pub sources: Option<WeightedPointSet>,
    pub sinks: Option<WeightedPointSet>,
    /// Total weight of the original sets.
    pub total_weight: f64,
}

impl SurplusInstance {
    pub fn source_count(&self) -> usize {
        self.sources.as_ref().map_or(0, |s| s.len())
    }

    pub fn sink_count(&self) -> usize {
        self.sinks.as_ref().map_or(0, |s| s.len())
    }

    pub fn source_mass(&self) -> f64 {
        self.sources.as_ref().map_or(0.0, |s| s.total_weight())
    }

    pub fn sink_mass(&self) -> f64 {
        self.sinks.as_ref().map_or(0.0, |s| s.total_weight())
    }
}

/// Deepest level: `ceil(log2(1/ε)) + 5`.
pub fn h_max(epsilon: f64) -> u32 {
    (1.0 / epsilon).log2().ceil().max(0.0) as u32 + 5
}

/// Half-width of the acceptance band at `level`: `Δ̃ / 2^(level − 3)`.
pub fn band(delta_tilde: f64, level: u32) -> f64 {
    delta_tilde * 2f64.powi(3 - level as i32)
}

/// Target ball radius at `level`: `Δ̃ / 2^(level − 1)`.
pub fn level_radius(delta_tilde: f64, level: u32) -> f64 {
    delta_tilde * 2f64.powi(1 - level as i32)
}

/// Collapses every node of `level` onto its center and keeps the per-node
/// surplus. `level` must partition the indices of `a` followed by `b`.
pub fn aggregate_level(
    level: &CoverLevel,
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    tol: &Tolerances,
) -> Result<SurplusInstance> {
    check_dims(a.dim(), b.dim())?;
    if !tol.balanced(a.total_weight(), b.total_weight()) {
        return Err(EmdError::Imbalance {
            source_total: a.total_weight(),
            sink_total: b.total_weight(),
        });
    }
    let joint = JointPoints::new(a, b)?;
    let split = joint.split();
    let total = joint.len();
    let total_weight = a.total_weight().max(b.total_weight());

    let mut centers = Vec::with_capacity(level.nodes.len());
    let mut source_mass = Vec::with_capacity(level.nodes.len());
    let mut sink_mass = Vec::with_capacity(level.nodes.len());
    for node in &level.nodes {
        let (mut n, mut m) = (0.0, 0.0);
        for &i in &node.members {
            if i < split {
                n += a.weight(i);
            } else if i < total {
                m += b.weight(i - split);
            } else {
                return Err(EmdError::InvalidArgument(format!("member {i} out of range for {total} points")));
            }
        }
        centers.push(joint.point(node.center));
        source_mass.push(n);
        sink_mass.push(m);
    }
    if centers.is_empty() {
        return Err(EmdError::EmptySet);
    }
    let zero = tol.surplus_zero * total_weight;
    let (sources, sinks) = cancel_colocated(&centers, &source_mass, &sink_mass, zero)?;
    let mut out = SurplusInstance {
        sources,
        sinks,
        total_weight,
    };
    // One-sided leftovers can only come from input imbalance within
    // tolerance; they carry no transport.
    if out.sources.is_none() != out.sinks.is_none() {
        let left = out.source_mass().max(out.sink_mass());
        if left <= tol.weight_balance * total_weight.max(1.0) {
            out.sources = None;
            out.sinks = None;
        } else {
            return Err(EmdError::Imbalance {
                source_total: out.source_mass(),
                sink_total: out.sink_mass(),
            });
        }
    }
    Ok(out)
}

fn surplus_cost(surplus: SurplusInstance, params: &QueryParams) -> Result<f64> {
    let (Some(src), Some(snk)) = (surplus.sources, surplus.sinks) else {
        return Ok(0.0);
    };
    let inst = TransportInstance::with_tolerances(src, snk, &params.tolerances)?;
    match params.solver {
        SolverChoice::Exact => Ok(solve_exact_with(&inst, &params.tolerances)?.cost),
        SolverChoice::Sinkhorn(sp) => Ok(sinkhorn_cost(&inst, &sp)?.0),
    }
}

/// Decides whether `EMD(a, b)` lies above, below, or within `ε·Δ̃` of the
/// threshold.
pub fn emd_query(a: &WeightedPointSet, b: &WeightedPointSet, params: &QueryParams) -> Result<QueryOutcome> {
    params.validate()?;
    check_dims(a.dim(), b.dim())?;
    let tol = &params.tolerances;
    if !tol.balanced(a.total_weight(), b.total_weight()) {
        return Err(EmdError::Imbalance {
            source_total: a.total_weight(),
            sink_total: b.total_weight(),
        });
    }
    let t = params.threshold;
    let h_max = h_max(params.epsilon);
    let delta_tilde = approx_radius(a).0.max(approx_radius(b).0);

    if delta_tilde == 0.0 {
        let d = euclidean(a.point(0), b.point(0));
        let verdict = if (d - t).abs() <= tol.tie {
            Verdict::Case3
        } else if d > t {
            Verdict::Case1
        } else {
            Verdict::Case2
        };
        return Ok(QueryOutcome {
            verdict,
            levels: Vec::new(),
            delta_tilde,
            h_max,
        });
    }

    let joint = JointPoints::new(a, b)?;
    let mode = params.union_mode();
    let mut level = CoverLevel::root(&joint, 0)?;
    let mut levels = Vec::new();
    for i in 1..=h_max {
        let start = Instant::now();
        let radius = level_radius(delta_tilde, i);
        level = next_level(&joint, &level, radius, mode)?;
        let surplus = aggregate_level(&level, a, b, tol)?;
        let (surplus_sources, surplus_sinks) = (surplus.source_count(), surplus.sink_count());
        let estimate = surplus_cost(surplus, params)? / a.total_weight().max(b.total_weight());
        let band = band(delta_tilde, i);
        levels.push(LevelTrace {
            level: i,
            node_count: level.nodes.len(),
            surplus_sources,
            surplus_sinks,
            estimate,
            band,
            target_radius: radius,
            elapsed_secs: start.elapsed().as_secs_f64(),
        });
        let verdict = if estimate >= t + band {
            Some(Verdict::Case1)
        } else if estimate <= t - band {
            Some(Verdict::Case2)
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok(QueryOutcome {
                verdict,
                levels,
                delta_tilde,
                h_max,
            });
        }
    }
    Ok(QueryOutcome {
        verdict: Verdict::Case3,
        levels,
        delta_tilde,
        h_max,
    })
}
