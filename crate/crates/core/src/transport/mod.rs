//! Transportation solvers between two weighted point sets under the
//! Euclidean ground distance.
//!
//! Solvers return the unnormalized transport cost `Σ f_ij·‖a_i − b_j‖`;
//! dividing by the total mass is left to the caller (see
//! [`TransportPlan::emd`]).

mod oracle;
mod simplex;
mod sinkhorn;

pub use oracle::brute_force_oracle;
pub use sinkhorn::{sinkhorn_cost, solve_sinkhorn, Regularization, SinkhornDiagnostics, SinkhornParams};

use serde::{Deserialize, Serialize};

use crate::error::{EmdError, Result};
use crate::geometry::{check_dims, euclidean, PointSource, WeightedPointSet};
use crate::tolerance::Tolerances;

/// Largest cost matrix the solvers will materialize.
pub const MATERIALIZATION_CAP: usize = 50_000_000;

/// A balanced transportation problem: move the mass of `sources` onto
/// `sinks`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportInstance {
    sources: WeightedPointSet,
    sinks: WeightedPointSet,
}

impl TransportInstance {
    pub fn new(sources: WeightedPointSet, sinks: WeightedPointSet) -> Result<Self> {
        Self::with_tolerances(sources, sinks, &Tolerances::default())
    }

    pub fn with_tolerances(sources: WeightedPointSet, sinks: WeightedPointSet, tol: &Tolerances) -> Result<Self> {
        check_dims(sources.dim(), sinks.dim())?;
        if !tol.balanced(sources.total_weight(), sinks.total_weight()) {
            return Err(EmdError::Imbalance {
                source_total: sources.total_weight(),
                sink_total: sinks.total_weight(),
            });
        }
        Ok(Self { sources, sinks })
    }

    pub fn sources(&self) -> &WeightedPointSet {
        &self.sources
    }

    pub fn sinks(&self) -> &WeightedPointSet {
        &self.sinks
    }

    /// The larger of the two side totals.
    pub fn total_mass(&self) -> f64 {
        self.sources.total_weight().max(self.sinks.total_weight())
    }

    pub fn cost(&self, source: usize, sink: usize) -> f64 {
        euclidean(self.sources.point(source), self.sinks.point(sink))
    }

    /// Dense `|sources| × |sinks|` matrix of ground distances.
    pub fn cost_matrix(&self) -> Result<CostMatrix> {
        CostMatrix::between(&self.sources, &self.sinks, MATERIALIZATION_CAP)
    }

    /// Same instance with the roles of sources and sinks swapped.
    pub fn reversed(&self) -> Self {
        Self {
            sources: self.sinks.clone(),
            sinks: self.sources.clone(),
        }
    }
}

/// Row-major matrix of ground distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn between(rows: &WeightedPointSet, cols: &WeightedPointSet, cap: usize) -> Result<Self> {
        let entries = rows.len().saturating_mul(cols.len());
        if entries > cap {
            return Err(EmdError::TooLarge { entries, cap });
        }
        let mut data = Vec::with_capacity(entries);
        for p in rows.points() {
            data.extend(cols.points().map(|q| euclidean(p, q)));
        }
        if let Some(index) = data.iter().position(|c| !c.is_finite()) {
            return Err(EmdError::NonFinite { index });
        }
        Ok(Self {
            rows: rows.len(),
            cols: cols.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// One nonzero entry of a transport plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

/// A feasible flow between the two sides of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub flows: Vec<Flow>,
    /// `Σ mass · distance` over `flows`.
    pub cost: f64,
    /// Mass moved, used to turn `cost` into an EMD value.
    pub total_mass: f64,
    /// Whether `cost` has already been divided by `total_mass`.
    pub normalized: bool,
}

impl TransportPlan {
    /// The EMD value: cost per unit of mass.
    pub fn emd(&self) -> f64 {
        if self.normalized {
            self.cost
        } else if self.total_mass > 0.0 {
            self.cost / self.total_mass
        } else {
            0.0
        }
    }
}

/// Exact optimal transport via the network simplex method.
pub fn solve_exact(inst: &TransportInstance) -> Result<TransportPlan> {
    solve_exact_with(inst, &Tolerances::default())
}

pub fn solve_exact_with(inst: &TransportInstance, tol: &Tolerances) -> Result<TransportPlan> {
    let costs = inst.cost_matrix()?;
    let flows = simplex::solve(inst.sources.weights(), inst.sinks.weights(), &costs, tol)?;
    Ok(plan_from_flows(flows, &costs, inst.total_mass()))
}

/// Exact optimal cost only; skips building the plan.
pub fn exact_cost(inst: &TransportInstance) -> Result<f64> {
    solve_exact(inst).map(|p| p.cost)
}

pub(crate) fn plan_from_flows(flows: Vec<Flow>, costs: &CostMatrix, total_mass: f64) -> TransportPlan {
    let cost = flows.iter().map(|f| f.mass * costs.get(f.source, f.sink)).sum();
    TransportPlan {
        flows,
        cost,
        total_mass,
        normalized: false,
    }
}

/// Outcome of [`validate_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub valid: bool,
    pub max_source_violation: f64,
    pub max_sink_violation: f64,
    /// Flows with negative mass, as found.
    pub negative_flows: Vec<Flow>,
    /// Flows whose indices fall outside the instance.
    pub out_of_range: usize,
    /// `|stored cost − recomputed cost|`.
    pub cost_discrepancy: f64,
}

/// Checks marginal feasibility, nonnegativity, and the stored cost of a plan.
pub fn validate_plan(inst: &TransportInstance, plan: &TransportPlan) -> PlanReport {
    validate_plan_with(inst, plan, &Tolerances::default())
}

pub fn validate_plan_with(inst: &TransportInstance, plan: &TransportPlan, tol: &Tolerances) -> PlanReport {
    let (na, nb) = (inst.sources.len(), inst.sinks.len());
    let mut out_mass = vec![0.0; na];
    let mut in_mass = vec![0.0; nb];
    let mut negative_flows = Vec::new();
    let mut out_of_range = 0;
    let mut recomputed = 0.0;
    for f in &plan.flows {
        if f.source >= na || f.sink >= nb || !f.mass.is_finite() {
            out_of_range += 1;
            continue;
        }
        if f.mass < 0.0 {
            negative_flows.push(*f);
        }
        out_mass[f.source] += f.mass;
        in_mass[f.sink] += f.mass;
        recomputed += f.mass * inst.cost(f.source, f.sink);
    }
    let max_dev = |got: &[f64], want: &[f64]| {
        got.iter()
            .zip(want)
            .map(|(g, w)| (g - w).abs())
            .fold(0.0, f64::max)
    };
    let max_source_violation = max_dev(&out_mass, inst.sources.weights());
    let max_sink_violation = max_dev(&in_mass, inst.sinks.weights());
    let cost_discrepancy = (plan.cost - recomputed).abs();

    let mass_slack = tol.marginal * inst.total_mass();
    let cost_slack = tol.cost * recomputed.abs().max(plan.cost.abs()) + f64::MIN_POSITIVE;
    let valid = negative_flows.is_empty()
        && out_of_range == 0
        && max_source_violation <= mass_slack
        && max_sink_violation <= mass_slack
        && cost_discrepancy <= cost_slack;
    PlanReport {
        valid,
        max_source_violation,
        max_sink_violation,
        negative_flows,
        out_of_range,
        cost_discrepancy,
    }
}

/// Result of [`diagonal_flow_property_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalCheck {
    /// Optimal cost of the instance with co-located pairs.
    pub full_cost: f64,
    /// Optimal cost after cancelling `min(n_j, m_j)` at every pair.
    pub reduced_cost: f64,
    pub holds: bool,
}

/// Cancels the common mass at every co-located source/sink pair.
///
/// Returns the surplus sources and sinks, or `None` for a side with no
/// remaining mass.
pub(crate) fn cancel_colocated(
    points: &[&[f64]],
    source_mass: &[f64],
    sink_mass: &[f64],
    zero: f64,
) -> Result<(Option<WeightedPointSet>, Option<WeightedPointSet>)> {
    let dim = points.first().map(|p| p.len()).ok_or(EmdError::EmptySet)?;
    let mut src = (Vec::new(), Vec::new());
    let mut snk = (Vec::new(), Vec::new());
    for ((p, &n), &m) in points.iter().zip(source_mass).zip(sink_mass) {
        let surplus = n - m;
        if surplus > zero {
            src.0.extend_from_slice(p);
            src.1.push(surplus);
        } else if surplus < -zero {
            snk.0.extend_from_slice(p);
            snk.1.push(-surplus);
        }
    }
    let build = |(coords, weights): (Vec<f64>, Vec<f64>)| -> Result<Option<WeightedPointSet>> {
        if weights.is_empty() {
            Ok(None)
        } else {
            WeightedPointSet::new(coords, dim, weights).map(Some)
        }
    };
    Ok((build(src)?, build(snk)?))
}

/// Verifies that cancelling the shared mass at co-located source/sink pairs
/// leaves the optimal transport cost unchanged.
///
/// Source `j` and sink `j` must have bitwise-identical coordinates.
pub fn diagonal_flow_property_check(inst: &TransportInstance) -> Result<DiagonalCheck> {
    let (a, b) = (&inst.sources, &inst.sinks);
    if a.len() != b.len() {
        return Err(EmdError::InvalidArgument(format!(
            "co-located instance needs equal sides, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    for j in 0..a.len() {
        if a.point(j) != b.point(j) {
            return Err(EmdError::InvalidArgument(format!("pair {j} is not co-located")));
        }
    }
    let tol = Tolerances::default();
    let full = solve_exact(inst)?;
    let points: Vec<&[f64]> = (0..a.len()).map(|j| a.point(j)).collect();
    let reduced_cost = match cancel_colocated(&points, a.weights(), b.weights(), 0.0)? {
        (Some(src), Some(snk)) => {
            let reduced = TransportInstance::with_tolerances(src, snk, &tol)?;
            solve_exact(&reduced)?.cost
        }
        (None, None) => 0.0,
        (src, snk) => {
            let left = src.map_or(0.0, |s| s.total_weight());
            let right = snk.map_or(0.0, |s| s.total_weight());
            if tol.balanced(left, right) {
                0.0
            } else {
                return Err(EmdError::Imbalance {
                    source_total: left,
                    sink_total: right,
                });
            }
        }
    };
    let max_distance = inst.cost_matrix()?.max();
    let slack = tol.optimality * inst.total_mass() * max_distance;
    Ok(DiagonalCheck {
        full_cost: full.cost,
        reduced_cost,
        holds: (full.cost - reduced_cost).abs() <= slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f64]], weights: &[f64]) -> WeightedPointSet {
        WeightedPointSet::from_rows(rows, weights.to_vec()).unwrap()
    }

    #[test]
    fn single_pair() {
        let inst = TransportInstance::new(set(&[&[0.0, 0.0]], &[1.0]), set(&[&[3.0, 4.0]], &[1.0])).unwrap();
        let plan = solve_exact(&inst).unwrap();
        assert_eq!(plan.cost, 5.0);
        assert_eq!(plan.emd(), 5.0);
        assert!(validate_plan(&inst, &plan).valid);
    }

    #[test]
    fn identical_sets_cost_nothing() {
        let a = set(&[&[0.0, 1.0], &[2.0, 3.0], &[-1.0, 5.0]], &[1.0, 2.0, 0.5]);
        let inst = TransportInstance::new(a.clone(), a).unwrap();
        let plan = solve_exact(&inst).unwrap();
        assert_eq!(plan.cost, 0.0);
        assert!(validate_plan(&inst, &plan).valid);
    }

    #[test]
    fn two_sources_one_sink() {
        let inst = TransportInstance::new(
            set(&[&[0.0, 0.0], &[2.0, 0.0]], &[1.0, 1.0]),
            set(&[&[1.0, 0.0]], &[2.0]),
        )
        .unwrap();
        let plan = solve_exact(&inst).unwrap();
        assert_eq!(plan.cost, 2.0);
        assert_eq!(plan.emd(), 1.0);
        let mut flows = plan.flows.clone();
        flows.sort_by_key(|f| f.source);
        assert_eq!(
            flows,
            vec![
                Flow { source: 0, sink: 0, mass: 1.0 },
                Flow { source: 1, sink: 0, mass: 1.0 }
            ]
        );
    }

    #[test]
    fn imbalance_and_dimension_errors() {
        assert!(matches!(
            TransportInstance::new(set(&[&[0.0]], &[1.0]), set(&[&[1.0]], &[2.0])),
            Err(EmdError::Imbalance { .. })
        ));
        assert!(matches!(
            TransportInstance::new(set(&[&[0.0]], &[1.0]), set(&[&[1.0, 0.0]], &[1.0])),
            Err(EmdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negated_flow_is_reported() {
        let inst = TransportInstance::new(
            set(&[&[0.0, 0.0], &[2.0, 0.0]], &[1.0, 1.0]),
            set(&[&[1.0, 0.0]], &[2.0]),
        )
        .unwrap();
        let mut plan = solve_exact(&inst).unwrap();
        plan.flows[0].mass = -plan.flows[0].mass;
        let report = validate_plan(&inst, &plan);
        assert!(!report.valid);
        assert_eq!(report.negative_flows.len(), 1);
        assert!(report.negative_flows[0].mass < 0.0);
    }

    #[test]
    fn wrong_cost_is_reported() {
        let inst = TransportInstance::new(set(&[&[0.0]], &[1.0]), set(&[&[3.0]], &[1.0])).unwrap();
        let mut plan = solve_exact(&inst).unwrap();
        plan.cost += 1.0;
        let report = validate_plan(&inst, &plan);
        assert!(!report.valid);
        assert_eq!(report.cost_discrepancy, 1.0);
    }

    #[test]
    fn diagonal_check_full_cancellation() {
        let a = set(&[&[0.0, 0.0], &[4.0, 1.0]], &[2.0, 3.0]);
        let inst = TransportInstance::new(a.clone(), a).unwrap();
        let check = diagonal_flow_property_check(&inst).unwrap();
        assert_eq!(check.full_cost, 0.0);
        assert_eq!(check.reduced_cost, 0.0);
        assert!(check.holds);
    }

    #[test]
    fn diagonal_check_single_surplus_pair() {
        // Pair 0 has 2 surplus source units, pair 1 has 2 surplus sink
        // units, at distance 7.
        let pts: [&[f64]; 2] = [&[0.0, 0.0], &[7.0, 0.0]];
        let inst = TransportInstance::new(set(&pts, &[3.0, 1.0]), set(&pts, &[1.0, 3.0])).unwrap();
        let check = diagonal_flow_property_check(&inst).unwrap();
        assert_eq!(check.full_cost, 14.0);
        assert_eq!(check.reduced_cost, 14.0);
        assert!(check.holds);
    }

    #[test]
    fn diagonal_check_rejects_misaligned_pairs() {
        let inst = TransportInstance::new(set(&[&[0.0]], &[1.0]), set(&[&[1.0]], &[1.0])).unwrap();
        assert!(diagonal_flow_property_check(&inst).is_err());
    }

    #[test]
    fn cost_matrix_cap() {
        let a = set(&[&[0.0], &[1.0]], &[1.0, 1.0]);
        assert!(matches!(
            CostMatrix::between(&a, &a, 3),
            Err(EmdError::TooLarge { entries: 4, cap: 3 })
        ));
    }
}
