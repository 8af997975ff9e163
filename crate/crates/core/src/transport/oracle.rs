//! Exhaustive search over integral flows. Only for tiny instances; used to
//! check the exact solver.

use crate::error::{EmdError, Result};

use super::TransportInstance;

/// Largest total mass the enumeration accepts.
pub const ORACLE_MAX_TOTAL: u32 = 12;

/// Minimum transport cost found by enumerating every integral feasible flow.
///
/// All weights must be nonnegative integers with equal totals of at most 12.
pub fn brute_force_oracle(inst: &TransportInstance) -> Result<f64> {
    let supply = integral(inst.sources().weights())?;
    let demand = integral(inst.sinks().weights())?;
    let (ta, tb) = (supply.iter().sum::<u32>(), demand.iter().sum::<u32>());
    if ta != tb {
        return Err(EmdError::Imbalance {
            source_total: ta.into(),
            sink_total: tb.into(),
        });
    }
    if ta > ORACLE_MAX_TOTAL {
        return Err(EmdError::InvalidArgument(format!(
            "oracle total mass {ta} exceeds {ORACLE_MAX_TOTAL}"
        )));
    }
    let n = demand.len();
    let costs: Vec<f64> = (0..supply.len())
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| inst.cost(i, j))
        .collect();
    let mut search = Search {
        costs: &costs,
        n,
        supply,
        demand,
        best: f64::INFINITY,
    };
    search.fill(0, 0, 0.0);
    Ok(search.best)
}

fn integral(weights: &[f64]) -> Result<Vec<u32>> {
    weights
        .iter()
        .map(|&w| {
            if w >= 0.0 && w.fract() == 0.0 && w <= f64::from(ORACLE_MAX_TOTAL) {
                Ok(w as u32)
            } else {
                Err(EmdError::InvalidArgument(format!("oracle needs small integer weights, got {w}")))
            }
        })
        .collect()
}

struct Search<'a> {
    costs: &'a [f64],
    n: usize,
    /// Remaining mass per source and sink.
    supply: Vec<u32>,
    demand: Vec<u32>,
    best: f64,
}

impl Search<'_> {
    fn fill(&mut self, i: usize, j: usize, cost: f64) {
        if cost >= self.best {
            return;
        }
        if i == self.supply.len() {
            self.best = cost;
            return;
        }
        let c = self.costs[i * self.n + j];
        let cap = self.supply[i].min(self.demand[j]);
        if j + 1 == self.n {
            // The last cell of a row must take whatever the row has left.
            let x = self.supply[i];
            if x > self.demand[j] {
                return;
            }
            self.supply[i] = 0;
            self.demand[j] -= x;
            self.fill(i + 1, 0, cost + f64::from(x) * c);
            self.demand[j] += x;
            self.supply[i] = x;
            return;
        }
        for x in 0..=cap {
            self.supply[i] -= x;
            self.demand[j] -= x;
            self.fill(i, j + 1, cost + f64::from(x) * c);
            self.supply[i] += x;
            self.demand[j] += x;
        }
    }
}
