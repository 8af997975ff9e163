//! Entropy-regularized transport (Sinkhorn) in a stabilized log domain.
//!
//! Scaling iterations run on the kernel `exp((f_i + g_j − c_ij)/η)`. When a
//! scaling vector drifts out of range it is absorbed into the dual potentials
//! `f`, `g` and the kernel is rebuilt, so small `η` does not underflow. The
//! final plan is rounded onto the transportation polytope, which makes its
//! cost an upper bound on the optimum.

use serde::{Deserialize, Serialize};

use crate::error::{EmdError, Result};

use super::{CostMatrix, Flow, TransportInstance, TransportPlan};

/// Scaling factors beyond this range are folded into the potentials.
const ABSORB_AT: f64 = 1e50;

/// How the entropic regularization strength is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Regularization {
    /// Multiple of the largest ground distance in the instance.
    Relative(f64),
    /// Fixed `η`, in distance units.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    pub reg: Regularization,
    pub max_iter: usize,
    /// Stop once the L1 marginal violation is at most `tol · W`.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            reg: Regularization::Relative(0.02),
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

impl SinkhornParams {
    fn eta(&self, max_cost: f64) -> Result<f64> {
        let eta = match self.reg {
            Regularization::Relative(f) => f * max_cost,
            Regularization::Absolute(eta) => eta,
        };
        let raw = match self.reg {
            Regularization::Relative(f) | Regularization::Absolute(f) => f,
        };
        if !(raw > 0.0) || !raw.is_finite() {
            return Err(EmdError::InvalidArgument(format!(
                "regularization must be positive, got {raw}"
            )));
        }
        if !(self.tol > 0.0) {
            return Err(EmdError::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// L1 row-marginal violation before rounding, relative to `W`.
    pub marginal_error: f64,
    pub eta: f64,
}

/// Sinkhorn solution with a rounded, exactly feasible plan.
pub fn solve_sinkhorn(inst: &TransportInstance, params: &SinkhornParams) -> Result<(TransportPlan, SinkhornDiagnostics)> {
    let costs = inst.cost_matrix()?;
    let scaled = Scaled::run(inst, &costs, params)?;
    let mut flows = Vec::new();
    let cost = scaled.rounded(&costs, |i, j, mass| {
        flows.push(Flow { source: i, sink: j, mass });
    });
    let plan = TransportPlan {
        flows,
        cost,
        total_mass: inst.total_mass(),
        normalized: false,
    };
    Ok((plan, scaled.diagnostics))
}

/// Cost of the rounded Sinkhorn plan without collecting its flows.
pub fn sinkhorn_cost(inst: &TransportInstance, params: &SinkhornParams) -> Result<(f64, SinkhornDiagnostics)> {
    let costs = inst.cost_matrix()?;
    let scaled = Scaled::run(inst, &costs, params)?;
    let cost = scaled.rounded(&costs, |_, _, _| {});
    Ok((cost, scaled.diagnostics))
}

/// Converged scaling state on the rows and columns with positive mass.
struct Scaled {
    rows: Vec<usize>,
    cols: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    /// `P_ij = u_i K_ij v_j` over the kept rows and columns.
    kernel: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    diagnostics: SinkhornDiagnostics,
}

impl Scaled {
    fn run(inst: &TransportInstance, costs: &CostMatrix, params: &SinkhornParams) -> Result<Self> {
        let max_cost = costs.max();
        let eta = params.eta(max_cost)?;
        let rows: Vec<usize> = positive(inst.sources().weights());
        let cols: Vec<usize> = positive(inst.sinks().weights());
        let a: Vec<f64> = rows.iter().map(|&i| inst.sources().weight(i)).collect();
        let b: Vec<f64> = cols.iter().map(|&j| inst.sinks().weight(j)).collect();
        let (m, n) = (rows.len(), cols.len());
        let total = inst.total_mass();

        let c: Vec<f64> = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| costs.get(i, j))
            .collect();

        let mut out = Self {
            rows,
            cols,
            a,
            b,
            kernel: Vec::new(),
            u: vec![1.0; m],
            v: vec![1.0; n],
            diagnostics: SinkhornDiagnostics {
                iterations: 0,
                converged: true,
                marginal_error: 0.0,
                eta,
            },
        };
        if m == 0 || n == 0 {
            return Ok(out);
        }
        if max_cost == 0.0 {
            // Every plan is optimal; take the independent coupling.
            out.kernel = vec![1.0 / total; m * n];
            out.u = out.a.clone();
            out.v = out.b.clone();
            return Ok(out);
        }

        let mut f = vec![0.0; m];
        let mut g = vec![0.0; n];
        lse_rows(&c, &out.a, &g, eta, &mut f);
        lse_cols(&c, &out.b, &f, eta, &mut g);
        out.kernel = vec![0.0; m * n];
        build_kernel(&c, &f, &g, eta, &mut out.kernel);

        let mut kv = vec![0.0; m];
        let mut ktu = vec![0.0; n];
        let mut err = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < params.max_iter {
            mat_vec(&out.kernel, &out.v, &mut kv);
            err = out.u.iter().zip(&kv).zip(&out.a).map(|((u, k), a)| (u * k - a).abs()).sum();
            if err <= params.tol * total {
                converged = true;
                break;
            }
            iterations += 1;
            for ((u, k), a) in out.u.iter_mut().zip(&kv).zip(&out.a) {
                *u = a / k;
            }
            mat_t_vec(&out.kernel, &out.u, &mut ktu);
            for ((v, k), b) in out.v.iter_mut().zip(&ktu).zip(&out.b) {
                *v = b / k;
            }

            let finite = out.u.iter().chain(&out.v).all(|x| x.is_finite() && *x > 0.0);
            if !finite {
                // Underflow in the kernel: redo this step exactly in the log
                // domain from the last good potentials.
                lse_rows(&c, &out.a, &g, eta, &mut f);
                lse_cols(&c, &out.b, &f, eta, &mut g);
                build_kernel(&c, &f, &g, eta, &mut out.kernel);
                out.u.fill(1.0);
                out.v.fill(1.0);
            } else if out.u.iter().chain(&out.v).any(|&x| !(1.0 / ABSORB_AT..=ABSORB_AT).contains(&x)) {
                for (fi, ui) in f.iter_mut().zip(&out.u) {
                    *fi += eta * ui.ln();
                }
                for (gj, vj) in g.iter_mut().zip(&out.v) {
                    *gj += eta * vj.ln();
                }
                build_kernel(&c, &f, &g, eta, &mut out.kernel);
                out.u.fill(1.0);
                out.v.fill(1.0);
            }
        }
        if !converged {
            mat_vec(&out.kernel, &out.v, &mut kv);
            err = out.u.iter().zip(&kv).zip(&out.a).map(|((u, k), a)| (u * k - a).abs()).sum();
        }
        out.diagnostics.iterations = iterations;
        out.diagnostics.converged = converged;
        out.diagnostics.marginal_error = err / total;
        Ok(out)
    }

    /// Rounds `diag(u)·K·diag(v)` onto the marginals: scale rows down to
    /// `a`, columns down to `b`, then spread the deficit as a rank-one
    /// correction. Calls `emit` for each positive entry and returns the cost.
    fn rounded(&self, costs: &CostMatrix, mut emit: impl FnMut(usize, usize, f64)) -> f64 {
        let (m, n) = (self.a.len(), self.b.len());
        if m == 0 || n == 0 {
            return 0.0;
        }
        let entry = |i: usize, j: usize| self.u[i] * self.kernel[i * n + j] * self.v[j];

        let mut x = vec![1.0; m];
        for i in 0..m {
            let r: f64 = (0..n).map(|j| entry(i, j)).sum();
            if r > self.a[i] {
                x[i] = self.a[i] / r;
            }
        }
        let mut col = vec![0.0; n];
        for i in 0..m {
            for (j, c) in col.iter_mut().enumerate() {
                *c += x[i] * entry(i, j);
            }
        }
        let y: Vec<f64> = col
            .iter()
            .zip(&self.b)
            .map(|(&c, &b)| if c > b { b / c } else { 1.0 })
            .collect();

        let mut row_def = vec![0.0; m];
        let mut col_def = self.b.clone();
        for i in 0..m {
            let mut r = 0.0;
            for j in 0..n {
                let p = x[i] * entry(i, j) * y[j];
                r += p;
                col_def[j] -= p;
            }
            row_def[i] = (self.a[i] - r).max(0.0);
        }
        for d in &mut col_def {
            *d = d.max(0.0);
        }
        let spread: f64 = col_def.iter().sum();

        let mut cost = 0.0;
        for i in 0..m {
            let si = self.rows[i];
            let crow = costs.row(si);
            for j in 0..n {
                let mut p = x[i] * entry(i, j) * y[j];
                if spread > 0.0 {
                    p += row_def[i] * col_def[j] / spread;
                }
                if p > 0.0 {
                    let sj = self.cols[j];
                    cost += p * crow[sj];
                    emit(si, sj, p);
                }
            }
        }
        cost
    }
}

fn positive(weights: &[f64]) -> Vec<usize> {
    weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i).collect()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `f_i = η ln a_i − η LSE_j((g_j − c_ij)/η)`.
fn lse_rows(c: &[f64], a: &[f64], g: &[f64], eta: f64, f: &mut [f64]) {
    let n = g.len();
    for (i, fi) in f.iter_mut().enumerate() {
        let row = &c[i * n..(i + 1) * n];
        let lse = log_sum_exp(row.iter().zip(g).map(|(cij, gj)| (gj - cij) / eta));
        *fi = eta * (a[i].ln() - lse);
    }
}

/// `g_j = η ln b_j − η LSE_i((f_i − c_ij)/η)`.
fn lse_cols(c: &[f64], b: &[f64], f: &[f64], eta: f64, g: &mut [f64]) {
    let n = g.len();
    for (j, gj) in g.iter_mut().enumerate() {
        let lse = log_sum_exp(f.iter().enumerate().map(|(i, fi)| (fi - c[i * n + j]) / eta));
        *gj = eta * (b[j].ln() - lse);
    }
}

fn build_kernel(c: &[f64], f: &[f64], g: &[f64], eta: f64, k: &mut [f64]) {
    let n = g.len();
    for (i, fi) in f.iter().enumerate() {
        let crow = &c[i * n..(i + 1) * n];
        let krow = &mut k[i * n..(i + 1) * n];
        for ((kij, cij), gj) in krow.iter_mut().zip(crow).zip(g) {
            *kij = ((fi + gj - cij) / eta).exp();
        }
    }
}

fn mat_vec(k: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = k[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn mat_t_vec(k: &[f64], u: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    for (i, ui) in u.iter().enumerate() {
        for (o, kij) in out.iter_mut().zip(&k[i * n..(i + 1) * n]) {
            *o += ui * kij;
        }
    }
}
