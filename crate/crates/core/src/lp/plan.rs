use serde::{Deserialize, Serialize};

use super::simplex::{solve_lp, KktReport, LpProblem, LpStatus};
use crate::error::{dim_err, Error, Result};
use crate::nn::Matrix;
use crate::sim::Scenario;

/// Default internal solver tolerance.
pub const SOLVER_TOL: f64 = 1e-8;

/// The plan LP of one scenario together with its variable layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanLp {
    pub lp: LpProblem,
    /// `(user, frame)` of each LP variable.
    pub vars: Vec<(usize, usize)>,
    pub k_max: usize,
    pub n_frames: usize,
}

/// Minimizes total allocated frame time `Σ s_j^k` subject to
/// `Σ_j s_j^k r_j^k = 1` per active user and, for every base station and
/// frame, `Σ_{k associated} s_j^k ≤ 1`. Padded users get no variables.
pub fn build_lp(sc: &Scenario) -> Result<PlanLp> {
    sc.validate()?;
    let (k_max, t_f, n_bs) = (sc.k_max(), sc.n_frames(), sc.n_bs());
    for k in 0..sc.k {
        if (0..t_f).all(|j| sc.norm_rates.get(k, j) <= 0.0) {
            return Err(Error::StructurallyInfeasible(format!(
                "user {k} has zero rate in every frame of the window"
            )));
        }
    }
    let vars: Vec<(usize, usize)> = (0..sc.k)
        .flat_map(|k| (0..t_f).map(move |j| (k, j)))
        .collect();
    let n = vars.len();
    let a_eq = Matrix::from_fn(sc.k, n, |k, v| {
        let (kk, j) = vars[v];
        if kk == k {
            sc.norm_rates.get(k, j)
        } else {
            0.0
        }
    });
    let a_ub = Matrix::from_fn(n_bs * t_f, n, |row, v| {
        let (i, j) = (row / t_f, row % t_f);
        let (k, jj) = vars[v];
        if jj == j && sc.assoc[i].get(k, j) != 0.0 {
            1.0
        } else {
            0.0
        }
    });
    Ok(PlanLp {
        lp: LpProblem {
            c: vec![1.0; n],
            a_eq,
            b_eq: vec![1.0; sc.k],
            a_ub,
            b_ub: vec![1.0; n_bs * t_f],
        },
        vars,
        k_max,
        n_frames: t_f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    /// `k_max x n_frames` plan; rows of padded users are zero.
    pub plan: Matrix,
    /// Total allocated frame time `Σ s_j^k`.
    pub objective: f64,
    pub status: PlanStatus,
    pub kkt: KktReport,
}

pub fn solve_plan_lp(plp: &PlanLp, tol: f64) -> Result<PlanSolution> {
    let sol = solve_lp(&plp.lp, tol)?;
    let status = match sol.status {
        LpStatus::Optimal => PlanStatus::Optimal,
        LpStatus::Infeasible => PlanStatus::Infeasible,
        LpStatus::Unbounded => PlanStatus::Unbounded,
    };
    let mut plan = Matrix::zeros(plp.k_max, plp.n_frames);
    if status == PlanStatus::Optimal {
        for (&(k, j), &v) in plp.vars.iter().zip(&sol.x) {
            plan.set(k, j, v);
        }
    }
    Ok(PlanSolution {
        plan,
        objective: sol.objective,
        status,
        kkt: sol.kkt,
    })
}

/// Builds and solves the plan LP of `sc`.
pub fn solve_plan(sc: &Scenario, tol: f64) -> Result<PlanSolution> {
    solve_plan_lp(&build_lp(sc)?, tol)
}

/// Constraint residuals of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    /// `max_k |Σ_j s_j^k r_j^k − 1|` over active users.
    pub qos_residual: f64,
    /// `max_{i,j} (Σ_{k associated} s_j^k − 1)⁺`.
    pub capacity_residual: f64,
    /// Smallest plan entry.
    pub min_entry: f64,
    /// Total allocation on padded users.
    pub padding_mass: f64,
    pub negativity: bool,
    pub feasible: bool,
}

pub fn verify_plan(plan: &Matrix, sc: &Scenario, tol: f64) -> Result<PlanReport> {
    if plan.shape() != sc.norm_rates.shape() {
        return dim_err(format!(
            "plan is {:?}, scenario is {:?}",
            plan.shape(),
            sc.norm_rates.shape()
        ));
    }
    let (k_max, t_f) = plan.shape();
    let mut qos_residual: f64 = 0.0;
    for k in 0..sc.k {
        let delivered: f64 = (0..t_f)
            .map(|j| plan.get(k, j) * sc.norm_rates.get(k, j))
            .sum();
        qos_residual = qos_residual.max((delivered - 1.0).abs());
    }
    let mut capacity_residual: f64 = 0.0;
    for m in &sc.assoc {
        for j in 0..t_f {
            let load: f64 = (0..k_max).map(|k| m.get(k, j) * plan.get(k, j)).sum();
            capacity_residual = capacity_residual.max(load - 1.0);
        }
    }
    let min_entry = plan.data().iter().copied().fold(f64::INFINITY, f64::min);
    let padding_mass: f64 = (sc.k..k_max)
        .flat_map(|k| plan.row(k))
        .map(|v| v.abs())
        .sum();
    let negativity = min_entry < -tol;
    Ok(PlanReport {
        qos_residual,
        capacity_residual,
        min_entry,
        padding_mass,
        negativity,
        feasible: qos_residual <= tol
            && capacity_residual <= tol
            && !negativity
            && padding_mass <= tol,
    })
}
