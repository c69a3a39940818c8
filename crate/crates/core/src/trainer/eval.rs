//! Evaluation of learned plans against the LP oracle.
//!
//! DNN-s yields one plan per base station, each delivering every served
//! user's whole file from that station alone. A user's combined plan is the
//! per-BS plan with the least mass among the stations serving it (lower BS
//! index on ties). Since each chosen row comes from a single per-BS plan,
//! the combined plan keeps the QoS identity and inherits any capacity
//! feasibility of the per-BS plans.
//!
//! For the objective gap, plans are first repaired: overloaded
//! (BS, frame) pairs are scaled down to full load, then each user's
//! delivery deficit is refilled greedily into spare capacity, best rate
//! first. Constraint violations of the unrepaired plan are reported
//! separately.

use serde::{Deserialize, Serialize};

use super::model::PlanModel;
use super::normalize::delivered;
use super::sample::build_input;
use crate::error::{dim_err, Result};
use crate::lp::{PlanSolution, PlanStatus};
use crate::nn::Matrix;
use crate::sim::Scenario;

/// Selects one per-BS plan row for every active user.
pub fn combine_plans(per_bs: &[Vec<f64>], sc: &Scenario) -> Result<Matrix> {
    let (k_max, t_f) = sc.norm_rates.shape();
    if per_bs.len() != sc.n_bs() || per_bs.iter().any(|p| p.len() != k_max * t_f) {
        return dim_err("one plan of k_max x n_frames per base station expected");
    }
    let mut out = Matrix::zeros(k_max, t_f);
    for k in 0..sc.k {
        let mut best: Option<(f64, usize)> = None;
        for (i, m) in sc.assoc.iter().enumerate() {
            let served = (0..t_f).any(|j| m.get(k, j) != 0.0 && sc.norm_rates.get(k, j) > 0.0);
            if !served {
                continue;
            }
            let mass: f64 = per_bs[i][k * t_f..(k + 1) * t_f].iter().sum();
            if best.is_none_or(|(b, _)| mass < b) {
                best = Some((mass, i));
            }
        }
        if let Some((_, i)) = best {
            out.row_mut(k)
                .copy_from_slice(&per_bs[i][k * t_f..(k + 1) * t_f]);
        }
    }
    Ok(out)
}

/// Combined, unrepaired plan of the model for `sc`.
pub fn learned_plan(model: &PlanModel, sc: &Scenario) -> Result<Matrix> {
    let per_bs = (0..sc.n_bs())
        .map(|i| model.plan_for(&build_input(sc, i)?))
        .collect::<Result<Vec<_>>>()?;
    combine_plans(&per_bs, sc)
}

fn loads(plan: &Matrix, sc: &Scenario) -> Vec<Vec<f64>> {
    let (k_max, t_f) = plan.shape();
    sc.assoc
        .iter()
        .map(|m| {
            (0..t_f)
                .map(|j| (0..k_max).map(|k| m.get(k, j) * plan.get(k, j)).sum())
                .collect()
        })
        .collect()
}

/// Total capacity excess `Σ_{i,j} (load − 1)⁺`.
pub fn capacity_excess(plan: &Matrix, sc: &Scenario) -> f64 {
    loads(plan, sc)
        .iter()
        .flatten()
        .map(|l| (l - 1.0).max(0.0))
        .sum()
}

/// `max_k |Σ_j s_j^k r_j^k − 1|` over active users.
pub fn qos_residual(plan: &Matrix, sc: &Scenario) -> f64 {
    let t_f = sc.n_frames();
    delivered(plan.data(), sc.norm_rates.data(), t_f)
        .iter()
        .take(sc.k)
        .map(|d| (d - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Repaired plan and the number of users whose deficit could not be refilled.
pub fn repair_plan(plan: &Matrix, sc: &Scenario) -> Result<(Matrix, usize)> {
    if plan.shape() != sc.norm_rates.shape() {
        return dim_err("plan shape differs from scenario");
    }
    let (k_max, t_f) = plan.shape();
    let mut s = plan.clone();
    for k in sc.k..k_max {
        s.row_mut(k).fill(0.0);
    }
    for v in s.data_mut() {
        *v = v.max(0.0);
    }
    let mut load = loads(&s, sc);
    for (i, m) in sc.assoc.iter().enumerate() {
        for j in 0..t_f {
            if load[i][j] > 1.0 {
                let f = 1.0 / load[i][j];
                for k in 0..k_max {
                    if m.get(k, j) != 0.0 {
                        s.set(k, j, s.get(k, j) * f);
                    }
                }
                load[i][j] = 1.0;
            }
        }
    }
    let mut unrepaired = 0;
    for k in 0..sc.k {
        let r = sc.norm_rates.row(k);
        let mut deficit = 1.0 - (0..t_f).map(|j| s.get(k, j) * r[j]).sum::<f64>();
        let mut frames: Vec<usize> = (0..t_f).filter(|&j| r[j] > 0.0).collect();
        frames.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
        for j in frames {
            if deficit <= 1e-12 {
                break;
            }
            let Some(i) = sc.serving_bs(k, j) else {
                continue;
            };
            let spare = (1.0 - load[i][j]).max(0.0);
            let add = spare.min(deficit / r[j]);
            s.set(k, j, s.get(k, j) + add);
            load[i][j] += add;
            deficit -= add * r[j];
        }
        if deficit > 1e-9 {
            unrepaired += 1;
        }
    }
    Ok((s, unrepaired))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `(Σ repaired learned mass − Σ optimal mass) / Σ optimal mass`.
    pub gap: f64,
    /// Mean over scenarios of the unrepaired plan's total capacity excess.
    pub mean_capacity_violation: f64,
    /// Mean over scenarios of the unrepaired plan's worst QoS residual.
    pub mean_qos_residual: f64,
    /// Users the repair could not fully serve, over all scenarios.
    pub unrepaired_users: usize,
    /// Scenarios evaluated (those with an optimal oracle plan).
    pub scenarios: usize,
    pub learned_mass: f64,
    pub optimal_mass: f64,
}

/// Idealized execution of the repaired learned plan. Capacity violation and
/// QoS residual are those of the plan before repair.
pub fn execute_learned(model: &PlanModel, sc: &Scenario) -> Result<crate::edf::SimOutcome> {
    let plan = learned_plan(model, sc)?;
    let (fixed, _) = repair_plan(&plan, sc)?;
    let mut out = crate::edf::execute_plan(&fixed, sc)?;
    out.capacity_violation = capacity_excess(&plan, sc);
    out.qos_residual = qos_residual(&plan, sc);
    Ok(out)
}

/// Gap report for given plans.
pub fn gap_of_plans(
    plans: &[Matrix],
    scenarios: &[Scenario],
    oracle: &[PlanSolution],
) -> Result<GapReport> {
    if plans.len() != scenarios.len() || oracle.len() != scenarios.len() {
        return dim_err("plans, scenarios and oracle solutions must align");
    }
    let mut rep = GapReport {
        gap: 0.0,
        mean_capacity_violation: 0.0,
        mean_qos_residual: 0.0,
        unrepaired_users: 0,
        scenarios: 0,
        learned_mass: 0.0,
        optimal_mass: 0.0,
    };
    for ((plan, sc), sol) in plans.iter().zip(scenarios).zip(oracle) {
        if sol.status != PlanStatus::Optimal {
            continue;
        }
        rep.scenarios += 1;
        rep.mean_capacity_violation += capacity_excess(plan, sc);
        rep.mean_qos_residual += qos_residual(plan, sc);
        let (fixed, bad) = repair_plan(plan, sc)?;
        rep.unrepaired_users += bad;
        rep.learned_mass += fixed.data().iter().sum::<f64>();
        rep.optimal_mass += sol.objective;
    }
    if rep.scenarios > 0 {
        rep.mean_capacity_violation /= rep.scenarios as f64;
        rep.mean_qos_residual /= rep.scenarios as f64;
        rep.gap = (rep.learned_mass - rep.optimal_mass) / rep.optimal_mass;
    }
    Ok(rep)
}

/// Objective gap and violations of the model on test scenarios.
pub fn evaluate_gap(
    model: &PlanModel,
    scenarios: &[Scenario],
    oracle: &[PlanSolution],
) -> Result<GapReport> {
    let plans = scenarios
        .iter()
        .map(|sc| learned_plan(model, sc))
        .collect::<Result<Vec<_>>>()?;
    gap_of_plans(&plans, scenarios, oracle)
}
