//! Non-predictive earliest-deadline-first scheduling and plan execution.
//!
//! All requests start at the beginning of the window and share its end as
//! deadline, so the scheduler serves, in every slot and cell, the
//! associated unfinished user with the most remaining bits (lowest index
//! on ties).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::lp::{PlanSolution, PlanStatus};
use crate::nn::Matrix;
use crate::rng::{substream, Purpose};
use crate::sim::{
    draw_fading_gain, slot_bandwidth, slot_rate_for, NetworkConfig, Scenario, SlotChannel,
};
use crate::trainer::eval::{capacity_excess, execute_learned, qos_residual};
use crate::trainer::normalize::delivered;
use crate::trainer::PlanModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// Transmission time per active user in seconds.
    pub time_s: Vec<f64>,
    pub complete: Vec<bool>,
    /// Fraction of slots (or frame time) used, per base station.
    pub utilization: Vec<f64>,
    /// Total capacity excess of an executed plan; zero for EDF.
    pub capacity_violation: f64,
    /// Worst QoS residual of an executed plan; zero for EDF.
    pub qos_residual: f64,
}

impl SimOutcome {
    /// Mean transmission time over all active users, finished or not.
    pub fn mean_time(&self) -> f64 {
        if self.time_s.is_empty() {
            return 0.0;
        }
        self.time_s.iter().sum::<f64>() / self.time_s.len() as f64
    }

    pub fn all_complete(&self) -> bool {
        self.complete.iter().all(|&c| c)
    }
}

/// Averages of one method over many trials. Times are pooled over all users
/// of all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub trials: usize,
    pub users: usize,
    pub mean_time_s: f64,
    pub mean_capacity_violation: f64,
    pub mean_qos_residual: f64,
    pub incomplete: usize,
}

pub fn summarize(method: &str, outcomes: &[SimOutcome]) -> MethodSummary {
    let users: usize = outcomes.iter().map(|o| o.time_s.len()).sum();
    let total: f64 = outcomes.iter().flat_map(|o| &o.time_s).sum();
    let n = outcomes.len().max(1) as f64;
    MethodSummary {
        method: method.into(),
        trials: outcomes.len(),
        users,
        mean_time_s: if users > 0 { total / users as f64 } else { 0.0 },
        mean_capacity_violation: outcomes.iter().map(|o| o.capacity_violation).sum::<f64>() / n,
        mean_qos_residual: outcomes.iter().map(|o| o.qos_residual).sum::<f64>() / n,
        incomplete: outcomes
            .iter()
            .flat_map(|o| &o.complete)
            .filter(|c| !**c)
            .count(),
    }
}

/// Summaries of the optimal plan, each given model and EDF over the test
/// scenarios with an optimal oracle plan. EDF of scenario `n` draws its
/// fading from the `Fading` stream `n` of `seed`.
pub fn compare_methods(
    models: &[(&str, &PlanModel)],
    test: &[Scenario],
    oracle: &[PlanSolution],
    cfg: &NetworkConfig,
    seed: u64,
) -> Result<Vec<MethodSummary>> {
    if test.len() != oracle.len() {
        return dim_err("one oracle solution per test scenario expected");
    }
    let mut optimal = Vec::new();
    let mut learned = vec![Vec::new(); models.len()];
    let mut edf = Vec::new();
    for (n, (sc, sol)) in test.iter().zip(oracle).enumerate() {
        if sol.status != PlanStatus::Optimal {
            continue;
        }
        optimal.push(execute_plan(&sol.plan, sc)?);
        for ((_, m), out) in models.iter().zip(learned.iter_mut()) {
            out.push(execute_learned(m, sc)?);
        }
        edf.push(edf_schedule(
            sc,
            &mut substream(seed, Purpose::Fading, n as u64),
            cfg,
        )?);
    }
    let mut rows = vec![summarize("optimal", &optimal)];
    for ((name, _), out) in models.iter().zip(&learned) {
        rows.push(summarize(name, out));
    }
    rows.push(summarize("baseline", &edf));
    Ok(rows)
}

/// EDF over `slots_per_frame` slots of `slot_s` seconds per frame, with
/// `rate(bs, user, frame, slot)` giving the slot rate in bit/s.
pub fn edf_core<F>(sc: &Scenario, slots_per_frame: usize, slot_s: f64, mut rate: F) -> SimOutcome
where
    F: FnMut(usize, usize, usize, usize) -> f64,
{
    let (k, t_f, n_bs) = (sc.k, sc.n_frames(), sc.n_bs());
    let mut remaining: Vec<f64> = sc.file_bits[..k].to_vec();
    let mut served = vec![0usize; k];
    let mut used = vec![0usize; n_bs];
    for j in 0..t_f {
        for t in 0..slots_per_frame {
            for (i, m) in sc.assoc.iter().enumerate() {
                let mut pick: Option<usize> = None;
                for u in 0..k {
                    if m.get(u, j) == 0.0 || remaining[u] <= 0.0 {
                        continue;
                    }
                    if pick.is_none_or(|p| remaining[u] > remaining[p]) {
                        pick = Some(u);
                    }
                }
                if let Some(u) = pick {
                    remaining[u] -= rate(i, u, j, t) * slot_s;
                    served[u] += 1;
                    used[i] += 1;
                }
            }
        }
    }
    let total = (t_f * slots_per_frame) as f64;
    SimOutcome {
        time_s: served.iter().map(|&n| n as f64 * slot_s).collect(),
        complete: remaining.iter().map(|&b| b <= 0.0).collect(),
        utilization: used.iter().map(|&n| n as f64 / total).collect(),
        capacity_violation: 0.0,
        qos_residual: 0.0,
    }
}

/// EDF on the slot-level channel of `sc`: the scenario's per-slot bandwidth
/// and Rayleigh fading drawn from `rng` for each served user.
pub fn edf_schedule<R: Rng + ?Sized>(
    sc: &Scenario,
    rng: &mut R,
    cfg: &NetworkConfig,
) -> Result<SimOutcome> {
    check_cfg(sc, cfg)?;
    let bw = slot_bandwidth(sc.seed, cfg);
    Ok(edf_core(
        sc,
        cfg.slots_per_frame,
        cfg.slot_s,
        |i, u, j, t| {
            let ch = SlotChannel {
                bandwidth_hz: bw[i][j][t],
                fading_gain: draw_fading_gain(rng, cfg.n_tx),
            };
            slot_rate_for(sc.gain.get(u, j), ch, cfg)
        },
    ))
}

fn check_cfg(sc: &Scenario, cfg: &NetworkConfig) -> Result<()> {
    if cfg.n_bs != sc.n_bs() || cfg.n_frames != sc.n_frames() || cfg.k_max != sc.k_max() {
        return dim_err("network config does not match the scenario");
    }
    Ok(())
}

/// Idealized execution of `plan` at the predicted average rates: user `k`
/// transmits for `Δ·Σ_j s_j^k` seconds.
pub fn execute_plan(plan: &Matrix, sc: &Scenario) -> Result<SimOutcome> {
    if plan.shape() != sc.norm_rates.shape() {
        return dim_err("plan shape differs from scenario");
    }
    let t_f = sc.n_frames();
    let got = delivered(plan.data(), sc.norm_rates.data(), t_f);
    let utilization = sc
        .assoc
        .iter()
        .map(|m| {
            let busy: f64 = m.data().iter().zip(plan.data()).map(|(a, s)| a * s).sum();
            busy / t_f as f64
        })
        .collect();
    Ok(SimOutcome {
        time_s: (0..sc.k)
            .map(|k| sc.frame_s * plan.row(k).iter().sum::<f64>())
            .collect(),
        complete: got[..sc.k].iter().map(|&d| d >= 1.0 - 1e-9).collect(),
        utilization,
        capacity_violation: capacity_excess(plan, sc),
        qos_residual: qos_residual(plan, sc),
    })
}

/// Slot-level execution for sensitivity checks: in frame `j` user `k` gets
/// `round(s_j^k·T_s)` slots at faded slot rates and stops once its file is
/// delivered.
pub fn execute_plan_slots<R: Rng + ?Sized>(
    plan: &Matrix,
    sc: &Scenario,
    rng: &mut R,
    cfg: &NetworkConfig,
) -> Result<SimOutcome> {
    let mut out = execute_plan(plan, sc)?;
    check_cfg(sc, cfg)?;
    let bw = slot_bandwidth(sc.seed, cfg);
    let t_s = cfg.slots_per_frame;
    for k in 0..sc.k {
        let mut remaining = sc.file_bits[k];
        let mut served = 0usize;
        for j in 0..sc.n_frames() {
            let Some(i) = sc.serving_bs(k, j) else {
                continue;
            };
            let n = ((plan.get(k, j) * t_s as f64).round() as usize).min(t_s);
            for t in 0..n {
                if remaining <= 0.0 {
                    break;
                }
                let ch = SlotChannel {
                    bandwidth_hz: bw[i][j][t],
                    fading_gain: draw_fading_gain(rng, cfg.n_tx),
                };
                remaining -= slot_rate_for(sc.gain.get(k, j), ch, cfg) * cfg.slot_s;
                served += 1;
            }
        }
        out.time_s[k] = served as f64 * cfg.slot_s;
        out.complete[k] = remaining <= 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_plan, SOLVER_TOL};
    use crate::rng::{substream, Purpose};
    use crate::sim::gen_scenario_seeded;

    fn one_cell(k: usize, bits: &[f64]) -> Scenario {
        let r = Matrix::from_fn(k, 2, |_, _| 1.0);
        let serving = vec![vec![Some(0); 2]; k];
        let mut sc = Scenario::from_normalized(k, 1, r, &serving).unwrap();
        sc.file_bits = bits.to_vec();
        sc
    }

    #[test]
    fn single_user_needs_ceiling_of_slots() {
        let sc = one_cell(1, &[1050.0]);
        let out = edf_core(&sc, 100, 0.01, |_, _, _, _| 10_000.0);
        // 100 bits per slot.
        assert_eq!(out.time_s, vec![11.0 * 0.01]);
        assert!(out.all_complete());
        assert!((out.utilization[0] - 11.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn most_remaining_bits_served_first() {
        let sc = one_cell(2, &[3.0, 5.0]);
        let mut order = Vec::new();
        edf_core(&sc, 4, 1.0, |_, u, _, _| {
            order.push(u);
            1.0
        });
        // 3 vs 5 → user 1; 3 vs 4 → user 1; 3 vs 3 → user 0 (index tie).
        assert_eq!(&order[..3], &[1, 1, 0]);
    }

    #[test]
    fn cells_serve_in_parallel() {
        let r = Matrix::from_fn(2, 1, |_, _| 1.0);
        let sc = Scenario::from_normalized(2, 2, r, &[vec![Some(0)], vec![Some(1)]]).unwrap();
        let mut seen = Vec::new();
        let out = edf_core(&sc, 3, 1.0, |i, u, _, t| {
            seen.push((t, i, u));
            1e9
        });
        assert_eq!(seen, vec![(0, 0, 0), (0, 1, 1)]);
        assert_eq!(out.time_s, vec![1.0, 1.0]);
    }

    #[test]
    fn incomplete_users_are_flagged() {
        let sc = one_cell(1, &[1e12]);
        let out = edf_core(&sc, 10, 0.1, |_, _, _, _| 1.0);
        assert!(!out.complete[0]);
        assert_eq!(out.time_s[0], 2.0);
    }

    #[test]
    fn optimal_plan_time_matches_objective() {
        let cfg = NetworkConfig::desk();
        let sc = gen_scenario_seeded(11, 3, &cfg).unwrap();
        let sol = solve_plan(&sc, SOLVER_TOL).unwrap();
        let out = execute_plan(&sol.plan, &sc).unwrap();
        assert!((out.mean_time() - sol.objective * sc.frame_s / 3.0).abs() < 1e-9);
        assert!(out.all_complete());
        let mut short = sol.plan.clone();
        short.data_mut().iter_mut().for_each(|v| *v *= 0.9);
        assert!(!execute_plan(&short, &sc).unwrap().all_complete());
    }

    #[test]
    fn summary_pools_users() {
        let a = SimOutcome {
            time_s: vec![1.0, 3.0],
            complete: vec![true, false],
            utilization: vec![],
            capacity_violation: 0.2,
            qos_residual: 0.0,
        };
        let b = SimOutcome {
            time_s: vec![5.0],
            complete: vec![true],
            utilization: vec![],
            capacity_violation: 0.0,
            qos_residual: 0.1,
        };
        let s = summarize("x", &[a, b]);
        assert_eq!((s.trials, s.users, s.incomplete), (2, 3, 1));
        assert!((s.mean_time_s - 3.0).abs() < 1e-15);
        assert!((s.mean_capacity_violation - 0.1).abs() < 1e-15);
        assert!((s.mean_qos_residual - 0.05).abs() < 1e-15);
    }

    #[test]
    fn edf_on_simulated_channel() {
        let cfg = NetworkConfig::desk();
        let sc = gen_scenario_seeded(5, 4, &cfg).unwrap();
        let a = edf_schedule(&sc, &mut substream(1, Purpose::Fading, 0), &cfg).unwrap();
        let b = edf_schedule(&sc, &mut substream(1, Purpose::Fading, 0), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.all_complete());
        assert!(a.utilization.iter().all(|&u| (0.0..=1.0).contains(&u)));
        let slots = execute_plan_slots(
            &solve_plan(&sc, SOLVER_TOL).unwrap().plan,
            &sc,
            &mut substream(1, Purpose::Fading, 0),
            &cfg,
        )
        .unwrap();
        assert_eq!(slots.time_s.len(), 4);
    }
}
