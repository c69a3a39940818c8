use serde::{Deserialize, Serialize};

use super::eval::{evaluate_gap, GapReport};
use super::train::{train, train_with, TrainingSet};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::lp::PlanSolution;
use crate::sim::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Training scenarios, or epochs for an epoch sweep.
    pub size: usize,
    pub report: GapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Smallest size whose gap is at most the target.
    pub threshold: Option<usize>,
}

fn training_set(scenarios: &[Scenario], cfg: &TrainConfig) -> Result<TrainingSet> {
    match cfg.supervision {
        super::Supervision::Unsupervised => TrainingSet::from_scenarios(scenarios),
        super::Supervision::Supervised => {
            TrainingSet::with_labels(scenarios, crate::lp::SOLVER_TOL)
        }
    }
}

/// Trains a fresh model on the first `size` scenarios of `pool` for every
/// size and evaluates it on the test set.
pub fn sample_complexity_sweep(
    sizes: &[usize],
    pool: &[Scenario],
    test: &[Scenario],
    oracle: &[PlanSolution],
    cfg: &TrainConfig,
    target_gap: f64,
) -> Result<SweepResult> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sizes must be non-empty and ascending".into(),
        ));
    }
    if sizes[0] == 0 || *sizes.last().unwrap() > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "sizes must lie in 1..={}",
            pool.len()
        )));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let set = training_set(&pool[..size], cfg)?;
        let state = train(&set, cfg)?;
        points.push(SweepPoint {
            size,
            report: evaluate_gap(&state.model, test, oracle)?,
        });
    }
    let threshold = points
        .iter()
        .find(|p| p.report.gap <= target_gap)
        .map(|p| p.size);
    Ok(SweepResult { points, threshold })
}

/// Trains on a fixed set, evaluating every `eval_every` epochs, and stops
/// once the gap reaches the target.
pub fn epoch_complexity_sweep(
    train_scenarios: &[Scenario],
    test: &[Scenario],
    oracle: &[PlanSolution],
    cfg: &TrainConfig,
    target_gap: f64,
    eval_every: usize,
) -> Result<SweepResult> {
    if eval_every == 0 {
        return Err(Error::InvalidArgument("eval_every must be positive".into()));
    }
    let set = training_set(train_scenarios, cfg)?;
    let mut points = Vec::new();
    let mut threshold = None;
    train_with(&set, cfg, |state| {
        if state.epoch % eval_every != 0 && state.epoch != cfg.epochs {
            return Ok(true);
        }
        let report = evaluate_gap(&state.model, test, oracle)?;
        points.push(SweepPoint {
            size: state.epoch,
            report,
        });
        if report.gap <= target_gap {
            threshold = Some(state.epoch);
            return Ok(false);
        }
        Ok(true)
    })?;
    Ok(SweepResult { points, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_plan, SOLVER_TOL};
    use crate::sim::{gen_scenario_seeded, NetworkConfig};

    fn setup() -> (Vec<Scenario>, Vec<Scenario>, Vec<PlanSolution>, TrainConfig) {
        let net = NetworkConfig::desk();
        let pool: Vec<Scenario> = (0..6)
            .map(|s| gen_scenario_seeded(s, 4, &net).unwrap())
            .collect();
        let test: Vec<Scenario> = (100..103)
            .map(|s| gen_scenario_seeded(s, 2, &net).unwrap())
            .collect();
        let oracle = test
            .iter()
            .map(|sc| solve_plan(sc, SOLVER_TOL).unwrap())
            .collect();
        let cfg = TrainConfig {
            plan_hidden_per_block: vec![4],
            multiplier_hidden: vec![4],
            epochs: 3,
            ..TrainConfig::desk()
        };
        (pool, test, oracle, cfg)
    }

    #[test]
    fn infinite_target_returns_smallest_size() {
        let (pool, test, oracle, cfg) = setup();
        let r =
            sample_complexity_sweep(&[2, 4], &pool, &test, &oracle, &cfg, f64::INFINITY).unwrap();
        assert_eq!(r.threshold, Some(2));
        assert_eq!(r.points.len(), 2);
    }

    #[test]
    fn rejects_unsorted_sizes() {
        let (pool, test, oracle, cfg) = setup();
        assert!(sample_complexity_sweep(&[4, 2], &pool, &test, &oracle, &cfg, 0.2).is_err());
        assert!(sample_complexity_sweep(&[2, 70], &pool, &test, &oracle, &cfg, 0.2).is_err());
    }

    #[test]
    fn epoch_sweep_stops_at_target() {
        let (pool, test, oracle, cfg) = setup();
        let r = epoch_complexity_sweep(&pool, &test, &oracle, &cfg, f64::INFINITY, 1).unwrap();
        assert_eq!(r.threshold, Some(1));
        let r = epoch_complexity_sweep(&pool, &test, &oracle, &cfg, -1.0, 2).unwrap();
        assert_eq!(r.threshold, None);
        assert_eq!(
            r.points.iter().map(|p| p.size).collect::<Vec<_>>(),
            vec![2, 3]
        );
    }
}
