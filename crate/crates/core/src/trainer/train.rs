use rand::seq::SliceRandom;

use super::lagrangian::{empirical_lagrangian, supervised_loss};
use super::model::PlanModel;
use super::sample::{build_samples, Sample};
use super::{Supervision, TrainConfig};
use crate::error::{Error, Result};
use crate::lp::{solve_plan, PlanStatus};
use crate::nn::{AdamState, Direction};
use crate::rng::{substream, Purpose};
use crate::sim::Scenario;

/// Per-BS samples of a set of scenarios, optionally with LP labels.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub samples: Vec<Sample>,
    pub n_scenarios: usize,
    /// Optimal plan restricted to each sample's base station, same layout
    /// as the sample.
    pub labels: Option<Vec<Vec<f64>>>,
}

impl TrainingSet {
    pub fn from_scenarios(scenarios: &[Scenario]) -> Result<Self> {
        Ok(Self {
            samples: build_samples(scenarios)?,
            n_scenarios: scenarios.len(),
            labels: None,
        })
    }

    /// Adds labels `S* ⋆ M_i` from the LP oracle.
    pub fn with_labels(scenarios: &[Scenario], tol: f64) -> Result<Self> {
        let mut set = Self::from_scenarios(scenarios)?;
        let mut labels = Vec::with_capacity(set.samples.len());
        for (n, sc) in scenarios.iter().enumerate() {
            let sol = solve_plan(sc, tol)?;
            if sol.status != PlanStatus::Optimal {
                return Err(Error::StructurallyInfeasible(format!(
                    "training scenario {n} has no feasible plan"
                )));
            }
            for m in &sc.assoc {
                labels.push(
                    sol.plan
                        .data()
                        .iter()
                        .zip(m.data())
                        .map(|(s, a)| s * a)
                        .collect(),
                );
            }
        }
        set.labels = Some(labels);
        Ok(set)
    }

    /// Sample indices grouped by scenario.
    fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_scenarios];
        for (idx, s) in self.samples.iter().enumerate() {
            groups[s.scenario].push(idx);
        }
        groups
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: PlanModel,
    pub adam_plan: AdamState,
    pub adam_multiplier: AdamState,
    pub epoch: usize,
    /// Mean training loss of every completed epoch.
    pub history: Vec<f64>,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let mut rng = substream(cfg.seed, Purpose::Init, 0);
        let model = PlanModel::new(cfg, &mut rng)?;
        Ok(Self {
            adam_plan: AdamState::new(&model.plan.param_shapes(), cfg.lr),
            adam_multiplier: AdamState::new(&model.multiplier.param_shapes(), cfg.lr),
            model,
            epoch: 0,
            history: Vec::new(),
        })
    }

    /// One pass over `batch` (indices into `set.samples`).
    fn step(
        &mut self,
        set: &TrainingSet,
        batch: &[usize],
        n_scen: usize,
        sup: Supervision,
    ) -> Result<f64> {
        let refs: Vec<&Sample> = batch.iter().map(|&i| &set.samples[i]).collect();
        match sup {
            Supervision::Unsupervised => {
                let e = empirical_lagrangian(&self.model, &refs, n_scen, true, false)?;
                self.adam_plan.step(
                    &mut self.model.plan.params_mut(),
                    &e.plan_grads,
                    Direction::Descent,
                )?;
                let e2 = empirical_lagrangian(&self.model, &refs, n_scen, false, true)?;
                self.adam_multiplier.step(
                    &mut self.model.multiplier.params_mut(),
                    &e2.multiplier_grads,
                    Direction::Ascent,
                )?;
                Ok(e.value)
            }
            Supervision::Supervised => {
                let labels = set.labels.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("supervised training needs labels".into())
                })?;
                let lab: Vec<&[f64]> = batch.iter().map(|&i| labels[i].as_slice()).collect();
                let (value, grads) = supervised_loss(&self.model, &refs, &lab, n_scen)?;
                self.adam_plan.step(
                    &mut self.model.plan.params_mut(),
                    &grads,
                    Direction::Descent,
                )?;
                Ok(value)
            }
        }
    }
}

/// Trains for `cfg.epochs` epochs.
pub fn train(set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainState> {
    train_with(set, cfg, |_| Ok(true))
}

/// Trains, calling `on_epoch` after every epoch; returning `false` stops.
pub fn train_with<F>(set: &TrainingSet, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainState>
where
    F: FnMut(&TrainState) -> Result<bool>,
{
    cfg.validate()?;
    if set.samples.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut state = TrainState::new(cfg)?;
    let mut groups = set.groups();
    groups.retain(|g| !g.is_empty());
    let batch = if cfg.batch_size == 0 {
        groups.len()
    } else {
        cfg.batch_size
    };
    let mut shuffle = substream(cfg.seed, Purpose::Shuffle, 0);

    for epoch in 0..cfg.epochs {
        if batch < groups.len() {
            groups.shuffle(&mut shuffle);
        }
        let mut total = 0.0;
        for chunk in groups.chunks(batch) {
            let idx: Vec<usize> = chunk.iter().flatten().copied().collect();
            let value = state.step(set, &idx, chunk.len(), cfg.supervision)?;
            total += value * chunk.len() as f64;
        }
        let loss = total / groups.len() as f64;
        if !loss.is_finite() || !state.model.plan.is_finite() || !state.model.multiplier.is_finite()
        {
            return Err(Error::Diverged {
                epoch,
                reason: format!("training loss {loss}"),
            });
        }
        state.history.push(loss);
        state.epoch = epoch + 1;
        if !on_epoch(&state)? {
            break;
        }
    }
    Ok(state)
}
