//! Unsupervised primal-dual learning of transmission plans.
//!
//! DNN-s maps the masked rates of one base station to a raw plan, which the
//! normalization layer turns into a plan meeting every user's QoS equality.
//! DNN-λ maps the same input to per-frame multipliers of the capacity
//! constraints. Training alternates an Adam descent step on DNN-s with an
//! Adam ascent step on DNN-λ over the empirical Lagrangian. A supervised
//! mode fits DNN-s to LP labels instead.

pub mod eval;
pub mod lagrangian;
pub mod model;
pub mod normalize;
pub mod sample;
pub mod sweep;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{
    capacity_excess, combine_plans, evaluate_gap, execute_learned, gap_of_plans, learned_plan,
    qos_residual, repair_plan, GapReport,
};
pub use lagrangian::{
    empirical_lagrangian, frame_load, sample_lagrangian, supervised_loss, LagrangianEval,
};
pub use model::{build_multiplier_net, build_plan_net, PlanModel};
pub use normalize::{delivered, normalize_backward, normalize_plan};
pub use sample::{build_input, build_samples, Sample};
pub use sweep::{epoch_complexity_sweep, sample_complexity_sweep, SweepPoint, SweepResult};
pub use train::{train, train_with, TrainState, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervision {
    Unsupervised,
    Supervised,
}

impl Supervision {
    pub fn name(self) -> &'static str {
        match self {
            Supervision::Unsupervised => "unsupervised",
            Supervision::Supervised => "supervised",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "unsupervised" => Some(Supervision::Unsupervised),
            "supervised" => Some(Supervision::Supervised),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k_max: usize,
    pub n_frames: usize,
    /// Hidden widths of DNN-s per user block.
    pub plan_hidden_per_block: Vec<usize>,
    pub multiplier_hidden: Vec<usize>,
    /// Equivariant DNN-s when set, dense layers of equal total width otherwise.
    pub sharing: bool,
    pub epochs: usize,
    /// Scenarios per mini-batch; 0 means full batch.
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub supervision: Supervision,
    /// Factor applied to the normalized rates before both networks.
    pub input_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_max: 20,
            n_frames: 30,
            plan_hidden_per_block: vec![50, 50],
            multiplier_hidden: vec![200, 100],
            sharing: true,
            epochs: 200,
            batch_size: 0,
            lr: 0.01,
            seed: 0,
            supervision: Supervision::Unsupervised,
            input_scale: 1.0,
        }
    }
}

impl TrainConfig {
    /// Small configuration matching `NetworkConfig::desk`.
    pub fn desk() -> Self {
        Self {
            k_max: 4,
            n_frames: 5,
            plan_hidden_per_block: vec![16, 16],
            multiplier_hidden: vec![32, 16],
            batch_size: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("train config: {msg}")));
        if self.k_max == 0 || self.n_frames == 0 {
            return bad("k_max and n_frames must be positive".into());
        }
        if self.plan_hidden_per_block.contains(&0) || self.multiplier_hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {}", self.lr));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad(format!("input scale {}", self.input_scale));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.k_max * c.n_frames, 600);
        assert_eq!(c.k_max * c.plan_hidden_per_block[0], 1000);
        assert_eq!(c.multiplier_hidden, vec![200, 100]);
        assert_eq!(c.lr, 0.01);
        TrainConfig::desk().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig::desk();
        c.plan_hidden_per_block = vec![8, 0];
        assert!(c.validate().is_err());
        let c = TrainConfig {
            lr: 0.0,
            ..TrainConfig::desk()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn supervision_names_round_trip() {
        for s in [Supervision::Unsupervised, Supervision::Supervised] {
            assert_eq!(Supervision::from_name(s.name()), Some(s));
        }
    }
}
