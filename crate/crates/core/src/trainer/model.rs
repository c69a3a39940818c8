use std::io::{BufRead, Write};

use rand::Rng;

use super::normalize::normalize_pre;
use super::sample::Sample;
use super::TrainConfig;
use crate::equivariant::EquivariantLayer;
use crate::error::{dim_err, Error, Result};
use crate::nn::container::{read_models, write_models};
use crate::nn::{Activation, DenseLayer, Layer, Mlp, Trace};

/// Plan network (DNN-s) and multiplier network (DNN-λ) of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanModel {
    pub plan: Mlp,
    pub multiplier: Mlp,
    pub k_max: usize,
    pub n_frames: usize,
    /// Factor applied to the rates before they enter either network.
    pub input_scale: f64,
}

/// DNN-s. With sharing, every layer is block-equivariant over the `k_max`
/// user blocks (`n_frames` values per block at input and output,
/// `hidden_per_block` values per block inside). Without sharing, dense
/// layers of the same total widths.
pub fn build_plan_net<R: Rng + ?Sized>(
    k_max: usize,
    n_frames: usize,
    hidden_per_block: &[usize],
    sharing: bool,
    rng: &mut R,
) -> Result<Mlp> {
    let mut widths = vec![n_frames];
    widths.extend_from_slice(hidden_per_block);
    widths.push(n_frames);
    let layers: Vec<Layer> = widths
        .windows(2)
        .map(|w| {
            if sharing {
                EquivariantLayer::glorot(k_max, w[0], w[1], Activation::Softplus, rng).into()
            } else {
                DenseLayer::glorot(k_max * w[0], k_max * w[1], Activation::Softplus, rng).into()
            }
        })
        .collect();
    Mlp::new(layers)
}

/// DNN-λ: fully connected from the `k_max·n_frames` input to one
/// non-negative multiplier per frame.
pub fn build_multiplier_net<R: Rng + ?Sized>(
    k_max: usize,
    n_frames: usize,
    hidden: &[usize],
    rng: &mut R,
) -> Result<Mlp> {
    let mut widths = vec![k_max * n_frames];
    widths.extend_from_slice(hidden);
    widths.push(n_frames);
    let layers = widths
        .windows(2)
        .map(|w| DenseLayer::glorot(w[0], w[1], Activation::Softplus, rng).into())
        .collect();
    Mlp::new(layers)
}

impl PlanModel {
    pub fn new<R: Rng + ?Sized>(cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let plan = build_plan_net(
            cfg.k_max,
            cfg.n_frames,
            &cfg.plan_hidden_per_block,
            cfg.sharing,
            rng,
        )?;
        let multiplier =
            build_multiplier_net(cfg.k_max, cfg.n_frames, &cfg.multiplier_hidden, rng)?;
        Ok(Self {
            plan,
            multiplier,
            k_max: cfg.k_max,
            n_frames: cfg.n_frames,
            input_scale: cfg.input_scale,
        })
    }

    /// Writes both networks to a model container.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        write_models(
            w,
            &[("dnn_s", &self.plan), ("dnn_lambda", &self.multiplier)],
        )
    }

    /// Reads networks written by [`Self::save`] and checks them against `cfg`.
    pub fn load<R: BufRead>(reader: R, cfg: &TrainConfig) -> Result<Self> {
        let mut nets = read_models(reader)?;
        let mut take = |name: &str| {
            nets.iter()
                .position(|(n, _)| n == name)
                .map(|i| nets.remove(i).1)
                .ok_or_else(|| Error::Format(format!("model file lacks network {name:?}")))
        };
        let plan = take("dnn_s")?;
        let multiplier = take("dnn_lambda")?;
        let d = cfg.k_max * cfg.n_frames;
        if plan.in_dim() != d
            || plan.out_dim() != d
            || multiplier.in_dim() != d
            || multiplier.out_dim() != cfg.n_frames
        {
            return dim_err("stored networks do not match k_max and n_frames of the config");
        }
        Ok(Self {
            plan,
            multiplier,
            k_max: cfg.k_max,
            n_frames: cfg.n_frames,
            input_scale: cfg.input_scale,
        })
    }

    pub(crate) fn scaled_input(&self, sample: &Sample) -> Result<Vec<f64>> {
        if sample.x.len() != self.k_max * self.n_frames {
            return dim_err(format!(
                "sample has {} entries, model expects {}",
                sample.x.len(),
                self.k_max * self.n_frames
            ));
        }
        Ok(sample.x.iter().map(|v| v * self.input_scale).collect())
    }

    /// Raw (positive, unnormalized) plan of DNN-s.
    pub fn dnn_s_forward(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.plan.forward(&self.scaled_input(sample)?)
    }

    /// Multipliers ν_i of DNN-λ, one per frame.
    pub fn dnn_lambda_forward(&self, sample: &Sample) -> Result<Vec<f64>> {
        self.multiplier.forward(&self.scaled_input(sample)?)
    }

    /// Forward trace of DNN-s and the normalized plan. The normalization
    /// reads the output pre-activations, which equals normalizing the raw
    /// Softplus outputs but stays finite where they underflow.
    pub(crate) fn plan_trace(&self, sample: &Sample) -> Result<(Trace, Vec<f64>)> {
        let trace = self.plan.forward_trace(&self.scaled_input(sample)?)?;
        let plan = normalize_pre(trace.last_pre(), sample.rates(), self.n_frames)?;
        Ok((trace, plan))
    }

    /// Normalized plan `ŝ` for one base station, user-major.
    pub fn plan_for(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(self.plan_trace(sample)?.1)
    }
}
