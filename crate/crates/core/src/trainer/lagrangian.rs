//! Empirical Lagrangian of the plan problem.
//!
//! For a batch of `N` scenarios with per-BS samples,
//!
//! ```text
//! L̂ = (1/N) Σ_n Σ_i ( ‖ŝ_i‖₁ + ν_iᵀ (load_i − 1) )
//! ```
//!
//! where `ŝ_i` is the normalized DNN-s plan, `ν_i` the DNN-λ output and
//! `load_i[j] = Σ_k ŝ_i[k, j]·(M_i)_{kj}` the time BS `i` allocates in frame
//! `j`. The QoS term is absent because the normalization enforces it.

use super::model::PlanModel;
use super::normalize::normalize_pre_backward;
use super::sample::Sample;
use crate::error::{Error, Result};
use crate::nn::mlp::{accumulate, scale};

/// Value and parameter gradients of the batch Lagrangian.
#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub value: f64,
    /// Gradient with respect to DNN-s parameters (empty when not requested).
    pub plan_grads: Vec<Vec<f64>>,
    /// Gradient with respect to DNN-λ parameters (empty when not requested).
    pub multiplier_grads: Vec<Vec<f64>>,
}

/// Per-frame allocated time of one BS.
pub fn frame_load(plan: &[f64], assoc: &[f64], n_frames: usize) -> Vec<f64> {
    let mut load = vec![0.0; n_frames];
    for (s, m) in plan
        .chunks_exact(n_frames)
        .zip(assoc.chunks_exact(n_frames))
    {
        for ((l, sj), mj) in load.iter_mut().zip(s).zip(m) {
            *l += sj * mj;
        }
    }
    load
}

/// `‖ŝ‖₁ + νᵀ(load − 1)` for one sample.
pub fn sample_lagrangian(plan: &[f64], nu: &[f64], assoc: &[f64], n_frames: usize) -> f64 {
    let mass: f64 = plan.iter().map(|v| v.abs()).sum();
    let load = frame_load(plan, assoc, n_frames);
    mass + nu
        .iter()
        .zip(&load)
        .map(|(n, l)| n * (l - 1.0))
        .sum::<f64>()
}

/// `L̂` and the requested gradients over `samples`, which come from
/// `n_scenarios` scenarios.
pub fn empirical_lagrangian(
    model: &PlanModel,
    samples: &[&Sample],
    n_scenarios: usize,
    want_plan: bool,
    want_multiplier: bool,
) -> Result<LagrangianEval> {
    if samples.is_empty() || n_scenarios == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let t_f = model.n_frames;
    let inv_n = 1.0 / n_scenarios as f64;
    let mut plan_grads = if want_plan {
        model.plan.zero_grads()
    } else {
        vec![]
    };
    let mut mult_grads = if want_multiplier {
        model.multiplier.zero_grads()
    } else {
        vec![]
    };
    let mut value = 0.0;

    for sample in samples {
        let (plan_trace, plan) = model.plan_trace(sample)?;
        let mult_trace = model
            .multiplier
            .forward_trace(&model.scaled_input(sample)?)?;
        let nu = &mult_trace.output;
        let load = frame_load(&plan, &sample.assoc, t_f);

        let mass: f64 = plan.iter().sum();
        value += mass
            + nu.iter()
                .zip(&load)
                .map(|(n, l)| n * (l - 1.0))
                .sum::<f64>();

        if want_plan {
            // ∂/∂ŝ[k, j] = 1 + ν_j M_kj
            let upstream: Vec<f64> = sample
                .assoc
                .iter()
                .enumerate()
                .map(|(idx, m)| (1.0 + nu[idx % t_f] * m) * inv_n)
                .collect();
            let dz = normalize_pre_backward(plan_trace.last_pre(), sample.rates(), &upstream, t_f)?;
            let bp = model.plan.backward_pre(&plan_trace, &dz)?;
            accumulate(&mut plan_grads, &bp.grads);
        }
        if want_multiplier {
            let upstream: Vec<f64> = load.iter().map(|l| (l - 1.0) * inv_n).collect();
            let bp = model.multiplier.backward(&mult_trace, &upstream)?;
            accumulate(&mut mult_grads, &bp.grads);
        }
    }
    Ok(LagrangianEval {
        value: value * inv_n,
        plan_grads,
        multiplier_grads: mult_grads,
    })
}

/// Mean squared error of normalized plans against per-BS labels, averaged
/// over plan entries and scenarios, with its DNN-s gradient.
pub fn supervised_loss(
    model: &PlanModel,
    samples: &[&Sample],
    labels: &[&[f64]],
    n_scenarios: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if samples.is_empty() || samples.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "labels must match a non-empty batch".into(),
        ));
    }
    let t_f = model.n_frames;
    let mut grads = model.plan.zero_grads();
    let mut value = 0.0;
    for (sample, label) in samples.iter().zip(labels) {
        let (trace, plan) = model.plan_trace(sample)?;
        let per = 1.0 / plan.len() as f64;
        let mut upstream = Vec::with_capacity(plan.len());
        for (s, l) in plan.iter().zip(label.iter()) {
            value += per * (s - l) * (s - l);
            upstream.push(2.0 * per * (s - l));
        }
        let dz = normalize_pre_backward(trace.last_pre(), sample.rates(), &upstream, t_f)?;
        let bp = model.plan.backward_pre(&trace, &dz)?;
        accumulate(&mut grads, &bp.grads);
    }
    let inv_n = 1.0 / n_scenarios as f64;
    scale(&mut grads, inv_n);
    Ok((value * inv_n, grads))
}
