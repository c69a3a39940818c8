//! QoS normalization of raw plans.
//!
//! For each user, `ŝ_j = ŝ'_j / Σ_τ ŝ'_τ r_τ`, which makes
//! `Σ_j ŝ_j r_j = 1` hold exactly. Entries whose rate is zero deliver
//! nothing and are set to zero; users whose rates are all zero (padding, or
//! not served by this base station) get an all-zero plan.

use crate::error::{dim_err, Error, Result};
use crate::nn::softplus;

fn check(raw: &[f64], rates: &[f64], n_frames: usize) -> Result<()> {
    if raw.len() != rates.len() || n_frames == 0 || !raw.len().is_multiple_of(n_frames) {
        return dim_err(format!(
            "raw plan of {} entries, rates of {}, blocks of {n_frames}",
            raw.len(),
            rates.len()
        ));
    }
    Ok(())
}

pub fn normalize_plan(raw: &[f64], rates: &[f64], n_frames: usize) -> Result<Vec<f64>> {
    check(raw, rates, n_frames)?;
    let mut out = vec![0.0; raw.len()];
    for (k, ((a, r), o)) in raw
        .chunks_exact(n_frames)
        .zip(rates.chunks_exact(n_frames))
        .zip(out.chunks_exact_mut(n_frames))
        .enumerate()
    {
        if r.iter().all(|&v| v == 0.0) {
            continue;
        }
        let denom: f64 = a
            .iter()
            .zip(r)
            .filter(|(_, y)| **y != 0.0)
            .map(|(x, y)| x * y)
            .sum();
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::Numerical(format!(
                "user {k}: normalization denominator {denom} is not positive"
            )));
        }
        for ((oj, aj), rj) in o.iter_mut().zip(a).zip(r) {
            if *rj != 0.0 {
                *oj = aj / denom;
            }
        }
    }
    Ok(out)
}

/// Pulls `upstream = ∂L/∂ŝ` back to `∂L/∂ŝ'`.
pub fn normalize_backward(
    raw: &[f64],
    rates: &[f64],
    upstream: &[f64],
    n_frames: usize,
) -> Result<Vec<f64>> {
    check(raw, rates, n_frames)?;
    if upstream.len() != raw.len() {
        return dim_err("upstream length differs from plan");
    }
    let mut out = vec![0.0; raw.len()];
    for (((a, r), g), o) in raw
        .chunks_exact(n_frames)
        .zip(rates.chunks_exact(n_frames))
        .zip(upstream.chunks_exact(n_frames))
        .zip(out.chunks_exact_mut(n_frames))
    {
        if r.iter().all(|&v| v == 0.0) {
            continue;
        }
        let denom: f64 = a
            .iter()
            .zip(r)
            .filter(|(_, y)| **y != 0.0)
            .map(|(x, y)| x * y)
            .sum();
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::Numerical(format!(
                "normalization denominator {denom} is not positive"
            )));
        }
        // With ŝ_j = m_j a_j / D: ∂L/∂a_l = (m_l g_l − r_l Σ_j g_j ŝ_j) / D,
        // which avoids forming D² for tiny denominators.
        let weighted: f64 = a
            .iter()
            .zip(r)
            .zip(g)
            .filter(|((_, rj), _)| **rj != 0.0)
            .map(|((aj, _), gj)| gj * (aj / denom))
            .sum();
        for (l, ol) in o.iter_mut().enumerate() {
            let direct = if r[l] != 0.0 { g[l] } else { 0.0 };
            *ol = (direct - r[l] * weighted) / denom;
        }
    }
    Ok(out)
}

/// `ln softplus(z)`, accurate where `softplus(z)` underflows.
pub fn ln_softplus(z: f64) -> f64 {
    if z < -30.0 {
        // softplus(z) = e^z (1 − e^z/2 + …)
        z + (-0.5 * z.exp()).ln_1p()
    } else {
        softplus(z).ln()
    }
}

/// Per-user log-weights `ln softplus(z_j)` and log-denominator, for users
/// with any nonzero rate.
fn log_terms(z: &[f64], r: &[f64]) -> Option<(Vec<f64>, f64)> {
    if r.iter().all(|&v| v == 0.0) {
        return None;
    }
    let ls: Vec<f64> = z.iter().map(|&v| ln_softplus(v)).collect();
    let terms: Vec<f64> = ls
        .iter()
        .zip(r)
        .filter(|(_, rj)| **rj != 0.0)
        .map(|(l, rj)| l + rj.ln())
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_denom = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    Some((ls, log_denom))
}

/// [`normalize_plan`] of `softplus(z)`, evaluated in the log domain so that
/// it stays finite when every `softplus(z_j)` of a user underflows.
pub fn normalize_pre(z: &[f64], rates: &[f64], n_frames: usize) -> Result<Vec<f64>> {
    check(z, rates, n_frames)?;
    let mut out = vec![0.0; z.len()];
    for ((zk, r), o) in z
        .chunks_exact(n_frames)
        .zip(rates.chunks_exact(n_frames))
        .zip(out.chunks_exact_mut(n_frames))
    {
        let Some((ls, log_denom)) = log_terms(zk, r) else {
            continue;
        };
        if !log_denom.is_finite() {
            return Err(Error::Numerical(format!("log normalizer {log_denom}")));
        }
        for ((oj, l), rj) in o.iter_mut().zip(&ls).zip(r) {
            if *rj != 0.0 {
                *oj = (l - log_denom).exp();
            }
        }
    }
    Ok(out)
}

/// Pulls `upstream = ∂L/∂ŝ` back to the pre-activation `z` of
/// [`normalize_pre`]: `∂L/∂z_l = (g_l − r_l Σ_j g_j ŝ_j)·σ(z_l)/D`.
pub fn normalize_pre_backward(
    z: &[f64],
    rates: &[f64],
    upstream: &[f64],
    n_frames: usize,
) -> Result<Vec<f64>> {
    check(z, rates, n_frames)?;
    if upstream.len() != z.len() {
        return dim_err("upstream length differs from plan");
    }
    let mut out = vec![0.0; z.len()];
    for (((zk, r), g), o) in z
        .chunks_exact(n_frames)
        .zip(rates.chunks_exact(n_frames))
        .zip(upstream.chunks_exact(n_frames))
        .zip(out.chunks_exact_mut(n_frames))
    {
        let Some((ls, log_denom)) = log_terms(zk, r) else {
            continue;
        };
        if !log_denom.is_finite() {
            return Err(Error::Numerical(format!("log normalizer {log_denom}")));
        }
        let weighted: f64 = ls
            .iter()
            .zip(r)
            .zip(g)
            .filter(|((_, rj), _)| **rj != 0.0)
            .map(|((l, _), gj)| gj * (l - log_denom).exp())
            .sum();
        for (l, ol) in o.iter_mut().enumerate() {
            let direct = if r[l] != 0.0 { g[l] } else { 0.0 };
            // ln σ(z) = −softplus(−z)
            let scale = (-softplus(-zk[l]) - log_denom).exp();
            *ol = (direct - r[l] * weighted) * scale;
        }
    }
    Ok(out)
}

/// `Σ_j ŝ_j r_j` per user.
pub fn delivered(plan: &[f64], rates: &[f64], n_frames: usize) -> Vec<f64> {
    plan.chunks_exact(n_frames)
        .zip(rates.chunks_exact(n_frames))
        .map(|(s, r)| s.iter().zip(r).map(|(a, b)| a * b).sum())
        .collect()
}
