use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::activation::Activation;
use super::matrix::{add_outer, Matrix};
use crate::error::{dim_err, Result};

/// Fully-connected layer `g(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

/// Glorot-uniform limit for a `fan_in -> fan_out` map.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub(crate) fn glorot_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    limit: f64,
    rng: &mut R,
) -> Matrix {
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
    Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return dim_err(format!(
                "bias of length {} for {} output rows",
                bias.len(),
                weights.rows()
            ));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = glorot_limit(in_dim, out_dim);
        Self {
            weights: glorot_matrix(out_dim, in_dim, limit, rng),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return dim_err(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            ));
        }
        let mut z = self.bias.clone();
        self.weights.gemv_acc(x, &mut z);
        Ok(z)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.pre_activation(x)?;
        z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        Ok(z)
    }

    /// Gradients `[dW, db]` and `dx` given the forward input `x`, the cached
    /// pre-activation `z` and the upstream gradient on the output.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        z: &[f64],
        upstream: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if upstream.len() != self.out_dim() || z.len() != self.out_dim() {
            return dim_err("dense backward: upstream length differs from output");
        }
        if x.len() != self.in_dim() {
            return dim_err("dense backward: input length differs from layer");
        }
        let delta: Vec<f64> = upstream
            .iter()
            .zip(z)
            .map(|(u, &zi)| u * self.activation.derivative(zi))
            .collect();
        self.backward_delta(x, delta)
    }

    /// Like [`Self::backward`] with the gradient already taken with respect
    /// to the pre-activation.
    pub(crate) fn backward_delta(
        &self,
        x: &[f64],
        delta: Vec<f64>,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if delta.len() != self.out_dim() || x.len() != self.in_dim() {
            return dim_err("dense backward: gradient or input length differs from layer");
        }
        let mut dw = vec![0.0; self.out_dim() * self.in_dim()];
        add_outer(&mut dw, &delta, x);
        let mut dx = vec![0.0; self.in_dim()];
        self.weights.gemv_t_acc(&delta, &mut dx);
        Ok((vec![dw, delta], dx))
    }

    pub(crate) fn params(&self) -> Vec<&[f64]> {
        vec![self.weights.data(), &self.bias]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weights.data_mut(), &mut self.bias]
    }
}
