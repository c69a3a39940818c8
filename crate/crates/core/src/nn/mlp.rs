use super::activation::Activation;
use super::dense::DenseLayer;
use crate::equivariant::EquivariantLayer;
use crate::error::{dim_err, Error, Result};

/// One layer of a feed-forward stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    Equivariant(EquivariantLayer),
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.in_dim(),
            Layer::Equivariant(l) => l.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.out_dim(),
            Layer::Equivariant(l) => l.out_dim(),
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Dense(l) => l.activation(),
            Layer::Equivariant(l) => l.activation(),
        }
    }

    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Layer::Dense(l) => l.pre_activation(x),
            Layer::Equivariant(l) => l.pre_activation(x),
        }
    }

    fn backward(
        &self,
        x: &[f64],
        z: &[f64],
        upstream: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Layer::Dense(l) => l.backward(x, z, upstream),
            Layer::Equivariant(l) => l.backward(x, z, upstream),
        }
    }

    fn backward_delta(&self, x: &[f64], delta: Vec<f64>) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Layer::Dense(l) => l.backward_delta(x, delta),
            Layer::Equivariant(l) => l.backward_delta(x, delta),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(l) => l.params(),
            Layer::Equivariant(l) => l.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(l) => l.params_mut(),
            Layer::Equivariant(l) => l.params_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

impl From<DenseLayer> for Layer {
    fn from(l: DenseLayer) -> Self {
        Layer::Dense(l)
    }
}

impl From<EquivariantLayer> for Layer {
    fn from(l: EquivariantLayer) -> Self {
        Layer::Equivariant(l)
    }
}

/// Feed-forward stack of [`Layer`]s.
///
/// Parameters are exposed as a flat list of tensors in layer order; dense
/// layers contribute `[W, b]` and equivariant layers `[U, V, b]`. Gradients
/// and optimizer moments use the same ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Values cached by [`Mlp::forward_trace`] for a later backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Trace {
    /// Pre-activation of the last layer.
    pub fn last_pre(&self) -> &[f64] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
pub struct Backprop {
    pub grads: Vec<Vec<f64>>,
    pub input_grad: Vec<f64>,
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return dim_err(format!(
                    "layer {i} outputs {} values but layer {} takes {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            let act = layer.activation();
            let mut z = layer.pre_activation(&h)?;
            z.iter_mut().for_each(|v| *v = act.apply(*v));
            h = z;
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let z = layer.pre_activation(&h)?;
            let act = layer.activation();
            let next = z.iter().map(|&v| act.apply(v)).collect();
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(Trace {
            inputs,
            pre,
            output: h,
        })
    }

    /// Reverse pass for `∂(upstreamᵀ · output)/∂θ` using a cached trace.
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<Backprop> {
        if upstream.len() != self.out_dim() {
            return dim_err(format!(
                "upstream of length {} for output of {}",
                upstream.len(),
                self.out_dim()
            ));
        }
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut g = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (grads, dx) = layer.backward(&trace.inputs[i], &trace.pre[i], &g)?;
            per_layer.push(grads);
            g = dx;
        }
        per_layer.reverse();
        Ok(Backprop {
            grads: per_layer.into_iter().flatten().collect(),
            input_grad: g,
        })
    }

    /// Reverse pass starting from the gradient with respect to the last
    /// layer's pre-activation.
    pub fn backward_pre(&self, trace: &Trace, dz: &[f64]) -> Result<Backprop> {
        if dz.len() != self.out_dim() {
            return dim_err(format!(
                "pre-activation gradient of length {} for output of {}",
                dz.len(),
                self.out_dim()
            ));
        }
        let last = self.layers.len() - 1;
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let (grads, mut g) = self.layers[last].backward_delta(&trace.inputs[last], dz.to_vec())?;
        per_layer.push(grads);
        for (i, layer) in self.layers[..last].iter().enumerate().rev() {
            let (grads, dx) = layer.backward(&trace.inputs[i], &trace.pre[i], &g)?;
            per_layer.push(grads);
            g = dx;
        }
        per_layer.reverse();
        Ok(Backprop {
            grads: per_layer.into_iter().flatten().collect(),
            input_grad: g,
        })
    }

    pub fn backprop(&self, x: &[f64], upstream: &[f64]) -> Result<Backprop> {
        let trace = self.forward_trace(x)?;
        self.backward(&trace, upstream)
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Length of every parameter tensor, in canonical order.
    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    /// Number of distinct trainable values.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.param_shapes()
            .into_iter()
            .map(|n| vec![0.0; n])
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return dim_err(format!(
                "{} values for {} parameters",
                flat.len(),
                self.param_count()
            ));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// Accumulates `src` into `dst`, tensor by tensor.
pub fn accumulate(dst: &mut [Vec<f64>], src: &[Vec<f64>]) {
    for (d, s) in dst.iter_mut().zip(src) {
        for (a, b) in d.iter_mut().zip(s) {
            *a += b;
        }
    }
}

pub fn scale(grads: &mut [Vec<f64>], factor: f64) {
    grads.iter_mut().flatten().for_each(|g| *g *= factor);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::matrix::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_incompatible_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = DenseLayer::glorot(3, 4, Activation::Softplus, &mut rng);
        let b = DenseLayer::glorot(5, 2, Activation::Softplus, &mut rng);
        assert!(Mlp::new(vec![a.into(), b.into()]).is_err());
        assert!(Mlp::new(vec![]).is_err());
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(vec![
            DenseLayer::glorot(3, 4, Activation::Softplus, &mut rng).into(),
            DenseLayer::glorot(4, 2, Activation::Softplus, &mut rng).into(),
        ])
        .unwrap();
        let bp = net.backprop(&[0.0; 3], &[1.0, -2.0]).unwrap();
        assert!(bp.grads[0].iter().all(|&g| g == 0.0));
        assert!(bp.grads[1].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn linear_layer_bias_grad_is_upstream() {
        let layer = DenseLayer::new(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap(),
            vec![0.1, 0.2],
            Activation::Identity,
        )
        .unwrap();
        let net = Mlp::new(vec![layer.into()]).unwrap();
        let up = [0.7, -1.3];
        let bp = net.backprop(&[0.4, 0.9], &up).unwrap();
        assert_eq!(bp.grads[1], up.to_vec());
        assert!(net.backprop(&[0.4, 0.9], &[1.0]).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(vec![
            EquivariantLayer::glorot(3, 2, 4, Activation::Softplus, &mut rng).into(),
            DenseLayer::glorot(12, 2, Activation::Identity, &mut rng).into(),
        ])
        .unwrap();
        assert_eq!(net.param_shapes(), vec![8, 8, 4, 24, 2]);
        let flat: Vec<f64> = (0..net.param_count()).map(|i| i as f64).collect();
        net.set_flat_params(&flat).unwrap();
        assert_eq!(net.flat_params(), flat);
        assert!(net.set_flat_params(&flat[1..]).is_err());
    }

    #[test]
    fn backward_from_pre_activation_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(vec![
            EquivariantLayer::glorot(3, 2, 4, Activation::Softplus, &mut rng).into(),
            EquivariantLayer::glorot(3, 4, 2, Activation::Softplus, &mut rng).into(),
        ])
        .unwrap();
        let x = [0.3, -1.0, 0.8, 0.2, 1.5, -0.4];
        let up = [1.0, -0.5, 0.25, 2.0, 0.0, -1.0];
        let trace = net.forward_trace(&x).unwrap();
        let dz: Vec<f64> = up
            .iter()
            .zip(trace.last_pre())
            .map(|(u, &z)| u * Activation::Softplus.derivative(z))
            .collect();
        let a = net.backward(&trace, &up).unwrap();
        let b = net.backward_pre(&trace, &dz).unwrap();
        assert_eq!(a.grads, b.grads);
        assert_eq!(a.input_grad, b.input_grad);
    }
}
