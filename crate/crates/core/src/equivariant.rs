//! Block weight-sharing layers.
//!
//! An [`EquivariantLayer`] acts on an input made of `K` equally sized blocks.
//! Its dense weight matrix carries the same sub-matrix `U` on every diagonal
//! block and the same sub-matrix `V` on every off-diagonal block, and one bias
//! vector is shared by all output blocks:
//!
//! ```text
//! h_out^k = g(U h^k + V Σ_{n≠k} h^n + b)
//! ```
//!
//! Permuting the input blocks therefore permutes the output blocks the same
//! way. Older literature calls this property "permutation invariance"; in
//! current terms the layer is permutation *equivariant*. A non-shared bias
//! would break the property.
//!
//! The forward pass evaluates `s = Σ_n h^n` once and then
//! `g((U − V) h^k + V s + b)` per block, which costs `O(K)` sub-matrix
//! products instead of the `O(K²)` of the expanded matrix.

use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::nn::activation::Activation;
use crate::nn::dense::{glorot_limit, glorot_matrix};
use crate::nn::matrix::{add_outer, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EquivariantLayer {
    u: Matrix,
    v: Matrix,
    bias: Vec<f64>,
    blocks: usize,
    activation: Activation,
}

impl EquivariantLayer {
    pub fn new(
        u: Matrix,
        v: Matrix,
        bias: Vec<f64>,
        blocks: usize,
        activation: Activation,
    ) -> Result<Self> {
        if u.shape() != v.shape() {
            return dim_err(format!("U is {:?} but V is {:?}", u.shape(), v.shape()));
        }
        if bias.len() != u.rows() {
            return dim_err(format!(
                "bias of length {} for d_out {}",
                bias.len(),
                u.rows()
            ));
        }
        if blocks == 0 {
            return Err(Error::InvalidArgument("block count must be >= 1".into()));
        }
        Ok(Self {
            u,
            v,
            bias,
            blocks,
            activation,
        })
    }

    /// Glorot-uniform `U` and `V` using the fan-in/out of the expanded matrix.
    pub fn glorot<R: Rng + ?Sized>(
        blocks: usize,
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = glorot_limit(blocks * d_in, blocks * d_out);
        let u = glorot_matrix(d_out, d_in, limit, rng);
        let v = glorot_matrix(d_out, d_in, limit, rng);
        Self {
            u,
            v,
            bias: vec![0.0; d_out],
            blocks,
            activation,
        }
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_in(&self) -> usize {
        self.u.cols()
    }

    pub fn block_out(&self) -> usize {
        self.u.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.blocks * self.block_in()
    }

    pub fn out_dim(&self) -> usize {
        self.blocks * self.block_out()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Distinct trainable values: `2·d_out·d_in + d_out`, independent of `K`.
    pub fn param_count(&self) -> usize {
        2 * self.block_out() * self.block_in() + self.block_out()
    }

    fn block_sum(&self, h: &[f64]) -> Vec<f64> {
        let d = self.block_in();
        let mut s = vec![0.0; d];
        for block in h.chunks_exact(d) {
            for (acc, v) in s.iter_mut().zip(block) {
                *acc += v;
            }
        }
        s
    }

    pub fn pre_activation(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.in_dim() {
            return dim_err(format!(
                "equivariant layer expects {} inputs ({} blocks of {}), got {}",
                self.in_dim(),
                self.blocks,
                self.block_in(),
                h.len()
            ));
        }
        let d_out = self.block_out();
        let s = self.block_sum(h);
        // V s + b is shared by every block.
        let mut common = self.bias.clone();
        self.v.gemv_acc(&s, &mut common);

        let mut z = Vec::with_capacity(self.out_dim());
        let mut vh = vec![0.0; d_out];
        for block in h.chunks_exact(self.block_in()) {
            let start = z.len();
            z.extend_from_slice(&common);
            let zk = &mut z[start..];
            self.u.gemv_acc(block, zk);
            vh.iter_mut().for_each(|v| *v = 0.0);
            self.v.gemv_acc(block, &mut vh);
            for (a, b) in zk.iter_mut().zip(&vh) {
                *a -= b;
            }
        }
        Ok(z)
    }

    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.pre_activation(h)?;
        z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        Ok(z)
    }

    /// Returns `([dU, dV, dbias], dh)`.
    ///
    /// With `δ_k` the pre-activation gradient of block `k` and `s = Σ_n h^n`:
    /// `dU = Σ_k δ_k h_kᵀ`, `dV = Σ_k δ_k (s − h_k)ᵀ`, `dbias = Σ_k δ_k`.
    pub fn backward(
        &self,
        h: &[f64],
        z: &[f64],
        upstream: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if h.len() != self.in_dim() {
            return dim_err("equivariant backward: input length differs from layer");
        }
        if z.len() != self.out_dim() || upstream.len() != self.out_dim() {
            return dim_err("equivariant backward: upstream length differs from output");
        }
        let delta: Vec<f64> = upstream
            .iter()
            .zip(z)
            .map(|(u, &zi)| u * self.activation.derivative(zi))
            .collect();
        self.backward_delta(h, delta)
    }

    /// Like [`Self::backward`] with the gradient already taken with respect
    /// to the pre-activation.
    pub fn backward_delta(&self, h: &[f64], delta: Vec<f64>) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if h.len() != self.in_dim() || delta.len() != self.out_dim() {
            return dim_err("equivariant backward: gradient or input length differs from layer");
        }
        let (d_in, d_out) = (self.block_in(), self.block_out());
        let s = self.block_sum(h);
        let mut delta_sum = vec![0.0; d_out];
        let mut du = vec![0.0; d_out * d_in];
        let mut dv = vec![0.0; d_out * d_in];
        let mut rest = vec![0.0; d_in];
        for (hk, dk) in h.chunks_exact(d_in).zip(delta.chunks_exact(d_out)) {
            add_outer(&mut du, dk, hk);
            for ((r, si), hi) in rest.iter_mut().zip(&s).zip(hk) {
                *r = si - hi;
            }
            add_outer(&mut dv, dk, &rest);
            for (a, b) in delta_sum.iter_mut().zip(dk) {
                *a += b;
            }
        }

        // dh_k = (U − V)ᵀ δ_k + Vᵀ Σ_n δ_n
        let mut common = vec![0.0; d_in];
        self.v.gemv_t_acc(&delta_sum, &mut common);
        let mut dh = Vec::with_capacity(self.in_dim());
        let mut vt = vec![0.0; d_in];
        for dk in delta.chunks_exact(d_out) {
            let start = dh.len();
            dh.extend_from_slice(&common);
            let dhk = &mut dh[start..];
            self.u.gemv_t_acc(dk, dhk);
            vt.iter_mut().for_each(|v| *v = 0.0);
            self.v.gemv_t_acc(dk, &mut vt);
            for (a, b) in dhk.iter_mut().zip(&vt) {
                *a -= b;
            }
        }
        Ok((vec![du, dv, delta_sum], dh))
    }

    pub(crate) fn params(&self) -> Vec<&[f64]> {
        vec![self.u.data(), self.v.data(), &self.bias]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.u.data_mut(), self.v.data_mut(), &mut self.bias]
    }
}

/// The `(K·d_out) x (K·d_in)` matrix with `U` on the block diagonal and `V`
/// everywhere else.
pub fn expand_to_dense(layer: &EquivariantLayer) -> Matrix {
    let (d_in, d_out) = (layer.block_in(), layer.block_out());
    Matrix::from_fn(layer.out_dim(), layer.in_dim(), |r, c| {
        let (bk, bn) = (r / d_out, c / d_in);
        let src = if bk == bn { &layer.u } else { &layer.v };
        src.get(r % d_out, c % d_in)
    })
}

fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::InvalidPermutation(format!(
                "{perm:?} is not a bijection on 0..{}",
                perm.len()
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Reorders blocks so that output block `k` is input block `perm[k]`.
///
/// This is the `x̃ = [x^{N_1}, …, x^{N_K}]` convention with zero-based
/// indices.
pub fn permute_blocks(x: &[f64], perm: &[usize], block_size: usize) -> Result<Vec<f64>> {
    check_permutation(perm)?;
    if x.len() != perm.len() * block_size {
        return dim_err(format!(
            "{} values cannot hold {} blocks of {}",
            x.len(),
            perm.len(),
            block_size
        ));
    }
    let mut out = Vec::with_capacity(x.len());
    for &src in perm {
        out.extend_from_slice(&x[src * block_size..(src + 1) * block_size]);
    }
    Ok(out)
}

/// Inverse of `perm`, so that `permute_blocks(permute_blocks(x, p), inverse(p)) == x`.
pub fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm)?;
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    Ok(inv)
}

type Unary = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type Binary = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Ingredients of the reference family
/// `y^k = ζ(ψ(x^k), F_{n≠k} φ(x^n))` with `F` commutative.
pub struct InvariantFunctionFixture {
    pub zeta: Binary,
    pub psi: Unary,
    pub phi: Unary,
    /// Commutative reduction, folded left to right.
    pub reduce: Binary,
    /// Value of the reduction over no operands.
    pub identity: Vec<f64>,
}

/// Direct evaluation of the reference family on a list of blocks.
pub fn perm_invariant_reference(
    blocks: &[Vec<f64>],
    fixture: &InvariantFunctionFixture,
) -> Vec<Vec<f64>> {
    let mapped: Vec<Vec<f64>> = blocks.iter().map(|b| (fixture.phi)(b)).collect();
    blocks
        .iter()
        .enumerate()
        .map(|(k, xk)| {
            let others = mapped
                .iter()
                .enumerate()
                .filter(|(n, _)| *n != k)
                .fold(fixture.identity.clone(), |acc, (_, m)| {
                    (fixture.reduce)(&acc, m)
                });
            (fixture.zeta)(&(fixture.psi)(xk), &others)
        })
        .collect()
}
