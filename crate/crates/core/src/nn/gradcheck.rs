//! Central-difference gradient checking.

use super::mlp::Mlp;
use crate::error::Result;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Central differences of a scalar function at `point`.
pub fn central_difference<F>(mut f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let up = f(&x);
            x[i] = orig - step;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Floor on the denominator of [`max_relative_error`] for a unit-sized
/// loss. Central differences with [`FD_STEP`] carry roundoff of about
/// `1e-10·|loss|`, so smaller gradients have no meaningful relative error.
pub const REL_ERR_FLOOR: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`, maximized over all entries.
///
/// Two zero gradients compare as zero error.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    max_relative_error_floor(analytic, numeric, REL_ERR_FLOOR)
}

/// [`max_relative_error`] with an explicit denominator floor.
pub fn max_relative_error_floor(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let denom = a.abs().max(n.abs()).max(floor);
            (a - n).abs() / denom
        })
        .fold(0.0, f64::max)
}

/// Numerical gradient of `loss(net(x))` with respect to every parameter,
/// flattened in canonical order.
pub fn numeric_param_grads<L>(net: &Mlp, x: &[f64], loss: L, step: f64) -> Result<Vec<f64>>
where
    L: Fn(&[f64]) -> f64,
{
    let mut probe = net.clone();
    let base = net.flat_params();
    let mut err = None;
    let grads = central_difference(
        |theta| {
            if probe.set_flat_params(theta).is_err() {
                return f64::NAN;
            }
            match probe.forward(x) {
                Ok(y) => loss(&y),
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &base,
        step,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(grads),
    }
}

/// Compares backprop against central differences for a scalar loss of the
/// network output. `loss_grad` is the gradient of `loss` with respect to the
/// output. Returns the maximum relative error over all parameters, with the
/// floor scaled by the loss magnitude.
pub fn finite_diff_check<L, G>(net: &Mlp, x: &[f64], loss: L, loss_grad: G) -> Result<f64>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let y = net.forward(x)?;
    let floor = REL_ERR_FLOOR * loss(&y).abs().max(1.0);
    let analytic = net.backprop(x, &loss_grad(&y))?.grads.concat();
    let numeric = numeric_param_grads(net, x, loss, FD_STEP)?;
    Ok(max_relative_error_floor(&analytic, &numeric, floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::Activation;
    use crate::nn::dense::DenseLayer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::new(vec![
            DenseLayer::glorot(3, 5, Activation::Softplus, &mut rng).into(),
            DenseLayer::glorot(5, 2, Activation::Softplus, &mut rng).into(),
        ])
        .unwrap()
    }

    fn sq(y: &[f64]) -> f64 {
        y.iter().map(|v| v * v).sum::<f64>() * 0.5
    }

    #[test]
    fn correct_net_passes() {
        let err = finite_diff_check(&net(1), &[0.5, -1.0, 2.0], sq, |y| y.to_vec()).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let n = net(2);
        let x = [0.5, -1.0, 2.0];
        let y = n.forward(&x).unwrap();
        let mut analytic = n.backprop(&x, &y).unwrap().grads.concat();
        let idx = analytic.iter().position(|g| g.abs() > 1e-3).unwrap();
        analytic[idx] *= 2.0;
        let numeric = numeric_param_grads(&n, &x, sq, FD_STEP).unwrap();
        assert!(max_relative_error(&analytic, &numeric) > 1e-2);
    }

    #[test]
    fn constant_loss_reports_zero() {
        let err =
            finite_diff_check(&net(3), &[1.0, 1.0, 1.0], |_| 4.0, |y| vec![0.0; y.len()]).unwrap();
        assert_eq!(err, 0.0);
    }
}
