use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::model::Model;

/// Central-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so parameters whose true
/// gradient is zero are judged by absolute finite-difference noise.
const REL_FLOOR: f64 = 1e-7;

/// Backprop gradient of the squared error `(f(x) − y)²`, flattened in
/// parameter order.
pub fn analytic_gradient(model: &Model, features: &[f64], label: f64) -> Result<Vec<f64>> {
    let x = single_row(model, features)?;
    let (_, grads) = model.squared_error_grads(x, &[label], 1.0);
    Ok(grads.into_iter().flatten().collect())
}

/// Largest relative discrepancy between the backprop gradient of the
/// squared error and central finite differences, over all parameters.
pub fn gradient_check(model: &Model, features: &[f64], label: f64) -> Result<f64> {
    let analytic = analytic_gradient(model, features, label)?;
    let x = single_row(model, features)?;
    let loss = |m: &Model| -> Result<f64> {
        let p = m.forward(x)?[0];
        Ok((p - label) * (p - label))
    };

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut flat = 0;
    let tensors = model.params().len();
    for t in 0..tensors {
        let len = model.params()[t].len();
        for i in 0..len {
            let orig = probe.params_mut()[t][i];
            probe.params_mut()[t][i] = orig + FD_STEP;
            let up = loss(&probe)?;
            probe.params_mut()[t][i] = orig - FD_STEP;
            let down = loss(&probe)?;
            probe.params_mut()[t][i] = orig;

            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[flat];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
            flat += 1;
        }
    }
    Ok(worst)
}

fn single_row<'a>(model: &Model, features: &'a [f64]) -> Result<ArrayView2<'a, f64>> {
    if features.len() != model.input_len() {
        return Err(Error::ShapeMismatch {
            expected: model.input_len(),
            got: features.len(),
        });
    }
    ArrayView2::from_shape((1, features.len()), features).map_err(|e| Error::Config(e.to_string()))
}
