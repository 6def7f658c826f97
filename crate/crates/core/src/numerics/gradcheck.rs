use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Compares the tape gradient of a scalar function against central
/// differences and returns the worst relative error
/// `|analytic − numeric| / (|analytic| + |numeric| + 1e-8)`.
///
/// `f` receives a fresh tape and the leaf holding `x`; it must return a
/// scalar. Runs in `f64`. Tensors borrowed by `f` may be registered on
/// the tape directly.
pub fn grad_check<'a, F>(f: F, x: &Tensor<f64>, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape<'a, f64>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param_owned(x.clone());
    let loss = f(&mut tape, xv)?;
    let mut grads = tape.backward(loss, 1.0)?;
    let analytic = grads.take(xv).unwrap_or_else(|| Tensor::zeros(x.shape()));

    let eval = |probe: Tensor<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.param_owned(probe);
        let out = f(&mut tape, v)?;
        Ok(tape.value(out).data()[0])
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs() + 1e-8));
    }
    Ok(worst)
}
