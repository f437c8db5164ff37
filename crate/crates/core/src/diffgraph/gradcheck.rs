use super::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Outcome of comparing reverse-mode and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1)`.
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Checks `f` at `x` by central differences with step `eps`.
///
/// `f` receives a fresh tape and the handle of `x` on it and must return a
/// scalar. The error is relative for gradients above one in magnitude and
/// absolute below, so near-zero entries do not dominate.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let eval = |t: &Tensor<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(t);
        let out = f(&mut tape, v)?;
        match tape.value(out) {
            [s] => Ok(*s),
            other => Err(Error::Usage(format!(
                "grad_check needs a scalar function, got {} values",
                other.len()
            ))),
        }
    };

    let xg = x.clone().with_requires_grad(true);
    let mut tape = Tape::new();
    let v = tape.leaf(&xg);
    let out = f(&mut tape, v)?;
    let analytic = tape.backward(out)?.wrt(&tape, v);

    let mut probe = xg.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst_index = 0;
    for (i, &orig) in x.data().iter().enumerate() {
        probe.data_mut()[i] = orig + eps;
        let fp = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let fm = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
        if err > max_rel_err || err.is_nan() {
            max_rel_err = err;
            worst_index = i;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst_index,
        checked: x.len(),
        tol,
        passed: max_rel_err < tol,
    })
}
