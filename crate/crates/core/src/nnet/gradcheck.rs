use rand::Rng;

use super::mlp::{Loss, Mlp};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute rather than relative terms.
const REL_FLOOR: f64 = 1e-5;

/// Worst relative error between `analytic` and central differences of the
/// eval-mode loss at the given parameter coordinates.
pub fn compare_gradients<I: AsRef<[u32]>>(
    net: &Mlp,
    batch: &[I],
    loss: &Loss<'_>,
    analytic: &[f64],
    coords: &[usize],
) -> Result<f64> {
    if coords.is_empty() {
        return Err(Error::Parameter("gradient check needs at least one coordinate".into()));
    }
    if analytic.len() != net.num_params() {
        return Err(Error::Dimension("gradient length differs from parameter count".into()));
    }
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for &c in coords {
        let orig = probe.params()[c];
        probe.params_mut()[c] = orig + FD_STEP;
        let up = probe.loss(batch, loss)?;
        probe.params_mut()[c] = orig - FD_STEP;
        let down = probe.loss(batch, loss)?;
        probe.params_mut()[c] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = (analytic[c] - numeric).abs() / numeric.abs().max(REL_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Samples `trials` parameter coordinates and returns the worst relative
/// error of the analytic gradient against central finite differences.
pub fn grad_check<I: AsRef<[u32]>, R: Rng>(
    net: &Mlp,
    batch: &[I],
    loss: &Loss<'_>,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Parameter("gradient check needs at least one trial".into()));
    }
    let (_, analytic) = net.backward(batch, loss, None)?;
    let coords: Vec<usize> = (0..trials).map(|_| rng.gen_range(0..net.num_params())).collect();
    compare_gradients(net, batch, loss, &analytic, &coords)
}
