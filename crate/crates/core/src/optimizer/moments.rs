//! Minimum-norm projection of weights onto the moment equalities.

use crate::domain::Order;
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::optimizer::bias::targets;

/// Smallest L2 change of `weights` so that the order-`v` moment conditions hold.
///
/// Each side is handled separately; the correction on a side is affine in `x`.
pub fn project_moments(weights: &[f64], xs: &[f64], order: Order) -> Result<Vec<f64>> {
    if weights.len() != xs.len() {
        return Err(Error::invalid("weights and x must have equal length"));
    }
    let t = targets(order);
    let mut w = weights.to_vec();
    for plus in [true, false] {
        let idx: Vec<usize> = (0..xs.len()).filter(|&i| (xs[i] >= 0.0) == plus).collect();
        if idx.is_empty() {
            return Err(Error::invalid("a side of the cutoff has no observations"));
        }
        let (t0, t1) = if plus { (t[0], t[2]) } else { (t[1], t[3]) };
        let n = idx.len() as f64;
        let xbar = idx.iter().map(|&i| xs[i]).sum::<f64>() / n;
        let sxx: f64 = idx.iter().map(|&i| (xs[i] - xbar).powi(2)).sum();
        if !(sxx > 0.0) {
            return Err(Error::InsufficientSupport(
                "moment projection needs two distinct x values on each side".into(),
            ));
        }
        for _ in 0..3 {
            let (mut s0, mut s1) = (NeumaierSum::default(), NeumaierSum::default());
            for &i in &idx {
                s0.add(w[i]);
                s1.add(w[i] * xs[i]);
            }
            let r0 = s0.value() - t0;
            let r1 = s1.value() - t1;
            if r0 == 0.0 && r1 == 0.0 {
                break;
            }
            // residual in the centered basis (1, x - xbar)
            let rc = r1 - xbar * r0;
            let c0 = r0 / n;
            let c1 = rc / sxx;
            for &i in &idx {
                w[i] -= c0 + c1 * (xs[i] - xbar);
            }
        }
    }
    Ok(w)
}
