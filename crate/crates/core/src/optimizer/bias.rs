//! Exact worst-case bias of linear weights through the weighting kernel.

use crate::domain::{BiasProfile, Order};
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Largest moment residual of `weights` for the order-`v` conditions.
pub fn moment_residual(weights: &[f64], xs: &[f64], order: Order) -> f64 {
    let m = moments(weights, xs);
    let target = targets(order);
    m.iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `(sum_+ w, sum_- w, sum_+ w x, sum_- w x)`, with the `+` side being `x >= 0`.
pub fn moments(weights: &[f64], xs: &[f64]) -> [f64; 4] {
    let mut s = [NeumaierSum::default(); 4];
    for (&w, &x) in weights.iter().zip(xs) {
        if x >= 0.0 {
            s[0].add(w);
            s[2].add(w * x);
        } else {
            s[1].add(w);
            s[3].add(w * x);
        }
    }
    [s[0].value(), s[1].value(), s[2].value(), s[3].value()]
}

/// Right-hand sides matching [`moments`].
pub fn targets(order: Order) -> [f64; 4] {
    match order {
        Order::Kink => [0.0, 0.0, 1.0, -1.0],
        Order::Level => [1.0, -1.0, 0.0, 0.0],
    }
}

/// Tolerance on moment residuals below which the bias is treated as finite.
pub const MOMENT_TOL: f64 = 1e-8;

/// Weighting kernel of `weights` with exact integrals of its absolute value and parts.
pub fn bias_profile(weights: &[f64], xs: &[f64]) -> BiasProfile {
    let mut plus: Vec<(f64, f64)> = Vec::new();
    let mut minus: Vec<(f64, f64)> = Vec::new();
    for (&w, &x) in weights.iter().zip(xs) {
        if x >= 0.0 {
            plus.push((x, w));
        } else {
            minus.push((x, w));
        }
    }
    plus.sort_by(|a, b| a.0.total_cmp(&b.0));
    minus.sort_by(|a, b| a.0.total_cmp(&b.0));

    // plus side: walk down from the largest x, kernel slope is -S0(t)
    let mut plus_knots = vec![];
    let mut plus_vals = vec![];
    {
        let mut s0 = NeumaierSum::default();
        let mut val = 0.0;
        let mut i = plus.len();
        let mut t_prev = f64::NAN;
        while i > 0 {
            let t = plus[i - 1].0;
            if !t_prev.is_nan() {
                val += (t_prev - t) * s0.value();
            }
            while i > 0 && plus[i - 1].0 == t {
                s0.add(plus[i - 1].1);
                i -= 1;
            }
            plus_knots.push(t);
            plus_vals.push(val);
            t_prev = t;
        }
        if !t_prev.is_nan() && t_prev > 0.0 {
            val += t_prev * s0.value();
            plus_knots.push(0.0);
            plus_vals.push(val);
        }
        plus_knots.reverse();
        plus_vals.reverse();
    }
    // minus side: walk up from the smallest x, kernel slope is S0(t) over x_i < t
    let mut minus_knots = vec![];
    let mut minus_vals = vec![];
    {
        let mut s0 = NeumaierSum::default();
        let mut val = 0.0;
        let mut i = 0;
        let mut t_prev = f64::NAN;
        while i < minus.len() {
            let t = minus[i].0;
            if !t_prev.is_nan() {
                val += (t - t_prev) * s0.value();
            }
            while i < minus.len() && minus[i].0 == t {
                s0.add(minus[i].1);
                i += 1;
            }
            minus_knots.push(t);
            minus_vals.push(val);
            t_prev = t;
        }
        if !t_prev.is_nan() {
            val += (0.0 - t_prev) * s0.value();
            minus_knots.push(0.0);
            minus_vals.push(val);
        }
    }

    let (mut pos, mut neg) = (NeumaierSum::default(), NeumaierSum::default());
    for (k, v) in [(&minus_knots, &minus_vals), (&plus_knots, &plus_vals)] {
        for i in 1..k.len() {
            let (p, n) = segment_parts(v[i - 1], v[i], k[i] - k[i - 1]);
            pos.add(p);
            neg.add(n);
        }
    }

    // join the sides; at zero both one-sided limits are stored when they differ
    let mut knots = minus_knots;
    let mut values = minus_vals;
    for (k, v) in plus_knots.into_iter().zip(plus_vals) {
        if let (Some(&lk), Some(&lv)) = (knots.last(), values.last()) {
            if lk == k && lv == v {
                continue;
            }
        }
        knots.push(k);
        values.push(v);
    }
    let (ip, ineg) = (pos.value(), neg.value());
    BiasProfile {
        knots,
        values,
        integral_abs: ip + ineg,
        integral_pos: ip,
        integral_neg: ineg,
    }
}

/// Integrals of the positive and negative parts of a linear segment.
fn segment_parts(ua: f64, ub: f64, width: f64) -> (f64, f64) {
    if width <= 0.0 {
        return (0.0, 0.0);
    }
    if ua >= 0.0 && ub >= 0.0 {
        (0.5 * (ua + ub) * width, 0.0)
    } else if ua <= 0.0 && ub <= 0.0 {
        (0.0, -0.5 * (ua + ub) * width)
    } else {
        let d = (ua - ub).abs();
        let (hi, lo) = (ua.max(ub), ua.min(ub));
        (0.5 * hi * hi / d * width, 0.5 * lo * lo / d * width)
    }
}

/// `L` times the integral of the absolute weighting kernel.
///
/// Fails with an infinite-bias error when the moment conditions of `order` do not hold.
pub fn worst_case_bias(weights: &[f64], xs: &[f64], l: f64, order: Order) -> Result<(f64, BiasProfile)> {
    if weights.len() != xs.len() {
        return Err(Error::invalid("weights and x must have equal length"));
    }
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::invalid(format!("L must be finite and nonnegative, got {l}")));
    }
    let residual = moment_residual(weights, xs, order);
    let scale = weights.iter().map(|w| w.abs()).fold(1.0, f64::max);
    if !(residual <= MOMENT_TOL * scale) {
        return Err(Error::InfiniteBias { residual });
    }
    let profile = bias_profile(weights, xs);
    Ok((l * profile.integral_abs, profile))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_design() {
        let (b, p) = worst_case_bias(&[1.0, -1.0, -1.0, 1.0], &[-2.0, -1.0, 1.0, 2.0], 1.0, Order::Kink).unwrap();
        assert!((b - 3.0).abs() < 1e-14);
        assert!((p.integral_neg).abs() < 1e-14);
        assert!((p.eval(0.0) - 1.0).abs() < 1e-14);
        assert!((p.eval(1.5) - 0.5).abs() < 1e-14);
        assert!((p.eval(-1.5) - 0.5).abs() < 1e-14);
        assert_eq!(p.eval(2.5), 0.0);
        let (b2, _) = worst_case_bias(&[1.0, -1.0, -1.0, 1.0], &[-2.0, -1.0, 1.0, 2.0], 2.5, Order::Kink).unwrap();
        assert!((b2 - 7.5).abs() < 1e-13);
    }

    #[test]
    fn violated_moments_are_infinite() {
        let r = worst_case_bias(&[1.0, -1.0, -1.0, 1.1], &[-2.0, -1.0, 1.0, 2.0], 1.0, Order::Kink);
        assert!(matches!(r, Err(Error::InfiniteBias { .. })));
    }

    #[test]
    fn sign_change_segment() {
        let (p, n) = segment_parts(1.0, -1.0, 2.0);
        assert!((p - 0.5).abs() < 1e-15 && (n - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let xs = [-1.0, -0.7, -0.3, -0.1, 0.0, 0.2, 0.5, 0.9];
        // kink weights: minus side a + b x, plus side c + d x, solved by hand
        let w = [0.3, -0.4, 0.5, -0.4, 0.0, 0.0, 0.0, 0.0];
        let mut w = w.to_vec();
        // fix plus side: choose w at 0.2,0.5,0.9 with sum 0 and sum wx = 1, plus free w at 0
        // w5 + w6 + w7 = 0; 0.2 w5 + 0.5 w6 + 0.9 w7 = 1 with w7 = 1 -> w5 = ..., w6 = ...
        let w7 = 1.0;
        let w6 = (1.0 - 0.9 * w7 + 0.2 * w7) / (0.5 - 0.2);
        let w5 = -w6 - w7;
        w[5] = w5;
        w[6] = w6;
        w[7] = w7;
        // minus side: adjust the first two for sum 0 and sum wx = -1
        let rest_s: f64 = w[2] + w[3];
        let rest_x: f64 = w[2] * xs[2] + w[3] * xs[3];
        // w0 + w1 = -rest_s; -1 w0 - 0.7 w1 = -1 - rest_x
        let w1 = (-1.0 - rest_x - (-1.0) * (-rest_s)) / (-0.7 + 1.0);
        w[1] = w1;
        w[0] = -rest_s - w1;
        let p = bias_profile(&w, &xs);
        let n = 200_000;
        let mut acc = 0.0;
        for k in 0..n {
            let t = -1.0 + 1.9 * (k as f64 + 0.5) / n as f64;
            let direct: f64 = if t >= 0.0 {
                xs.iter().zip(&w).filter(|(x, _)| **x >= t).map(|(x, w)| w * (x - t)).sum()
            } else {
                -xs.iter().zip(&w).filter(|(x, _)| **x < t).map(|(x, w)| w * (x - t)).sum::<f64>()
            };
            assert!((direct - p.eval(t)).abs() < 1e-9);
            acc += direct.abs() * 1.9 / n as f64;
        }
        assert!((acc - p.integral_abs).abs() < 1e-6);
    }
}
