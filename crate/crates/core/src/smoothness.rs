//! Rules of thumb and a data-driven lower bound for the curvature constant.

use nalgebra::{DMatrix, DVector};

use crate::domain::Sample;
use crate::error::{Error, Result};
use crate::localpoly::{poly_fit, split};
use crate::numeric;

fn sides(sample: &Sample, min_points: usize) -> Result<[(Vec<f64>, Vec<f64>); 2]> {
    let s = split(sample);
    for (side, name) in s.iter().zip(["above", "below"]) {
        let mut d = side.0.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        if d.len() < min_points {
            return Err(Error::invalid(format!(
                "need at least {min_points} distinct points {name} the cutoff, got {}",
                d.len()
            )));
        }
    }
    Ok(s)
}

fn range(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// Largest absolute second derivative of side-wise global quartic fits.
pub fn rot_quartic(sample: &Sample) -> Result<f64> {
    let mut out = 0.0f64;
    for (x, y) in sides(sample, 5)? {
        let fit = poly_fit(&x, &y, 4)?;
        let b = &fit.beta;
        // p''(x) = 2 b2 + 6 b3 x + 12 b4 x^2
        let pp = |t: f64| 2.0 * b[2] + 6.0 * b[3] * t + 12.0 * b[4] * t * t;
        let (lo, hi) = range(&x);
        let mut m = pp(lo).abs().max(pp(hi).abs());
        if b[4] != 0.0 {
            let v = -b[3] / (4.0 * b[4]);
            if v > lo && v < hi {
                m = m.max(pp(v).abs());
            }
        }
        out = out.max(m);
    }
    Ok(out)
}

/// Scaled largest absolute second derivative of side-wise quadratic fits.
pub fn rot_quadratic(sample: &Sample, scale: f64) -> Result<f64> {
    if !(2.0..=4.0).contains(&scale) {
        return Err(Error::invalid(format!("scale must lie in [2, 4], got {scale}")));
    }
    let mut out = 0.0f64;
    for (x, y) in sides(sample, 3)? {
        let fit = poly_fit(&x, &y, 2)?;
        out = out.max((2.0 * fit.beta[2]).abs());
    }
    Ok(scale * out)
}

pub const DEFAULT_KNOTS: usize = 5;

/// Cubic regression spline in truncated-power form on `u in [0, 1]`.
struct SplineBasis {
    knots: Vec<f64>,
}

impl SplineBasis {
    fn dim(&self) -> usize {
        4 + self.knots.len()
    }

    fn row(&self, u: f64) -> Vec<f64> {
        let mut r = vec![1.0, u, u * u, u * u * u];
        r.extend(self.knots.iter().map(|k| (u - k).max(0.0).powi(3)));
        r
    }

    fn second(&self, u: f64) -> Vec<f64> {
        let mut r = vec![0.0, 0.0, 2.0, 6.0 * u];
        r.extend(self.knots.iter().map(|k| 6.0 * (u - k).max(0.0)));
        r
    }

    /// `int_0^1 f''(u)^2 du` as a quadratic form; exact since f'' is piecewise linear.
    fn penalty(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut brk = vec![0.0];
        brk.extend(self.knots.iter().copied());
        brk.push(1.0);
        let g = 0.5 / 3f64.sqrt();
        let mut om = DMatrix::zeros(d, d);
        for w in brk.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = b - a;
            for t in [0.5 - g, 0.5 + g] {
                let s = self.second(a + t * len);
                for i in 0..d {
                    for j in 0..d {
                        om[(i, j)] += 0.5 * len * s[i] * s[j];
                    }
                }
            }
        }
        om
    }
}

/// Largest absolute second derivative of side-wise cubic smoothing splines with
/// `knots_per_side` evenly spaced interior knots and a GCV-chosen penalty.
pub fn rot_spline(sample: &Sample, knots_per_side: usize) -> Result<f64> {
    if knots_per_side == 0 {
        return Err(Error::invalid("knots_per_side must be positive"));
    }
    let mut out = 0.0f64;
    for (x, y) in sides(sample, knots_per_side + 4)? {
        out = out.max(spline_side(&x, &y, knots_per_side)?);
    }
    Ok(out)
}

fn spline_side(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    let (lo, hi) = range(x);
    let s = hi - lo;
    let basis = SplineBasis {
        knots: (1..=k).map(|i| i as f64 / (k + 1) as f64).collect(),
    };
    let d = basis.dim();
    let n = x.len();
    let xm = DMatrix::from_fn(n, d, |i, j| basis.row((x[i] - lo) / s)[j]);
    let yv = DVector::from_column_slice(y);
    let xtx = xm.transpose() * &xm;
    let xty = xm.transpose() * &yv;
    let om = basis.penalty();
    let ratio = xtx.trace() / om.trace().max(1e-300);

    let fit = |log_lam: f64| -> Option<(f64, DVector<f64>)> {
        let lam = ratio * log_lam.exp();
        let a = &xtx + &om * lam;
        let chol = a.cholesky()?;
        let beta = chol.solve(&xty);
        let resid = &yv - &xm * &beta;
        let rss = resid.norm_squared();
        let df = chol.solve(&xtx).trace();
        let dof = n as f64 - df;
        if !(dof > 0.0) {
            return None;
        }
        Some((n as f64 * rss / (dof * dof), beta))
    };
    let grid: Vec<f64> = (0..=64).map(|i| -30.0 + 40.0 * i as f64 / 64.0).collect();
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    for (i, &g) in grid.iter().enumerate() {
        if let Some((v, b)) = fit(g) {
            if best.as_ref().map_or(true, |bb| v < bb.1) {
                best = Some((i, v, b));
            }
        }
    }
    let (i, v0, b0) = best.ok_or_else(|| Error::invalid("rank-deficient spline design"))?;
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(grid.len() - 1)];
    let refined = numeric::brent_min(
        |g| Ok::<_, Error>(fit(g).unwrap_or((f64::INFINITY, DVector::zeros(d)))),
        a,
        b,
        1e-6,
        100,
    )?;
    let beta = if refined.fx < v0 { refined.payload } else { b0 };
    let mut m = 0.0f64;
    for j in 0..1000 {
        let u = j as f64 / 999.0;
        let f2: f64 = basis.second(u).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        m = m.max(f2.abs());
    }
    Ok(m / (s * s))
}

pub const DEFAULT_QUANTILE: f64 = 0.9;

/// Lower bound on the curvature constant from bin means: a function whose second
/// derivative is bounded by `L` stays within `L (m - a)(b - m) / 2` of its secant.
pub fn lower_bound_l(sample: &Sample, bin_width: f64, quantile: f64) -> Result<f64> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::invalid(format!("quantile must lie in [0, 1], got {quantile}")));
    }
    let mut stats = Vec::new();
    for (x, y) in split(sample) {
        let mut bins: std::collections::BTreeMap<i64, (numeric::NeumaierSum, numeric::NeumaierSum, usize)> =
            Default::default();
        for (xi, yi) in x.iter().zip(&y) {
            let b = (xi.abs() / bin_width).floor() as i64;
            let e = bins.entry(b).or_default();
            e.0.add(*xi);
            e.1.add(*yi);
            e.2 += 1;
        }
        let pts: Vec<(i64, f64, f64)> = bins
            .into_iter()
            .map(|(b, (sx, sy, c))| (b, sx.value() / c as f64, sy.value() / c as f64))
            .collect();
        if pts.len() < 3 {
            return Err(Error::invalid("need at least three occupied bins on each side"));
        }
        for ia in 0..pts.len() {
            for ib in ia + 2..pts.len() {
                let (ba, xa, ya) = pts[ia];
                let (bb, xb, yb) = pts[ib];
                if (ba + bb) % 2 != 0 {
                    continue;
                }
                let mid = (ba + bb) / 2;
                let Ok(im) = pts[ia + 1..ib].binary_search_by_key(&mid, |p| p.0) else {
                    continue;
                };
                let (_, xm, ym) = pts[ia + 1 + im];
                let sec = ya + (yb - ya) * (xm - xa) / (xb - xa);
                let den = (xm - xa) * (xb - xm);
                if den.abs() > 0.0 {
                    stats.push(2.0 * (ym - sec).abs() / den.abs());
                }
            }
        }
    }
    if stats.is_empty() {
        return Err(Error::invalid("no bin triples with a middle bin"));
    }
    Ok(numeric::quantile(&mut stats, quantile))
}
