//! Conditional variance estimators.

use serde::{Deserialize, Serialize};

use crate::domain::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    Homoskedastic,
    Nn,
    NnAdjusted,
}

pub const DEFAULT_MATCHES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub per_obs: Vec<f64>,
    pub method: VarianceMethod,
    pub matches: usize,
    /// Observations where the adjusted estimator fell back to the plain one.
    pub fallbacks: usize,
}

pub fn estimate(sample: &Sample, method: VarianceMethod, matches: usize) -> Result<VarianceEstimate> {
    match method {
        VarianceMethod::Homoskedastic => homoskedastic_init(sample),
        VarianceMethod::Nn => nn_variance(sample, matches),
        VarianceMethod::NnAdjusted => nn_adjusted_variance(sample, matches),
    }
}

fn side_indices(sample: &Sample) -> [Vec<usize>; 2] {
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    for (i, &x) in sample.x.iter().enumerate() {
        if x >= 0.0 {
            plus.push(i);
        } else {
            minus.push(i);
        }
    }
    [minus, plus]
}

/// Residual sum of squares of an OLS line.
fn line_ssr(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let b = sxy / sxx;
    Some(x.iter().zip(y).map(|(a, v)| (v - ym - b * (a - xm)).powi(2)).sum())
}

/// Pooled residual variance of separate OLS lines on each side.
pub fn homoskedastic_init(sample: &Sample) -> Result<VarianceEstimate> {
    let mut ssr = 0.0;
    for idx in side_indices(sample) {
        if idx.len() < 3 {
            return Err(Error::invalid("homoskedastic variance needs at least 3 points per side"));
        }
        let x: Vec<f64> = idx.iter().map(|&i| sample.x[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| sample.y[i]).collect();
        ssr += line_ssr(&x, &y)
            .ok_or_else(|| Error::invalid("degenerate side fit: all x values equal on one side"))?;
    }
    let s2 = ssr / (sample.len() - 4) as f64;
    Ok(VarianceEstimate {
        per_obs: vec![s2; sample.len()],
        method: VarianceMethod::Homoskedastic,
        matches: 0,
        fallbacks: 0,
    })
}

/// Same-side neighbours of position `p` in `order` (sorted by x, then index).
///
/// Returns the `j` nearest by distance, ties going to the smaller original index.
fn neighbours(order: &[usize], xs: &[f64], p: usize, j: usize) -> Vec<usize> {
    let x0 = xs[order[p]];
    let (mut l, mut r) = (p, p + 1);
    let mut picked = 0;
    let mut kth = 0.0;
    // distance of the j-th neighbour
    while picked < j {
        let dl = if l > 0 { x0 - xs[order[l - 1]] } else { f64::INFINITY };
        let dr = if r < order.len() { xs[order[r]] - x0 } else { f64::INFINITY };
        if dl <= dr {
            kth = dl;
            l -= 1;
        } else {
            kth = dr;
            r += 1;
        }
        picked += 1;
    }
    let mut inner = Vec::with_capacity(j);
    let mut boundary = Vec::new();
    let mut a = p;
    while a > 0 && x0 - xs[order[a - 1]] <= kth {
        a -= 1;
        let d = x0 - xs[order[a]];
        if d < kth { inner.push(order[a]) } else { boundary.push(order[a]) }
    }
    let mut b = p + 1;
    while b < order.len() && xs[order[b]] - x0 <= kth {
        let d = xs[order[b]] - x0;
        if d < kth { inner.push(order[b]) } else { boundary.push(order[b]) }
        b += 1;
    }
    boundary.sort_unstable();
    let need = j - inner.len();
    inner.extend(boundary.into_iter().take(need));
    inner
}

fn sorted_side(sample: &Sample, idx: &[usize]) -> Vec<usize> {
    let mut o = idx.to_vec();
    o.sort_by(|&a, &b| sample.x[a].total_cmp(&sample.x[b]).then(a.cmp(&b)));
    o
}

/// Nearest-neighbour variance with `j` same-side matches.
pub fn nn_variance(sample: &Sample, j: usize) -> Result<VarianceEstimate> {
    if j < 1 {
        return Err(Error::invalid("need at least one match"));
    }
    let mut out = vec![0.0; sample.len()];
    for idx in side_indices(sample) {
        if idx.len() < j + 1 {
            return Err(Error::invalid(format!(
                "each side needs more than {j} observations for nearest-neighbour variance"
            )));
        }
        let order = sorted_side(sample, &idx);
        for p in 0..order.len() {
            let nb = neighbours(&order, &sample.x, p, j);
            let m = nb.iter().map(|&k| sample.y[k]).sum::<f64>() / j as f64;
            let i = order[p];
            out[i] = j as f64 / (j as f64 + 1.0) * (sample.y[i] - m).powi(2);
        }
    }
    Ok(VarianceEstimate {
        per_obs: out,
        method: VarianceMethod::Nn,
        matches: j,
        fallbacks: 0,
    })
}

/// Nearest-neighbour variance with residuals from a line fit on the `j` matches.
///
/// The squared prediction residual is divided by `1 + leverage` of the prediction
/// point, which makes it unbiased under homoskedastic linear truth. Points whose
/// matches share a single x value use the plain estimator.
pub fn nn_adjusted_variance(sample: &Sample, j: usize) -> Result<VarianceEstimate> {
    if j < 2 {
        return Err(Error::invalid("the adjusted estimator needs at least two matches"));
    }
    let mut out = vec![0.0; sample.len()];
    let mut fallbacks = 0;
    for idx in side_indices(sample) {
        if idx.len() < j + 1 {
            return Err(Error::invalid(format!(
                "each side needs more than {j} observations for nearest-neighbour variance"
            )));
        }
        let order = sorted_side(sample, &idx);
        for p in 0..order.len() {
            let i = order[p];
            let nb = neighbours(&order, &sample.x, p, j);
            let n = j as f64;
            let xm = nb.iter().map(|&k| sample.x[k]).sum::<f64>() / n;
            let ym = nb.iter().map(|&k| sample.y[k]).sum::<f64>() / n;
            let sxx: f64 = nb.iter().map(|&k| (sample.x[k] - xm).powi(2)).sum();
            let spread = nb
                .iter()
                .map(|&k| (sample.x[k] - xm).abs())
                .fold(0.0, f64::max);
            if !(spread > 1e-12 * (1.0 + xm.abs())) {
                fallbacks += 1;
                out[i] = n / (n + 1.0) * (sample.y[i] - ym).powi(2);
                continue;
            }
            let sxy: f64 = nb
                .iter()
                .map(|&k| (sample.x[k] - xm) * (sample.y[k] - ym))
                .sum();
            let b = sxy / sxx;
            let d = sample.x[i] - xm;
            let e = sample.y[i] - ym - b * d;
            let lev = 1.0 / n + d * d / sxx;
            out[i] = e * e / (1.0 + lev);
        }
    }
    Ok(VarianceEstimate {
        per_obs: out,
        method: VarianceMethod::NnAdjusted,
        matches: j,
        fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: Vec<f64>, y: Vec<f64>) -> Sample {
        Sample::new(x, y, 0.0).unwrap()
    }

    fn grid_x(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn homoskedastic_cases() {
        let x = grid_x(40);
        let line: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v + if *v >= 0.0 { 0.5 * v } else { 0.0 }).collect();
        assert!(homoskedastic_init(&sample(x.clone(), line.clone())).unwrap().per_obs[0] < 1e-20);
        let shifted: Vec<f64> = line.iter().map(|v| v + 7.0).collect();
        let a = homoskedastic_init(&sample(x.clone(), line)).unwrap().per_obs[0];
        let b = homoskedastic_init(&sample(x, shifted)).unwrap().per_obs[0];
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn homoskedastic_alternating() {
        let n = 400;
        let x = grid_x(n);
        let sigma = 0.3;
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| 2.0 * v + if i % 2 == 0 { sigma } else { -sigma })
            .collect();
        let s2 = homoskedastic_init(&sample(x, y)).unwrap().per_obs[0];
        assert!((s2 / (sigma * sigma) - 1.0).abs() < 0.02);
    }

    #[test]
    fn nn_two_points() {
        let s = sample(vec![-2.0, -1.0, 1.0, 2.0], vec![5.0, 5.0, 0.0, 2.0]);
        let v = nn_variance(&s, 1).unwrap();
        assert!((v.per_obs[2] - 2.0).abs() < 1e-15 && (v.per_obs[3] - 2.0).abs() < 1e-15);
        assert_eq!(v.per_obs[0], 0.0);
    }

    #[test]
    fn nn_ties_go_to_smaller_index() {
        // point 1 at 0.5 has neighbours at 0.0 (index 0) and 1.0 (index 2), equal distance
        let s = sample(vec![0.0, 0.5, 1.0, -1.0, -2.0], vec![1.0, 0.0, 3.0, 0.0, 0.0]);
        let v = nn_variance(&s, 1).unwrap();
        assert!((v.per_obs[1] - 0.5).abs() < 1e-15);
        let again = nn_variance(&s, 1).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn adjusted_exact_on_lines() {
        let x = grid_x(60);
        let y: Vec<f64> = x.iter().map(|v| if *v >= 0.0 { 40.0 * v - 3.0 } else { -25.0 * v }).collect();
        let s = sample(x, y);
        let a = nn_adjusted_variance(&s, 10).unwrap();
        assert!(a.per_obs.iter().all(|v| *v < 1e-20));
        let plain = nn_variance(&s, 10).unwrap();
        assert!(plain.per_obs.iter().any(|v| *v > 1e-3));
    }

    #[test]
    fn adjusted_falls_back_on_single_x() {
        let x = vec![-1.0, -1.0, -1.0, -0.5, 0.5, 0.5, 0.5, 0.7];
        let y = vec![1.0, 2.0, 4.0, 0.0, 1.0, 3.0, 2.0, 0.0];
        let s = sample(x, y);
        let a = nn_adjusted_variance(&s, 2).unwrap();
        let p = nn_variance(&s, 2).unwrap();
        assert!(a.fallbacks > 0);
        // the point at -0.5 has matches at -1.0 only
        assert_eq!(a.per_obs[3], p.per_obs[3]);
    }

    #[test]
    fn constant_outcome() {
        let x = grid_x(30);
        let s = sample(x, vec![4.0; 30]);
        for m in [VarianceMethod::Homoskedastic, VarianceMethod::Nn, VarianceMethod::NnAdjusted] {
            assert!(estimate(&s, m, 3).unwrap().per_obs.iter().all(|v| v.abs() < 1e-24));
        }
    }
}
