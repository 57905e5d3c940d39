//! Local polynomial estimators and the conventional, undersmoothed, bias-corrected
//! and fixed-length intervals built on them.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{self, HonestInterval, Order, Sample, SmoothnessSpec};
use crate::error::{Error, Result};
use crate::numeric::{self, NeumaierSum};
use crate::optimizer::{bias_profile, moment_residual, Criterion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    #[default]
    Triangular,
    Uniform,
}

impl KernelSpec {
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        if a >= 1.0 {
            return 0.0;
        }
        match self {
            KernelSpec::Triangular => 1.0 - a,
            KernelSpec::Uniform => 1.0,
        }
    }

    /// `int_0^1 K(u) u^k du`.
    fn moment(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            KernelSpec::Triangular => 1.0 / ((k + 1.0) * (k + 2.0)),
            KernelSpec::Uniform => 1.0 / (k + 1.0),
        }
    }

    /// `int_0^1 K(u)^2 u^k du`.
    fn sq_moment(self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            KernelSpec::Triangular => 2.0 / ((k + 1.0) * (k + 2.0) * (k + 3.0)),
            KernelSpec::Uniform => 1.0 / (k + 1.0),
        }
    }

    /// Boundary bias and variance constants of a one-sided order-`p` fit for the
    /// derivative of order `nu`.
    pub fn boundary_constants(self, p: usize, nu: usize) -> (f64, f64) {
        let d = p + 1;
        let gamma = DMatrix::from_fn(d, d, |a, b| self.moment(a + b));
        let psi = DMatrix::from_fn(d, d, |a, b| self.sq_moment(a + b));
        let theta = DVector::from_fn(d, |a, _| self.moment(a + p + 1));
        let ginv = gamma.try_inverse().expect("kernel moment matrix is positive definite");
        let cb = (&ginv * theta)[nu];
        let cv = (&ginv * psi * &ginv)[(nu, nu)];
        (cb, cv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSelector {
    Fixed,
    PmsePlugin,
    Undersmooth,
    UmseUniform,
    HalfLengthUniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSpec {
    pub h: f64,
    pub b: Option<f64>,
    pub selector: BandwidthSelector,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Side-wise weighted polynomial fit weights for the jump in the `v`-th derivative.
pub fn lp_weights(sample: &Sample, h: f64, kernel: KernelSpec, p: usize, v: usize) -> Result<Vec<f64>> {
    lp_weights_x(&sample.x, h, kernel, p, v)
}

pub(crate) fn lp_weights_x(xs: &[f64], h: f64, kernel: KernelSpec, p: usize, v: usize) -> Result<Vec<f64>> {
    if p < 1 || v > p {
        return Err(Error::invalid(format!("need p >= 1 and v <= p, got p={p}, v={v}")));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    let mut w = vec![0.0; xs.len()];
    for plus in [true, false] {
        let idx: Vec<usize> = (0..xs.len())
            .filter(|&i| (xs[i] >= 0.0) == plus && kernel.eval(xs[i] / h) > 0.0)
            .collect();
        let mut distinct: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < p + 1 {
            return Err(Error::InsufficientSupport(format!(
                "bandwidth {h:.4} covers {} distinct points {} the cutoff; order {p} needs {}",
                distinct.len(),
                if plus { "above" } else { "below" },
                p + 1
            )));
        }
        let d = p + 1;
        let mut m = DMatrix::<f64>::zeros(d, d);
        for &i in &idx {
            let u = xs[i] / h;
            let k = kernel.eval(u);
            let mut pw = vec![1.0; 2 * d - 1];
            for a in 1..pw.len() {
                pw[a] = pw[a - 1] * u;
            }
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] += k * pw[a + b];
                }
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::InsufficientSupport("rank-deficient local design".into()))?;
        let mut e = DVector::<f64>::zeros(d);
        e[v] = 1.0;
        let row = chol.solve(&e);
        let scale = factorial(v) / h.powi(v as i32) * if plus { 1.0 } else { -1.0 };
        for &i in &idx {
            let u = xs[i] / h;
            let k = kernel.eval(u);
            let mut acc = 0.0;
            let mut pw = 1.0;
            for a in 0..d {
                acc += row[a] * pw;
                pw *= u;
            }
            w[i] = scale * k * acc;
        }
    }
    Ok(w)
}

/// Closed-form worst-case bias of order-(p, v) local polynomial weights.
pub fn lp_worst_case_bias(weights: &[f64], xs: &[f64], l: f64, p: usize, v: usize) -> Result<f64> {
    if weights.len() != xs.len() {
        return Err(Error::invalid("weights and x must have equal length"));
    }
    if v > p {
        return Err(Error::invalid("v must not exceed p"));
    }
    // weights must reproduce side polynomials up to order p
    let scale = weights.iter().map(|w| w.abs()).fold(1.0, f64::max);
    for plus in [true, false] {
        for k in 0..=p {
            let s = numeric::sum(
                weights
                    .iter()
                    .zip(xs)
                    .filter(|(_, x)| (**x >= 0.0) == plus)
                    .map(|(w, x)| w * x.powi(k as i32)),
            );
            let target = if k == v {
                factorial(v) * if plus { 1.0 } else { -1.0 }
            } else {
                0.0
            };
            let tol = 1e-8 * scale * xs.iter().map(|x| x.abs().powi(k as i32)).fold(1.0, f64::max);
            if (s - target).abs() > tol {
                return Err(Error::invalid(format!(
                    "weights are not of order (p={p}, v={v}): moment {k} residual {:.3e}",
                    s - target
                )));
            }
        }
    }
    let e = (p + 1) as i32;
    let sp = numeric::sum(weights.iter().zip(xs).filter(|(_, x)| **x >= 0.0).map(|(w, x)| w * x.powi(e)));
    let sm = numeric::sum(weights.iter().zip(xs).filter(|(_, x)| **x < 0.0).map(|(w, x)| w * x.powi(e)));
    let sign = if (p - v) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(factorial(v) * l / factorial(p + 1) * (sign * sp + sm))
}

/// Smallest bandwidth whose kernel covers `k` distinct points on each side.
pub fn support_bandwidth(xs: &[f64], k: usize) -> Result<f64> {
    let mut h = 0.0f64;
    for plus in [true, false] {
        let mut d: Vec<f64> = xs.iter().filter(|x| (**x >= 0.0) == plus).map(|x| x.abs()).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        if d.len() < k {
            return Err(Error::InsufficientSupport(format!(
                "fewer than {k} distinct points {} the cutoff",
                if plus { "above" } else { "below" }
            )));
        }
        let need = if d.len() > k {
            0.5 * (d[k - 1] + d[k])
        } else {
            d[k - 1] * (1.0 + 1e-6) + 1e-12
        };
        h = h.max(need);
    }
    Ok(h)
}

/// Global quartic fit on one side: coefficients, residual variance and coefficient covariance.
pub(crate) struct PolyFit {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub cov: DMatrix<f64>,
}

pub(crate) fn poly_fit(x: &[f64], y: &[f64], deg: usize) -> Result<PolyFit> {
    let n = x.len();
    let d = deg + 1;
    if n <= d {
        return Err(Error::invalid(format!("a degree-{deg} fit needs more than {d} points per side")));
    }
    let s = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let xm = DMatrix::from_fn(n, d, |i, a| (x[i] / s).powi(a as i32));
    let yv = DVector::from_column_slice(y);
    let xtx = xm.transpose() * &xm;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("rank-deficient polynomial design"))?;
    let bs = chol.solve(&(xm.transpose() * &yv));
    let resid = &yv - &xm * &bs;
    let sigma2 = resid.norm_squared() / (n - d) as f64;
    let inv = chol.inverse();
    // undo the scaling of x
    let beta = DVector::from_fn(d, |a, _| bs[a] / s.powi(a as i32));
    let cov = DMatrix::from_fn(d, d, |a, b| sigma2 * inv[(a, b)] / s.powi((a + b) as i32));
    Ok(PolyFit { beta, sigma2, cov })
}

pub(crate) fn split(sample: &Sample) -> [(Vec<f64>, Vec<f64>); 2] {
    let mut plus = (vec![], vec![]);
    let mut minus = (vec![], vec![]);
    for (&x, &y) in sample.x.iter().zip(&sample.y) {
        let t = if x >= 0.0 { &mut plus } else { &mut minus };
        t.0.push(x);
        t.1.push(y);
    }
    [plus, minus]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmseOptions {
    pub kernel: KernelSpec,
    pub regularize: bool,
    pub order: Order,
    pub curvature: Curvature,
}

/// Source of the curvature estimate in the plug-in bias constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    /// Second derivatives at the cutoff of side-wise global quartic fits.
    Quartic,
    /// Local quadratic fits at the pilot bandwidth, which in turn comes from local
    /// cubic fits at a bandwidth set by the global quartic fourth derivatives.
    Pilot,
}

impl Default for PmseOptions {
    fn default() -> Self {
        PmseOptions {
            kernel: KernelSpec::Triangular,
            regularize: true,
            order: Order::Kink,
            curvature: Curvature::Pilot,
        }
    }
}

/// Plug-in pointwise-MSE bandwidths `(h, b)` for the local linear estimate and the
/// local quadratic curvature pilot. Noise and density come from side-wise global
/// quartic fits; the curvature source is set by `opts.curvature`.
pub fn pmse_bandwidth(sample: &Sample, opts: &PmseOptions) -> Result<(f64, f64)> {
    let n = sample.len() as f64;
    let [plus, minus] = split(sample);
    if plus.0.len() < 20 || minus.0.len() < 20 {
        return Err(Error::invalid("plug-in bandwidth needs at least 20 points per side"));
    }
    let fp = poly_fit(&plus.0, &plus.1, 4)?;
    let fm = poly_fit(&minus.0, &minus.1, 4)?;
    let xmin = sample.x.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = sample.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cap = xmax - xmin;
    let floor = support_bandwidth(&sample.x, 3)?;

    let sd = {
        let m = numeric::mean(&sample.x);
        (sample.x.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let hf = 1.06 * sd * n.powf(-0.2);
    let near = sample.x.iter().filter(|x| x.abs() <= hf).count() as f64;
    let dens = near / (2.0 * n * hf);
    if !(dens > 0.0) || !dens.is_finite() {
        warn!("density at the cutoff could not be estimated; using the range cap");
        return Ok((cap, cap));
    }
    let noise = (fp.sigma2 + fm.sigma2) / dens;

    let select_with = |p: usize, nu: usize, b_hat: f64, b_var: f64, regularize: bool| -> f64 {
        let (cb, cv) = opts.kernel.boundary_constants(p, nu);
        let cst = factorial(nu) / factorial(p + 1) * cb;
        let big_b = cst * b_hat;
        let reg = if regularize { cst * cst * b_var } else { 0.0 };
        let big_v = factorial(nu).powi(2) * cv * noise;
        let denom = 2.0 * (p + 1 - nu) as f64 * (big_b * big_b + reg) * n;
        let h = ((2 * nu + 1) as f64 * big_v / denom).powf(1.0 / (2 * p + 3) as f64);
        if h.is_finite() {
            h.clamp(floor, cap)
        } else {
            cap
        }
    };
    let select = |p, nu, b_hat, b_var| select_with(p, nu, b_hat, b_var, opts.regularize);
    let v = opts.order.v();
    // sign of the minus-side term in the curvature combination entering the bias
    let s2 = if v % 2 == 0 { 1.0 } else { -1.0 };
    let (h, b) = match opts.curvature {
        Curvature::Quartic => {
            let b = select(2, 2, 6.0 * (fp.beta[3] + s2 * fm.beta[3]), 36.0 * (fp.cov[(3, 3)] + fm.cov[(3, 3)]));
            let h = select(1, v, 2.0 * (fp.beta[2] - s2 * fm.beta[2]), 4.0 * (fp.cov[(2, 2)] + fm.cov[(2, 2)]));
            (h, b)
        }
        Curvature::Pilot => {
            // the first stage rests on the global fits and is not regularized
            let d = select_with(3, 3, 24.0 * (fp.beta[4] - s2 * fm.beta[4]), 0.0, false);
            let local = |bw: f64, r: usize, sign: f64| -> Result<(f64, f64)> {
                let q = lp_weights_x(&sample.x, bw.max(floor), opts.kernel, r, r)?;
                // q is negated below the cutoff
                let mut est = NeumaierSum::default();
                let mut var = NeumaierSum::default();
                for ((qi, &x), &y) in q.iter().zip(&sample.x).zip(&sample.y) {
                    if x >= 0.0 {
                        est.add(qi * y);
                        var.add(qi * qi * fp.sigma2);
                    } else {
                        est.add(sign * qi * y);
                        var.add(qi * qi * fm.sigma2);
                    }
                }
                Ok((est.value(), var.value()))
            };
            let (b3, v3) = local(d, 3, -s2)?;
            let b = select(2, 2, b3, v3);
            let (b2, v2) = local(b, 2, s2)?;
            (select(1, v, b2, v2), b)
        }
    };
    Ok((h, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Conventional,
    Undersmoothed,
    RbcSameH,
    RbcSeparatePilot,
    FixedLength(Criterion),
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Conventional => "conventional",
            Baseline::Undersmoothed => "us",
            Baseline::RbcSameH => "rbc",
            Baseline::RbcSeparatePilot => "rbc_pilot",
            Baseline::FixedLength(Criterion::Umse) => "fl_umse",
            Baseline::FixedLength(Criterion::Hl) => "fl_hl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions {
    pub kernel: KernelSpec,
    /// Widen bandwidths to cover three support points per side when too small.
    pub support_fallback: bool,
    /// Override for the main bandwidth.
    pub h: Option<f64>,
    /// Override for the pilot bandwidth.
    pub b: Option<f64>,
    /// Log-spaced grid size for the fixed-length bandwidth search.
    pub search_points: usize,
    pub curvature: Curvature,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            kernel: KernelSpec::Triangular,
            support_fallback: true,
            h: None,
            b: None,
            search_points: 30,
            curvature: Curvature::Pilot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub interval: HonestInterval,
    pub h: f64,
    pub b: Option<f64>,
    pub weights: Vec<f64>,
}

fn weights_with_fallback(xs: &[f64], h: f64, kernel: KernelSpec, p: usize, v: usize, fallback: bool) -> Result<(Vec<f64>, f64)> {
    match lp_weights_x(xs, h, kernel, p, v) {
        Ok(w) => Ok((w, h)),
        Err(Error::InsufficientSupport(msg)) if fallback => {
            let h2 = support_bandwidth(xs, 3.max(p + 1))?.max(h);
            warn!("{msg}; widening the bandwidth to {h2:.4}");
            Ok((lp_weights_x(xs, h2, kernel, p, v)?, h2))
        }
        Err(e) => Err(e),
    }
}

fn sd_of(weights: &[f64], sigma2: &[f64]) -> f64 {
    numeric::sum(weights.iter().zip(sigma2).map(|(w, s)| w * w * s)).sqrt()
}

/// Bias-corrected weights `w - sum_+ w x^2/2 * q_+ - sum_- w x^2/2 * q_-` with `q`
/// the local quadratic second-derivative weights of each side.
pub fn rbc_weights(xs: &[f64], h: f64, b: f64, kernel: KernelSpec, order: Order, fallback: bool) -> Result<(Vec<f64>, f64, f64)> {
    let (w, h) = weights_with_fallback(xs, h, kernel, 1, order.v(), fallback)?;
    let (q, b) = weights_with_fallback(xs, b, kernel, 2, 2, fallback)?;
    let sp = numeric::sum(w.iter().zip(xs).filter(|(_, x)| **x >= 0.0).map(|(w, x)| w * x * x));
    let sm = numeric::sum(w.iter().zip(xs).filter(|(_, x)| **x < 0.0).map(|(w, x)| w * x * x));
    // q carries +second derivative on the plus side and -second derivative on the minus side
    let out = w
        .iter()
        .zip(&q)
        .zip(xs)
        .map(|((wi, qi), x)| if *x >= 0.0 { wi - 0.5 * sp * qi } else { wi + 0.5 * sm * qi })
        .collect();
    Ok((out, h, b))
}

/// Baseline interval. `sigma2_hat` enters the reported standard error and
/// `sigma2_search` the fixed-length bandwidth choice.
pub fn baseline_interval(
    sample: &Sample,
    method: Baseline,
    spec: &SmoothnessSpec,
    alpha: f64,
    sigma2_hat: &[f64],
    sigma2_search: &[f64],
    opts: &BaselineOptions,
) -> Result<BaselineResult> {
    domain::z_crit(alpha)?;
    let v = spec.order.v();
    let xs = &sample.x;
    let plug = |o: &BaselineOptions| -> Result<(f64, f64)> {
        match (o.h, o.b) {
            (Some(h), Some(b)) => Ok((h, b)),
            (h, b) => {
                let (hp, bp) = pmse_bandwidth(
                    sample,
                    &PmseOptions {
                        kernel: o.kernel,
                        regularize: true,
                        order: spec.order,
                        curvature: o.curvature,
                    },
                )?;
                Ok((h.unwrap_or(hp), b.unwrap_or(bp)))
            }
        }
    };
    let finish = |w: Vec<f64>, h: f64, b: Option<f64>| -> Result<BaselineResult> {
        let est = numeric::sum(w.iter().zip(&sample.y).map(|(w, y)| w * y));
        let iv = domain::normal_interval(est, sd_of(&w, sigma2_hat), alpha)?.with_method(method.name());
        Ok(BaselineResult {
            interval: iv,
            h,
            b,
            weights: w,
        })
    };
    match method {
        Baseline::Conventional | Baseline::Undersmoothed => {
            let (h, _) = plug(opts)?;
            let h = if method == Baseline::Undersmoothed && opts.h.is_none() {
                h * (sample.len() as f64).powf(-1.0 / 20.0)
            } else {
                h
            };
            let (w, h) = weights_with_fallback(xs, h, opts.kernel, 1, v, opts.support_fallback)?;
            finish(w, h, None)
        }
        Baseline::RbcSameH | Baseline::RbcSeparatePilot => {
            let (h, b) = plug(opts)?;
            let b = if method == Baseline::RbcSameH { opts.b.unwrap_or(h) } else { b };
            let (w, h, b) = rbc_weights(xs, h, b, opts.kernel, spec.order, opts.support_fallback)?;
            finish(w, h, Some(b))
        }
        Baseline::FixedLength(criterion) => {
            let (w, h) = match opts.h {
                Some(h) => weights_with_fallback(xs, h, opts.kernel, 1, v, opts.support_fallback)?,
                None => fixed_length_bandwidth(xs, spec, alpha, sigma2_search, criterion, opts)?,
            };
            let bias = honest_bias(&w, xs, spec)?;
            let est = numeric::sum(w.iter().zip(&sample.y).map(|(w, y)| w * y));
            let iv = domain::build_interval(est, sd_of(&w, sigma2_hat), bias, alpha)?.with_method(method.name());
            Ok(BaselineResult {
                interval: iv,
                h,
                b: None,
                weights: w,
            })
        }
    }
}

/// Worst-case bias over the class from the exact kernel integral.
fn honest_bias(w: &[f64], xs: &[f64], spec: &SmoothnessSpec) -> Result<f64> {
    let res = moment_residual(w, xs, spec.order);
    let scale = w.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if res > 1e-8 * scale {
        return Err(Error::InfiniteBias { residual: res });
    }
    Ok(spec.l * bias_profile(w, xs).integral_abs)
}

/// Local linear bandwidth minimizing worst-case MSE or honest half-length.
pub fn fixed_length_bandwidth(
    xs: &[f64],
    spec: &SmoothnessSpec,
    alpha: f64,
    sigma2: &[f64],
    criterion: Criterion,
    opts: &BaselineOptions,
) -> Result<(Vec<f64>, f64)> {
    let v = spec.order.v();
    let lo = support_bandwidth(xs, 2)?;
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = (xmax - xmin).max(lo * 1.0001);
    let eval = |lh: f64| -> Result<(f64, Vec<f64>)> {
        let h = lh.exp();
        let w = lp_weights_x(xs, h, opts.kernel, 1, v)?;
        let b = honest_bias(&w, xs, spec)?;
        let s = sd_of(&w, sigma2);
        let val = match criterion {
            Criterion::Umse => b * b + s * s,
            Criterion::Hl => {
                if s > 0.0 {
                    s * domain::folded_normal_cv(b / s, alpha)?
                } else {
                    b
                }
            }
        };
        Ok((val, w))
    };
    let k = opts.search_points.max(5);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..k).map(|i| llo + (lhi - llo) * i as f64 / (k - 1) as f64).collect();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for (i, &lh) in grid.iter().enumerate() {
        match eval(lh) {
            Ok((f, w)) => {
                if best.as_ref().map_or(true, |b| f < b.1) {
                    best = Some((i, f, w));
                }
            }
            Err(Error::InsufficientSupport(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let (i, f0, w0) = best.ok_or_else(|| Error::InsufficientSupport("no admissible bandwidth".into()))?;
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(k - 1)];
    let refined = numeric::brent_min(
        |lh| match eval(lh) {
            Ok(r) => Ok::<_, Error>(r),
            Err(Error::InsufficientSupport(_)) => Ok((f64::INFINITY, vec![])),
            Err(e) => Err(e),
        },
        a,
        b,
        1e-4,
        60,
    )?;
    if refined.fx < f0 {
        Ok((refined.payload, refined.x.exp()))
    } else {
        Ok((w0, grid[i].exp()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::worst_case_bias;

    fn forced() -> Sample {
        Sample::new(vec![-2.0, -1.0, 1.0, 2.0], vec![0.3, -1.0, 2.0, 0.5], 0.0).unwrap()
    }

    #[test]
    fn forced_weights_any_kernel() {
        for k in [KernelSpec::Triangular, KernelSpec::Uniform] {
            let w = lp_weights(&forced(), 1e9, k, 1, 1).unwrap();
            for (a, b) in w.iter().zip([1.0, -1.0, -1.0, 1.0]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_forced() {
        let s = forced();
        let w = [1.0, -1.0, -1.0, 1.0];
        assert!((lp_worst_case_bias(&w, &s.x, 1.0, 1, 1).unwrap() - 3.0).abs() < 1e-14);
        assert!((lp_worst_case_bias(&w, &s.x, 2.0, 1, 1).unwrap() - 6.0).abs() < 1e-14);
        assert!(lp_worst_case_bias(&[1.0, -1.0, -1.0, 1.2], &s.x, 1.0, 1, 1).is_err());
    }

    #[test]
    fn level_moments() {
        let x: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
        let s = Sample::new(x.clone(), vec![0.0; 41], 0.0).unwrap();
        let w = lp_weights(&s, 0.5, KernelSpec::Triangular, 1, 0).unwrap();
        let sp: f64 = w.iter().zip(&x).filter(|(_, x)| **x >= 0.0).map(|(w, _)| w).sum();
        let spx: f64 = w.iter().zip(&x).filter(|(_, x)| **x >= 0.0).map(|(w, x)| w * x).sum();
        assert!((sp - 1.0).abs() < 1e-10 && spx.abs() < 1e-10);
        let closed = lp_worst_case_bias(&w, &x, 1.0, 1, 0).unwrap();
        let (exact, _) = worst_case_bias(&w, &x, 1.0, Order::Level).unwrap();
        assert!((closed - exact).abs() < 1e-10);
    }

    #[test]
    fn boundary_constants_triangular() {
        let (cb, cv) = KernelSpec::Triangular.boundary_constants(1, 1);
        assert!((cb - 0.8).abs() < 1e-12);
        assert!((cv - 19.2).abs() < 1e-9);
    }

    #[test]
    fn rbc_keeps_moments() {
        let x: Vec<f64> = (0..81).map(|i| -1.0 + 0.025 * i as f64).collect();
        let (w, _, _) = rbc_weights(&x, 0.4, 0.4, KernelSpec::Triangular, Order::Kink, false).unwrap();
        assert!(moment_residual(&w, &x, Order::Kink) < 1e-10);
    }

    #[test]
    fn support_fallback_widens() {
        let x = vec![-1.0, -0.5, -0.2, -0.1, 0.1, 0.3, 0.6, 1.0];
        assert!(lp_weights_x(&x, 0.15, KernelSpec::Triangular, 1, 1).is_err());
        let (_, h) = weights_with_fallback(&x, 0.15, KernelSpec::Triangular, 1, 1, true).unwrap();
        assert!((h - 0.8).abs() < 1e-12);
    }
}
