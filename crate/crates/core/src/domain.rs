//! Core data types, the folded-normal critical value and interval assembly.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Observations with the threshold already subtracted from `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Treatment intensity, present for fuzzy designs.
    pub t: Option<Vec<f64>>,
    /// Known first-stage kink used to rescale a sharp estimate.
    pub kink_denominator: Option<f64>,
}

impl Sample {
    /// Builds a sample from raw columns, subtracting `cutoff` from every `x`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, cutoff: f64) -> Result<Self> {
        Self::with_treatment(x, y, None, cutoff)
    }

    pub fn with_treatment(
        mut x: Vec<f64>,
        y: Vec<f64>,
        t: Option<Vec<f64>>,
        cutoff: f64,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidData(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(t) = &t {
            if t.len() != x.len() {
                return Err(Error::InvalidData(format!(
                    "t has {} values but x has {}",
                    t.len(),
                    x.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite treatment value".into()));
            }
        }
        if !cutoff.is_finite() {
            return Err(Error::invalid("cutoff must be finite"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite x or y value".into()));
        }
        for v in x.iter_mut() {
            *v -= cutoff;
        }
        Ok(Sample {
            x,
            y,
            t,
            kink_denominator: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same design with a different outcome vector.
    pub fn with_outcome(&self, y: Vec<f64>) -> Sample {
        Sample {
            x: self.x.clone(),
            y,
            t: None,
            kink_denominator: self.kink_denominator,
        }
    }

    /// Number of distinct x values strictly below and at-or-above zero.
    pub fn distinct_per_side(&self) -> (usize, usize) {
        let mut xs = self.x.clone();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let minus = xs.iter().filter(|&&v| v < 0.0).count();
        (minus, xs.len() - minus)
    }

    /// Fails unless each side carries at least two distinct x values.
    pub fn check_solvable(&self) -> Result<()> {
        let (m, p) = self.distinct_per_side();
        if m < 2 || p < 2 {
            return Err(Error::InsufficientSupport(format!(
                "need at least 2 distinct x values on each side of the cutoff (found {m} below, {p} above)"
            )));
        }
        Ok(())
    }
}

/// Derivative order of the estimand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Jump in the level (discontinuity design), v = 0.
    Level,
    /// Jump in the first derivative (kink design), v = 1.
    Kink,
}

impl Order {
    pub fn v(self) -> usize {
        match self {
            Order::Level => 0,
            Order::Kink => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    #[default]
    None,
    Concave,
    Convex,
    Increasing,
    Decreasing,
}

/// Curvature bound and target of the analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessSpec {
    pub l: f64,
    /// Bound for the treatment CEF in fuzzy designs.
    pub l_t: f64,
    pub order: Order,
    pub shape: Shape,
}

impl SmoothnessSpec {
    pub fn kink(l: f64) -> Self {
        SmoothnessSpec {
            l,
            l_t: 0.0,
            order: Order::Kink,
            shape: Shape::None,
        }
    }

    pub fn level(l: f64) -> Self {
        SmoothnessSpec {
            order: Order::Level,
            ..Self::kink(l)
        }
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l.is_finite() && self.l >= 0.0) {
            return Err(Error::invalid(format!("L must be finite and nonnegative, got {}", self.l)));
        }
        if !(self.l_t.is_finite() && self.l_t >= 0.0) {
            return Err(Error::invalid(format!(
                "L_T must be finite and nonnegative, got {}",
                self.l_t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HonestInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    pub max_bias: f64,
    pub t_bar: f64,
    pub cv: f64,
    pub alpha: f64,
    pub honest: bool,
    pub method: String,
    /// Interval divided by a known first-stage kink, when one was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_interval: Option<(f64, f64)>,
}

impl HonestInterval {
    pub fn half_length(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    /// Attaches the interval for the ratio estimand `theta / k`.
    pub fn rescaled(mut self, k: f64) -> Result<Self> {
        if !k.is_finite() || k == 0.0 {
            return Err(Error::invalid("kink denominator must be finite and nonzero"));
        }
        let (a, b) = (self.lower / k, self.upper / k);
        self.tau_interval = Some((a.min(b), a.max(b)));
        Ok(self)
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Two-sided normal critical value z_{1-alpha/2}.
pub fn z_crit(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(norm_quantile(1.0 - 0.5 * alpha))
}

/// The 1-alpha quantile of |N(t_bar, 1)|.
pub fn folded_normal_cv(t_bar: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !t_bar.is_finite() || t_bar < 0.0 {
        return Err(Error::invalid(format!(
            "bias ratio must be finite and nonnegative, got {t_bar}"
        )));
    }
    let z = norm_quantile(1.0 - 0.5 * alpha);
    if t_bar == 0.0 {
        return Ok(z);
    }
    if t_bar >= 20.0 {
        // the lower tail underflows
        return Ok(t_bar + norm_quantile(1.0 - alpha));
    }
    // tail(c) = P(|N(t,1)| > c), decreasing in c
    let tail = |c: f64| norm_cdf(t_bar - c) + norm_cdf(-c - t_bar);
    let (mut lo, mut hi) = (z, t_bar + z + 10.0);
    for _ in 0..200 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn build_interval(estimate: f64, se: f64, max_bias: f64, alpha: f64) -> Result<HonestInterval> {
    if !(se > 0.0) || !se.is_finite() {
        return Err(Error::invalid(format!("standard error must be positive, got {se}")));
    }
    if !(max_bias >= 0.0) || !max_bias.is_finite() {
        return Err(Error::invalid(format!(
            "maximal bias must be finite and nonnegative, got {max_bias}"
        )));
    }
    if !estimate.is_finite() {
        return Err(Error::Numerical("non-finite point estimate".into()));
    }
    let t_bar = max_bias / se;
    let cv = folded_normal_cv(t_bar, alpha)?;
    Ok(HonestInterval {
        estimate,
        lower: estimate - se * cv,
        upper: estimate + se * cv,
        se,
        max_bias,
        t_bar,
        cv,
        alpha,
        honest: true,
        method: String::new(),
        tau_interval: None,
    })
}

/// Interval that ignores bias, using the plain normal quantile.
pub fn normal_interval(estimate: f64, se: f64, alpha: f64) -> Result<HonestInterval> {
    let mut iv = build_interval(estimate, se, 0.0, alpha)?;
    iv.honest = false;
    Ok(iv)
}

/// Returns `(max w^2 / sum w^2, max |w| / sum |w|)`.
pub fn diagnostics(weights: &[f64]) -> Result<(f64, f64)> {
    let (mut max_abs, mut sum_abs, mut sum_sq) = (0.0f64, 0.0, 0.0);
    for &w in weights {
        let a = w.abs();
        max_abs = max_abs.max(a);
        sum_abs += a;
        sum_sq += w * w;
    }
    if sum_abs == 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok((max_abs * max_abs / sum_sq, max_abs / sum_abs))
}

/// Piecewise-linear weighting kernel and its absolute integral.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasProfile {
    pub knots: Vec<f64>,
    /// Kernel value at each knot; linear in between, zero outside.
    pub values: Vec<f64>,
    pub integral_abs: f64,
    /// Integrals of the positive and negative parts.
    pub integral_pos: f64,
    pub integral_neg: f64,
}

impl BiasProfile {
    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if k.is_empty() || t < k[0] || t > k[k.len() - 1] {
            return 0.0;
        }
        let i = k.partition_point(|&v| v <= t);
        if i == 0 {
            return self.values[0];
        }
        if i >= k.len() {
            return self.values[k.len() - 1];
        }
        let (a, b) = (k[i - 1], k[i]);
        let s = (t - a) / (b - a);
        self.values[i - 1] * (1.0 - s) + self.values[i] * s
    }
}
