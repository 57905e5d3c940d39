//! End-to-end optimized interval: solve under a homoskedastic working variance,
//! report with a robust variance estimate.

use log::warn;

use crate::domain::{self, HonestInterval, Sample, SmoothnessSpec};
use crate::error::{Error, Result};
use crate::numeric;
use crate::optimizer::{self, Criterion, OptimizeOptions, WeightSolution};
use crate::variance::{self, VarianceMethod, DEFAULT_MATCHES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub variance: VarianceMethod,
    pub matches: usize,
    pub optimize: OptimizeOptions,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            variance: VarianceMethod::Nn,
            matches: DEFAULT_MATCHES,
            optimize: OptimizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub interval: HonestInterval,
    pub solution: WeightSolution,
    pub spec: SmoothnessSpec,
    pub n_used: usize,
    /// Observations whose robust variance fell back to the plain estimator.
    pub variance_fallbacks: usize,
}

/// Homoskedastic working variance for the solve, floored away from zero.
pub fn working_variance(sample: &Sample) -> Result<Vec<f64>> {
    let v = variance::homoskedastic_init(sample)?;
    let s2 = v.per_obs.first().copied().unwrap_or(0.0);
    if s2 > 0.0 && s2.is_finite() {
        return Ok(v.per_obs);
    }
    let scale = numeric::mean(&sample.y.iter().map(|y| y * y).collect::<Vec<_>>());
    let floor = if scale > 0.0 { 1e-12 * scale } else { 1e-12 };
    warn!("residual variance is zero; using a floor of {floor:.3e} for the solve");
    Ok(vec![floor; sample.len()])
}

/// Interval for `sum w y` with standard error from `sigma2_hat`. A zero standard
/// error is floored so the interval reduces to the bias bound.
pub fn interval_from_weights(
    weights: &[f64],
    y: &[f64],
    sigma2_hat: &[f64],
    max_bias: f64,
    alpha: f64,
) -> Result<HonestInterval> {
    let est = numeric::sum(weights.iter().zip(y).map(|(w, y)| w * y));
    let mut se = numeric::sum(weights.iter().zip(sigma2_hat).map(|(w, s)| w * w * s.max(0.0))).sqrt();
    if !(se > 0.0) {
        let floor = f64::EPSILON * est.abs().max(max_bias).max(f64::MIN_POSITIVE);
        warn!("estimated standard error is zero; flooring at {floor:.3e}");
        se = floor;
    }
    domain::build_interval(est, se, max_bias, alpha)
}

fn final_variance(sample: &Sample, opts: &EstimateOptions) -> Result<variance::VarianceEstimate> {
    variance::estimate(sample, opts.variance, opts.matches)
}

/// Optimized honest interval with the kappa chosen by `criterion`.
pub fn optimized_interval(
    sample: &Sample,
    spec: &SmoothnessSpec,
    alpha: f64,
    criterion: Criterion,
    opts: &EstimateOptions,
) -> Result<Estimate> {
    sample.check_solvable()?;
    let solve_var = working_variance(sample)?;
    optimized_interval_working(sample, spec, alpha, criterion, opts, &solve_var)
}

/// Same as [`optimized_interval`] with a given working variance for the solve.
pub fn optimized_interval_working(
    sample: &Sample,
    spec: &SmoothnessSpec,
    alpha: f64,
    criterion: Criterion,
    opts: &EstimateOptions,
    solve_var: &[f64],
) -> Result<Estimate> {
    let opt = optimizer::Optimizer::new(sample, solve_var, spec, &opts.optimize)?;
    let sol = optimizer::search_kappa(&opt, alpha, criterion, &opts.optimize)?;
    let v = final_variance(sample, opts)?;
    let mut iv = interval_from_weights(&sol.weights, &sample.y, &v.per_obs, sol.max_bias, alpha)?
        .with_method(optimizer::method_name(criterion));
    if let Some(k) = sample.kink_denominator {
        iv = iv.rescaled(k)?;
    }
    Ok(Estimate {
        interval: iv,
        solution: sol,
        spec: *spec,
        n_used: sample.len(),
        variance_fallbacks: v.fallbacks,
    })
}

/// Same as [`optimized_interval`] but reports against caller-supplied variances.
pub fn optimized_interval_with(
    sample: &Sample,
    spec: &SmoothnessSpec,
    alpha: f64,
    criterion: Criterion,
    sigma2_hat: &[f64],
    optimize: &OptimizeOptions,
) -> Result<(WeightSolution, HonestInterval)> {
    if sigma2_hat.len() != sample.len() {
        return Err(Error::invalid("variance vector length differs from the sample"));
    }
    let solve_var = working_variance(sample)?;
    let opt = optimizer::Optimizer::new(sample, &solve_var, spec, optimize)?;
    let sol = optimizer::search_kappa(&opt, alpha, criterion, optimize)?;
    let iv = interval_from_weights(&sol.weights, &sample.y, sigma2_hat, sol.max_bias, alpha)?
        .with_method(optimizer::method_name(criterion));
    Ok((sol, iv))
}
