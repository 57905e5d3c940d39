//! Anderson-Rubin confidence sets for the ratio of outcome and treatment kinks.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{HonestInterval, Sample, SmoothnessSpec};
use crate::error::{Error, Result};
use crate::estimate::{self, EstimateOptions};
use crate::localpoly::{lp_weights_x, KernelSpec};
use crate::numeric;
use crate::optimizer::Criterion;
use crate::variance::{self, VarianceMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetShape {
    /// `[a, b]`
    Bounded,
    /// `(-inf, a] U [b, inf)`
    Complement,
    /// `(-inf, inf)`
    WholeLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub tau: f64,
    pub accepted: bool,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub shape: SetShape,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub tau_grid: Vec<TauPoint>,
    /// Both reported endpoints were located by root finding.
    pub refined: bool,
    /// The set reaches the edge of the scanned range.
    pub boundary: bool,
    pub first_stage: HonestInterval,
    pub notes: Vec<String>,
}

impl ConfidenceSet {
    /// Table label of the set, e.g. `[a, b]`.
    pub fn label(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "?".to_string(), |v| format!("{v:.6}"));
        match self.shape {
            SetShape::Bounded => format!("[{}, {}]", f(self.a), f(self.b)),
            SetShape::Complement => format!("(-inf, {}] U [{}, inf)", f(self.a), f(self.b)),
            SetShape::WholeLine => "(-inf, inf)".to_string(),
        }
    }

    pub fn contains(&self, tau: f64) -> bool {
        match (self.shape, self.a, self.b) {
            (SetShape::WholeLine, _, _) => true,
            (SetShape::Bounded, Some(a), Some(b)) => a <= tau && tau <= b,
            (SetShape::Complement, Some(a), Some(b)) => tau <= a || tau >= b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyOptions {
    pub tau_range: Option<(f64, f64)>,
    pub tau_steps: usize,
    pub estimate: EstimateOptions,
    /// Criterion for the refined endpoints; the grid scan uses worst-case MSE weights.
    pub criterion: Criterion,
    pub refine: bool,
}

impl Default for FuzzyOptions {
    fn default() -> Self {
        FuzzyOptions {
            tau_range: None,
            tau_steps: 81,
            estimate: EstimateOptions {
                variance: VarianceMethod::NnAdjusted,
                ..EstimateOptions::default()
            },
            criterion: Criterion::Hl,
            refine: true,
        }
    }
}

/// Honest interval for the kink of `y` under bound `l`; `l = 0` gives the side-wise
/// least-squares estimate with no bias.
fn kink_interval(
    sample: &Sample,
    l: f64,
    base: &SmoothnessSpec,
    alpha: f64,
    criterion: Criterion,
    opts: &EstimateOptions,
    working: Option<&[f64]>,
) -> Result<HonestInterval> {
    if l > 0.0 {
        let spec = SmoothnessSpec { l, ..*base };
        let est = match working {
            Some(w) => estimate::optimized_interval_working(sample, &spec, alpha, criterion, opts, w)?,
            None => estimate::optimized_interval(sample, &spec, alpha, criterion, opts)?,
        };
        return Ok(est.interval);
    }
    let wide = 2.0 * sample.x.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0;
    let w = lp_weights_x(&sample.x, wide, KernelSpec::Uniform, 1, base.order.v())?;
    let v = variance::estimate(sample, opts.variance, opts.matches)?;
    Ok(estimate::interval_from_weights(&w, &sample.y, &v.per_obs, 0.0, alpha)?.with_method("ols"))
}

struct Problem<'a> {
    sample: &'a Sample,
    t: &'a [f64],
    spec: &'a SmoothnessSpec,
    alpha: f64,
    opts: &'a FuzzyOptions,
    /// Working variance shared by every tau when the treatment is linear on each side.
    working: Option<Vec<f64>>,
}

impl Problem<'_> {
    fn at(&self, tau: f64, criterion: Criterion) -> Result<HonestInterval> {
        let y: Vec<f64> = self.sample.y.iter().zip(self.t).map(|(y, t)| y - tau * t).collect();
        let mut s = self.sample.with_outcome(y);
        s.kink_denominator = None;
        let l = self.spec.l + tau.abs() * self.spec.l_t;
        kink_interval(&s, l, self.spec, self.alpha, criterion, &self.opts.estimate, self.working.as_deref())
    }

    /// Distance of zero inside the interval at `tau`; negative when rejected.
    fn margin(&self, tau: f64) -> Result<f64> {
        let iv = self.at(tau, self.opts.criterion)?;
        Ok(iv.upper.min(-iv.lower))
    }

    /// Endpoint between an accepted and a rejected grid value. The bracket is moved
    /// in grid steps until the refining intervals agree with it.
    fn refine(&self, acc: f64, rej: f64, notes: &mut Vec<String>) -> Result<(f64, bool)> {
        let fallback = 0.5 * (acc + rej);
        let step = rej - acc;
        let (mut a, mut b) = (acc, rej);
        let mut mb = self.margin(b)?;
        let mut moves = 0;
        while mb >= 0.0 {
            if moves == MAX_BRACKET_MOVES {
                notes.push(format!("refining intervals accept {b:.6}; endpoint left at the grid midpoint"));
                return Ok((fallback, false));
            }
            a = b;
            b += step;
            mb = self.margin(b)?;
            moves += 1;
        }
        let mut ma = self.margin(a)?;
        while ma < 0.0 {
            if moves == MAX_BRACKET_MOVES {
                notes.push(format!("refining intervals reject {a:.6}; endpoint left at the grid midpoint"));
                return Ok((fallback, false));
            }
            b = a;
            a -= step;
            ma = self.margin(a)?;
            moves += 1;
        }
        let scale = a.abs().max(b.abs()).max(step.abs()).max(1e-300);
        match numeric::brent_root(|t| self.margin(t), a, b, 1e-12 * scale, 100)? {
            Some(r) => Ok((r, true)),
            None => Ok((fallback, false)),
        }
    }
}

/// Grid steps the refinement bracket may move before giving up.
const MAX_BRACKET_MOVES: usize = 20;

/// Confidence set for the ratio of the outcome kink to the treatment kink.
pub fn ar_confidence_set(
    sample: &Sample,
    spec: &SmoothnessSpec,
    alpha: f64,
    opts: &FuzzyOptions,
) -> Result<ConfidenceSet> {
    let t = sample
        .t
        .as_deref()
        .ok_or_else(|| Error::InvalidData("the fuzzy design needs a treatment column".into()))?;
    spec.validate()?;
    if spec.l == 0.0 && spec.l_t == 0.0 {
        return Err(Error::invalid("L and L_T cannot both be zero"));
    }
    if opts.tau_steps < 3 {
        return Err(Error::invalid("tau_steps must be at least 3"));
    }
    let mut notes = Vec::new();
    let ts = {
        let mut s = sample.with_outcome(t.to_vec());
        s.kink_denominator = None;
        s
    };
    let first = kink_interval(&ts, spec.l_t, spec, alpha, Criterion::Hl, &opts.estimate, None)?;
    let first_covers = first.covers(0.0);
    if first_covers {
        notes.push("the first-stage interval covers zero: the treatment kink may not be identified".into());
    }
    // y - tau t has the residual variance of y when t is linear on each side
    let t_scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let t_resid = variance::homoskedastic_init(&ts)?.per_obs[0].sqrt();
    let working = if t_resid <= 1e-10 * (1.0 + t_scale) {
        Some(estimate::working_variance(sample)?)
    } else {
        None
    };
    let pb = Problem {
        sample,
        t,
        spec,
        alpha,
        opts,
        working,
    };

    let (lo, hi) = match opts.tau_range {
        Some((a, b)) if a < b && a.is_finite() && b.is_finite() => (a, b),
        Some(_) => return Err(Error::invalid("tau range must be finite with lower < upper")),
        None => {
            let ys = {
                let mut s = sample.with_outcome(sample.y.clone());
                s.kink_denominator = None;
                s
            };
            let outcome = kink_interval(&ys, spec.l, spec, alpha, Criterion::Umse, &opts.estimate, None)?;
            let ratio = outcome.estimate / first.estimate;
            let scale = (outcome.se.powi(2) + ratio.powi(2) * first.se.powi(2)).sqrt() / first.estimate.abs();
            if !ratio.is_finite() || !(scale > 0.0) || !scale.is_finite() {
                return Err(Error::invalid("cannot derive a default tau range; supply one explicitly"));
            }
            (ratio - 10.0 * scale, ratio + 10.0 * scale)
        }
    };
    let k = opts.tau_steps;
    let taus: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    let grid: Vec<TauPoint> = taus
        .par_iter()
        .map(|&tau| {
            let iv = pb.at(tau, Criterion::Umse)?;
            Ok(TauPoint {
                tau,
                accepted: iv.covers(0.0),
                lower: iv.lower,
                upper: iv.upper,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let acc: Vec<usize> = (0..k).filter(|&i| grid[i].accepted).collect();
    let rej: Vec<usize> = (0..k).filter(|&i| !grid[i].accepted).collect();
    let endpoint = |inside: usize, outside: usize, notes: &mut Vec<String>| -> Result<(f64, bool)> {
        if opts.refine {
            pb.refine(taus[inside], taus[outside], notes)
        } else {
            Ok((0.5 * (taus[inside] + taus[outside]), false))
        }
    };
    let mut boundary = false;
    let (shape, a, b, refined) = if !first_covers {
        if acc.is_empty() {
            notes.push("no grid value accepted: the set is empty within the scanned range".into());
            (SetShape::Bounded, None, None, false)
        } else {
            let (f, l) = (acc[0], *acc.last().unwrap());
            if l - f + 1 != acc.len() {
                notes.push("accepted grid values are not contiguous".into());
            }
            let (a, ra) = if f == 0 {
                boundary = true;
                (taus[0], false)
            } else {
                endpoint(f, f - 1, &mut notes)?
            };
            let (b, rb) = if l == k - 1 {
                boundary = true;
                (taus[k - 1], false)
            } else {
                endpoint(l, l + 1, &mut notes)?
            };
            (SetShape::Bounded, Some(a), Some(b), ra && rb)
        }
    } else if rej.is_empty() {
        notes.push("every grid value accepted: case of an unbounded set covering the line".into());
        (SetShape::WholeLine, None, None, false)
    } else if acc.is_empty() {
        warn!("no tau in the scanned range is accepted although the first stage covers zero");
        notes.push("whole-line suspect: widen the tau range".into());
        boundary = true;
        (SetShape::Complement, None, None, false)
    } else {
        let (f, l) = (rej[0], *rej.last().unwrap());
        if l - f + 1 != rej.len() {
            notes.push("rejected grid values are not contiguous".into());
        }
        let (a, ra) = if f == 0 {
            boundary = true;
            (taus[0], false)
        } else {
            endpoint(f - 1, f, &mut notes)?
        };
        let (b, rb) = if l == k - 1 {
            boundary = true;
            (taus[k - 1], false)
        } else {
            endpoint(l + 1, l, &mut notes)?
        };
        (SetShape::Complement, Some(a), Some(b), ra && rb)
    };
    if boundary {
        warn!("the confidence set reaches the edge of the tau range");
    }
    Ok(ConfidenceSet {
        shape,
        a,
        b,
        tau_grid: grid,
        refined,
        boundary,
        first_stage: first,
        notes,
    })
}
