//! Simulation designs and the seeded Monte Carlo engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::domain::{Sample, Shape, SmoothnessSpec};
use crate::error::{Error, Result};
use crate::estimate;
use crate::localpoly::{self, Baseline, BaselineOptions};
use crate::numeric::NeumaierSum;
use crate::optimizer::{self, Criterion, OptimizeOptions, Optimizer, WeightSolution};
use crate::smoothness;
use crate::variance::{self, DEFAULT_MATCHES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mu {
    Mu1,
    Mu2,
    /// `theta x D(x) - (L/2) x^2`, concave for `theta <= 0`.
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    ContinuousUniform,
    /// Uniform over `{-1, -1 + 2/K, ..., 1}`.
    DiscreteUniform(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub mu: Mu,
    pub l: f64,
    pub theta: f64,
    pub sigma: f64,
    pub design: Design,
    pub n: usize,
}

impl DgpSpec {
    pub fn new(mu: Mu, l: f64, n: usize) -> Self {
        DgpSpec {
            mu,
            l,
            theta: -0.5,
            sigma: 0.1,
            design: Design::ContinuousUniform,
            n,
        }
    }

    pub fn with_design(mut self, design: Design) -> Self {
        self.design = design;
        self
    }
}

fn sq_plus(z: f64) -> f64 {
    if z >= 0.0 {
        z * z
    } else {
        0.0
    }
}

pub fn eval_mu(spec: &DgpSpec, x: f64) -> f64 {
    let d = if x >= 0.0 { 1.0 } else { 0.0 };
    let half = 0.5 * spec.l;
    let kink = d * spec.theta * x;
    kink + half
        * match spec.mu {
            Mu::Mu1 => -x * x + 1.75 * sq_plus(x.abs() - 0.15) - 1.25 * sq_plus(x.abs() - 0.4),
            Mu::Mu2 => {
                (x + 1.0).powi(2) - 2.0 * sq_plus(x + 0.2) + 2.0 * sq_plus(x - 0.2) - 2.0 * sq_plus(x - 0.4)
                    + 2.0 * sq_plus(x - 0.6)
                    - 0.92
            }
            Mu::Concave => -x * x,
        }
}

/// Generator for replication `rep` of a run seeded with `seed`.
pub fn rng_for(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

pub fn draw_x(design: Design, rng: &mut impl Rng) -> f64 {
    match design {
        Design::ContinuousUniform => rng.gen_range(-1.0..=1.0),
        Design::DiscreteUniform(k) => -1.0 + 2.0 * rng.gen_range(0..=k) as f64 / k as f64,
    }
}

/// Draws a sample from substream `rep` of `seed`.
pub fn draw_replication(spec: &DgpSpec, seed: u64, rep: u64) -> Result<Sample> {
    if spec.n < 10 {
        return Err(Error::invalid("simulated samples need n >= 10"));
    }
    if let Design::DiscreteUniform(k) = spec.design {
        if k < 2 {
            return Err(Error::invalid("discrete designs need K >= 2"));
        }
    }
    let mut rng = rng_for(seed, rep);
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi = draw_x(spec.design, &mut rng);
        let e: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(eval_mu(spec, xi) + spec.sigma * e);
    }
    Sample::new(x, y, 0.0)
}

pub fn draw_sample(spec: &DgpSpec, seed: u64) -> Result<Sample> {
    draw_replication(spec, seed, 0)
}

/// Curvature bound handed to a method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LChoice {
    Fixed(f64),
    /// Spline rule of thumb computed on each replication.
    RotSpline,
}

impl LChoice {
    fn tag(self) -> String {
        match self {
            LChoice::Fixed(l) => format!("L={l}"),
            LChoice::RotSpline => "L=rot".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMethod {
    Opt {
        criterion: Criterion,
        l: LChoice,
        shape: Shape,
    },
    Baseline {
        method: Baseline,
        l: LChoice,
    },
}

impl McMethod {
    pub fn opt(criterion: Criterion, l: f64) -> Self {
        McMethod::Opt {
            criterion,
            l: LChoice::Fixed(l),
            shape: Shape::None,
        }
    }

    pub fn baseline(method: Baseline) -> Self {
        McMethod::Baseline {
            method,
            l: LChoice::Fixed(0.0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            McMethod::Opt { criterion, l, shape } => {
                let base = format!("{} {}", optimizer::method_name(*criterion), l.tag());
                if *shape == Shape::None {
                    base
                } else {
                    format!("{base} {shape:?}").to_lowercase()
                }
            }
            McMethod::Baseline {
                method: m @ Baseline::FixedLength(_),
                l,
            } => format!("{} {}", m.name(), l.tag()),
            McMethod::Baseline { method, .. } => method.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub method: String,
    /// Percent of replications covering the true kink.
    pub coverage: f64,
    /// Mean length relative to the reference interval.
    pub rel_length: f64,
    pub mean_half_length: f64,
    /// Mean bandwidth or kappa.
    pub mean_tuning: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub rows: Vec<McRow>,
    pub replications: usize,
    pub seed: u64,
    pub reference_half_length: f64,
    pub reference_failures: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub alpha: f64,
    pub matches: usize,
    pub optimize: OptimizeOptions,
    pub baseline: BaselineOptions,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            alpha: 0.05,
            matches: DEFAULT_MATCHES,
            optimize: OptimizeOptions::default(),
            baseline: BaselineOptions::default(),
        }
    }
}

pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy)]
struct Outcome {
    covered: bool,
    half_length: f64,
    tuning: f64,
}

struct Replication {
    reference: Option<f64>,
    outcomes: Vec<Option<Outcome>>,
}

fn resolve_l(choice: LChoice, sample: &Sample, rot: &mut Option<f64>) -> Result<f64> {
    match choice {
        LChoice::Fixed(l) => Ok(l),
        LChoice::RotSpline => {
            if rot.is_none() {
                *rot = Some(smoothness::rot_spline(sample, smoothness::DEFAULT_KNOTS)?);
            }
            Ok(rot.unwrap())
        }
    }
}

fn run_one(dgp: &DgpSpec, methods: &[McMethod], seed: u64, rep: u64, opts: &McOptions) -> Result<Replication> {
    let sample = draw_replication(dgp, seed, rep)?;
    let sigma2 = variance::nn_variance(&sample, opts.matches)?.per_obs;
    let working = estimate::working_variance(&sample)?;
    let alpha = opts.alpha;
    let mut rot = None;
    // optimizers keyed by (L, shape), each with its kappa = 1 solve
    let mut cache: Vec<(f64, Shape, Optimizer, WeightSolution)> = Vec::new();
    let mut solve = |l: f64, shape: Shape, criterion: Criterion| -> Result<WeightSolution> {
        let pos = match cache.iter().position(|c| c.0 == l && c.1 == shape) {
            Some(p) => p,
            None => {
                let spec = SmoothnessSpec::kink(l).with_shape(shape);
                let opt = Optimizer::new(&sample, &working, &spec, &opts.optimize)?;
                let one = opt.solve(1.0)?;
                cache.push((l, shape, opt, one));
                cache.len() - 1
            }
        };
        let (_, _, opt, one) = &cache[pos];
        optimizer::search_kappa_from(opt, one.clone(), alpha, criterion, &opts.optimize)
    };
    let reference = solve(dgp.l, Shape::None, Criterion::Hl)
        .and_then(|s| estimate::interval_from_weights(&s.weights, &sample.y, &sigma2, s.max_bias, alpha))
        .map(|iv| iv.half_length())
        .ok();
    let mut outcomes = Vec::with_capacity(methods.len());
    for m in methods {
        let res: Result<Outcome> = (|| match *m {
            McMethod::Opt { criterion, l, shape } => {
                let l = resolve_l(l, &sample, &mut rot)?;
                let s = solve(l, shape, criterion)?;
                let iv = estimate::interval_from_weights(&s.weights, &sample.y, &sigma2, s.max_bias, alpha)?;
                Ok(Outcome {
                    covered: iv.covers(dgp.theta),
                    half_length: iv.half_length(),
                    tuning: s.kappa,
                })
            }
            McMethod::Baseline { method, l } => {
                let l = match method {
                    Baseline::FixedLength(_) => resolve_l(l, &sample, &mut rot)?,
                    _ => 1.0,
                };
                let spec = SmoothnessSpec::kink(l);
                let r = localpoly::baseline_interval(&sample, method, &spec, alpha, &sigma2, &working, &opts.baseline)?;
                Ok(Outcome {
                    covered: r.interval.covers(dgp.theta),
                    half_length: r.interval.half_length(),
                    tuning: r.h,
                })
            }
        })();
        outcomes.push(res.ok());
    }
    Ok(Replication { reference, outcomes })
}

/// Runs `replications` seeded draws in parallel and aggregates in replication order.
pub fn run_monte_carlo(
    dgp: &DgpSpec,
    methods: &[McMethod],
    replications: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<McResult> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no methods to simulate"));
    }
    crate::domain::z_crit(opts.alpha)?;
    draw_replication(dgp, seed, 0)?;
    let reps: Vec<Result<Replication>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| run_one(dgp, methods, seed, r, opts))
        .collect();

    let mut ref_sum = NeumaierSum::default();
    let mut ref_count = 0usize;
    let mut acc: Vec<(usize, NeumaierSum, NeumaierSum, usize, usize)> =
        vec![(0, NeumaierSum::default(), NeumaierSum::default(), 0, 0); methods.len()];
    for rep in &reps {
        let Ok(rep) = rep else {
            for a in acc.iter_mut() {
                a.4 += 1;
            }
            continue;
        };
        if let Some(r) = rep.reference {
            ref_sum.add(r);
            ref_count += 1;
        }
        for (a, o) in acc.iter_mut().zip(&rep.outcomes) {
            match o {
                Some(o) => {
                    a.0 += usize::from(o.covered);
                    a.1.add(o.half_length);
                    a.2.add(o.tuning);
                    a.3 += 1;
                }
                None => a.4 += 1,
            }
        }
    }
    let ref_mean = if ref_count > 0 { ref_sum.value() / ref_count as f64 } else { f64::NAN };
    let rows = methods
        .iter()
        .zip(&acc)
        .map(|(m, a)| {
            let n = a.3.max(1) as f64;
            let mean_hl = a.1.value() / n;
            McRow {
                method: m.name(),
                coverage: 100.0 * a.0 as f64 / n,
                rel_length: mean_hl / ref_mean,
                mean_half_length: mean_hl,
                mean_tuning: a.2.value() / n,
                failures: a.4,
            }
        })
        .collect();
    Ok(McResult {
        rows,
        replications,
        seed,
        reference_half_length: ref_mean,
        reference_failures: replications - ref_count,
    })
}

impl McResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record([
            "method",
            "coverage",
            "rel_length",
            "mean_half_length",
            "mean_tuning",
            "failures",
            "replications",
            "seed",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                format!("{:.1}", r.coverage),
                format!("{:.3}", r.rel_length),
                format!("{:.6}", r.mean_half_length),
                format!("{:.4}", r.mean_tuning),
                r.failures.to_string(),
                self.replications.to_string(),
                self.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut s = format!(
            "{:<width$}  {:>6}  {:>6}  {:>8}  {:>5}\n",
            "method", "Cov.", "RL", "h/kappa", "fail"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<width$}  {:>6.1}  {:>6.3}  {:>8.3}  {:>5}\n",
                r.method, r.coverage, r.rel_length, r.mean_tuning, r.failures
            ));
        }
        s.push_str(&format!("replications: {}, seed: {}\n", self.replications, self.seed));
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numerical(format!("csv output: {e}"))
}
