//! Optimized linear weights: the discretized dual program, its solution, weight
//! recovery, exact worst-case bias and the choice of the bias-variance weight kappa.

pub mod bias;
pub mod moments;
mod program;

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;

use crate::domain::{self, HonestInterval, Order, Sample, Shape, SmoothnessSpec};
use crate::error::{Error, Result};
use crate::grid::{self, ConstraintSet, DiffRow, DiscreteGrid};
use crate::numeric;

pub use bias::{bias_profile, moment_residual, moments, worst_case_bias};
pub use moments::project_moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// The quadratic program with a small ridge on its zero Hessian rows.
    QpDirect,
    /// Second-order cone reformulation.
    Socp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::QpDirect,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_iter: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1e-2], got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

/// A grid cell holding the observations of one side assigned to one center.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub center: usize,
    pub plus: bool,
    /// Center location in solver units.
    pub x: f64,
    /// Aggregated variance `(sum 1/sigma_i^2)^{-1}` in solver units.
    pub sigma2: f64,
    pub members: Vec<usize>,
}

impl Cell {
    /// Coefficients of `(lambda_1, .., lambda_4)` in the cell's linkage row.
    pub fn link(&self) -> [f64; 4] {
        if self.plus {
            [1.0, 0.0, self.x, 0.0]
        } else {
            [0.0, 1.0, 0.0, self.x]
        }
    }
}

/// The discretized dual program in solver units.
///
/// Solver units divide `x` by `x_scale` and variances by `var_scale`; the curvature
/// bound is rescaled accordingly so the optimal weights are unchanged.
#[derive(Debug, Clone)]
pub struct DualProblem {
    pub centers: Vec<f64>,
    pub h: f64,
    pub cells: Vec<Cell>,
    /// Pinned centers of the remainder.
    pub pins: Vec<usize>,
    /// Difference rows for each adversary; one adversary for symmetric classes.
    pub adversaries: Vec<Vec<DiffRow>>,
    pub kappa: f64,
    /// Curvature bound in solver units.
    pub l: f64,
    pub order: Order,
    pub shape: Shape,
    pub x_scale: f64,
    pub var_scale: f64,
    /// Per-observation variances in solver units.
    pub sigma2_obs: Vec<f64>,
}

impl DualProblem {
    pub fn num_adversaries(&self) -> usize {
        self.adversaries.len()
    }

    /// Variables of the standard form: cell weights, curvature scales, the four affine
    /// multipliers and the remainder at every center for each adversary.
    pub fn num_variables(&self) -> usize {
        let m = self.num_adversaries();
        self.cells.len() + m + 4 + self.centers.len() * m
    }

    pub fn linear_term(&self) -> [f64; 4] {
        match self.order {
            Order::Kink => [0.0, 0.0, 1.0, -1.0],
            Order::Level => [1.0, -1.0, 0.0, 0.0],
        }
    }

    /// Number of inequality rows excluding the sign constraints on the curvature scales.
    pub fn num_inequalities(&self) -> usize {
        self.adversaries.iter().map(|a| a.len()).sum()
    }

    /// Writes the standard-form problem as plain-text sparse triplets.
    ///
    /// Format: comment lines start with `#`; then `dims n_vars n_rows`, followed by
    /// `P i j v` (upper triangle), `q i v`, `A i j v`, `b i v` lines and one
    /// `cone kind dim` line per cone block, in row order. The constraints read
    /// `A x + s = b` with `s` in the listed cones (zero, nonneg, soc).
    pub fn write_triplets(&self, out: &mut impl Write) -> Result<()> {
        let sf = program::standard_form(self);
        writeln!(out, "# optkink dual program, solver units")?;
        writeln!(
            out,
            "# x_scale {:.17e} var_scale {:.17e} kappa {:.17e} L {:.17e}",
            self.x_scale, self.var_scale, self.kappa, self.l
        )?;
        writeln!(out, "dims {} {}", sf.n, sf.m)?;
        for &(i, j, v) in &sf.p {
            writeln!(out, "P {i} {j} {v:.17e}")?;
        }
        for (i, v) in sf.q.iter().enumerate() {
            if *v != 0.0 {
                writeln!(out, "q {i} {v:.17e}")?;
            }
        }
        for &(i, j, v) in &sf.a {
            writeln!(out, "A {i} {j} {v:.17e}")?;
        }
        for (i, v) in sf.b.iter().enumerate() {
            if *v != 0.0 {
                writeln!(out, "b {i} {v:.17e}")?;
            }
        }
        for (kind, dim) in &sf.cones {
            writeln!(out, "cone {kind} {dim}")?;
        }
        Ok(())
    }
}

fn harmonic(values: impl Iterator<Item = f64>) -> f64 {
    1.0 / values.map(|v| 1.0 / v).sum::<f64>()
}

/// Builds the dual program for a grid, per-observation variances and a smoothness class.
pub fn assemble_dual(
    grid: &DiscreteGrid,
    xs: &[f64],
    sigma2: &[f64],
    spec: &SmoothnessSpec,
    kappa: f64,
) -> Result<DualProblem> {
    spec.validate()?;
    if !(spec.l > 0.0) {
        return Err(Error::invalid("the curvature bound L must be positive"));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
    }
    if xs.len() != grid.assignment.len() || sigma2.len() != xs.len() {
        return Err(Error::invalid("grid, x and variances must have equal length"));
    }
    if let Some(v) = sigma2.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("variances must be positive and finite, got {v}")));
    }
    let x_scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut groups: BTreeMap<(usize, bool), Vec<usize>> = BTreeMap::new();
    for (i, (&j, &x)) in grid.assignment.iter().zip(xs).enumerate() {
        groups.entry((j, x >= 0.0)).or_default().push(i);
    }
    let raw: Vec<f64> = groups
        .values()
        .map(|m| harmonic(m.iter().map(|&i| sigma2[i])))
        .collect();
    let var_scale = numeric::mean(&raw);
    let mut cells = Vec::with_capacity(groups.len());
    for (((j, plus), members), s2) in groups.into_iter().zip(raw) {
        cells.push(Cell {
            center: j,
            plus,
            x: grid.centers[j] / x_scale,
            sigma2: s2 / var_scale,
            members,
        });
    }
    for plus in [true, false] {
        let mut cs: Vec<usize> = cells.iter().filter(|c| c.plus == plus).map(|c| c.center).collect();
        cs.dedup();
        if cs.len() < 2 {
            return Err(Error::InsufficientSupport(format!(
                "grid too coarse: fewer than two occupied centers {} the cutoff",
                if plus { "above" } else { "below" }
            )));
        }
    }

    let cons: ConstraintSet = grid::build_constraints(grid, spec.shape);
    let adversaries = if spec.shape == Shape::None {
        vec![cons.ineq_rows.clone()]
    } else {
        let mut a = cons.ineq_rows.clone();
        a.extend(cons.shape_rows.iter().copied());
        let mut b = cons.ineq_rows.clone();
        b.extend(cons.shape_rows.iter().map(|r| DiffRow {
            coeffs: [-r.coeffs[0], -r.coeffs[1], -r.coeffs[2]],
            ..*r
        }));
        vec![a, b]
    };

    Ok(DualProblem {
        centers: grid.centers.iter().map(|c| c / x_scale).collect(),
        h: grid.h / x_scale,
        cells,
        pins: cons.eq_rows,
        adversaries,
        kappa,
        l: spec.l * x_scale * x_scale / var_scale.sqrt(),
        order: spec.order,
        shape: spec.shape,
        x_scale,
        var_scale,
        sigma2_obs: sigma2.iter().map(|s| s / var_scale).collect(),
    })
}

/// Optimal dual variables in solver units.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Curvature scale per adversary.
    pub nu: Vec<f64>,
    pub lambda: [f64; 4],
    /// Remainder values per adversary, per center.
    pub r_tilde: Vec<Vec<f64>>,
    /// Optimal value of the minimization form of the dual.
    pub objective: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStatus {
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
}

impl DualSolution {
    pub fn nu_total(&self) -> f64 {
        self.nu.iter().sum()
    }

    /// `c'lambda + sum_k R_k(center)` for a cell.
    pub fn cell_value(&self, cell: &Cell) -> f64 {
        let link = cell.link();
        let mut v: f64 = link.iter().zip(&self.lambda).map(|(a, b)| a * b).sum();
        for r in &self.r_tilde {
            v += r[cell.center];
        }
        v
    }
}

pub fn solve(problem: &DualProblem, config: &SolverConfig) -> Result<DualSolution> {
    config.validate()?;
    match config.mode {
        SolverMode::QpDirect => program::solve(problem, config, false),
        SolverMode::Socp => program::solve(problem, config, true),
    }
}

/// Weights, bias and diagnostics of a solved program.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub weights: Vec<f64>,
    /// Total curvature scale, solver units.
    pub nu: f64,
    /// Affine multipliers, solver units.
    pub lambda: [f64; 4],
    /// Normalized worst-case bias of the discretized class, so that `B = r L`.
    pub r: f64,
    pub kappa: f64,
    /// `sum w_i^2 sigma_i^2` under the variances used for the solve.
    pub variance: f64,
    /// Worst-case bias over the full class.
    pub max_bias: f64,
    pub wratio_sq: f64,
    pub be_ratio: f64,
    /// Dual optimum of the discretized program, solver units.
    pub dual_objective: f64,
    pub status: SolveStatus,
}

impl WeightSolution {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn estimate(&self, y: &[f64]) -> f64 {
        numeric::sum(self.weights.iter().zip(y).map(|(w, y)| w * y))
    }

    /// Half-length of the honest interval built from the solve variances.
    pub fn half_length(&self, alpha: f64) -> Result<f64> {
        let sd = self.sd();
        if !(sd > 0.0) {
            return Err(Error::Numerical("zero standard deviation".into()));
        }
        Ok(sd * domain::folded_normal_cv(self.max_bias / sd, alpha)?)
    }

    /// Worst-case mean squared error `B^2 + s^2`.
    pub fn worst_case_mse(&self) -> f64 {
        self.max_bias * self.max_bias + self.variance
    }
}

/// Per-observation weights of the dual solution before the moment projection,
/// in the caller's units.
pub fn raw_weights(problem: &DualProblem, sol: &DualSolution, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let unit = problem.x_scale.powi(problem.order.v() as i32);
    for cell in &problem.cells {
        let v = sol.cell_value(cell);
        for &i in &cell.members {
            w[i] = -v / (2.0 * problem.sigma2_obs[i]) / unit;
        }
    }
    w
}

/// Maps a dual solution to projected observation weights with exact bias accounting.
pub fn recover_weights(
    problem: &DualProblem,
    sol: &DualSolution,
    xs: &[f64],
    sigma2: &[f64],
    spec: &SmoothnessSpec,
) -> Result<WeightSolution> {
    if xs.iter().all(|&x| x < 0.0) || xs.iter().all(|&x| x >= 0.0) {
        return Err(Error::invalid("both sides of the cutoff need observations"));
    }
    let raw = raw_weights(problem, sol, xs.len());
    let weights = project_moments(&raw, xs, spec.order)?;
    let nu = sol.nu_total();
    let r = nu / (2.0 * problem.kappa * problem.l * problem.l)
        * problem.x_scale.powi(2 - spec.order.v() as i32);
    if nu <= 0.0 {
        warn!("curvature scale is zero: the adversary is unconstrained at zero cost");
    }
    let max_bias = match spec.shape {
        Shape::None => worst_case_bias(&weights, xs, spec.l, spec.order)?.0,
        Shape::Concave | Shape::Convex => {
            let (_, p) = worst_case_bias(&weights, xs, spec.l, spec.order)?;
            spec.l * p.integral_pos.max(p.integral_neg)
        }
        Shape::Increasing | Shape::Decreasing => r * spec.l,
    };
    let variance = numeric::sum(weights.iter().zip(sigma2).map(|(w, s)| w * w * s));
    let (wratio_sq, be_ratio) = domain::diagnostics(&weights)?;
    Ok(WeightSolution {
        weights,
        nu,
        lambda: sol.lambda,
        r,
        kappa: problem.kappa,
        variance,
        max_bias,
        wratio_sq,
        be_ratio,
        dual_objective: sol.objective,
        status: sol.status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// kappa = 1, worst-case mean squared error.
    Umse,
    /// Shortest honest interval.
    Hl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Grid size; chosen from the data when absent.
    pub num_centers: Option<usize>,
    pub solver: SolverConfig,
    pub kappa_lo: f64,
    /// Tolerance on log kappa.
    pub kappa_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            num_centers: None,
            solver: SolverConfig::default(),
            kappa_lo: 1e-3,
            kappa_tol: 1e-3,
        }
    }
}

/// A grid and design prepared once for repeated solves.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub grid: DiscreteGrid,
    pub xs: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub spec: SmoothnessSpec,
    pub config: SolverConfig,
}

impl Optimizer {
    pub fn new(sample: &Sample, sigma2: &[f64], spec: &SmoothnessSpec, opts: &OptimizeOptions) -> Result<Self> {
        sample.check_solvable()?;
        spec.validate()?;
        if !(spec.l > 0.0) {
            return Err(Error::invalid("the curvature bound L must be positive"));
        }
        if sigma2.len() != sample.len() {
            return Err(Error::invalid("one variance per observation is required"));
        }
        let g = opts.num_centers.unwrap_or_else(|| grid::default_num_centers(sample));
        let grid = grid::build_grid(sample, g)?;
        Ok(Optimizer {
            grid,
            xs: sample.x.clone(),
            sigma2: sigma2.to_vec(),
            spec: *spec,
            config: opts.solver,
        })
    }

    pub fn problem(&self, kappa: f64) -> Result<DualProblem> {
        assemble_dual(&self.grid, &self.xs, &self.sigma2, &self.spec, kappa)
    }

    pub fn solve(&self, kappa: f64) -> Result<WeightSolution> {
        let problem = self.problem(kappa)?;
        let sol = solve(&problem, &self.config)?;
        recover_weights(&problem, &sol, &self.xs, &self.sigma2, &self.spec)
    }
}

/// Chooses kappa by the criterion and returns the weights and the interval built
/// from `sigma2` (the variances used for the solve).
pub fn optimize_kappa(
    sample: &Sample,
    sigma2: &[f64],
    spec: &SmoothnessSpec,
    alpha: f64,
    criterion: Criterion,
    opts: &OptimizeOptions,
) -> Result<(f64, WeightSolution, HonestInterval)> {
    domain::z_crit(alpha)?;
    let opt = Optimizer::new(sample, sigma2, spec, opts)?;
    let sol = search_kappa(&opt, alpha, criterion, opts)?;
    let est = sol.estimate(&sample.y);
    let iv = domain::build_interval(est, sol.sd(), sol.max_bias, alpha)?.with_method(method_name(criterion));
    Ok((sol.kappa, sol, iv))
}

pub fn method_name(criterion: Criterion) -> &'static str {
    match criterion {
        Criterion::Umse => "opt_umse",
        Criterion::Hl => "opt_hl",
    }
}

/// Solves at kappa = 1 or searches the half-length over `[kappa_lo, 1]`.
pub fn search_kappa(opt: &Optimizer, alpha: f64, criterion: Criterion, opts: &OptimizeOptions) -> Result<WeightSolution> {
    let at_one = opt.solve(1.0)?;
    search_kappa_from(opt, at_one, alpha, criterion, opts)
}

/// As [`search_kappa`], reusing a solution at kappa = 1.
pub fn search_kappa_from(
    opt: &Optimizer,
    at_one: WeightSolution,
    alpha: f64,
    criterion: Criterion,
    opts: &OptimizeOptions,
) -> Result<WeightSolution> {
    if criterion == Criterion::Umse {
        return Ok(at_one);
    }
    if !(opts.kappa_lo > 0.0 && opts.kappa_lo < 1.0) {
        return Err(Error::invalid("kappa lower bound must lie in (0, 1)"));
    }
    let best = numeric::brent_min(
        |lk: f64| {
            let s = opt.solve(lk.exp())?;
            Ok::<_, Error>((s.half_length(alpha)?, s))
        },
        opts.kappa_lo.ln(),
        0.0,
        opts.kappa_tol,
        100,
    )?;
    if best.fx < at_one.half_length(alpha)? {
        Ok(best.payload)
    } else {
        Ok(at_one)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced() -> Sample {
        Sample::new(vec![-2.0, -1.0, 1.0, 2.0], vec![0.0; 4], 0.0).unwrap()
    }

    #[test]
    fn variable_count() {
        let s = Sample::new(vec![-1.0, -0.5, 0.0, 0.5, 1.0], vec![0.0; 5], 0.0).unwrap();
        let g = grid::build_grid(&s, 5).unwrap();
        let p = assemble_dual(&g, &s.x, &[1.0; 5], &SmoothnessSpec::kink(1.0), 1.0).unwrap();
        assert_eq!(p.num_variables(), 15);
        assert_eq!(p.num_inequalities(), 6);
    }

    #[test]
    fn zero_l_rejected() {
        let s = forced();
        let g = grid::build_grid(&s, 5).unwrap();
        assert!(assemble_dual(&g, &s.x, &[1.0; 4], &SmoothnessSpec::kink(0.0), 1.0).is_err());
    }

    #[test]
    fn forced_design_weights() {
        let s = forced();
        for mode in [SolverMode::QpDirect, SolverMode::Socp] {
            for &(l, kappa) in &[(1.0, 1.0), (3.0, 0.1), (0.2, 0.01)] {
                let opts = OptimizeOptions {
                    num_centers: Some(5),
                    solver: SolverConfig {
                        mode,
                        ..Default::default()
                    },
                    ..Default::default()
                };
                let opt = Optimizer::new(&s, &[1.0; 4], &SmoothnessSpec::kink(l), &opts).unwrap();
                let sol = opt.solve(kappa).unwrap();
                let expect = [1.0, -1.0, -1.0, 1.0];
                for (a, b) in sol.weights.iter().zip(expect) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
                assert!((sol.max_bias - 3.0 * l).abs() < 1e-8);
                let tol = if mode == SolverMode::QpDirect { 1e-6 } else { 1e-4 };
                assert!((sol.r - 3.0).abs() < tol, "{mode:?}: r = {}", sol.r);
            }
        }
    }
}
