//! Acceptance suite: one line per criterion, nonzero exit if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use optkink::domain::folded_normal_cv;
use optkink::estimate::{self, EstimateOptions};
use optkink::fuzzy::{self, FuzzyOptions, SetShape};
use optkink::localpoly::{self, lp_weights, lp_worst_case_bias, Baseline, BaselineOptions, KernelSpec};
use optkink::optimizer::bias::{moment_residual, worst_case_bias};
use optkink::optimizer::{self, Criterion, OptimizeOptions, Optimizer, WeightSolution};
use optkink::simbench::{self, Design, DgpSpec, LChoice, McMethod, McOptions, McResult, Mu};
use optkink::{Order, Sample, Shape, SmoothnessSpec};
use rand::Rng;

const SEED: u64 = 7;
const REPS: usize = 1000;
const N: usize = 2000;
const MOMENT_TOL: f64 = 1e-12;

struct Report {
    failed: usize,
    worst_moment: f64,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, what: String) {
        if !ok {
            self.failed += 1;
        }
        println!("[{}] {id}: {what}", if ok { "PASS" } else { "FAIL" });
    }

    fn track(&mut self, sol: &WeightSolution, xs: &[f64], order: Order) {
        self.worst_moment = self.worst_moment.max(moment_residual(&sol.weights, xs, order));
    }
}

fn row<'a>(r: &'a McResult, name: &str) -> &'a simbench::McRow {
    r.rows.iter().find(|x| x.method == name).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn coverage_and_lengths(rep: &mut Report) {
    let dgp = DgpSpec::new(Mu::Mu1, 2.0, N);
    let methods = [
        McMethod::opt(Criterion::Umse, 2.0),
        McMethod::opt(Criterion::Hl, 2.0),
        McMethod::baseline(Baseline::Conventional),
        McMethod::baseline(Baseline::Undersmoothed),
    ];
    let (r, secs) = timed(|| simbench::run_monte_carlo(&dgp, &methods, REPS, SEED, &McOptions::default()).unwrap());
    let umse = row(&r, "opt_umse L=2");
    let hl = row(&r, "opt_hl L=2");
    let conv = row(&r, "conventional");
    let us = row(&r, "us");
    rep.line(
        "C1a",
        (umse.coverage - 95.1).abs() <= 2.0,
        format!("mu1 L=2 opt_umse coverage {:.1}% (95.1 +/- 2.0)", umse.coverage),
    );
    rep.line(
        "C1b",
        (hl.coverage - 97.0).abs() <= 2.0,
        format!("mu1 L=2 opt_hl coverage {:.1}% (97.0 +/- 2.0)", hl.coverage),
    );
    rep.line(
        "C1c",
        (hl.rel_length - 1.0).abs() <= 1e-12,
        format!("opt_hl relative length {:.6} (1 +/- 1e-12)", hl.rel_length),
    );
    rep.line(
        "C1d",
        secs <= 1800.0,
        format!(
            "{REPS} replications, 4 methods in {secs:.0} s on {} thread(s) (<= 1800 s)",
            rayon::current_num_threads()
        ),
    );
    rep.line(
        "C2a",
        conv.coverage <= 55.0,
        format!("conventional coverage {:.1}% (<= 55)", conv.coverage),
    );
    rep.line("C2b", us.coverage <= 92.0, format!("us coverage {:.1}% (<= 92)", us.coverage));
    let ratio = hl.mean_half_length / umse.mean_half_length;
    rep.line(
        "C4",
        (0.91..=0.97).contains(&ratio),
        format!("mean half-length opt_hl / opt_umse {ratio:.4} (in [0.91, 0.97])"),
    );
    let failures: usize = r.rows.iter().map(|x| x.failures).sum();
    rep.line("C1e", failures == 0, format!("failed fits across methods: {failures} (0)"));
}

fn misspecification(rep: &mut Report) {
    let dgp = DgpSpec::new(Mu::Mu1, 6.0, N);
    let methods = [McMethod::opt(Criterion::Umse, 2.0)];
    let r = simbench::run_monte_carlo(&dgp, &methods, REPS, SEED, &McOptions::default()).unwrap();
    let c = r.rows[0].coverage;
    rep.line("C3", c <= 35.0, format!("mu1 true L=6, opt_umse with L=2 coverage {c:.1}% (<= 35)"));
}

const DISCRETE_N: usize = 1000;
const GAP_SLACK: f64 = 0.005;

fn discrete_gain(rep: &mut Report) {
    let spec = SmoothnessSpec::kink(2.0);
    let mut gaps = Vec::new();
    let mut all_le = true;
    for k in [80, 40, 20] {
        let dgp = DgpSpec::new(Mu::Mu1, 2.0, DISCRETE_N).with_design(Design::DiscreteUniform(k));
        let s = simbench::draw_sample(&dgp, SEED).unwrap();
        let sigma2 = vec![dgp.sigma * dgp.sigma; s.len()];
        let opt = Optimizer::new(&s, &sigma2, &spec, &OptimizeOptions::default()).unwrap();
        let sol = optimizer::search_kappa(&opt, 0.05, Criterion::Hl, &OptimizeOptions::default()).unwrap();
        rep.track(&sol, &s.x, Order::Kink);
        let opt_hl = sol.half_length(0.05).unwrap();
        let fl = localpoly::baseline_interval(
            &s,
            Baseline::FixedLength(Criterion::Hl),
            &spec,
            0.05,
            &sigma2,
            &sigma2,
            &BaselineOptions::default(),
        )
        .unwrap();
        let fl_hl = fl.interval.half_length();
        all_le &= opt_hl <= fl_hl * (1.0 + 1e-9);
        gaps.push((k, fl_hl / opt_hl - 1.0));
    }
    let text: Vec<String> = gaps.iter().map(|(k, g)| format!("K={k}: {:.2}%", 100.0 * g)).collect();
    rep.line(
        "C5a",
        all_le,
        format!("optimized half-length <= fixed-length LL half-length, excess {}", text.join(", ")),
    );
    let monotone = gaps.windows(2).all(|w| w[1].1 >= w[0].1 - GAP_SLACK);
    rep.line(
        "C5b",
        monotone,
        format!("excess length weakly increases as K falls (slack {GAP_SLACK})"),
    );
}

fn oracle(rep: &mut Report) {
    let mut worst = 0.0f64;
    let cases: [(usize, f64, f64, f64, Order); 4] = [
        (21, -1.0, 1.0, 1.0, Order::Kink),
        (21, -1.0, 1.0, 0.3, Order::Kink),
        (20, -0.95, 0.95, 1.0, Order::Kink),
        (15, -1.0, 0.4, 0.5, Order::Level),
    ];
    for (g, lo, hi, kappa, order) in cases {
        for seed in 0..10 {
            let mut r = rng(seed);
            let xs = lattice_design(&mut r, g, lo, hi, 8);
            let sigma2: Vec<f64> = xs.iter().map(|_| r.gen_range(0.5..2.0)).collect();
            let s = Sample::new(xs.clone(), vec![0.0; xs.len()], 0.0).unwrap();
            let l = r.gen_range(0.5..3.0);
            let spec = SmoothnessSpec { order, ..SmoothnessSpec::kink(l) };
            let opts = OptimizeOptions {
                num_centers: Some(g),
                ..OptimizeOptions::default()
            };
            let sol = Optimizer::new(&s, &sigma2, &spec, &opts).unwrap().solve(kappa).unwrap();
            rep.track(&sol, &xs, order);
            let o = primal_oracle(&s, &sigma2, l, kappa, g, order);
            worst = worst.max(max_abs_diff(&sol.weights, &o));
        }
    }
    rep.line(
        "C6",
        worst <= 1e-4,
        format!("dual route vs primal QP on 40 eight-point designs, max |dw| {worst:.2e} (<= 1e-4)"),
    );
}

fn bias_formula(rep: &mut Report) {
    let mut r = rng(SEED);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let n = r.gen_range(8..60);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let Ok(s) = Sample::new(x.clone(), vec![0.0; n], 0.0) else { continue };
        let v = done % 2;
        let kernel = if (done / 2) % 2 == 0 { KernelSpec::Triangular } else { KernelSpec::Uniform };
        let h = r.gen_range(0.4..1.5);
        let Ok(w) = lp_weights(&s, h, kernel, 1, v) else { continue };
        let order = if v == 0 { Order::Level } else { Order::Kink };
        let l = r.gen_range(0.5..5.0);
        let (exact, _) = worst_case_bias(&w, &x, l, order).unwrap();
        let closed = lp_worst_case_bias(&w, &x, l, 1, v).unwrap();
        worst = worst.max((exact - closed).abs());
        done += 1;
    }
    rep.line(
        "C7",
        worst <= 1e-10,
        format!("exact integral vs closed form, 100 local linear fixtures, max |diff| {worst:.2e} (<= 1e-10)"),
    );
}

fn forced(rep: &mut Report) {
    let x = vec![-2.0, -1.0, 1.0, 2.0];
    let s = Sample::new(x.clone(), vec![0.0; 4], 0.0).unwrap();
    let l = 1.7;
    let sol = Optimizer::new(&s, &[1.0; 4], &SmoothnessSpec::kink(l), &OptimizeOptions::default())
        .unwrap()
        .solve(1.0)
        .unwrap();
    rep.track(&sol, &x, Order::Kink);
    let dw = max_abs_diff(&sol.weights, &[1.0, -1.0, -1.0, 1.0]);
    let (b, _) = worst_case_bias(&[1.0, -1.0, -1.0, 1.0], &x, l, Order::Kink).unwrap();
    let ok = dw <= 1e-6 && (b - 3.0 * l).abs() <= 1e-8 && (sol.max_bias - 3.0 * l).abs() <= 1e-6;
    rep.line(
        "C8",
        ok,
        format!(
            "x = (-2,-1,1,2): max |w - (1,-1,-1,1)| {dw:.1e} (<= 1e-6), B - 3L {:.1e} (<= 1e-8)",
            b - 3.0 * l
        ),
    );
}

fn critical_values(rep: &mut Report) {
    let c0 = folded_normal_cv(0.0, 0.05).unwrap();
    let c3 = folded_normal_cv(3.0, 0.05).unwrap();
    rep.line(
        "C9",
        (c0 - 1.959964).abs() <= 1e-6 && (c3 - 4.644854).abs() <= 1e-4,
        format!("cv(0) = {c0:.7} (1.959964 +/- 1e-6), cv(3) = {c3:.6} (4.644854 +/- 1e-4)"),
    );
}

fn moment_sweep(rep: &mut Report) {
    let mut r = rng(SEED + 1);
    for i in 0..30 {
        let n = r.gen_range(10..200);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let Ok(s) = Sample::new(x.clone(), vec![0.0; n], 0.0) else { continue };
        if s.check_solvable().is_err() {
            continue;
        }
        let sigma2: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
        let order = if i % 2 == 0 { Order::Kink } else { Order::Level };
        let shape = [Shape::None, Shape::Concave, Shape::Increasing][i % 3];
        let spec = SmoothnessSpec { order, shape, ..SmoothnessSpec::kink(r.gen_range(0.5..5.0)) };
        let sol = Optimizer::new(&s, &sigma2, &spec, &OptimizeOptions::default())
            .unwrap()
            .solve(r.gen_range(0.01..1.0))
            .unwrap();
        rep.track(&sol, &x, order);
    }
}

fn runtime(rep: &mut Report) {
    let dgp = DgpSpec::new(Mu::Mu1, 2.0, 6000);
    let s = simbench::draw_sample(&dgp, SEED).unwrap();
    let spec = SmoothnessSpec::kink(2.0);
    let opts = EstimateOptions::default();
    let (u, tu) = timed(|| estimate::optimized_interval(&s, &spec, 0.05, Criterion::Umse, &opts).unwrap());
    let (h, th) = timed(|| estimate::optimized_interval(&s, &spec, 0.05, Criterion::Hl, &opts).unwrap());
    rep.track(&u.solution, &s.x, Order::Kink);
    rep.track(&h.solution, &s.x, Order::Kink);
    rep.line(
        "C11",
        tu <= 2.0 && th <= 30.0,
        format!("n = 6000: UMSE {tu:.2} s (<= 2), length-optimized {th:.2} s (<= 30)"),
    );
}

fn fuzzy_degenerate(rep: &mut Report) {
    let dgp = DgpSpec::new(Mu::Mu1, 2.0, 1000);
    let s = simbench::draw_sample(&dgp, SEED).unwrap();
    let t: Vec<f64> = s.x.iter().map(|&x| if x >= 0.0 { x } else { 0.0 }).collect();
    let fz = Sample::with_treatment(s.x.clone(), s.y.clone(), Some(t), 0.0).unwrap();
    let spec = SmoothnessSpec::kink(2.0);
    let opts = FuzzyOptions::default();
    let set = fuzzy::ar_confidence_set(&fz, &spec, 0.05, &opts).unwrap();
    let sharp = estimate::optimized_interval(&s, &spec, 0.05, opts.criterion, &opts.estimate).unwrap();
    rep.track(&sharp.solution, &s.x, Order::Kink);
    let (a, b) = (set.a.unwrap_or(f64::NAN), set.b.unwrap_or(f64::NAN));
    let d = (a - sharp.interval.lower).abs().max((b - sharp.interval.upper).abs());
    rep.line(
        "C12",
        set.shape == SetShape::Bounded && d <= 1e-9,
        format!("unit-kink first stage, L_T = 0: max endpoint gap {d:.2e} (<= 1e-9)"),
    );
}

const CONCAVE_REPS: usize = 500;

fn shape_constraint(rep: &mut Report) {
    let dgp = DgpSpec::new(Mu::Concave, 2.0, N);
    let plain = McMethod::opt(Criterion::Hl, 2.0);
    let concave = McMethod::Opt {
        criterion: Criterion::Hl,
        l: LChoice::Fixed(2.0),
        shape: Shape::Concave,
    };
    let r = simbench::run_monte_carlo(&dgp, &[plain, concave], CONCAVE_REPS, SEED, &McOptions::default()).unwrap();
    let (p, c) = (&r.rows[0], &r.rows[1]);
    rep.line(
        "C13",
        c.mean_half_length <= p.mean_half_length && c.coverage >= 93.0,
        format!(
            "concave truth, {CONCAVE_REPS} replications: mean half-length {:.4} constrained vs {:.4}, coverage {:.1}% (>= 93)",
            c.mean_half_length, p.mean_half_length, c.coverage
        ),
    );
}

fn main() {
    let mut rep = Report {
        failed: 0,
        worst_moment: 0.0,
    };
    critical_values(&mut rep);
    forced(&mut rep);
    bias_formula(&mut rep);
    oracle(&mut rep);
    moment_sweep(&mut rep);
    fuzzy_degenerate(&mut rep);
    discrete_gain(&mut rep);
    runtime(&mut rep);
    let worst = rep.worst_moment;
    rep.line(
        "C10",
        worst <= MOMENT_TOL,
        format!("largest moment residual over all direct solves {worst:.2e} (<= {MOMENT_TOL:e})"),
    );
    coverage_and_lengths(&mut rep);
    misspecification(&mut rep);
    shape_constraint(&mut rep);
    println!("acceptance: {} failed", rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
