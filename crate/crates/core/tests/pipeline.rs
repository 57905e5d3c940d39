mod common;

use common::*;
use optkink::estimate::{self, EstimateOptions};
use optkink::localpoly::{self, Baseline, BaselineOptions, KernelSpec};
use optkink::optimizer::{Criterion, OptimizeOptions, Optimizer};
use optkink::simbench::{self, Design, DgpSpec, McMethod, McOptions, Mu};
use optkink::smoothness;
use optkink::variance::{self, VarianceMethod};
use optkink::{Sample, SmoothnessSpec};

#[test]
fn dgp_values() {
    let m1 = DgpSpec::new(Mu::Mu1, 2.0, 100);
    let m2 = DgpSpec::new(Mu::Mu2, 2.0, 100);
    assert!((simbench::eval_mu(&m1, 1.0) + 0.685625).abs() < 1e-12);
    assert!(simbench::eval_mu(&m2, 0.0).abs() < 1e-12);
    for spec in [m1, m2, DgpSpec::new(Mu::Concave, 2.0, 100)] {
        let e = 1e-6;
        let right = (simbench::eval_mu(&spec, e) - simbench::eval_mu(&spec, 0.0)) / e;
        let left = (simbench::eval_mu(&spec, 0.0) - simbench::eval_mu(&spec, -e)) / e;
        assert!((right - left - spec.theta).abs() < 1e-4, "{:?}", spec.mu);
    }
}

#[test]
fn dgp_is_in_the_class() {
    for mu in [Mu::Mu1, Mu::Mu2, Mu::Concave] {
        for l in [2.0, 6.0] {
            let spec = DgpSpec::new(mu, l, 100);
            let h = 1e-4;
            let mut worst = 0.0f64;
            for i in 1..20_000 {
                let x = -1.0 + i as f64 * h;
                if x.abs() < 1.5 * h {
                    continue;
                }
                let d2 = (simbench::eval_mu(&spec, x + h) - 2.0 * simbench::eval_mu(&spec, x) + simbench::eval_mu(&spec, x - h))
                    / (h * h);
                worst = worst.max(d2.abs());
            }
            assert!(worst <= l * (1.0 + 1e-3), "{mu:?} L={l}: {worst}");
        }
    }
}

#[test]
fn draws_are_reproducible() {
    let spec = DgpSpec::new(Mu::Mu1, 2.0, 500);
    let a = simbench::draw_replication(&spec, 11, 3).unwrap();
    let b = simbench::draw_replication(&spec, 11, 3).unwrap();
    let c = simbench::draw_replication(&spec, 11, 4).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_ne!(a.x, c.x);
    assert!(a.x.iter().all(|x| (-1.0..=1.0).contains(x)));
    let noise: Vec<f64> = a.x.iter().zip(&a.y).map(|(x, y)| y - simbench::eval_mu(&spec, *x)).collect();
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    let sd = (noise.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / noise.len() as f64).sqrt();
    assert!(mean.abs() < 4.0 * 0.1 / (500f64).sqrt());
    assert!((sd - 0.1).abs() < 0.01);
}

#[test]
fn discrete_support() {
    let k = 20;
    let spec = DgpSpec::new(Mu::Mu1, 2.0, 2000).with_design(Design::DiscreteUniform(k));
    let s = simbench::draw_sample(&spec, 5).unwrap();
    let mut seen = vec![false; k + 1];
    for &x in &s.x {
        let j = (x + 1.0) * k as f64 / 2.0;
        assert!((j - j.round()).abs() < 1e-9, "{x} off the lattice");
        seen[j.round() as usize] = true;
    }
    assert!(seen.iter().all(|&v| v));
    let bad = DgpSpec::new(Mu::Mu1, 2.0, 200).with_design(Design::DiscreteUniform(1));
    assert!(simbench::draw_sample(&bad, 0).is_err());
}

#[test]
fn monte_carlo_contract() {
    let dgp = DgpSpec::new(Mu::Mu1, 2.0, 300);
    let methods = [McMethod::opt(Criterion::Hl, 2.0), McMethod::baseline(Baseline::Conventional)];
    let opts = McOptions::default();
    assert!(simbench::run_monte_carlo(&dgp, &methods, 99, 1, &opts).is_err());
    let r = simbench::run_monte_carlo(&dgp, &methods, 100, 1, &opts).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!((r.rows[0].rel_length - 1.0).abs() < 1e-12);
    for row in &r.rows {
        assert!((0.0..=100.0).contains(&row.coverage));
        assert!(row.rel_length > 0.0);
    }
    let again = simbench::run_monte_carlo(&dgp, &methods, 100, 1, &opts).unwrap();
    assert_eq!(r.to_csv().unwrap(), again.to_csv().unwrap());
}

#[test]
fn rules_of_thumb_on_the_design() {
    let spec = DgpSpec::new(Mu::Mu1, 2.0, 2000);
    let mut s = simbench::draw_sample(&spec, 1).unwrap();
    s.y = s.x.iter().map(|&x| simbench::eval_mu(&spec, x)).collect();
    for (name, v) in [
        ("quartic", smoothness::rot_quartic(&s).unwrap()),
        ("spline", smoothness::rot_spline(&s, 10).unwrap()),
    ] {
        assert!((1.0..=4.0).contains(&v), "{name}: {v}");
    }
}

#[test]
fn spline_recovers_a_parabola() {
    for c in [0.5, 3.0] {
        let s = noisy_sample(2, 1000, |x| 0.5 * c * x * x, 0.0);
        let v = smoothness::rot_spline(&s, 10).unwrap();
        assert!((0.9 * c..=1.1 * c).contains(&v), "c = {c}: {v}");
    }
}

#[test]
fn spline_grows_with_curvature() {
    let base = noisy_sample(7, 1000, |_| 0.0, 0.02);
    let fit = |c: f64| {
        let y = base.x.iter().zip(&base.y).map(|(x, e)| 0.5 * c * x * x + e).collect();
        smoothness::rot_spline(&base.with_outcome(y), 10).unwrap()
    };
    let vals: Vec<f64> = [1.0, 3.0, 9.0].into_iter().map(fit).collect();
    assert!(vals.windows(2).all(|w| w[0] < w[1]), "{vals:?}");
}

#[test]
fn smoothness_is_affine_invariant() {
    let s = noisy_sample(3, 800, |x| (2.0 * x).sin() + 0.5 * x * x, 0.1);
    let shifted = s.with_outcome(s.x.iter().zip(&s.y).map(|(x, y)| y + 3.0 - 2.0 * x).collect());
    let f = |s: &Sample| {
        [
            smoothness::rot_quartic(s).unwrap(),
            smoothness::rot_quadratic(s, 3.0).unwrap(),
            smoothness::rot_spline(s, 8).unwrap(),
            smoothness::lower_bound_l(s, 0.2, 0.9).unwrap(),
        ]
    };
    let (a, b) = (f(&s), f(&shifted));
    for (x, y) in a.iter().zip(&b) {
        assert!(*x >= 0.0);
        assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()), "{a:?} vs {b:?}");
    }
}

#[test]
fn undersmoothing_shrinks_the_bandwidth() {
    let s = noisy_sample(4, 1000, |x| -0.5 * x.max(0.0) - x * x, 0.1);
    let sigma2 = variance::estimate(&s, VarianceMethod::Nn, 10).unwrap().per_obs;
    let spec = SmoothnessSpec::kink(2.0);
    let o = BaselineOptions::default();
    let conv = localpoly::baseline_interval(&s, Baseline::Conventional, &spec, 0.05, &sigma2, &sigma2, &o).unwrap();
    let us = localpoly::baseline_interval(&s, Baseline::Undersmoothed, &spec, 0.05, &sigma2, &sigma2, &o).unwrap();
    assert!((us.h - conv.h * 1000f64.powf(-0.05)).abs() < 1e-12);
    assert!(!conv.interval.honest);
    let w = localpoly::lp_weights(&s, conv.h, KernelSpec::Triangular, 1, 1).unwrap();
    assert!(max_abs_diff(&w, &conv.weights) < 1e-12);
}

#[test]
fn mirror_symmetric_weights() {
    let x: Vec<f64> = (0..40).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 40.0).collect();
    let s = Sample::new(x.clone(), vec![0.0; 40], 0.0).unwrap();
    let opts = OptimizeOptions {
        num_centers: Some(40),
        ..OptimizeOptions::default()
    };
    let w = Optimizer::new(&s, &vec![1.0; 40], &SmoothnessSpec::kink(2.0), &opts)
        .unwrap()
        .solve(1.0)
        .unwrap()
        .weights;
    for i in 0..40 {
        assert!((w[i] - w[39 - i]).abs() < 1e-6, "{i}: {} vs {}", w[i], w[39 - i]);
    }
}

#[test]
fn estimate_is_invariant_to_affine_shifts() {
    let s = noisy_sample(5, 600, |x| -0.5 * x.max(0.0) + x * x, 0.1);
    let shifted = s.with_outcome(s.x.iter().zip(&s.y).map(|(x, y)| y + 1.0 + 0.7 * x).collect());
    let opts = EstimateOptions {
        variance: VarianceMethod::NnAdjusted,
        ..EstimateOptions::default()
    };
    let spec = SmoothnessSpec::kink(2.0);
    let a = estimate::optimized_interval(&s, &spec, 0.05, Criterion::Hl, &opts).unwrap().interval;
    let b = estimate::optimized_interval(&shifted, &spec, 0.05, Criterion::Hl, &opts).unwrap().interval;
    assert!((a.lower - b.lower).abs() < 1e-8);
    assert!((a.upper - b.upper).abs() < 1e-8);
    assert!(a.lower <= a.estimate && a.estimate <= a.upper);
}

#[test]
fn shorter_with_length_criterion() {
    let s = noisy_sample(6, 1000, |x| -0.5 * x.max(0.0) - x * x, 0.1);
    let spec = SmoothnessSpec::kink(2.0);
    let opts = EstimateOptions::default();
    let u = estimate::optimized_interval(&s, &spec, 0.05, Criterion::Umse, &opts).unwrap();
    let h = estimate::optimized_interval(&s, &spec, 0.05, Criterion::Hl, &opts).unwrap();
    assert!((u.solution.kappa - 1.0).abs() < 1e-12);
    assert!(h.solution.half_length(0.05).unwrap() <= u.solution.half_length(0.05).unwrap() * (1.0 + 1e-9));
}
