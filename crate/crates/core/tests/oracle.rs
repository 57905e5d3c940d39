mod common;

use common::*;
use optkink::optimizer::{OptimizeOptions, Optimizer};
use optkink::{Order, Sample, SmoothnessSpec};
use rand::Rng;

fn compare(seed: u64, centers: usize, lo: f64, hi: f64, kappa: f64, order: Order) -> f64 {
    let mut r = rng(seed);
    let xs = lattice_design(&mut r, centers, lo, hi, 8);
    let sigma2: Vec<f64> = xs.iter().map(|_| r.gen_range(0.5..2.0)).collect();
    let sample = Sample::new(xs.clone(), vec![0.0; xs.len()], 0.0).unwrap();
    let l = r.gen_range(0.5..3.0);
    let spec = SmoothnessSpec {
        order,
        ..SmoothnessSpec::kink(l)
    };
    let opts = OptimizeOptions {
        num_centers: Some(centers),
        ..OptimizeOptions::default()
    };
    let w = Optimizer::new(&sample, &sigma2, &spec, &opts).unwrap().solve(kappa).unwrap().weights;
    let oracle = primal_oracle(&sample, &sigma2, l, kappa, centers, order);
    max_abs_diff(&w, &oracle)
}

#[test]
fn dual_route_matches_primal_with_zero_on_grid() {
    for seed in 0..10 {
        for kappa in [1.0, 0.3] {
            let d = compare(seed, 21, -1.0, 1.0, kappa, Order::Kink);
            assert!(d <= 1e-4, "seed {seed} kappa {kappa}: {d:e}");
        }
    }
}

#[test]
fn dual_route_matches_primal_with_zero_between_centers() {
    for seed in 0..10 {
        let d = compare(seed, 20, -0.95, 0.95, 1.0, Order::Kink);
        assert!(d <= 1e-4, "seed {seed}: {d:e}");
    }
}

#[test]
fn dual_route_matches_primal_for_levels() {
    for seed in 0..10 {
        let d = compare(seed, 15, -1.0, 0.4, 0.5, Order::Level);
        assert!(d <= 1e-4, "seed {seed}: {d:e}");
    }
}
