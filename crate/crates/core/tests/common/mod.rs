//! Shared fixtures and a brute-force primal oracle for the weight program.
#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use optkink::grid::{build_constraints, build_grid};
use optkink::{Order, Sample, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimizes `sum s_i w_i^2 + kappa B(w)^2` directly over observation weights.
///
/// `B(w)` is the worst case of `sum w_i R(c_i)` over grid functions `R` that vanish
/// at the cutoff pins and have second differences bounded by `L h^2`; it is written
/// through its LP dual `L h^2 sum |u_j|`, `sum u_j D_j + sum mu_p e_p = g(w)`.
/// Every `x` must sit on a grid center, so the moment conditions use `x` itself.
pub fn primal_oracle(sample: &Sample, sigma2: &[f64], l: f64, kappa: f64, centers: usize, order: Order) -> Vec<f64> {
    let grid = build_grid(sample, centers).unwrap();
    for (i, &x) in sample.x.iter().enumerate() {
        let c = grid.centers[grid.assignment[i]];
        assert!((c - x).abs() < 1e-12, "x = {x} is not on the grid");
    }
    let cons = build_constraints(&grid, Shape::None);
    let rows: Vec<usize> = cons
        .ineq_rows
        .iter()
        .filter(|r| r.coeffs[0] > 0.0)
        .map(|r| r.center)
        .collect();
    let n = sample.len();
    let g = grid.len();
    let nj = rows.len();
    let np = cons.eq_rows.len();
    // columns: w, a, b, mu, t
    let col_a = n;
    let col_b = n + nj;
    let col_mu = n + 2 * nj;
    let col_t = col_mu + np;
    let nvar = col_t + 1;
    let h2 = grid.h * grid.h;

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = Vec::new();
    let mut row = 0;
    // sum_j (a_j - b_j) D_j[c] + mu_p [c = p] - g_c = 0 for every center c
    for c in 0..g {
        for (j, &center) in rows.iter().enumerate() {
            let coef = match c as i64 - center as i64 {
                -1 | 1 => 1.0,
                0 => -2.0,
                _ => 0.0,
            };
            if coef != 0.0 {
                trip.push((row, col_a + j, coef));
                trip.push((row, col_b + j, -coef));
            }
        }
        for (p, &pin) in cons.eq_rows.iter().enumerate() {
            if pin == c {
                trip.push((row, col_mu + p, 1.0));
            }
        }
        for i in 0..n {
            if grid.assignment[i] == c {
                trip.push((row, i, -1.0));
            }
        }
        rhs.push(0.0);
        row += 1;
    }
    // t = L h^2 sum (a + b)
    trip.push((row, col_t, 1.0));
    for j in 0..nj {
        trip.push((row, col_a + j, -l * h2));
        trip.push((row, col_b + j, -l * h2));
    }
    rhs.push(0.0);
    row += 1;
    // moments per side
    let (m0, m1) = match order {
        Order::Kink => ([0.0, 0.0], [1.0, -1.0]),
        Order::Level => ([1.0, -1.0], [0.0, 0.0]),
    };
    for (side, plus) in [true, false].into_iter().enumerate() {
        for (pow, target) in [(0, m0[side]), (1, m1[side])] {
            for (i, &x) in sample.x.iter().enumerate() {
                if (x >= 0.0) == plus {
                    trip.push((row, i, x.powi(pow)));
                }
            }
            rhs.push(target);
            row += 1;
        }
    }
    let n_eq = row;
    for j in 0..2 * nj {
        trip.push((row, col_a + j, -1.0));
        rhs.push(0.0);
        row += 1;
    }
    let mut p: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 2.0 * sigma2[i])).collect();
    p.push((col_t, col_t, 2.0 * kappa));

    let csc = |m: usize, t: &[(usize, usize, f64)]| {
        CscMatrix::new_from_triplets(
            m,
            nvar,
            t.iter().map(|e| e.0).collect(),
            t.iter().map(|e| e.1).collect(),
            t.iter().map(|e| e.2).collect(),
        )
    };
    let pm = csc(nvar, &p);
    let am = csc(row, &trip);
    let q = vec![0.0; nvar];
    let cones = [SupportedConeT::ZeroConeT(n_eq), SupportedConeT::NonnegativeConeT(row - n_eq)];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        max_iter: 500,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&pm, &q, &am, &rhs, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "oracle status {:?}",
        solver.solution.status
    );
    solver.solution.x[..n].to_vec()
}

/// Distinct lattice points `lo + k step` including both ends, at least two per side.
pub fn lattice_design(rng: &mut impl Rng, centers: usize, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (centers - 1) as f64;
    loop {
        let mut ks: Vec<usize> = vec![0, centers - 1];
        while ks.len() < points {
            let k = rng.gen_range(1..centers - 1);
            if !ks.contains(&k) {
                ks.push(k);
            }
        }
        ks.sort();
        let xs: Vec<f64> = ks.iter().map(|&k| lo + k as f64 * step).collect();
        let minus = xs.iter().filter(|&&x| x < 0.0).count();
        if minus >= 2 && xs.len() - minus >= 2 {
            return xs;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noisy draws `y = mu(x) + e` with uniform `x` on `[-1, 1]`.
pub fn noisy_sample(seed: u64, n: usize, mu: impl Fn(f64) -> f64, sd: f64) -> Sample {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..=1.0)).collect();
    let y = x.iter().map(|&x| mu(x) + noise.sample(&mut r)).collect();
    Sample::new(x, y, 0.0).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
