//! Standard form of the dual program, as a quadratic program or through its
//! second-order cone reformulation, and the Clarabel call for either.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{DualProblem, DualSolution, SolveStatus, SolverConfig};
use crate::error::{Error, Result};

/// Problem `min 1/2 x'Px + q'x  s.t.  Ax + s = b, s in cones` as triplets.
pub(crate) struct StandardForm {
    pub n: usize,
    pub m: usize,
    /// Upper-triangular entries of `P`.
    pub p: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<(&'static str, usize)>,
}

/// Column offsets of the variable blocks.
struct Layout {
    nc: usize,
    m: usize,
    g: usize,
}

impl Layout {
    fn w(&self, c: usize) -> usize {
        c
    }
    fn nu(&self, k: usize) -> usize {
        self.nc + k
    }
    fn lambda(&self, a: usize) -> usize {
        self.nc + self.m + a
    }
    fn r(&self, j: usize, k: usize) -> usize {
        self.nc + self.m + 4 + j * self.m + k
    }
    fn epi(&self) -> usize {
        self.nc + self.m + 4 + self.g * self.m
    }
}

/// Shared equality and inequality blocks, with the quadratic either kept in `P` or
/// moved into a cone through an epigraph variable.
fn build(problem: &DualProblem, cone_form: bool) -> StandardForm {
    let lay = Layout {
        nc: problem.cells.len(),
        m: problem.num_adversaries(),
        g: problem.centers.len(),
    };
    let n = lay.epi() + usize::from(cone_form);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0;

    // linkage and pins
    for (c, cell) in problem.cells.iter().enumerate() {
        a.push((row, lay.w(c), 1.0));
        for (i, v) in cell.link().iter().enumerate() {
            if *v != 0.0 {
                a.push((row, lay.lambda(i), -v));
            }
        }
        for k in 0..lay.m {
            a.push((row, lay.r(cell.center, k), -1.0));
        }
        b.push(0.0);
        row += 1;
    }
    for &p in &problem.pins {
        for k in 0..lay.m {
            a.push((row, lay.r(p, k), 1.0));
            b.push(0.0);
            row += 1;
        }
    }
    cones.push(("zero", row));

    let start = row;
    let inv_h2 = 1.0 / (problem.h * problem.h);
    for (k, adv) in problem.adversaries.iter().enumerate() {
        for r in adv {
            for (o, c) in r.coeffs.iter().enumerate() {
                if *c != 0.0 {
                    a.push((row, lay.r(r.center + o - 1, k), c * inv_h2));
                }
            }
            if r.bound != 0.0 {
                a.push((row, lay.nu(k), -r.bound));
            }
            b.push(0.0);
            row += 1;
        }
        a.push((row, lay.nu(k), -1.0));
        b.push(0.0);
        row += 1;
    }
    cones.push(("nonneg", row - start));

    let mut q = vec![0.0; n];
    for (i, v) in problem.linear_term().iter().enumerate() {
        q[lay.lambda(i)] = *v;
    }
    let nu_coef = 1.0 / (2.0 * problem.kappa * problem.l * problem.l);
    let mut p = Vec::new();
    if cone_form {
        let start = row;
        a.push((row, lay.epi(), -1.0));
        b.push(1.0);
        row += 1;
        for (c, cell) in problem.cells.iter().enumerate() {
            a.push((row, lay.w(c), -(0.5 / cell.sigma2).sqrt()));
            b.push(0.0);
            row += 1;
        }
        for k in 0..lay.m {
            a.push((row, lay.nu(k), -nu_coef.sqrt()));
        }
        b.push(0.0);
        row += 1;
        a.push((row, lay.epi(), -1.0));
        b.push(0.0);
        row += 1;
        cones.push(("soc", row - start));
        q[lay.epi()] = 1.0;
    } else {
        for (c, cell) in problem.cells.iter().enumerate() {
            p.push((lay.w(c), lay.w(c), 0.5 / cell.sigma2));
        }
        for k in 0..lay.m {
            for k2 in k..lay.m {
                p.push((lay.nu(k), lay.nu(k2), nu_coef));
            }
        }
    }
    StandardForm {
        n,
        m: row,
        p,
        q,
        a,
        b,
        cones,
    }
}

pub(crate) fn standard_form(problem: &DualProblem) -> StandardForm {
    build(problem, false)
}

fn csc(m: usize, n: usize, t: &[(usize, usize, f64)]) -> CscMatrix<f64> {
    CscMatrix::new_from_triplets(
        m,
        n,
        t.iter().map(|e| e.0).collect(),
        t.iter().map(|e| e.1).collect(),
        t.iter().map(|e| e.2).collect(),
    )
}

/// Ridge on the diagonal entries of `P` that are otherwise zero.
pub(crate) const RIDGE: f64 = 1e-10;

pub(crate) fn solve(problem: &DualProblem, config: &SolverConfig, cone_form: bool) -> Result<DualSolution> {
    let mut sf = build(problem, cone_form);
    if !cone_form {
        let mut has = vec![false; sf.n];
        for &(i, j, _) in &sf.p {
            if i == j {
                has[i] = true;
            }
        }
        for (i, h) in has.into_iter().enumerate() {
            if !h {
                sf.p.push((i, i, RIDGE));
            }
        }
    }
    let p = csc(sf.n, sf.n, &sf.p);
    let a = csc(sf.m, sf.n, &sf.a);
    let cones: Vec<SupportedConeT<f64>> = sf
        .cones
        .iter()
        .map(|&(kind, dim)| match kind {
            "zero" => SupportedConeT::ZeroConeT(dim),
            "nonneg" => SupportedConeT::NonnegativeConeT(dim),
            _ => SupportedConeT::SecondOrderConeT(dim),
        })
        .collect();
    let settings = DefaultSettings {
        verbose: false,
        max_iter: config.max_iter as u32,
        tol_gap_abs: config.abs_tol,
        tol_gap_rel: config.rel_tol,
        tol_feas: config.abs_tol.max(1e-10),
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &sf.q, &a, &sf.b, &cones, settings)
        .map_err(|e| Error::solver(format!("solver setup failed: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    if !matches!(sol.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
        return Err(Error::Solver {
            message: format!("solver status {:?}", sol.status),
            iterations: sol.iterations as usize,
            primal_res: sol.r_prim,
            dual_res: sol.r_dual,
            gap: (sol.obj_val - sol.obj_val_dual).abs(),
        });
    }
    let lay = Layout {
        nc: problem.cells.len(),
        m: problem.num_adversaries(),
        g: problem.centers.len(),
    };
    let x = &sol.x;
    Ok(DualSolution {
        nu: (0..lay.m).map(|k| x[lay.nu(k)].max(0.0)).collect(),
        lambda: [x[lay.lambda(0)], x[lay.lambda(1)], x[lay.lambda(2)], x[lay.lambda(3)]],
        r_tilde: (0..lay.m)
            .map(|k| (0..lay.g).map(|j| x[lay.r(j, k)]).collect())
            .collect(),
        objective: if cone_form { sol.obj_val + 0.5 } else { sol.obj_val },
        status: SolveStatus {
            iterations: sol.iterations as usize,
            primal_res: sol.r_prim,
            dual_res: sol.r_dual,
            gap: (sol.obj_val - sol.obj_val_dual).abs(),
        },
    })
}
