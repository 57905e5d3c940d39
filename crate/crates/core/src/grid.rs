//! Equidistant discretization of the remainder function and its constraint rows.

use crate::domain::{Sample, Shape};
use crate::error::{Error, Result};

/// Upper limit for the automatic grid size.
pub const MAX_DEFAULT_CENTERS: usize = 401;
/// Lower limit for the automatic grid size.
pub const MIN_DEFAULT_CENTERS: usize = 51;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGrid {
    pub centers: Vec<f64>,
    pub h: f64,
    /// Grid index of every observation.
    pub assignment: Vec<usize>,
    pub cutoff_minus: usize,
    pub cutoff_plus: usize,
    pub bin_counts: Vec<usize>,
}

impl DiscreteGrid {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// True when zero is itself a center.
    pub fn zero_on_grid(&self) -> bool {
        self.cutoff_minus == self.cutoff_plus
    }
}

/// Row `coeffs . (R[center-1], R[center], R[center+1]) <= bound * nu * h^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffRow {
    pub center: usize,
    pub coeffs: [f64; 3],
    /// 1 for curvature rows, 0 for shape rows.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    /// Centers whose remainder value is pinned to zero (rhs 0).
    pub eq_rows: Vec<usize>,
    /// Paired +/- second-difference rows.
    pub ineq_rows: Vec<DiffRow>,
    pub shape_rows: Vec<DiffRow>,
    pub shape: Shape,
}

impl ConstraintSet {
    /// Number of distinct centers carrying curvature rows.
    pub fn active_centers(&self) -> usize {
        self.ineq_rows.len() / 2
    }
}

/// Grid size used when the caller does not fix one.
///
/// If the distinct x values sit on an equidistant lattice, the grid is chosen as a
/// refinement of that lattice so that every support point is a center.
pub fn default_num_centers(sample: &Sample) -> usize {
    let mut xs = sample.x.clone();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let distinct = xs.len();
    if let Some(intervals) = lattice_intervals(&xs) {
        if intervals <= MAX_DEFAULT_CENTERS - 1 {
            let k = (MAX_DEFAULT_CENTERS - 1) / intervals;
            return intervals * k + 1;
        }
    }
    let mut g = distinct + 1;
    if g % 2 == 0 {
        g += 1;
    }
    g.clamp(MIN_DEFAULT_CENTERS, MAX_DEFAULT_CENTERS)
}

/// Number of lattice intervals spanned by sorted distinct values, if they are equidistant
/// up to gaps.
fn lattice_intervals(xs: &[f64]) -> Option<usize> {
    if xs.len() < 3 {
        return None;
    }
    let range = xs[xs.len() - 1] - xs[0];
    let step = xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(step > 0.0) || range / step > 1e6 {
        return None;
    }
    let tol = 1e-7 * step;
    for w in xs.windows(2) {
        let k = (w[1] - w[0]) / step;
        if (k - k.round()).abs() * step > tol {
            return None;
        }
    }
    let m = (range / step).round();
    if (m * step - range).abs() > tol * m.max(1.0) {
        return None;
    }
    Some(m as usize)
}

pub fn build_grid(sample: &Sample, num_centers: usize) -> Result<DiscreteGrid> {
    if num_centers < 5 {
        return Err(Error::invalid(format!("grid needs at least 5 centers, got {num_centers}")));
    }
    if sample.is_empty() {
        return Err(Error::InvalidData("empty sample".into()));
    }
    let lo = sample.x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::invalid(format!(
            "data must lie on both sides of the cutoff (range [{lo}, {hi}])"
        )));
    }
    let g = num_centers;
    let h = (hi - lo) / (g - 1) as f64;
    let mut centers: Vec<f64> = (0..g).map(|j| lo + j as f64 * h).collect();
    centers[g - 1] = hi;

    let zero_idx = centers.iter().position(|c| c.abs() <= 1e-12 * h);
    let (cutoff_minus, cutoff_plus) = match zero_idx {
        Some(j) => {
            centers[j] = 0.0;
            (j, j)
        }
        None => {
            let cm = centers.iter().rposition(|&c| c < 0.0).unwrap_or(0);
            (cm, cm + 1)
        }
    };

    let mut assignment = Vec::with_capacity(sample.len());
    let mut bin_counts = vec![0usize; g];
    for &x in &sample.x {
        let j = nearest_center(&centers, lo, h, x, cutoff_minus, cutoff_plus);
        assignment.push(j);
        bin_counts[j] += 1;
    }
    Ok(DiscreteGrid {
        centers,
        h,
        assignment,
        cutoff_minus,
        cutoff_plus,
        bin_counts,
    })
}

/// Nearest center on the observation's own side; ties go toward zero.
fn nearest_center(centers: &[f64], lo: f64, h: f64, x: f64, cm: usize, cp: usize) -> usize {
    let g = centers.len();
    let pos = ((x - lo) / h).clamp(0.0, (g - 1) as f64);
    let a = (pos.floor() as usize).min(g - 1);
    let b = (a + 1).min(g - 1);
    let (da, db) = ((x - centers[a]).abs(), (x - centers[b]).abs());
    let mut j = if (da - db).abs() <= 1e-12 * h {
        if centers[a].abs() <= centers[b].abs() {
            a
        } else {
            b
        }
    } else if da < db {
        a
    } else {
        b
    };
    if x < 0.0 && centers[j] > 0.0 {
        j = cm;
    } else if x >= 0.0 && centers[j] < 0.0 {
        j = cp;
    }
    j
}

/// Pins at the cutoff-adjacent centers and difference rows at every interior center.
///
/// Rows around the cutoff couple both sides: the remainder is continuously
/// differentiable at zero, so its second difference is bounded there as well.
pub fn build_constraints(grid: &DiscreteGrid, shape: Shape) -> ConstraintSet {
    let mut eq_rows = vec![grid.cutoff_minus];
    if grid.cutoff_plus != grid.cutoff_minus {
        eq_rows.push(grid.cutoff_plus);
    }
    let g = grid.len();
    let mut ineq_rows = Vec::with_capacity(2 * (g - 2));
    let mut shape_rows = Vec::new();
    for j in 1..g - 1 {
        ineq_rows.push(DiffRow {
            center: j,
            coeffs: [1.0, -2.0, 1.0],
            bound: 1.0,
        });
        ineq_rows.push(DiffRow {
            center: j,
            coeffs: [-1.0, 2.0, -1.0],
            bound: 1.0,
        });
        let extra = match shape {
            Shape::None => None,
            Shape::Concave => Some([1.0, -2.0, 1.0]),
            Shape::Convex => Some([-1.0, 2.0, -1.0]),
            Shape::Increasing => Some([1.0, 0.0, -1.0]),
            Shape::Decreasing => Some([-1.0, 0.0, 1.0]),
        };
        if let Some(coeffs) = extra {
            shape_rows.push(DiffRow {
                center: j,
                coeffs,
                bound: 0.0,
            });
        }
    }
    ConstraintSet {
        eq_rows,
        ineq_rows,
        shape_rows,
        shape,
    }
}
