//! Dense two-phase simplex over free variables.
//!
//! Solves `maximize c.x subject to A x <= b` with `x` unrestricted in sign.
//! Free variables are split as `x = u - v`, slacks complete the basis, and a
//! phase-1 pass with artificial variables finds an initial feasible vertex.
//! Bland's rule is used throughout, so the method terminates on degenerate
//! systems at the cost of a few extra pivots.

use nalgebra::{DMatrix, DVector};

/// Outcome of one linear program.
#[derive(Debug, Clone)]
pub enum LpResult {
    /// Finite optimum attained at `point`.
    Optimal { value: f64, point: DVector<f64> },
    /// The objective is unbounded above on the feasible region.
    Unbounded,
    /// The constraint system has no solution.
    Infeasible,
}

impl LpResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;

struct Tableau {
    /// Row-major constraint rows; one extra column for the rhs.
    rows: Vec<Vec<f64>>,
    /// Objective row (reduced costs), same width as `rows` entries.
    obj: Vec<f64>,
    /// Basis column index per constraint row.
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, cells) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = cells[col];
            if f != 0.0 {
                for (c, v) in cells.iter_mut().enumerate() {
                    *v -= f * pivot_row[c];
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (c, v) in self.obj.iter_mut().enumerate() {
                *v -= f * pivot_row[c];
            }
        }
        self.basis[row] = col;
    }

    /// Runs primal simplex on the current objective. Columns in
    /// `blocked` can never enter the basis (used to freeze artificials).
    /// Returns false if the objective is unbounded.
    fn optimize(&mut self, blocked: usize) -> bool {
        let m = self.rows.len();
        loop {
            // Bland: first improvable column.
            let mut entering = None;
            for c in 0..blocked {
                if self.obj[c] > PIVOT_TOL {
                    entering = Some(c);
                    break;
                }
            }
            let Some(col) = entering else {
                return true;
            };
            // Ratio test, ties broken by smallest basis index (Bland).
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.rows[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rows[r][self.ncols] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - PIVOT_TOL
                                || (ratio < bratio + PIVOT_TOL && self.basis[r] < self.basis[br])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

/// Maximizes `c.x` over `{x : a x <= b}` with free `x`.
pub fn solve_lp(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> LpResult {
    let n = c.len();
    let m = a.nrows();
    assert_eq!(a.ncols(), n, "objective/constraint dimension mismatch");
    assert_eq!(b.len(), m, "row/rhs count mismatch");
    if m == 0 {
        // No constraints: any nonzero objective is unbounded.
        if c.iter().all(|v| v.abs() <= PIVOT_TOL) {
            return LpResult::Optimal {
                value: 0.0,
                point: DVector::zeros(n),
            };
        }
        return LpResult::Unbounded;
    }

    // Columns: u(n) | v(n) | slack(m) | artificial(k). x = u - v.
    let nuv = 2 * n;
    let nreal = nuv + m;
    // Rows with negative rhs are flipped, turning their slack coefficient to
    // -1; those rows get an artificial basic variable.
    let mut needs_art = Vec::new();
    for i in 0..m {
        if b[i] < 0.0 {
            needs_art.push(i);
        }
    }
    let nart = needs_art.len();
    let ncols = nreal + nart;

    let mut rows = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut art_of_row = vec![usize::MAX; m];
    for (k, &i) in needs_art.iter().enumerate() {
        art_of_row[i] = nreal + k;
    }
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            rows[i][j] = flip * a[(i, j)];
            rows[i][n + j] = -flip * a[(i, j)];
        }
        rows[i][nuv + i] = flip;
        rows[i][ncols] = flip * b[i];
        if art_of_row[i] != usize::MAX {
            rows[i][art_of_row[i]] = 1.0;
            basis[i] = art_of_row[i];
        } else {
            basis[i] = nuv + i;
        }
    }

    let mut t = Tableau {
        rows,
        obj: vec![0.0; ncols + 1],
        basis,
        ncols,
    };

    // Phase 1: maximize -sum(artificials); reduced costs start as the sum of
    // the artificial rows.
    if nart > 0 {
        for &i in &needs_art {
            for c in 0..=ncols {
                t.obj[c] += t.rows[i][c];
            }
        }
        for k in 0..nart {
            t.obj[nreal + k] = 0.0;
        }
        t.optimize(nreal);
        if t.obj[ncols] > FEAS_TOL {
            return LpResult::Infeasible;
        }
        // Pivot any artificial still in the basis out on a real column.
        for r in 0..m {
            if t.basis[r] >= nreal {
                let col = (0..nreal).find(|&c| t.rows[r][c].abs() > PIVOT_TOL);
                if let Some(c) = col {
                    t.pivot(r, c);
                }
                // A fully zero row is redundant; its artificial stays basic
                // at value zero and never pivots again.
            }
        }
    }

    // Phase 2: real objective, expressed through the current basis.
    let mut obj = vec![0.0; ncols + 1];
    for j in 0..n {
        obj[j] = c[j];
        obj[n + j] = -c[j];
    }
    // Reduce against basic columns.
    for r in 0..m {
        let bcol = t.basis[r];
        if bcol < ncols {
            let f = obj[bcol];
            if f != 0.0 {
                for cidx in 0..=ncols {
                    obj[cidx] -= f * t.rows[r][cidx];
                }
            }
        }
    }
    t.obj = obj;
    if !t.optimize(nreal) {
        return LpResult::Unbounded;
    }

    let mut x = DVector::zeros(n);
    for r in 0..m {
        let bcol = t.basis[r];
        let val = t.rows[r][ncols];
        if bcol < n {
            x[bcol] += val;
        } else if bcol < nuv {
            x[bcol - n] -= val;
        }
    }
    let value = c.dot(&x);
    LpResult::Optimal { value, point: x }
}

/// Returns any point of `{x : a x <= b}`, or None if the region is empty.
pub fn feasible_point(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    match solve_lp(&DVector::zeros(a.ncols()), a, b) {
        LpResult::Optimal { point, .. } => Some(point),
        LpResult::Unbounded => unreachable!("zero objective cannot be unbounded"),
        LpResult::Infeasible => None,
    }
}

/// Chebyshev center of `{x : a x <= b}`: the midpoint of a largest inscribed
/// ball. Returns (center, radius); radius < 0 means the region is empty and
/// radius is +inf on rows that cannot brake the ball (unbounded regions still
/// report a finite center if the LP is bounded).
pub fn chebyshev_center(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let n = a.ncols();
    let m = a.nrows();
    if m == 0 {
        return Some((DVector::zeros(n), f64::INFINITY));
    }
    // max r  s.t.  a_i x + ||a_i|| r <= b_i
    let mut aa = DMatrix::zeros(m, n + 1);
    for i in 0..m {
        let norm = a.row(i).norm();
        for j in 0..n {
            aa[(i, j)] = a[(i, j)];
        }
        aa[(i, n)] = norm;
    }
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    match solve_lp(&c, &aa, b) {
        LpResult::Optimal { point, value } => {
            let center = DVector::from_fn(n, |i, _| point[i]);
            Some((center, value))
        }
        LpResult::Unbounded => {
            // Ball radius unbounded; fall back to any feasible point.
            feasible_point(a, b).map(|p| (p, f64::INFINITY))
        }
        LpResult::Infeasible => None,
    }
}
