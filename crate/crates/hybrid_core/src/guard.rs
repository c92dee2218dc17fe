//! Jump conditions and state update maps.

use crate::error::{HybridError, Result};
use crate::flow::SparseRow;
use nalgebra::{DMatrix, DVector};
use setgeom::Polytope;
use std::fmt;
use std::sync::Arc;

/// Default membership slack used when evaluating guards on sampled states.
pub const GUARD_TOL: f64 = 1e-9;

/// Pointwise predicate refining a guard polytope, for conditions that are not
/// linear (correlation thresholds, sampled peak tests). Analyses that need a
/// convex guard use the polytope alone, which must over-approximate the
/// residual's truth region.
#[derive(Clone)]
pub struct GuardResidual {
    pub label: String,
    pub eval: Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>,
}

impl fmt::Debug for GuardResidual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GuardResidual({})", self.label)
    }
}

/// A jump's enabling condition: a polytope plus an optional residual.
#[derive(Clone, Debug)]
pub struct Guard {
    pub poly: Polytope,
    pub residual: Option<GuardResidual>,
}

impl Guard {
    pub fn from_poly(poly: Polytope) -> Self {
        Self { poly, residual: None }
    }

    pub fn always(dim: usize) -> Self {
        Self::from_poly(Polytope::whole_space(dim))
    }

    /// Single halfspace `normal . x <= offset`.
    pub fn halfspace(dim: usize, normal: &[(usize, f64)], offset: f64) -> Self {
        Self::from_poly(Polytope::halfspace(dim, normal, offset))
    }

    pub fn with_residual(
        mut self,
        label: impl Into<String>,
        eval: impl Fn(&DVector<f64>) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.residual = Some(GuardResidual { label: label.into(), eval: Arc::new(eval) });
        self
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    /// Polytope membership up to `tol`, residual exact.
    pub fn satisfied(&self, x: &DVector<f64>, tol: f64) -> bool {
        if self.poly.violation(x) > tol {
            return false;
        }
        match &self.residual {
            Some(r) => (r.eval)(x),
            None => true,
        }
    }

    /// Conjunction of two guards on the same space.
    pub fn and(&self, other: &Guard) -> Result<Guard> {
        let poly = self.poly.intersect(&other.poly)?;
        let residual = match (&self.residual, &other.residual) {
            (None, None) => None,
            (Some(r), None) | (None, Some(r)) => Some(r.clone()),
            (Some(r1), Some(r2)) => {
                let (e1, e2) = (r1.eval.clone(), r2.eval.clone());
                Some(GuardResidual {
                    label: format!("{} & {}", r1.label, r2.label),
                    eval: Arc::new(move |x| e1(x) && e2(x)),
                })
            }
        };
        Ok(Guard { poly, residual })
    }
}

/// Nonlinear part of a reset: an exact pointwise update plus an interval
/// over-approximation of the same update for set-valued analyses.
#[derive(Clone)]
pub struct ResetResidual {
    pub label: String,
    /// Reads the pre-jump state, overwrites its target coordinates in `post`.
    pub eval: Arc<dyn Fn(&DVector<f64>, &mut DVector<f64>) + Send + Sync>,
    /// Given pre-jump bounds `(lo, hi)`, returns `(coord, lo, hi)` intervals
    /// enclosing every reachable post value of each target coordinate.
    pub interval:
        Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> Vec<(usize, f64, f64)> + Send + Sync>,
}

impl fmt::Debug for ResetResidual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ResetResidual({})", self.label)
    }
}

/// State update applied on a jump. Affine rows are simultaneous: every row
/// reads the pre-jump state, coordinates without a row keep their value. The
/// optional residual runs after the affine rows and may overwrite targets.
#[derive(Clone, Debug)]
pub struct Reset {
    dim: usize,
    rows: Vec<(usize, SparseRow)>,
    pub residual: Option<ResetResidual>,
}

impl Reset {
    pub fn identity(dim: usize) -> Self {
        Self { dim, rows: Vec::new(), residual: None }
    }

    /// Builds from explicit rows; later rows for the same coordinate are
    /// rejected.
    pub fn from_rows(dim: usize, rows: Vec<(usize, SparseRow)>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for (i, row) in &rows {
            if *i >= dim {
                return Err(HybridError::DimensionMismatch { expected: dim, got: *i });
            }
            if seen[*i] {
                return Err(HybridError::InvalidModel(format!("duplicate reset row for coordinate {i}")));
            }
            seen[*i] = true;
            for &(j, _) in &row.entries {
                if j >= dim {
                    return Err(HybridError::DimensionMismatch { expected: dim, got: j });
                }
            }
        }
        Ok(Self { dim, rows, residual: None })
    }

    /// Dense affine map `x -> m x + c`; rows equal to identity are elided.
    pub fn from_affine(m: &DMatrix<f64>, c: &DVector<f64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(HybridError::DimensionMismatch { expected: dim, got: m.ncols() });
        }
        if c.len() != dim {
            return Err(HybridError::DimensionMismatch { expected: dim, got: c.len() });
        }
        let mut rows = Vec::new();
        for i in 0..dim {
            let is_identity =
                c[i] == 0.0 && (0..dim).all(|j| m[(i, j)] == if i == j { 1.0 } else { 0.0 });
            if !is_identity {
                let entries: Vec<(usize, f64)> =
                    (0..dim).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect();
                rows.push((i, SparseRow { entries, constant: c[i] }));
            }
        }
        Self::from_rows(dim, rows)
    }

    pub fn with_residual(mut self, residual: ResetResidual) -> Self {
        self.residual = Some(residual);
        self
    }

    /// Convenience: set coordinate `i` to the constant `v`.
    pub fn assign_const(mut self, i: usize, v: f64) -> Self {
        self.rows.retain(|(j, _)| *j != i);
        self.rows.push((i, SparseRow::constant(v)));
        self
    }

    /// Convenience: set coordinate `i` to a sparse affine expression.
    pub fn assign(mut self, i: usize, row: SparseRow) -> Self {
        self.rows.retain(|(j, _)| *j != i);
        self.rows.push((i, row));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[(usize, SparseRow)] {
        &self.rows
    }

    pub fn is_affine(&self) -> bool {
        self.residual.is_none()
    }

    pub fn is_identity(&self) -> bool {
        self.rows.is_empty() && self.residual.is_none()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = x.clone();
        for (i, row) in &self.rows {
            y[*i] = row.eval(x);
        }
        if let Some(r) = &self.residual {
            (r.eval)(x, &mut y);
        }
        y
    }

    /// Dense `(m, c)` form of the affine part (residual ignored).
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut m = DMatrix::identity(self.dim, self.dim);
        let mut c = DVector::zeros(self.dim);
        for (i, row) in &self.rows {
            for j in 0..self.dim {
                m[(*i, j)] = 0.0;
            }
            for &(j, v) in &row.entries {
                m[(*i, j)] += v;
            }
            c[*i] = row.constant;
        }
        (m, c)
    }

    /// Merges resets that write disjoint coordinates, for synchronized jumps.
    /// Rows still read the shared pre-jump state.
    pub fn merge(dim: usize, parts: &[&Reset]) -> Result<Reset> {
        let mut rows: Vec<(usize, SparseRow)> = Vec::new();
        let mut residuals: Vec<ResetResidual> = Vec::new();
        for p in parts {
            if p.dim != dim {
                return Err(HybridError::DimensionMismatch { expected: dim, got: p.dim });
            }
            for (i, row) in &p.rows {
                if rows.iter().any(|(j, _)| j == i) {
                    return Err(HybridError::InvalidModel(format!(
                        "synchronized resets both write coordinate {i}"
                    )));
                }
                rows.push((*i, row.clone()));
            }
            if let Some(r) = &p.residual {
                residuals.push(r.clone());
            }
        }
        let mut out = Reset::from_rows(dim, rows)?;
        out.residual = match residuals.len() {
            0 => None,
            1 => Some(residuals.pop().expect("len checked")),
            _ => {
                let label = residuals.iter().map(|r| r.label.clone()).collect::<Vec<_>>().join(" & ");
                let evs: Vec<_> = residuals.iter().map(|r| r.eval.clone()).collect();
                let ivs: Vec<_> = residuals.iter().map(|r| r.interval.clone()).collect();
                Some(ResetResidual {
                    label,
                    eval: Arc::new(move |x, y| {
                        for e in &evs {
                            e(x, y);
                        }
                    }),
                    interval: Arc::new(move |lo, hi| {
                        ivs.iter().flat_map(|f| f(lo, hi)).collect()
                    }),
                })
            }
        };
        Ok(out)
    }
}
