//! Continuous dynamics and their exact or numeric time-advance maps.

use crate::error::{HybridError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setgeom::mat_exp;

/// Default RK4 substep ceiling for sparse flows, in time units.
pub const DEFAULT_MAX_STEP: f64 = 5e-4;

/// One coordinate's derivative as a sparse affine expression
/// `sum_k coef_k * x[idx_k] + constant`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
    pub constant: f64,
}

impl SparseRow {
    pub fn constant(c: f64) -> Self {
        Self { entries: Vec::new(), constant: c }
    }

    pub fn linear(entries: Vec<(usize, f64)>) -> Self {
        Self { entries, constant: 0.0 }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.constant;
        for &(j, c) in &self.entries {
            v += c * x[j];
        }
        v
    }
}

/// Clamped exponential decay of one coordinate: the value follows
/// `v' = -(x[ef] / tc) * v` until it reaches `floor` and stays there.
/// The rate coordinate `ef` must be constant along the flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub coord: usize,
    pub ef: usize,
    pub tc: f64,
    pub floor: f64,
}

impl DecayRow {
    fn advance(&self, v0: f64, k: f64, t: f64) -> f64 {
        (v0 * (-k / self.tc * t).exp()).max(self.floor)
    }
}

/// Sparse affine vector field with optional closed-form decay coordinates.
/// Advanced by fixed-substep RK4; decay coordinates are advanced exactly and
/// must not be read by any affine row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFlow {
    pub dim: usize,
    pub rows: Vec<SparseRow>,
    pub decays: Vec<DecayRow>,
    pub max_step: f64,
}

impl SparseFlow {
    pub fn new(dim: usize, rows: Vec<SparseRow>, decays: Vec<DecayRow>, max_step: f64) -> Result<Self> {
        if rows.len() != dim {
            return Err(HybridError::DimensionMismatch { expected: dim, got: rows.len() });
        }
        for d in &decays {
            if d.coord >= dim || d.ef >= dim {
                return Err(HybridError::DimensionMismatch { expected: dim, got: d.coord.max(d.ef) });
            }
            if d.tc <= 0.0 {
                return Err(HybridError::InvalidModel("decay time constant must be positive".into()));
            }
            for (i, row) in rows.iter().enumerate() {
                if i != d.coord && row.entries.iter().any(|&(j, c)| j == d.coord && c != 0.0) {
                    return Err(HybridError::InvalidModel(format!(
                        "affine row {i} reads decay coordinate {}",
                        d.coord
                    )));
                }
            }
            if !rows[d.ef].entries.is_empty() || rows[d.ef].constant != 0.0 {
                return Err(HybridError::InvalidModel(format!(
                    "decay rate coordinate {} must have zero derivative",
                    d.ef
                )));
            }
        }
        if max_step <= 0.0 {
            return Err(HybridError::InvalidModel("max_step must be positive".into()));
        }
        Ok(Self { dim, rows, decays, max_step })
    }

    fn deriv_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.eval(x);
        }
        for d in &self.decays {
            let v = x[d.coord];
            out[d.coord] = if v > d.floor { -x[d.ef] / d.tc * v } else { 0.0 };
        }
    }
}

/// Scratch buffers for repeated RK4 stepping.
#[derive(Default)]
pub struct FlowScratch {
    k1: DVector<f64>,
    k2: DVector<f64>,
    k3: DVector<f64>,
    k4: DVector<f64>,
    tmp: DVector<f64>,
}

impl FlowScratch {
    fn ensure(&mut self, dim: usize) {
        if self.k1.len() != dim {
            self.k1 = DVector::zeros(dim);
            self.k2 = DVector::zeros(dim);
            self.k3 = DVector::zeros(dim);
            self.k4 = DVector::zeros(dim);
            self.tmp = DVector::zeros(dim);
        }
    }
}

/// A mode's continuous dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FlowSpec {
    /// `x' = a x + b`, advanced in closed form through the matrix exponential
    /// of the augmented system.
    LinearOde { a: DMatrix<f64>, b: DVector<f64> },
    /// Constant per-coordinate rates.
    Clock { rates: DVector<f64> },
    /// Frozen state.
    Constant { dim: usize },
    /// Constant rates plus one clamped exponential-decay coordinate.
    ThresholdDecay { rates: DVector<f64>, decay: DecayRow },
    /// Sparse affine field for large products, advanced by RK4.
    Sparse(SparseFlow),
}

impl FlowSpec {
    pub fn dim(&self) -> usize {
        match self {
            FlowSpec::LinearOde { a, .. } => a.nrows(),
            FlowSpec::Clock { rates } => rates.len(),
            FlowSpec::Constant { dim } => *dim,
            FlowSpec::ThresholdDecay { rates, .. } => rates.len(),
            FlowSpec::Sparse(s) => s.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FlowSpec::LinearOde { a, b } => {
                if a.nrows() != a.ncols() {
                    return Err(HybridError::InvalidModel("flow matrix must be square".into()));
                }
                if b.len() != a.nrows() {
                    return Err(HybridError::DimensionMismatch { expected: a.nrows(), got: b.len() });
                }
                Ok(())
            }
            FlowSpec::Clock { .. } | FlowSpec::Constant { .. } => Ok(()),
            FlowSpec::ThresholdDecay { rates, decay } => {
                let n = rates.len();
                if decay.coord >= n || decay.ef >= n {
                    return Err(HybridError::DimensionMismatch {
                        expected: n,
                        got: decay.coord.max(decay.ef),
                    });
                }
                if decay.tc <= 0.0 {
                    return Err(HybridError::InvalidModel("decay time constant must be positive".into()));
                }
                if rates[decay.ef] != 0.0 {
                    return Err(HybridError::InvalidModel(
                        "decay rate coordinate must have zero derivative".into(),
                    ));
                }
                Ok(())
            }
            FlowSpec::Sparse(s) => {
                SparseFlow::new(s.dim, s.rows.clone(), s.decays.clone(), s.max_step).map(|_| ())
            }
        }
    }

    /// The vector field at `x` (decay coordinates use their unclamped slope
    /// when above the floor, zero at or below it).
    pub fn derivative(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            FlowSpec::LinearOde { a, b } => a * x + b,
            FlowSpec::Clock { rates } => rates.clone(),
            FlowSpec::Constant { dim } => DVector::zeros(*dim),
            FlowSpec::ThresholdDecay { rates, decay } => {
                let mut d = rates.clone();
                let v = x[decay.coord];
                d[decay.coord] = if v > decay.floor { -x[decay.ef] / decay.tc * v } else { 0.0 };
                d
            }
            FlowSpec::Sparse(s) => {
                let mut out = DVector::zeros(s.dim);
                s.deriv_into(x, &mut out);
                out
            }
        })
    }

    /// Dense affine form `(a, b)` with `x' = a x + b`, when the field is
    /// affine in the state. Decay coordinates make this unavailable.
    pub fn as_affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match self {
            FlowSpec::LinearOde { a, b } => Some((a.clone(), b.clone())),
            FlowSpec::Clock { rates } => {
                Some((DMatrix::zeros(rates.len(), rates.len()), rates.clone()))
            }
            FlowSpec::Constant { dim } => Some((DMatrix::zeros(*dim, *dim), DVector::zeros(*dim))),
            FlowSpec::ThresholdDecay { .. } => None,
            FlowSpec::Sparse(s) => {
                if !s.decays.is_empty() {
                    return None;
                }
                let mut a = DMatrix::zeros(s.dim, s.dim);
                let mut b = DVector::zeros(s.dim);
                for (i, row) in s.rows.iter().enumerate() {
                    for &(j, c) in &row.entries {
                        a[(i, j)] += c;
                    }
                    b[i] = row.constant;
                }
                Some((a, b))
            }
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(HybridError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }
}

/// The time-advance map `x(t)` from `x(0) = x`. Negative `t` is rejected.
pub fn flow(spec: &FlowSpec, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let mut scratch = FlowScratch::default();
    flow_with_scratch(spec, x, t, &mut scratch)
}

/// As [`flow`], reusing caller-owned scratch buffers across calls.
pub fn flow_with_scratch(
    spec: &FlowSpec,
    x: &DVector<f64>,
    t: f64,
    scratch: &mut FlowScratch,
) -> Result<DVector<f64>> {
    spec.check_dim(x)?;
    if t < 0.0 {
        return Err(HybridError::InvalidModel(format!("negative flow time {t}")));
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    Ok(match spec {
        FlowSpec::LinearOde { a, b } => {
            let n = a.nrows();
            let mut aug = DMatrix::zeros(n + 1, n + 1);
            aug.view_mut((0, 0), (n, n)).copy_from(a);
            aug.view_mut((0, n), (n, 1)).copy_from(b);
            let e = mat_exp(&aug, t)?;
            let mut y = DVector::zeros(n);
            for i in 0..n {
                let mut acc = e[(i, n)];
                for j in 0..n {
                    acc += e[(i, j)] * x[j];
                }
                y[i] = acc;
            }
            y
        }
        FlowSpec::Clock { rates } => x + rates * t,
        FlowSpec::Constant { .. } => x.clone(),
        FlowSpec::ThresholdDecay { rates, decay } => {
            let mut y = x + rates * t;
            y[decay.coord] = decay.advance(x[decay.coord], x[decay.ef], t);
            y
        }
        FlowSpec::Sparse(s) => {
            scratch.ensure(s.dim);
            let n_sub = (t / s.max_step).ceil().max(1.0) as usize;
            let h = t / n_sub as f64;
            let mut y = x.clone();
            for _ in 0..n_sub {
                rk4_step(s, &mut y, h, scratch);
            }
            for d in &s.decays {
                y[d.coord] = d.advance(x[d.coord], x[d.ef], t);
            }
            y
        }
    })
}

fn rk4_step(s: &SparseFlow, y: &mut DVector<f64>, h: f64, sc: &mut FlowScratch) {
    s.deriv_into(y, &mut sc.k1);
    sc.tmp.copy_from(y);
    sc.tmp.axpy(h / 2.0, &sc.k1, 1.0);
    s.deriv_into(&sc.tmp, &mut sc.k2);
    sc.tmp.copy_from(y);
    sc.tmp.axpy(h / 2.0, &sc.k2, 1.0);
    s.deriv_into(&sc.tmp, &mut sc.k3);
    sc.tmp.copy_from(y);
    sc.tmp.axpy(h, &sc.k3, 1.0);
    s.deriv_into(&sc.tmp, &mut sc.k4);
    for i in 0..y.len() {
        y[i] += h / 6.0 * (sc.k1[i] + 2.0 * sc.k2[i] + 2.0 * sc.k3[i] + sc.k4[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn clock_advances_linearly() {
        let f = FlowSpec::Clock { rates: dvector![1.0, -2.0] };
        let y = flow(&f, &dvector![0.0, 5.0], 1.5).unwrap();
        assert_relative_eq!(y[0], 1.5);
        assert_relative_eq!(y[1], 2.0);
    }

    #[test]
    fn constant_freezes_state() {
        let f = FlowSpec::Constant { dim: 2 };
        let y = flow(&f, &dvector![3.0, -1.0], 10.0).unwrap();
        assert_eq!(y, dvector![3.0, -1.0]);
    }

    #[test]
    fn linear_ode_matches_scalar_exponential() {
        let f = FlowSpec::LinearOde { a: dmatrix![-0.5], b: dvector![0.0] };
        let y = flow(&f, &dvector![2.0], 3.0).unwrap();
        assert_relative_eq!(y[0], 2.0 * (-1.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn linear_ode_affine_part_integrates() {
        // x' = -x + 1 from 0 tends to 1: x(t) = 1 - e^-t.
        let f = FlowSpec::LinearOde { a: dmatrix![-1.0], b: dvector![1.0] };
        let y = flow(&f, &dvector![0.0], 2.0).unwrap();
        assert_relative_eq!(y[0], 1.0 - (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn linear_ode_rotation() {
        let f = FlowSpec::LinearOde {
            a: dmatrix![0.0, -1.0; 1.0, 0.0],
            b: dvector![0.0, 0.0],
        };
        let y = flow(&f, &dvector![1.0, 0.0], std::f64::consts::FRAC_PI_2).unwrap();
        assert_relative_eq!(y[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn threshold_decay_closed_form_and_clamp() {
        let f = FlowSpec::ThresholdDecay {
            rates: dvector![1.0, 0.0, 0.0],
            decay: DecayRow { coord: 1, ef: 2, tc: 2.0, floor: 0.1 },
        };
        let x = dvector![0.0, 1.0, 0.5];
        let y = flow(&f, &x, 1.0).unwrap();
        assert_relative_eq!(y[0], 1.0);
        assert_relative_eq!(y[1], (-0.25f64).exp(), epsilon = 1e-12);
        let far = flow(&f, &x, 100.0).unwrap();
        assert_relative_eq!(far[1], 0.1);
    }

    #[test]
    fn threshold_decay_semigroup() {
        let f = FlowSpec::ThresholdDecay {
            rates: dvector![1.0, 0.0, 0.0],
            decay: DecayRow { coord: 1, ef: 2, tc: 2.0, floor: 0.1 },
        };
        let x = dvector![0.0, 1.0, 0.7];
        let direct = flow(&f, &x, 5.0).unwrap();
        let mid = flow(&f, &x, 2.0).unwrap();
        let staged = flow(&f, &mid, 3.0).unwrap();
        assert_relative_eq!(direct[1], staged[1], epsilon = 1e-12);
    }

    #[test]
    fn sparse_matches_dense_exponential() {
        let s = SparseFlow::new(
            3,
            vec![
                SparseRow::linear(vec![(0, -2.0), (1, 0.5)]),
                SparseRow { entries: vec![(1, -1.0)], constant: 0.3 },
                SparseRow::constant(1.0),
            ],
            vec![],
            1e-3,
        )
        .unwrap();
        let f = FlowSpec::Sparse(s);
        let (a, b) = f.as_affine().unwrap();
        let dense = FlowSpec::LinearOde { a, b };
        let x = dvector![1.0, -1.0, 0.0];
        let y_rk = flow(&f, &x, 0.8).unwrap();
        let y_exact = flow(&dense, &x, 0.8).unwrap();
        for i in 0..3 {
            assert_relative_eq!(y_rk[i], y_exact[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn sparse_rejects_rows_reading_decay_coord() {
        let res = SparseFlow::new(
            2,
            vec![SparseRow::linear(vec![(1, 1.0)]), SparseRow::default()],
            vec![DecayRow { coord: 1, ef: 0, tc: 1.0, floor: 0.0 }],
            1e-3,
        );
        assert!(res.is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let f = FlowSpec::LinearOde {
            a: dmatrix![-1.0, 2.0; 0.0, -3.0],
            b: dvector![0.5, 0.0],
        };
        let x = dvector![1.0, 2.0];
        let d = f.derivative(&x).unwrap();
        let h = 1e-7;
        let y = flow(&f, &x, h).unwrap();
        for i in 0..2 {
            assert_relative_eq!((y[i] - x[i]) / h, d[i], epsilon = 1e-5);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let f = FlowSpec::LinearOde { a: dmatrix![0.0, -1.0; 1.0, 0.0], b: dvector![0.0, 0.0] };
        let x = dvector![0.3, 0.7];
        assert_eq!(flow(&f, &x, 0.0).unwrap(), x);
    }

    #[test]
    fn negative_time_rejected() {
        let f = FlowSpec::Constant { dim: 1 };
        assert!(flow(&f, &dvector![0.0], -1.0).is_err());
    }
}
