//! Matrix exponential and the second-order remainder kernel.

use crate::error::{Result, SetgeomError};
use nalgebra::DMatrix;

/// `e^{tA}` by Pade scaling-and-squaring (delegates to nalgebra's
/// backward-stable implementation; relative accuracy well under 1e-12 for the
/// conditioning encountered here).
pub fn mat_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(SetgeomError::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(SetgeomError::Numerical("non-finite matrix exponential input".into()));
    }
    Ok((a * t).exp())
}

/// `Phi2(A, d) = sum_{i>=0} d^{i+2} / (i+2)! * A^i`, the kernel of the
/// second-order Taylor remainder of `e^{dA}`. For `A = 0` this is `d^2/2 I`.
/// Evaluated by direct series summation; each term is the previous one times
/// `dA/(i+3)`, so convergence is factorial once terms start shrinking.
pub fn phi2(a: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(SetgeomError::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if delta < 0.0 || !delta.is_finite() {
        return Err(SetgeomError::InvalidParameter(format!(
            "step must be finite and nonnegative, got {delta}"
        )));
    }
    let n = a.nrows();
    if delta == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let da = a * delta;
    // term_0 = d^2/2 I ; term_{i+1} = term_i * dA / (i+3)
    let mut term = DMatrix::identity(n, n) * (delta * delta / 2.0);
    let mut acc = term.clone();
    for i in 0..400 {
        term = (&term * &da) / (i as f64 + 3.0);
        acc += &term;
        let t_norm = term.amax();
        let a_norm = acc.amax().max(1e-300);
        if t_norm <= 1e-16 * a_norm {
            return Ok(acc);
        }
    }
    Err(SetgeomError::Numerical(
        "phi2 series did not converge (norm of dA too large)".into(),
    ))
}

/// Entrywise absolute value, used when a series bound needs `|A|`.
pub fn abs_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(f64::abs)
}
