//! Exact projection and affine images of polytopes.
//!
//! Projection uses Fourier-Motzkin elimination with redundancy pruning after
//! every eliminated variable, which keeps intermediate systems small enough
//! for the low-dimensional sets this crate works with.

use crate::error::{Result, SetgeomError};
use crate::polytope::Polytope;
use nalgebra::{DMatrix, DVector};

const COEF_TOL: f64 = 1e-12;
const ROW_CAP: usize = 20_000;

/// Projects `p` onto the coordinates in `keep`, in the order given.
pub fn project(p: &Polytope, keep: &[usize]) -> Result<Polytope> {
    let n = p.dim();
    for &k in keep {
        if k >= n {
            return Err(SetgeomError::DimensionMismatch { expected: n, got: k });
        }
    }
    let mut rows: Vec<(Vec<f64>, f64)> = (0..p.nrows())
        .map(|i| ((0..n).map(|j| p.a()[(i, j)]).collect(), p.b()[i]))
        .collect();
    let mut live: Vec<usize> = (0..n).collect();

    let mut drop: Vec<usize> = (0..n).filter(|j| !keep.contains(j)).collect();
    while let Some(pos) = cheapest_elimination(&rows, &live, &drop) {
        let var = drop.remove(pos);
        let col = live.iter().position(|&v| v == var).expect("var is live");
        rows = eliminate(rows, col)?;
        live.remove(col);
        rows = prune(rows, live.len());
        if rows.len() > ROW_CAP {
            return Err(SetgeomError::Numerical(format!(
                "projection blew up to {} rows",
                rows.len()
            )));
        }
    }

    // Reorder the surviving columns to match `keep`.
    let m = keep.len();
    let mut a = DMatrix::zeros(rows.len(), m);
    let mut b = DVector::zeros(rows.len());
    for (i, (coefs, rhs)) in rows.iter().enumerate() {
        for (out_j, &k) in keep.iter().enumerate() {
            let col = live.iter().position(|&v| v == k).expect("kept var is live");
            a[(i, out_j)] = coefs[col];
        }
        b[i] = *rhs;
    }
    Ok(Polytope::new(a, b)?.canonicalize(1e-9))
}

/// Exact image `{M x + c : x in p}`. Uses the inverse map when `m` is square
/// and well conditioned, otherwise projects the graph `{(x, y) : y = Mx + c}`.
pub fn affine_image(p: &Polytope, m: &DMatrix<f64>, c: &DVector<f64>) -> Result<Polytope> {
    let n = p.dim();
    let k = m.nrows();
    if m.ncols() != n {
        return Err(SetgeomError::DimensionMismatch { expected: n, got: m.ncols() });
    }
    if c.len() != k {
        return Err(SetgeomError::DimensionMismatch { expected: k, got: c.len() });
    }
    if k == n {
        if let Some(inv) = m.clone().try_inverse() {
            if inv.amax() < 1e10 {
                // y = Mx + c  =>  x = M^-1 (y - c), so A M^-1 y <= b + A M^-1 c.
                let am = p.a() * &inv;
                let b = p.b() + &am * c;
                return Ok(Polytope::new(am, b)?);
            }
        }
    }
    // Stack z = (x, y) with rows A x <= b and y - Mx = c, then project onto y.
    let rows = p.nrows();
    let mut a = DMatrix::zeros(rows + 2 * k, n + k);
    let mut b = DVector::zeros(rows + 2 * k);
    for i in 0..rows {
        for j in 0..n {
            a[(i, j)] = p.a()[(i, j)];
        }
        b[i] = p.b()[i];
    }
    for i in 0..k {
        for j in 0..n {
            a[(rows + 2 * i, j)] = -m[(i, j)];
            a[(rows + 2 * i + 1, j)] = m[(i, j)];
        }
        a[(rows + 2 * i, n + i)] = 1.0;
        a[(rows + 2 * i + 1, n + i)] = -1.0;
        b[rows + 2 * i] = c[i];
        b[rows + 2 * i + 1] = -c[i];
    }
    let stacked = Polytope::new(a, b)?;
    let keep: Vec<usize> = (n..n + k).collect();
    project(&stacked, &keep)
}

/// Picks the variable with the smallest positive-row x negative-row product.
fn cheapest_elimination(
    rows: &[(Vec<f64>, f64)],
    live: &[usize],
    drop: &[usize],
) -> Option<usize> {
    if drop.is_empty() {
        return None;
    }
    let mut best = (usize::MAX, 0usize);
    for (pos, &var) in drop.iter().enumerate() {
        let col = live.iter().position(|&v| v == var)?;
        let mut np = 0usize;
        let mut nn = 0usize;
        for (coefs, _) in rows {
            if coefs[col] > COEF_TOL {
                np += 1;
            } else if coefs[col] < -COEF_TOL {
                nn += 1;
            }
        }
        let cost = np * nn + np + nn;
        if cost < best.0 {
            best = (cost, pos);
        }
    }
    Some(best.1)
}

/// One Fourier-Motzkin step: removes column `col` from every row.
fn eliminate(rows: Vec<(Vec<f64>, f64)>, col: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut zero = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (coefs, rhs) in rows {
        let c = coefs[col];
        if c > COEF_TOL {
            pos.push((coefs, rhs, c));
        } else if c < -COEF_TOL {
            neg.push((coefs, rhs, -c));
        } else {
            zero.push((coefs, rhs));
        }
    }
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(zero.len() + pos.len() * neg.len());
    for (coefs, rhs) in zero {
        out.push((without_col(&coefs, col), rhs));
    }
    for (pc, pb, ps) in &pos {
        for (nc, nb, ns) in &neg {
            let mut coefs = Vec::with_capacity(pc.len() - 1);
            for j in 0..pc.len() {
                if j != col {
                    coefs.push(pc[j] / ps + nc[j] / ns);
                }
            }
            out.push((coefs, pb / ps + nb / ns));
        }
    }
    if out.is_empty() {
        // Unconstrained after elimination: whole space in the remaining vars.
        return Ok(vec![]);
    }
    Ok(out)
}

fn without_col(coefs: &[f64], col: usize) -> Vec<f64> {
    coefs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != col)
        .map(|(_, v)| *v)
        .collect()
}

/// Drops redundant rows via the canonicalizer.
fn prune(rows: Vec<(Vec<f64>, f64)>, dim: usize) -> Vec<(Vec<f64>, f64)> {
    if rows.len() <= 8 {
        return rows;
    }
    let mut a = DMatrix::zeros(rows.len(), dim);
    let mut b = DVector::zeros(rows.len());
    for (i, (coefs, rhs)) in rows.iter().enumerate() {
        for j in 0..dim {
            a[(i, j)] = coefs[j];
        }
        b[i] = *rhs;
    }
    let p = Polytope::new(a, b).expect("consistent dims").canonicalize(1e-9);
    (0..p.nrows())
        .map(|i| ((0..dim).map(|j| p.a()[(i, j)]).collect(), p.b()[i]))
        .collect()
}
