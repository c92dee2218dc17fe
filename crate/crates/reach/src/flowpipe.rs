use hybrid_core::ModeKey;
use serde::{Deserialize, Serialize};
use setgeom::Polytope;
use std::io::Write;

/// One step of a flowpipe: all states reachable by flowing for a time in
/// `[t_lo, t_hi]` lie in `set`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Section {
    pub k: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub set: Polytope,
}

/// Over-approximation of the states reachable by continuous flow in one mode,
/// as consecutive time-indexed template polytopes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Flowpipe {
    pub mode: ModeKey,
    pub eps: f64,
    pub segments: Vec<Section>,
    /// Set when supports stopped being finite before the horizon; the
    /// segments that were produced remain sound.
    #[serde(default)]
    pub truncated: bool,
}

impl Flowpipe {
    /// Segments whose time interval contains `t`.
    pub fn covering(&self, t: f64) -> impl Iterator<Item = &Section> {
        self.segments.iter().filter(move |s| s.t_lo <= t && t <= s.t_hi)
    }

    /// Does some segment covering `t` contain `x`?
    pub fn contains(&self, t: f64, x: &nalgebra::DVector<f64>, tol: f64) -> bool {
        self.covering(t).any(|s| s.set.contains(x, tol))
    }

    /// Total time span, zero when empty.
    pub fn span(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_hi)
    }

    /// One CSV row per polytope face: mode, k, t_lo, t_hi, then the face
    /// coefficients followed by the offset.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for s in &self.segments {
            let a = s.set.a();
            let b = s.set.b();
            for r in 0..a.nrows() {
                write!(w, "{},{},{},{}", self.mode, s.k, s.t_lo, s.t_hi)?;
                for c in 0..a.ncols() {
                    write!(w, ",{}", a[(r, c)])?;
                }
                writeln!(w, ",{}", b[r])?;
            }
        }
        Ok(())
    }
}

/// Vertices of the projection of `p` onto coordinates `(dims.0, dims.1)`,
/// in counterclockwise order. Empty when the projection is empty or
/// unbounded; degenerate (point or segment) projections yield 1 or 2 points.
pub fn vertices_2d(p: &Polytope, dims: (usize, usize)) -> Vec<(f64, f64)> {
    let proj = match setgeom::project(p, &[dims.0, dims.1]) {
        Ok(q) => q,
        Err(_) => return Vec::new(),
    };
    let proj = proj.canonicalize(1e-9);
    if proj.is_empty() {
        return Vec::new();
    }
    let a = proj.a();
    let b = proj.b();
    let n = a.nrows();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let det = a[(i, 0)] * a[(j, 1)] - a[(i, 1)] * a[(j, 0)];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (b[i] * a[(j, 1)] - a[(i, 1)] * b[j]) / det;
            let y = (a[(i, 0)] * b[j] - b[i] * a[(j, 0)]) / det;
            let mut inside = true;
            for r in 0..n {
                if a[(r, 0)] * x + a[(r, 1)] * y > b[r] + 1e-7 {
                    inside = false;
                    break;
                }
            }
            if inside && !pts.iter().any(|&(px, py)| (px - x).abs() < 1e-9 && (py - y).abs() < 1e-9) {
                pts.push((x, y));
            }
        }
    }
    if pts.len() > 2 {
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        pts.sort_by(|p, q| {
            let pa = (p.1 - cy).atan2(p.0 - cx);
            let qa = (q.1 - cy).atan2(q.0 - cx);
            pa.partial_cmp(&qa).unwrap()
        });
    }
    pts
}
