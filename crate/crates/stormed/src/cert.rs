use crate::error::{Result, StormedError};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use setgeom::{Polytope, Support};
use std::fmt;
use std::path::Path;

/// Monotonicity certificate for a hybrid system: a direction `phi` along
/// which every flow and every jump makes uniform progress, together with the
/// band `(b_minus, b_plus)` that all guard activity stays inside. The five
/// checks in [`crate::checks`] validate a candidate against a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StormedCertificate {
    pub phi: Vec<f64>,
    pub eps: f64,
    pub zeta: f64,
    pub d_min: f64,
    pub b_minus: f64,
    pub b_plus: f64,
    /// Per-coordinate bounds on the flow slopes, used by synthesis and by
    /// margin reporting.
    pub lipschitz: Vec<f64>,
    /// Upper bound on the jump displacement norm of this system.
    pub diameter: f64,
}

impl StormedCertificate {
    pub fn new(phi: Vec<f64>, eps: f64, zeta: f64, d_min: f64, b_minus: f64, b_plus: f64) -> Self {
        let n = phi.len();
        Self {
            phi,
            eps,
            zeta,
            d_min,
            b_minus,
            b_plus,
            lipschitz: vec![0.0; n],
            diameter: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn phi_vec(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(StormedError::BadCertificate("eps must be positive".into()));
        }
        if !(self.zeta > 0.0) {
            return Err(StormedError::BadCertificate("zeta must be positive".into()));
        }
        if !(self.d_min > 0.0) {
            return Err(StormedError::BadCertificate("d_min must be positive".into()));
        }
        if !(self.b_minus < self.b_plus) {
            return Err(StormedError::BadCertificate(format!(
                "band ({}, {}) is empty",
                self.b_minus, self.b_plus
            )));
        }
        if self.phi.iter().any(|v| !v.is_finite()) {
            return Err(StormedError::BadCertificate("phi has non-finite entries".into()));
        }
        if !self.diameter.is_finite() {
            return Err(StormedError::BadCertificate("diameter must be finite".into()));
        }
        Ok(())
    }

    pub fn with_lipschitz(mut self, lip: Vec<f64>) -> Self {
        self.lipschitz = lip;
        self
    }

    pub fn with_diameter(mut self, d: f64) -> Self {
        self.diameter = d;
        self
    }

    /// Derive the band from a bounded state box: `b_plus` is the support of
    /// `phi` over the box and `b_minus` the negated support of `-phi`, so
    /// every state in the box has `phi . x` inside `[b_minus, b_plus]`.
    pub fn delimit_from_box(&mut self, state_box: &Polytope) -> Result<()> {
        let (lo, hi) = delimit(&self.phi_vec(), state_box)?;
        self.b_minus = lo;
        self.b_plus = hi;
        Ok(())
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| StormedError::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cert: Self =
            serde_json::from_str(&text).map_err(|e| StormedError::Parse(e.to_string()))?;
        cert.validate()?;
        Ok(cert)
    }
}

/// Band of `phi . x` over a bounded set, widened by a hair so the strict
/// interval containment of the delimiting condition holds on the boundary.
pub fn delimit(phi: &DVector<f64>, state_box: &Polytope) -> Result<(f64, f64)> {
    let hi = match state_box.support(phi) {
        Support::Value { rho, .. } => rho,
        Support::Unbounded => {
            return Err(StormedError::UnboundedGuard("state box".into()));
        }
        Support::Empty => 0.0,
    };
    let lo = match state_box.support(&(-phi)) {
        Support::Value { rho, .. } => -rho,
        Support::Unbounded => {
            return Err(StormedError::UnboundedGuard("state box".into()));
        }
        Support::Empty => 0.0,
    };
    let pad = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    Ok((lo - pad, hi + pad))
}

/// A concrete state (or state pair) demonstrating a check failure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub mode: String,
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub note: String,
}

/// Result of one certificate property check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst slack observed; positive slack means the property held with
    /// room to spare, negative identifies the violation size.
    pub margin: f64,
    pub detail: String,
    pub witness: Option<Witness>,
}

impl CheckOutcome {
    pub fn pass(name: &str, margin: f64, detail: String) -> Self {
        Self { name: name.into(), passed: true, margin, detail, witness: None }
    }

    pub fn fail(name: &str, margin: f64, detail: String, witness: Witness) -> Self {
        Self { name: name.into(), passed: false, margin, detail, witness: Some(witness) }
    }
}

/// All check outcomes for one certificate/model pair.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CertReport {
    pub entries: Vec<CheckOutcome>,
}

impl CertReport {
    pub fn passed(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.passed)
    }

    pub fn push(&mut self, e: CheckOutcome) {
        self.entries.push(e);
    }

    pub fn entry(&self, name: &str) -> Option<&CheckOutcome> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl fmt::Display for CertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{:<22} {}  margin {:+.3e}  {}",
                e.name,
                if e.passed { "pass" } else { "FAIL" },
                e.margin,
                e.detail
            )?;
            if let Some(w) = &e.witness {
                writeln!(f, "{:22} witness: mode {} {}", "", w.mode, w.note)?;
            }
        }
        Ok(())
    }
}
