use crate::error::{ReachError, Result};
use setgeom::TemplateDirections;

/// Template family used for hulling, instantiated per dimension.
#[derive(Clone, Debug)]
pub enum TemplateChoice {
    /// Axis-aligned faces only.
    Box,
    /// Axis faces plus normalized pairwise diagonals.
    Octagonal,
    /// Fixed direction set; its dimension must match the system.
    Custom(TemplateDirections),
}

impl TemplateChoice {
    pub fn directions(&self, dim: usize) -> Result<TemplateDirections> {
        match self {
            TemplateChoice::Box => Ok(TemplateDirections::box_dirs(dim)),
            TemplateChoice::Octagonal => Ok(TemplateDirections::octagonal(dim)),
            TemplateChoice::Custom(v) => {
                if v.dim() != dim {
                    return Err(ReachError::BadConfig(format!(
                        "custom templates have dimension {}, system has {}",
                        v.dim(),
                        dim
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Parameters of the flowpipe computation.
#[derive(Clone, Debug)]
pub struct ReachConfig {
    /// Time step; each segment covers one step.
    pub delta: f64,
    /// Interpolation points for the per-step tube sets.
    pub lambda_grid: Vec<f64>,
    /// Hulling directions.
    pub templates: TemplateChoice,
    /// Bloat radius added to every segment face.
    pub eps: f64,
    /// Maximum flow time per mode.
    pub horizon: f64,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            lambda_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            templates: TemplateChoice::Box,
            eps: 0.0,
            horizon: 10.0,
        }
    }
}

impl ReachConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(ReachError::BadConfig("delta must be positive".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(ReachError::BadConfig("eps must be nonnegative".into()));
        }
        if !(self.horizon >= self.delta) {
            return Err(ReachError::BadConfig("horizon must be at least delta".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(ReachError::BadConfig("lambda grid must be nonempty".into()));
        }
        if self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(ReachError::BadConfig("lambda grid entries must lie in [0,1]".into()));
        }
        Ok(())
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_templates(mut self, t: TemplateChoice) -> Self {
        self.templates = t;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }
}
