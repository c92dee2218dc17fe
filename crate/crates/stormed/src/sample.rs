use crate::error::{Result, StormedError};
use hybrid_core::{Automaton, ModeKey};
use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use setgeom::{sample_polytope, Polytope};

/// Where the sampled checks draw states from: one bounded region per mode,
/// plus the time horizon for flow sampling.
#[derive(Clone, Debug)]
pub struct SampleSpace {
    pub regions: Vec<(ModeKey, Polytope)>,
    pub t_max: f64,
}

impl SampleSpace {
    pub fn new(regions: Vec<(ModeKey, Polytope)>, t_max: f64) -> Self {
        Self { regions, t_max }
    }

    /// One region per enumerable mode: the mode invariant intersected with
    /// `bounds`, skipping modes whose region comes out empty.
    pub fn from_automaton(aut: &dyn Automaton, bounds: &Polytope, t_max: f64) -> Result<Self> {
        let modes = aut
            .modes()
            .ok_or_else(|| StormedError::BadCertificate("automaton modes not enumerable".into()))?;
        let mut regions = Vec::new();
        for m in modes {
            let region = match aut.invariant(&m) {
                Some(inv) => inv.intersect(bounds)?,
                None => bounds.clone(),
            };
            if !region.is_empty() {
                regions.push((m, region));
            }
        }
        Ok(Self { regions, t_max })
    }

    pub fn region_of(&self, m: &ModeKey) -> Option<&Polytope> {
        self.regions.iter().find(|(k, _)| k == m).map(|(_, p)| p)
    }

    /// Draw `per_region` states from every region.
    pub fn draw(&self, rng: &mut ChaCha8Rng, per_region: usize) -> Vec<(ModeKey, DVector<f64>)> {
        let mut out = Vec::new();
        for (m, p) in &self.regions {
            for x in sample_polytope(rng, p, per_region) {
                out.push((m.clone(), x));
            }
        }
        out
    }
}

/// Knobs shared by the sampled checks.
#[derive(Clone, Debug)]
pub struct CheckConfig {
    /// Total sample budget per check (split across regions/edges).
    pub samples: usize,
    pub seed: u64,
    /// Numerical slack on every `>=` comparison.
    pub slack: f64,
    /// Below this norm a jump displacement counts as "no move".
    pub zero_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { samples: 1000, seed: 0x5eed, slack: 1e-9, zero_tol: 1e-12 }
    }
}

impl CheckConfig {
    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
