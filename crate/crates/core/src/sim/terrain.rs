//! Piecewise-flat ground profile.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Terrain {
    /// (x_start, height) pairs sorted by x_start; the first segment also
    /// covers everything to its left.
    pub segments: Vec<(f64, f64)>,
    pub friction: f64,
}

impl Default for Terrain {
    fn default() -> Self {
        Self::flat(1.0)
    }
}

impl Terrain {
    pub fn flat(friction: f64) -> Self {
        Self {
            segments: vec![(f64::NEG_INFINITY, 0.0)],
            friction,
        }
    }

    /// Descending steps of `step_height`, starting at x = 0, `step_length` apart.
    pub fn descending_steps(friction: f64, steps: usize, step_length: f64, step_height: f64) -> Self {
        let mut segments = vec![(f64::NEG_INFINITY, 0.0)];
        for k in 0..steps {
            segments.push((k as f64 * step_length, -((k + 1) as f64) * step_height));
        }
        Self { segments, friction }
    }

    pub fn height(&self, x: f64) -> f64 {
        let mut h = self.segments[0].1;
        for &(start, height) in &self.segments {
            if x >= start {
                h = height;
            } else {
                break;
            }
        }
        h
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.segments.is_empty() {
            return Err(ConfigError::Invalid {
                field: "terrain.segments".into(),
                message: "at least one segment required".into(),
            });
        }
        if !self.segments.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(ConfigError::Invalid {
                field: "terrain.segments".into(),
                message: "segments must be sorted by x_start".into(),
            });
        }
        if self.friction < 0.0 {
            return Err(ConfigError::Invalid {
                field: "terrain.friction".into(),
                message: "friction must be non-negative".into(),
            });
        }
        Ok(())
    }
}
