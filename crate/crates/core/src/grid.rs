//! Uniform time grids and paths of modal fields living on them.

use crate::error::{Error, Result};
use crate::spectral::ModeField;
use serde::{Deserialize, Serialize};

/// A uniform partition of `[0, t_final]` into `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
        }
        Ok(Self { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        k as f64 * self.dt()
    }

    /// True when two grids agree in step count and spacing up to round-off.
    pub fn compatible(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.dt() - other.dt()).abs() <= 1e-12 * self.dt().max(other.dt())
    }
}

/// A discrete path: one modal field per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOnGrid {
    grid: TimeGrid,
    fields: Vec<ModeField>,
}

impl PathOnGrid {
    pub fn new(grid: TimeGrid, fields: Vec<ModeField>) -> Result<Self> {
        if fields.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_nodes(),
                got: fields.len(),
            });
        }
        let n = fields[0].dim();
        for (k, f) in fields.iter().enumerate() {
            if f.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: f.dim(),
                });
            }
            if !f.is_finite() {
                return Err(Error::NonFinite { step: k });
            }
        }
        Ok(Self { grid, fields })
    }

    pub(crate) fn from_raw(grid: TimeGrid, fields: Vec<ModeField>) -> Self {
        debug_assert_eq!(fields.len(), grid.n_nodes());
        Self { grid, fields }
    }

    pub fn zeros(grid: TimeGrid, n_modes: usize) -> Self {
        let fields = vec![ModeField::zeros(n_modes); grid.n_nodes()];
        Self { grid, fields }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.fields[0].dim()
    }

    pub fn node(&self, k: usize) -> &ModeField {
        &self.fields[k]
    }

    pub fn terminal(&self) -> &ModeField {
        self.fields
            .last()
            .expect("paths always have at least one node")
    }

    pub fn fields(&self) -> &[ModeField] {
        &self.fields
    }

    pub fn scaled(&self, s: f64) -> PathOnGrid {
        PathOnGrid::from_raw(self.grid, self.fields.iter().map(|f| f.scaled(s)).collect())
    }

    /// Largest node-wise coefficient-norm distance to another path.
    pub fn max_node_distance(&self, other: &PathOnGrid) -> f64 {
        debug_assert_eq!(self.fields.len(), other.fields.len());
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sub(b).norm_h())
            .fold(0.0, f64::max)
    }
}
