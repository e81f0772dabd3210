use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterSet;

/// Backtracking schedule for the per-row projected gradient steps: try
/// `η₀, βη₀, β²η₀, …` and keep the first step that strictly decreases the
/// row's objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// β in (0, 1).
    pub shrink: f64,
    /// η₀ > 0.
    pub initial_step: f64,
    /// Shrinks allowed after the first trial step.
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { shrink: 0.5, initial_step: 1.0, max_backtracks: 40 }
    }
}

/// How [`fit`](super::fit) builds its starting point when none is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Truncated SVD of the ±1-coded response matrix.
    #[default]
    Spectral,
    /// All parameters zero (every probability 1/2).
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Latent dimension K.
    pub n_factors: usize,
    /// Constraint radius C; `None` means the default `5√K`.
    pub radius: Option<f64>,
    pub max_iters: usize,
    /// Stop once `|nll_t - nll_{t-1}| / (1 + |nll_{t-1}|)` drops below this.
    pub tol: f64,
    pub line_search: LineSearch,
    /// Worker threads for the row updates. 0 runs on the ambient rayon pool.
    pub threads: usize,
    pub seed: u64,
    pub init: InitStrategy,
}

impl FitConfig {
    pub fn new(n_factors: usize) -> Self {
        Self {
            n_factors,
            radius: None,
            max_iters: 1000,
            tol: 1e-4,
            line_search: LineSearch::default(),
            threads: 0,
            seed: 0,
            init: InitStrategy::Spectral,
        }
    }

    /// Default constraint radius `5√K`.
    pub fn default_radius(n_factors: usize) -> f64 {
        5.0 * (n_factors as f64).sqrt()
    }

    /// The radius actually used: the explicit value or `5√K`.
    pub fn effective_radius(&self) -> f64 {
        self.radius.unwrap_or_else(|| Self::default_radius(self.n_factors))
    }

    /// Copy with a different latent dimension. An explicit radius is kept;
    /// a default radius follows the new K.
    pub fn with_factors(&self, n_factors: usize) -> Self {
        Self { n_factors, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_factors == 0 {
            return Err(Error::InvalidConfig("number of factors must be at least 1".into()));
        }
        let c = self.effective_radius();
        if !(c.is_finite() && c > 1.0) {
            return Err(Error::InvalidConfig(format!("radius must exceed 1, got {c}")));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance must be non-negative, got {}", self.tol)));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!("line-search shrink must lie in (0, 1), got {}", ls.shrink)));
        }
        if !(ls.initial_step.is_finite() && ls.initial_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial step must be positive, got {}",
                ls.initial_step
            )));
        }
        Ok(())
    }

    /// Checks `K < min(N, J)`.
    pub fn validate_for(&self, n_persons: usize, n_items: usize) -> Result<()> {
        self.validate()?;
        if self.n_factors >= n_persons.min(n_items) {
            return Err(Error::InvalidConfig(format!(
                "K = {} must be smaller than min(N, J) = {}",
                self.n_factors,
                n_persons.min(n_items)
            )));
        }
        Ok(())
    }
}

/// Outcome of a complete fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: ParameterSet,
    /// Objective at the start point followed by one value per iteration.
    pub nll_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    pub diagnostics: FitDiagnostics,
}

impl FitReport {
    pub fn final_nll(&self) -> f64 {
        *self.nll_trace.last().expect("trace always holds the start value")
    }
}

/// Line-search bookkeeping accumulated over a fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Person rows that kept their value because no trial step decreased the objective.
    pub exhausted_person_steps: usize,
    pub exhausted_item_steps: usize,
    /// Rows skipped because their gradient was exactly zero.
    pub zero_gradient_rows: usize,
}
