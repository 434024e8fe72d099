//! Experiment configuration: the JSON schema, cross-field validation, and
//! construction of the core objects a run needs.
//!
//! Every numeric default a preset relies on lives in the preset JSON files,
//! not here; this module only checks and assembles.

use anyhow::{anyhow, bail, Context, Result};
use ldp_core::action::{EventSpec, Observable};
use ldp_core::drift::{DriftSpec, MollifyParams, ScanParams};
use ldp_core::minimize::MinimizeOpts;
use ldp_core::rare_event::{Method, NSchedule};
use ldp_core::rng::{derive_seed, stream};
use ldp_core::{ModeField, SpectralOperator, TimeGrid};
use serde::{Deserialize, Serialize};

/// Top-level experiment description, one task per file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form description; echoed into the manifest, never interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub operator: OperatorConfig,
    pub drift: DriftConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub time: TimeConfig,
    /// Base seed; every sample stream derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; overridden by `--out`, defaulted from
    /// `LDP_OUTPUT_ROOT` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub task: TaskConfig,
}

/// Diagonal operator: either a fractional torus spectrum or explicit
/// eigenvalues (exactly one of the two).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    /// Trace exponent margin, in (0, 1).
    pub delta: f64,
    /// Explicit positive nondecreasing eigenvalues; replaces the torus block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

/// Drift nonlinearity, composable like the library's drift values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    /// `x -> a + b tanh(x)` pointwise: bounded, globally Lipschitz.
    AffineBounded {
        a: f64,
        b: f64,
    },
    /// `x -> scale |x|^gamma` pointwise; `eta > 0` substitutes the smooth
    /// surrogate `scale (x^2 + eta^2)^{gamma/2}`.
    Power {
        gamma: f64,
        scale: f64,
        #[serde(default)]
        eta: f64,
    },
    /// Adds `omega_shift * x`, countering the operator's spectral shift.
    Shifted {
        omega_shift: f64,
        inner: Box<DriftConfig>,
    },
    /// Ball cutoff at the given radius plus transition-kernel mollification.
    Regularized {
        radius: f64,
        inner: Box<DriftConfig>,
        /// Mollification scale; defaults to `1/(2 radius)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_r: Option<f64>,
        #[serde(default = "default_n_mc")]
        n_mc: usize,
        #[serde(default)]
        quasi_random: bool,
    },
}

fn default_n_mc() -> usize {
    64
}

/// Initial datum.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Zero,
    SingleMode {
        mode: usize,
        amplitude: f64,
    },
    /// Function values on the uniform torus grid (length must equal the
    /// operator's grid size).
    GridSamples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub n_steps: usize,
}

/// Rare event: an observable crossing a threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub observable: Observable,
    pub threshold: f64,
}

/// The one task this run performs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// Integrate sample paths and write them out.
    Simulate {
        eps: f64,
        #[serde(default = "default_n_paths")]
        n_paths: usize,
    },
    /// Minimize the action over paths realizing the event.
    Minimize {
        event: EventConfig,
        #[serde(default)]
        optimizer: MinimizeOpts,
    },
    /// Minimize, then estimate the event probability across noise sizes.
    Sweep {
        eps_list: Vec<f64>,
        schedule: NSchedule,
        #[serde(default = "default_method")]
        method: Method,
        event: EventConfig,
        #[serde(default)]
        optimizer: MinimizeOpts,
        #[serde(default = "default_tol_rel")]
        tol_rel: f64,
    },
    /// Measure the regularization error of the drift across ball radii.
    ApproxScan {
        radii: Vec<f64>,
        #[serde(default)]
        scan: ScanParams,
    },
    /// Operator and noise summaries: spectrum, growth ratio, sup-norm tail.
    Diagnostics {
        eps: f64,
        #[serde(default = "default_growth_samples")]
        n_samples: usize,
        #[serde(default = "default_tail_threshold")]
        tail_threshold: f64,
        #[serde(default)]
        tail_alpha: f64,
        #[serde(default = "default_tail_samples")]
        tail_n_samples: usize,
    },
}

fn default_n_paths() -> usize {
    1
}
fn default_method() -> Method {
    Method::Plain
}
fn default_tol_rel() -> f64 {
    0.25
}
fn default_growth_samples() -> usize {
    200
}
fn default_tail_threshold() -> f64 {
    1.0
}
fn default_tail_samples() -> usize {
    2000
}

/// Fully constructed run inputs.
pub struct Experiment {
    pub op: SpectralOperator,
    pub drift: DriftSpec,
    pub x0: ModeField,
    pub grid: TimeGrid,
    pub seed: u64,
    pub task: BuiltTask,
    /// Advisory messages for stderr (the run still proceeds).
    pub warnings: Vec<String>,
}

pub enum BuiltTask {
    Simulate {
        eps: f64,
        n_paths: usize,
    },
    Minimize {
        event: EventSpec,
        optimizer: MinimizeOpts,
    },
    Sweep {
        eps_list: Vec<f64>,
        schedule: NSchedule,
        method: Method,
        event: EventSpec,
        optimizer: MinimizeOpts,
        tol_rel: f64,
    },
    ApproxScan {
        radii: Vec<f64>,
        scan: ScanParams,
    },
    Diagnostics {
        eps: f64,
        n_samples: usize,
        tail_threshold: f64,
        tail_alpha: f64,
        tail_n_samples: usize,
    },
}

impl BuiltTask {
    /// Directory-friendly task name, also used as the default output subdir.
    pub fn name(&self) -> &'static str {
        match self {
            BuiltTask::Simulate { .. } => "simulate",
            BuiltTask::Minimize { .. } => "minimize",
            BuiltTask::Sweep { .. } => "sweep",
            BuiltTask::ApproxScan { .. } => "approx_scan",
            BuiltTask::Diagnostics { .. } => "diagnostics",
        }
    }
}

impl OperatorConfig {
    fn build(&self) -> Result<SpectralOperator> {
        match (&self.eigenvalues, self.sigma, self.omega, self.n_modes) {
            (Some(values), None, None, None) => {
                SpectralOperator::from_eigenvalues(values.clone(), self.delta)
                    .map_err(|e| anyhow!("operator.eigenvalues: {e}"))
            }
            (Some(_), _, _, _) => bail!(
                "operator: give either explicit eigenvalues or the torus block \
                 (sigma, omega, n_modes), not both"
            ),
            (None, Some(sigma), Some(omega), Some(n_modes)) => {
                SpectralOperator::torus_fractional(sigma, omega, n_modes, self.delta)
                    .map_err(|e| anyhow!("operator: {e}"))
            }
            (None, ..) => bail!(
                "operator: the torus block needs all of sigma, omega and n_modes \
                 (or use explicit eigenvalues)"
            ),
        }
    }
}

impl DriftConfig {
    fn build(&self, op: &SpectralOperator, seed: u64) -> Result<DriftSpec> {
        match self {
            DriftConfig::Zero => Ok(DriftSpec::zero()),
            DriftConfig::AffineBounded { a, b } => {
                DriftSpec::affine_bounded(*a, *b).map_err(|e| anyhow!("drift: {e}"))
            }
            DriftConfig::Power { gamma, scale, eta } => if *eta == 0.0 {
                DriftSpec::power(*gamma, *scale)
            } else {
                DriftSpec::power_smoothed(*gamma, *scale, *eta)
            }
            .map_err(|e| anyhow!("drift: {e}")),
            DriftConfig::Shifted { omega_shift, inner } => {
                let inner = inner.build(op, seed)?;
                DriftSpec::shifted(*omega_shift, inner).map_err(|e| anyhow!("drift: {e}"))
            }
            DriftConfig::Regularized {
                radius,
                inner,
                delta_r,
                n_mc,
                quasi_random,
            } => {
                let inner = inner.build(op, seed)?;
                let delta_r = delta_r.unwrap_or(0.5 / radius);
                let params = MollifyParams::new(
                    delta_r,
                    op.lambda0(),
                    *n_mc,
                    derive_seed(seed, &[stream::MOLLIFY]),
                )
                .map_err(|e| anyhow!("drift.regularized: {e}"))?
                .with_quasi_random(*quasi_random);
                DriftSpec::regularized(*radius, inner, params)
                    .map_err(|e| anyhow!("drift.regularized: {e}"))
            }
        }
    }

    fn is_regularized(&self) -> bool {
        match self {
            DriftConfig::Regularized { .. } => true,
            DriftConfig::Shifted { inner, .. } => inner.is_regularized(),
            _ => false,
        }
    }
}

impl InitialConfig {
    fn build(&self, op: &SpectralOperator) -> Result<ModeField> {
        match self {
            InitialConfig::Zero => Ok(ModeField::zeros(op.n_modes())),
            InitialConfig::SingleMode { mode, amplitude } => {
                ModeField::single_mode(op.n_modes(), *mode, *amplitude)
                    .map_err(|e| anyhow!("initial: {e}"))
            }
            InitialConfig::GridSamples { values } => op
                .from_grid(values)
                .map_err(|e| anyhow!("initial.values: {e}")),
        }
    }
}

impl EventConfig {
    fn build(&self, op: &SpectralOperator) -> Result<EventSpec> {
        if let Observable::TerminalMode { mode } = self.observable {
            if mode >= op.n_modes() {
                bail!(
                    "event.observable.mode: index {mode} out of range for {} modes",
                    op.n_modes()
                );
            }
        }
        EventSpec::new(self.observable.clone(), self.threshold).map_err(|e| anyhow!("event: {e}"))
    }
}

impl ExperimentConfig {
    /// Parse a config document; a manifest from a previous run (recognized by
    /// its `config` object) is unwrapped so that runs can be replayed.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).context("config is not valid JSON")?;
        let config_value = match value.get("config") {
            Some(inner) if value.get("schema_version").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(config_value).context("config does not match the expected schema")
    }

    /// Validate every cross-field constraint and build the run inputs.
    /// Nothing is computed here, so failures are cheap and early.
    pub fn build(&self) -> Result<Experiment> {
        let op = self.operator.build()?;
        let drift = self.drift.build(&op, self.seed)?;
        let x0 = self.initial.build(&op)?;
        let grid = TimeGrid::new(self.time.t_final, self.time.n_steps)
            .map_err(|e| anyhow!("time: {e}"))?;

        let needs_gradient = matches!(
            self.task,
            TaskConfig::Minimize { .. } | TaskConfig::Sweep { .. }
        );
        if needs_gradient && self.drift.is_regularized() {
            bail!(
                "task: regularized drifts carry no usable gradient; \
                 minimize/sweep need the raw drift (regularization is applied \
                 by the approx_scan task itself)"
            );
        }

        let task = match &self.task {
            TaskConfig::Simulate { eps, n_paths } => {
                if !(eps.is_finite() && *eps >= 0.0) {
                    bail!("task.eps: must be finite and nonnegative, got {eps}");
                }
                if *n_paths == 0 {
                    bail!("task.n_paths: must be at least 1");
                }
                BuiltTask::Simulate {
                    eps: *eps,
                    n_paths: *n_paths,
                }
            }
            TaskConfig::Minimize { event, optimizer } => BuiltTask::Minimize {
                event: event.build(&op)?,
                optimizer: optimizer.clone(),
            },
            TaskConfig::Sweep {
                eps_list,
                schedule,
                method,
                event,
                optimizer,
                tol_rel,
            } => {
                if eps_list.is_empty() {
                    bail!("task.eps_list: must not be empty");
                }
                if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                    bail!("task.eps_list: every noise size must be positive, got {eps_list:?}");
                }
                if !(tol_rel.is_finite() && *tol_rel > 0.0) {
                    bail!("task.tol_rel: must be positive, got {tol_rel}");
                }
                BuiltTask::Sweep {
                    eps_list: eps_list.clone(),
                    schedule: schedule.clone(),
                    method: *method,
                    event: event.build(&op)?,
                    optimizer: optimizer.clone(),
                    tol_rel: *tol_rel,
                }
            }
            TaskConfig::ApproxScan { radii, scan } => {
                if self.drift.is_regularized() {
                    bail!(
                        "task: approx_scan regularizes the drift itself; \
                         configure the raw drift, not a regularized one"
                    );
                }
                if radii.is_empty() {
                    bail!("task.radii: must not be empty");
                }
                BuiltTask::ApproxScan {
                    radii: radii.clone(),
                    scan: scan.clone(),
                }
            }
            TaskConfig::Diagnostics {
                eps,
                n_samples,
                tail_threshold,
                tail_alpha,
                tail_n_samples,
            } => {
                if !(eps.is_finite() && *eps >= 0.0) {
                    bail!("task.eps: must be finite and nonnegative, got {eps}");
                }
                if *n_samples == 0 || *tail_n_samples == 0 {
                    bail!("task: n_samples and tail_n_samples must be at least 1");
                }
                BuiltTask::Diagnostics {
                    eps: *eps,
                    n_samples: *n_samples,
                    tail_threshold: *tail_threshold,
                    tail_alpha: *tail_alpha,
                    tail_n_samples: *tail_n_samples,
                }
            }
        };

        let mut warnings = Vec::new();
        if op.lambda0() < 1e-3 {
            warnings.push(format!(
                "the smallest decay rate is {:.1e}: dissipation is negligible on this \
                 horizon and the dynamics are effectively Brownian",
                op.lambda0()
            ));
        }

        Ok(Experiment {
            op,
            drift,
            x0,
            grid,
            seed: self.seed,
            task,
            warnings,
        })
    }
}
