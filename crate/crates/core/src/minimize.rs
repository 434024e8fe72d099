//! Minimum action method: minimize the discrete rate functional over paths
//! anchored at `x0` and constrained to realize a rare event.
//!
//! The optimizer is spectral-projected-gradient descent with Barzilai-Borwein
//! step lengths and a nonmonotone (memory-limited) Armijo line search, run on
//! the free nodes `phi_1 .. phi_K`. Event constraints are enforced
//! structurally rather than by Lagrange multipliers:
//!
//! - terminal-coordinate events pin that coordinate of `phi_K` to the
//!   threshold;
//! - terminal-norm events retract `phi_K` radially back onto the constraint
//!   set whenever a step lands inside it;
//! - running-sup events use an exterior quadratic penalty with a growing
//!   multiplier, followed by a final radial retraction of the argmax node.
//!
//! Non-smooth drifts are replaced by their smooth surrogate during descent;
//! the reported action is re-evaluated under the original drift. When the
//! zero-noise flow already realizes the event the minimizer returns it
//! immediately with (near-)zero action: the event is not rare there.
//!
//! Multi-start runs perturb the initial path with low-frequency sine bumps to
//! expose non-uniqueness; the report clusters the resulting action values and
//! counts near-zero ones, which is the signature of degenerate (non-Lipschitz)
//! drifts whose zero-action escape paths are non-unique. A margin probe
//! re-minimizes at a slightly raised threshold and reports the action gap, a
//! proxy for the regularity of the event (closure and interior infima agree
//! when the gap is small relative to the action).

use crate::action::{action_gradient, drift_action, ActionValue, EventSpec, Observable};
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::grid::{PathOnGrid, TimeGrid};
use crate::rng::{stream, stream_rng};
use crate::spectral::{ModeField, SpectralOperator};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Optimizer settings; the defaults suit grids with 50-500 steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOpts {
    /// Iteration cap per descent run.
    pub max_iters: usize,
    /// Convergence: `||grad|| <= tol * (1 + |objective|)`.
    pub tol: f64,
    /// Smoothing scale substituted into non-smooth drifts during descent.
    pub smoothing_eta: f64,
    /// Initial multiplier of the sup-norm exterior penalty.
    pub penalty_init: f64,
    /// Multiplier growth factor per penalty round.
    pub penalty_growth: f64,
    /// Number of penalty rounds (sup-norm events only).
    pub penalty_rounds: usize,
    /// Number of descent runs from perturbed starts.
    pub multi_start: usize,
    /// Amplitude of the sine-bump start perturbations.
    pub start_spread: f64,
    /// Threshold raise of the margin probe; `None` picks
    /// `0.05 * max(1, |threshold|)`, `Some(0.0)` disables the probe.
    pub margin: Option<f64>,
    /// Actions below this count as "near zero" in the report.
    pub near_zero_tol: f64,
    /// Relative gap separating action clusters in the report.
    pub cluster_tol: f64,
    /// Seed of the start perturbations.
    pub seed: u64,
    /// Memory of the nonmonotone line search.
    pub ls_memory: usize,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        Self {
            max_iters: 4000,
            tol: 1e-6,
            smoothing_eta: 1e-4,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            penalty_rounds: 6,
            multi_start: 1,
            start_spread: 0.2,
            margin: None,
            near_zero_tol: 0.05,
            cluster_tol: 0.05,
            seed: 0,
            ls_memory: 10,
        }
    }
}

/// Outcome summary of a minimization.
#[derive(Debug, Clone, Serialize)]
pub struct MinimizeReport {
    /// Gradient criterion met on the best run.
    pub converged: bool,
    /// Iterations spent on the best run (all penalty rounds included).
    pub iters: usize,
    /// Final first-order stationarity measure of the best run: the gradient
    /// norm after removing any component blocked by an active constraint.
    pub grad_norm: f64,
    /// Best smoothed action (penalty excluded).
    pub action_value: f64,
    /// Action of the best path under the original (unsmoothed) drift.
    pub action_unsmoothed: f64,
    /// Unsmoothed action found at the raised threshold, when probed.
    pub action_at_margin: Option<f64>,
    /// `|action_at_margin - action_unsmoothed|`, when probed.
    pub regular_event_gap: Option<f64>,
    /// Number of action clusters across starts (relative gap > cluster_tol).
    pub distinct_actions: usize,
    /// Starts ending with action below `near_zero_tol`.
    pub near_zero_count: usize,
    /// The zero-noise flow already realizes the event (not a rare event).
    pub free_flow_satisfies_event: bool,
    /// Number of descent runs.
    pub starts: usize,
}

/// A minimizing path with its action and the run report.
#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub path: PathOnGrid,
    /// Action under the original drift.
    pub action: ActionValue,
    pub report: MinimizeReport,
}

/// Straight-line initial path from `x0` to a terminal state placed on the
/// event boundary: the pinned coordinate set to the threshold, or (for norm
/// events) the zeroth coefficient raised until the fractional norm hits it.
pub fn linear_init(
    op: &SpectralOperator,
    x0: &ModeField,
    event: &EventSpec,
    grid: TimeGrid,
) -> Result<PathOnGrid> {
    if x0.dim() != op.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: op.n_modes(),
            got: x0.dim(),
        });
    }
    let mut target = x0.coeffs().to_vec();
    match &event.observable {
        Observable::TerminalMode { mode } => {
            if *mode >= op.n_modes() {
                return Err(Error::DimensionMismatch {
                    expected: op.n_modes(),
                    got: *mode,
                });
            }
            target[*mode] = event.threshold;
        }
        Observable::TerminalNorm { alpha } | Observable::SupNorm { alpha } => {
            let c = event.threshold.max(0.0);
            let l0 = op.eigenvalues()[0].powf(*alpha);
            let rest: f64 = target
                .iter()
                .enumerate()
                .skip(1)
                .map(|(m, v)| (op.eigenvalues()[m].powf(*alpha) * v).powi(2))
                .sum();
            target[0] = (c * c - rest).max(0.0).sqrt() / l0;
        }
    }
    let target = ModeField::new(target)?;
    let fields = (0..=grid.n_steps())
        .map(|k| {
            let s = k as f64 / grid.n_steps() as f64;
            x0.scaled(1.0 - s).add_scaled(s, &target)
        })
        .collect();
    PathOnGrid::new(grid, fields)
}

/// How the event constraint is enforced during descent.
enum Enforcement {
    PinCoordinate { mode: usize, value: f64 },
    RetractTerminalNorm { alpha: f64, threshold: f64 },
    PenalizeSup { alpha: f64, threshold: f64 },
}

struct Descent<'a> {
    op: &'a SpectralOperator,
    drift: &'a DriftSpec,
    x0: &'a ModeField,
    grid: TimeGrid,
    enforcement: Enforcement,
    mu: f64,
}

impl Descent<'_> {
    fn n(&self) -> usize {
        self.op.n_modes()
    }

    fn k_steps(&self) -> usize {
        self.grid.n_steps()
    }

    fn pack(&self, path: &PathOnGrid) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.k_steps() * self.n());
        for j in 1..=self.k_steps() {
            x.extend_from_slice(path.node(j).coeffs());
        }
        x
    }

    /// Apply pin/retraction directly to the flat variables.
    fn enforce(&self, x: &mut [f64]) {
        let n = self.n();
        let last = (self.k_steps() - 1) * n;
        match &self.enforcement {
            Enforcement::PinCoordinate { mode, value } => x[last + mode] = *value,
            Enforcement::RetractTerminalNorm { alpha, threshold } => {
                let term = ModeField::from_raw(x[last..last + n].to_vec());
                let norm = self.op.fractional_norm(*alpha, &term);
                if norm < *threshold {
                    if norm > 1e-300 {
                        let s = threshold / norm;
                        for v in &mut x[last..last + n] {
                            *v *= s;
                        }
                    } else {
                        // Degenerate zero terminal: push along the first mode.
                        x[last] = threshold / self.op.eigenvalues()[0].powf(*alpha);
                    }
                }
            }
            Enforcement::PenalizeSup { .. } => {}
        }
    }

    fn assemble(&self, x: &[f64]) -> Option<PathOnGrid> {
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        let n = self.n();
        let mut fields = Vec::with_capacity(self.k_steps() + 1);
        fields.push(self.x0.clone());
        for j in 0..self.k_steps() {
            fields.push(ModeField::from_raw(x[j * n..(j + 1) * n].to_vec()));
        }
        Some(PathOnGrid::from_raw(self.grid, fields))
    }

    /// Penalty slack `max(0, threshold - max_k ||phi_k||_alpha)` and argmax node.
    fn sup_slack(&self, path: &PathOnGrid) -> Option<(f64, usize, f64)> {
        if let Enforcement::PenalizeSup { alpha, threshold } = self.enforcement {
            let (mut best, mut best_j) = (f64::NEG_INFINITY, 0);
            for (j, f) in path.fields().iter().enumerate() {
                let v = self.op.fractional_norm(alpha, f);
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
            Some(((threshold - best).max(0.0), best_j, best))
        } else {
            None
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let Some(path) = self.assemble(x) else {
            return Ok(f64::INFINITY);
        };
        let action = drift_action(self.op, self.drift, self.x0, &path)?;
        let mut f = action.value;
        if let Some((slack, _, _)) = self.sup_slack(&path) {
            f += self.mu * slack * slack;
        }
        Ok(f)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let path = self
            .assemble(x)
            .ok_or_else(|| Error::InvalidParameter("non-finite iterate".into()))?;
        let full = action_gradient(self.op, self.drift, &path)?;
        let n = self.n();
        let mut g = Vec::with_capacity(self.k_steps() * n);
        for node in full.iter().skip(1) {
            g.extend_from_slice(node.coeffs());
        }
        if let Some((slack, j_star, norm)) = self.sup_slack(&path) {
            if slack > 0.0 && j_star >= 1 && norm > 1e-300 {
                if let Enforcement::PenalizeSup { alpha, .. } = self.enforcement {
                    let node = path.node(j_star);
                    let base = (j_star - 1) * n;
                    for m in 0..n {
                        let w = self.op.eigenvalues()[m].powf(2.0 * alpha);
                        g[base + m] += -2.0 * self.mu * slack * w * node.coeffs()[m] / norm;
                    }
                }
            }
        }
        if let Enforcement::PinCoordinate { mode, .. } = self.enforcement {
            let last = (self.k_steps() - 1) * n;
            g[last + mode] = 0.0;
        }
        Ok(g)
    }

    /// First-order stationarity measure: the gradient norm with the component
    /// blocked by an active terminal-norm retraction removed. At a constrained
    /// minimum on the norm sphere the gradient is purely radial (pointing
    /// inward, where the retraction forbids movement), so the raw norm never
    /// vanishes; the tangential part does.
    fn stationarity(&self, x: &[f64], g: &[f64]) -> f64 {
        let Enforcement::RetractTerminalNorm { alpha, threshold } = &self.enforcement else {
            return l2(g);
        };
        let n = self.n();
        let last = (self.k_steps() - 1) * n;
        let term = &x[last..last + n];
        let weights: Vec<f64> = (0..n)
            .map(|m| self.op.eigenvalues()[m].powf(2.0 * *alpha))
            .collect();
        let norm = term
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt();
        // Inactive (strictly outside the sphere) or degenerate: raw gradient.
        if norm > threshold * (1.0 + 1e-10) || norm <= 1e-300 {
            return l2(g);
        }
        // Euclidean normal of the constraint surface at the terminal node.
        let normal: Vec<f64> = term
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v / norm)
            .collect();
        let nn: f64 = normal.iter().map(|v| v * v).sum();
        if nn <= 1e-300 {
            return l2(g);
        }
        let radial: f64 = g[last..last + n]
            .iter()
            .zip(&normal)
            .map(|(a, b)| a * b)
            .sum();
        if radial <= 0.0 {
            // The gradient pushes outward; descent can follow it freely.
            return l2(g);
        }
        let scale = radial / nn;
        let mut sum = 0.0;
        for (i, gi) in g.iter().enumerate() {
            let adj = if i >= last {
                gi - scale * normal[i - last]
            } else {
                *gi
            };
            sum += adj * adj;
        }
        sum.sqrt()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct RunResult {
    x: Vec<f64>,
    objective: f64,
    converged: bool,
    iters: usize,
    grad_norm: f64,
}

/// One Barzilai-Borwein descent with nonmonotone Armijo backtracking.
fn bb_descent(problem: &Descent, start: &[f64], opts: &MinimizeOpts) -> Result<RunResult> {
    let mut x = start.to_vec();
    problem.enforce(&mut x);
    let mut f = problem.value(&x)?;
    let mut g = problem.grad(&x)?;
    let mut hist: VecDeque<f64> = VecDeque::with_capacity(opts.ls_memory);
    hist.push_back(f);
    let mut alpha = (1.0 / l2(&g).max(1e-12)).min(1.0);
    let mut best_x = x.clone();
    let mut best_f = f;
    let mut converged = false;
    let mut iters = 0;
    let mut grad_norm = problem.stationarity(&x, &g);
    let sigma = 1e-4;
    for it in 0..opts.max_iters {
        iters = it + 1;
        grad_norm = problem.stationarity(&x, &g);
        if grad_norm <= opts.tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let f_ref = hist.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xt: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
            problem.enforce(&mut xt);
            let ft = problem.value(&xt)?;
            let move_sq: f64 = x.iter().zip(&xt).map(|(a, b)| (a - b) * (a - b)).sum();
            if ft.is_finite() && ft <= f_ref - sigma * move_sq / step {
                accepted = Some((xt, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft)) = accepted else { break };
        let gt = problem.grad(&xt)?;
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..x.len() {
            let s = xt[i] - x[i];
            let y = gt[i] - g[i];
            sy += s * y;
            ss += s * s;
        }
        alpha = if sy > 1e-300 {
            (ss / sy).clamp(1e-10, 1e3)
        } else {
            1.0
        };
        x = xt;
        f = ft;
        g = gt;
        if hist.len() == opts.ls_memory {
            hist.pop_front();
        }
        hist.push_back(f);
        if f < best_f {
            best_f = f;
            best_x = x.clone();
        }
    }
    if !converged {
        // Stalled line searches at machine-scale minima still count as done.
        converged = grad_norm <= 1e3 * opts.tol * (1.0 + best_f.abs());
    }
    Ok(RunResult {
        x: best_x,
        objective: best_f,
        converged,
        iters,
        grad_norm,
    })
}

fn enforcement_for(event: &EventSpec) -> Enforcement {
    match &event.observable {
        Observable::TerminalMode { mode } => Enforcement::PinCoordinate {
            mode: *mode,
            value: event.threshold,
        },
        Observable::TerminalNorm { alpha } => Enforcement::RetractTerminalNorm {
            alpha: *alpha,
            threshold: event.threshold,
        },
        Observable::SupNorm { alpha } => Enforcement::PenalizeSup {
            alpha: *alpha,
            threshold: event.threshold,
        },
    }
}

/// Run descent (with penalty rounds if needed) from one start.
fn solve_from(
    op: &SpectralOperator,
    drift: &DriftSpec,
    x0: &ModeField,
    event: &EventSpec,
    grid: TimeGrid,
    start_path: &PathOnGrid,
    opts: &MinimizeOpts,
) -> Result<(PathOnGrid, RunResult)> {
    let mut problem = Descent {
        op,
        drift,
        x0,
        grid,
        enforcement: enforcement_for(event),
        mu: opts.penalty_init,
    };
    let mut x = problem.pack(start_path);
    let penalized = matches!(problem.enforcement, Enforcement::PenalizeSup { .. });
    let rounds = if penalized {
        opts.penalty_rounds.max(1)
    } else {
        1
    };
    let mut last = None;
    let mut total_iters = 0;
    for round in 0..rounds {
        problem.mu = opts.penalty_init * opts.penalty_growth.powi(round as i32);
        let run = bb_descent(&problem, &x, opts)?;
        x = run.x.clone();
        total_iters += run.iters;
        last = Some(run);
    }
    let mut run = last.expect("at least one round");
    run.iters = total_iters;
    // Exterior penalties can end marginally infeasible: retract the largest
    // node onto the constraint and keep the better of the two iterates.
    if penalized {
        if let Some(path) = problem.assemble(&run.x) {
            if let Some((slack, j_star, norm)) = problem.sup_slack(&path) {
                if slack > 0.0 && j_star >= 1 && norm > 1e-300 {
                    if let Enforcement::PenalizeSup { threshold, .. } = problem.enforcement {
                        let n = op.n_modes();
                        let base = (j_star - 1) * n;
                        let s = threshold / norm;
                        for v in &mut run.x[base..base + n] {
                            *v *= s;
                        }
                        run.objective = problem.value(&run.x)?;
                    }
                }
            }
        }
    }
    let path = problem
        .assemble(&run.x)
        .ok_or_else(|| Error::InvalidParameter("non-finite minimizer".into()))?;
    Ok((path, run))
}

fn sine_bump_perturbation(
    base: &PathOnGrid,
    spread: f64,
    seed: u64,
    start_index: u64,
) -> PathOnGrid {
    let grid = *base.grid();
    let k_steps = grid.n_steps();
    let n = base.node(0).dim();
    let amps: Vec<f64> = (0..n)
        .map(|m| {
            let mut rng = stream_rng(seed, &[stream::START, start_index, m as u64]);
            spread * (2.0 * rng.gen::<f64>() - 1.0) / (m as f64 + 1.0)
        })
        .collect();
    let fields = (0..=k_steps)
        .map(|j| {
            let bump = (std::f64::consts::PI * j as f64 / k_steps as f64).sin();
            ModeField::from_raw(
                base.node(j)
                    .coeffs()
                    .iter()
                    .zip(&amps)
                    .map(|(v, a)| v + a * bump)
                    .collect(),
            )
        })
        .collect();
    PathOnGrid::from_raw(grid, fields)
}

fn cluster_count(mut values: Vec<f64>, cluster_tol: f64) -> usize {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite actions"));
    let mut clusters = 0;
    let mut last: Option<f64> = None;
    for v in values {
        match last {
            Some(prev) if (v - prev).abs() <= cluster_tol * prev.abs().max(1.0) => {}
            _ => clusters += 1,
        }
        last = Some(v);
    }
    clusters
}

/// Minimize the action over paths from `x0` realizing the event.
///
/// `init` seeds the first start; further starts (see
/// [`MinimizeOpts::multi_start`]) perturb it with sine bumps. The returned
/// action and path refer to the original drift; descent itself runs on the
/// smooth surrogate.
pub fn minimize_action(
    op: &SpectralOperator,
    drift: &DriftSpec,
    x0: &ModeField,
    event: &EventSpec,
    grid: TimeGrid,
    init: Option<&PathOnGrid>,
    opts: &MinimizeOpts,
) -> Result<MinimizeOutcome> {
    if x0.dim() != op.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: op.n_modes(),
            got: x0.dim(),
        });
    }
    if opts.multi_start == 0 {
        return Err(Error::InvalidParameter(
            "multi_start must be at least 1".into(),
        ));
    }
    // Not rare if the free flow gets there on its own.
    let skeleton = crate::dynamics::skeleton_flow(op, drift, x0, grid)?;
    if event.satisfied(op, &skeleton)? {
        let action = drift_action(op, drift, x0, &skeleton)?;
        let report = MinimizeReport {
            converged: true,
            iters: 0,
            grad_norm: 0.0,
            action_value: action.value,
            action_unsmoothed: action.value,
            action_at_margin: None,
            regular_event_gap: None,
            distinct_actions: 1,
            near_zero_count: 1,
            free_flow_satisfies_event: true,
            starts: 0,
        };
        return Ok(MinimizeOutcome {
            path: skeleton,
            action,
            report,
        });
    }

    let smooth = drift.smoothed(opts.smoothing_eta);
    let base = match init {
        Some(p) => {
            if !p.grid().compatible(&grid) {
                return Err(Error::InvalidParameter(
                    "init path grid does not match the requested grid".into(),
                ));
            }
            p.clone()
        }
        None => linear_init(op, x0, event, grid)?,
    };

    let mut runs: Vec<(PathOnGrid, RunResult)> = Vec::with_capacity(opts.multi_start);
    for s in 0..opts.multi_start {
        let start = if s == 0 {
            base.clone()
        } else {
            sine_bump_perturbation(&base, opts.start_spread, opts.seed, s as u64)
        };
        runs.push(solve_from(op, &smooth, x0, event, grid, &start, opts)?);
    }
    let best_idx = runs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1 .1
                .objective
                .partial_cmp(&b.1 .1.objective)
                .expect("finite")
        })
        .map(|(i, _)| i)
        .expect("at least one start");
    let objectives: Vec<f64> = runs.iter().map(|r| r.1.objective).collect();
    let near_zero_count = objectives
        .iter()
        .filter(|v| **v < opts.near_zero_tol)
        .count();
    let distinct_actions = cluster_count(objectives, opts.cluster_tol);
    let (best_path, best_run) = &runs[best_idx];

    let smoothed_action = drift_action(op, &smooth, x0, best_path)?;
    let action = drift_action(op, drift, x0, best_path)?;

    // Margin probe: re-minimize at a raised threshold from the found path.
    let margin = match opts.margin {
        Some(m) => m,
        None => 0.05 * event.threshold.abs().max(1.0),
    };
    let (action_at_margin, regular_event_gap) = if margin > 0.0 {
        let probe_event = event.with_margin(margin);
        let probe_opts = MinimizeOpts {
            multi_start: 1,
            margin: Some(0.0),
            ..opts.clone()
        };
        let (probe_path, _) =
            solve_from(op, &smooth, x0, &probe_event, grid, best_path, &probe_opts)?;
        let probe_action = drift_action(op, drift, x0, &probe_path)?;
        (
            Some(probe_action.value),
            Some((probe_action.value - action.value).abs()),
        )
    } else {
        (None, None)
    };

    let report = MinimizeReport {
        converged: best_run.converged,
        iters: best_run.iters,
        grad_norm: best_run.grad_norm,
        action_value: smoothed_action.value,
        action_unsmoothed: action.value,
        action_at_margin,
        regular_event_gap,
        distinct_actions,
        near_zero_count,
        free_flow_satisfies_event: false,
        starts: opts.multi_start,
    };
    Ok(MinimizeOutcome {
        path: best_path.clone(),
        action,
        report,
    })
}
