//! Drift maps `B: H -> H` and the bounded-Lipschitz regularization pipeline.
//!
//! Every drift declares a growth envelope `(a, b)` with
//! `||B(x)|| <= a + b ||x||`; the envelope feeds the cutoff used by the
//! regularization. The pipeline approximating a merely continuous drift by a
//! bounded Lipschitz one is, for a radius `R >= 1`:
//!
//! 1. cutoff: `B'_R(x) = rho(||B(x)||) B(x)` with `rho` equal to 1 up to
//!    `a + bR`, 0 beyond `a + bR + 1`, a cubic smoothstep in between;
//! 2. mollify: `Bbar_R(x) = E[ B'_R(e^{A tau_R} x + Y) ]`, `Y` distributed as
//!    the stochastic convolution at time `tau_R = delta_R^3 / (2 lambda_0)`,
//!    with the expectation replaced by an `n_mc`-sample average;
//! 3. recutoff: `B_R(x) = rho(||Bbar_R(x)||) Bbar_R(x)`, which restores the
//!    hard bound `||B_R|| <= a + bR + 1` exactly.
//!
//! The mollification scale `delta_R` must satisfy `delta_R < 1/R`; the stock
//! schedule takes the smaller of `1/(2R)` and an empirical continuity-modulus
//! probe targeting a discrepancy of `1/R^2`.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::spectral::{ModeField, SpectralOperator};
use crate::stats::{loglog_slope, pairwise_sum};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Sampling parameters of the mollification step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifyParams {
    /// Spatial mollification scale; must satisfy `delta_r < 1/R` for radius R.
    pub delta_r: f64,
    /// Smoothing time `delta_r^3 / (2 lambda_0)`.
    pub tau_r: f64,
    /// Number of averaging draws.
    pub n_mc: usize,
    /// Seed of the averaging streams.
    pub seed: u64,
    /// Use a randomized Halton sequence instead of plain Monte Carlo.
    pub quasi_random: bool,
}

impl MollifyParams {
    pub fn new(delta_r: f64, lambda0: f64, n_mc: usize, seed: u64) -> Result<Self> {
        if !(delta_r.is_finite() && delta_r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_r must be positive, got {delta_r}"
            )));
        }
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda0 must be positive, got {lambda0}"
            )));
        }
        if n_mc == 0 {
            return Err(Error::InvalidParameter("n_mc must be at least 1".into()));
        }
        Ok(Self {
            delta_r,
            tau_r: delta_r.powi(3) / (2.0 * lambda0),
            n_mc,
            seed,
            quasi_random: false,
        })
    }

    pub fn with_quasi_random(mut self, on: bool) -> Self {
        self.quasi_random = on;
        self
    }
}

/// A drift map together with its declared growth envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DriftSpec {
    /// `B = 0`.
    Zero,
    /// Smooth bounded test map
    /// `B(x)_n = a g_n + b w_n tanh(x_n)`, `w_n = 1/(n+1)`, `g = w/||w||`.
    ///
    /// Exact envelope `(a, b)`; globally bounded by `a + b ||w||`
    /// (`||w|| <= pi/sqrt(6) ~ 1.283`); global Lipschitz constant `b`.
    AffineBounded { a: f64, b: f64 },
    /// Pointwise power nonlinearity on the torus grid:
    /// `B(x) = from_grid(scale * (u^2 + eta^2)^{gamma/2})`, `u = to_grid(x)`.
    ///
    /// `eta = 0` is the exact `scale * |u|^gamma`; `eta > 0` is its smooth
    /// surrogate (needed for gradients). Envelope
    /// `(scale * (1 + eta^gamma) * sqrt(2 pi), scale)`.
    Power { gamma: f64, scale: f64, eta: f64 },
    /// `B(x) = omega_shift * x + inner(x)`: absorbs a linear shift of the
    /// operator into the drift (so an unshifted equation can run on a shifted,
    /// strictly positive spectrum).
    Shifted {
        omega_shift: f64,
        inner: Box<DriftSpec>,
    },
    /// The bounded Lipschitz regularization of `inner` at the given radius.
    Regularized {
        radius: f64,
        inner: Box<DriftSpec>,
        params: MollifyParams,
    },
}

/// Lipschitz constant of the cutoff profile (max slope of the cubic smoothstep).
pub const CUTOFF_LIPSCHITZ: f64 = 1.5;

/// Cutoff profile: 1 on `[0, a + bR]`, 0 on `[a + bR + 1, inf)`, the cubic
/// smoothstep `1 - (3s^2 - 2s^3)` in between (`s` the offset past the plateau).
/// C^1, nonincreasing, and `CUTOFF_LIPSCHITZ`-Lipschitz.
pub fn cutoff_rho(radius: f64, a: f64, b: f64, r: f64) -> f64 {
    let plateau = a + b * radius;
    if r <= plateau {
        1.0
    } else if r >= plateau + 1.0 {
        0.0
    } else {
        let s = r - plateau;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

fn affine_weights(n: usize) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = (0..n).map(|i| 1.0 / (i + 1) as f64).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let g: Vec<f64> = w.iter().map(|v| v / norm).collect();
    (w, g)
}

impl DriftSpec {
    pub fn zero() -> Self {
        DriftSpec::Zero
    }

    pub fn affine_bounded(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "envelope coefficients must be nonnegative, got a = {a}, b = {b}"
            )));
        }
        Ok(DriftSpec::AffineBounded { a, b })
    }

    /// Exact power nonlinearity `scale * |u|^gamma`, `gamma` in (0, 1).
    pub fn power(gamma: f64, scale: f64) -> Result<Self> {
        Self::power_smoothed(gamma, scale, 0.0)
    }

    /// Smoothed power nonlinearity `scale * (u^2 + eta^2)^{gamma/2}`.
    pub fn power_smoothed(gamma: f64, scale: f64, eta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be nonnegative, got {scale}"
            )));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be nonnegative, got {eta}"
            )));
        }
        Ok(DriftSpec::Power { gamma, scale, eta })
    }

    pub fn shifted(omega_shift: f64, inner: DriftSpec) -> Result<Self> {
        if !omega_shift.is_finite() {
            return Err(Error::InvalidParameter("omega_shift must be finite".into()));
        }
        Ok(DriftSpec::Shifted {
            omega_shift,
            inner: Box::new(inner),
        })
    }

    pub fn regularized(radius: f64, inner: DriftSpec, params: MollifyParams) -> Result<Self> {
        if !(radius.is_finite() && radius >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "regularization radius must be >= 1, got {radius}"
            )));
        }
        if params.delta_r >= 1.0 / radius {
            return Err(Error::InvalidParameter(format!(
                "delta_r = {} must be < 1/R = {}",
                params.delta_r,
                1.0 / radius
            )));
        }
        Ok(DriftSpec::Regularized {
            radius,
            inner: Box::new(inner),
            params,
        })
    }

    /// Growth envelope `(a, b)`: `||eval(x)|| <= a + b ||x||` for all x.
    pub fn envelope(&self) -> (f64, f64) {
        match self {
            DriftSpec::Zero => (0.0, 0.0),
            DriftSpec::AffineBounded { a, b } => (*a, *b),
            DriftSpec::Power { gamma, scale, eta } => {
                // Pointwise (u^2 + eta^2)^{g/2} <= eta^g + 1 + |u|, and the grid
                // projection is a contraction, so a = scale (1 + eta^g) sqrt(2 pi).
                let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
                (scale * (1.0 + eta.powf(*gamma)) * sqrt_2pi, *scale)
            }
            DriftSpec::Shifted { omega_shift, inner } => {
                let (a, b) = inner.envelope();
                (a, b + omega_shift.abs())
            }
            DriftSpec::Regularized { radius, inner, .. } => {
                let (a, b) = inner.envelope();
                (a + b * radius + 1.0, 0.0)
            }
        }
    }

    /// Evaluate the drift at a field.
    pub fn eval(&self, op: &SpectralOperator, x: &ModeField) -> Result<ModeField> {
        if x.dim() != op.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: op.n_modes(),
                got: x.dim(),
            });
        }
        match self {
            DriftSpec::Zero => Ok(ModeField::zeros(x.dim())),
            DriftSpec::AffineBounded { a, b } => {
                let (w, g) = affine_weights(x.dim());
                Ok(ModeField::from_raw(
                    x.coeffs()
                        .iter()
                        .enumerate()
                        .map(|(n, c)| a * g[n] + b * w[n] * c.tanh())
                        .collect(),
                ))
            }
            DriftSpec::Power { gamma, scale, eta } => {
                let u = op.to_grid(x)?;
                let vals: Vec<f64> = u
                    .iter()
                    .map(|v| scale * (v * v + eta * eta).powf(gamma / 2.0))
                    .collect();
                op.from_grid(&vals)
            }
            DriftSpec::Shifted { omega_shift, inner } => {
                let b = inner.eval(op, x)?;
                Ok(x.scaled(*omega_shift).add_scaled(1.0, &b))
            }
            DriftSpec::Regularized {
                radius,
                inner,
                params,
            } => regularized_br(op, inner, *radius, params, x),
        }
    }

    /// Whether `jacobian_transpose_apply` is available.
    pub fn differentiable(&self) -> bool {
        match self {
            DriftSpec::Zero | DriftSpec::AffineBounded { .. } => true,
            DriftSpec::Power { eta, .. } => *eta > 0.0,
            DriftSpec::Shifted { inner, .. } => inner.differentiable(),
            DriftSpec::Regularized { .. } => false,
        }
    }

    /// Apply the transposed Jacobian `(DB(x))^T v` (exact, not finite-differenced).
    pub fn jacobian_transpose_apply(
        &self,
        op: &SpectralOperator,
        x: &ModeField,
        v: &ModeField,
    ) -> Result<ModeField> {
        match self {
            DriftSpec::Zero => Ok(ModeField::zeros(x.dim())),
            DriftSpec::AffineBounded { b, .. } => {
                let (w, _) = affine_weights(x.dim());
                Ok(ModeField::from_raw(
                    x.coeffs()
                        .iter()
                        .zip(v.coeffs())
                        .enumerate()
                        .map(|(n, (c, vv))| {
                            let sech = 1.0 / c.cosh();
                            b * w[n] * sech * sech * vv
                        })
                        .collect(),
                ))
            }
            DriftSpec::Power { gamma, scale, eta } => {
                if *eta <= 0.0 {
                    return Err(Error::GradientUnsupported(
                        "the exact power drift is not differentiable at 0; \
                         use the smoothed surrogate (eta > 0)"
                            .into(),
                    ));
                }
                // B(x) = G psi(F x) with G the adjoint quadrature of F, so
                // (DB)^T v = scale * G( psi'(u) .* F v ).
                let u = op.to_grid(x)?;
                let vu = op.to_grid(v)?;
                let vals: Vec<f64> = u
                    .iter()
                    .zip(&vu)
                    .map(|(ui, vi)| {
                        let psi_prime = gamma * ui * (ui * ui + eta * eta).powf(gamma / 2.0 - 1.0);
                        scale * psi_prime * vi
                    })
                    .collect();
                op.from_grid(&vals)
            }
            DriftSpec::Shifted { omega_shift, inner } => {
                let jw = inner.jacobian_transpose_apply(op, x, v)?;
                Ok(v.scaled(*omega_shift).add_scaled(1.0, &jw))
            }
            DriftSpec::Regularized { .. } => Err(Error::GradientUnsupported(
                "the regularized drift exposes no exact Jacobian; \
                 differentiate the underlying drift instead"
                    .into(),
            )),
        }
    }

    /// A copy whose non-differentiable pieces are replaced by their smooth
    /// surrogates (currently: exact power maps get smoothing scale `eta`).
    pub fn smoothed(&self, eta: f64) -> DriftSpec {
        match self {
            DriftSpec::Power {
                gamma,
                scale,
                eta: e,
            } if *e == 0.0 => DriftSpec::Power {
                gamma: *gamma,
                scale: *scale,
                eta,
            },
            DriftSpec::Shifted { omega_shift, inner } => DriftSpec::Shifted {
                omega_shift: *omega_shift,
                inner: Box::new(inner.smoothed(eta)),
            },
            other => other.clone(),
        }
    }
}

/// First regularization stage: `B'_R(x) = rho(||B(x)||) B(x)`.
pub fn cutoff_drift(
    op: &SpectralOperator,
    inner: &DriftSpec,
    radius: f64,
    x: &ModeField,
) -> Result<ModeField> {
    let b = inner.eval(op, x)?;
    let (a, bb) = inner.envelope();
    Ok(b.scaled(cutoff_rho(radius, a, bb, b.norm_h())))
}

/// First `n` primes, for Halton bases.
fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut cand = 2u64;
    while out.len() < n {
        if out.iter().all(|p| !cand.is_multiple_of(*p)) {
            out.push(cand);
        }
        cand += 1;
    }
    out
}

/// Radical-inverse (van der Corput) value of `i` in base `b`, in (0, 1).
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Draws from the mollifying measure: per-mode centered Gaussians with the
/// stochastic-convolution variance `(1 - e^{-2 lambda tau}) / (2 lambda)`.
fn mollifier_draws(op: &SpectralOperator, params: &MollifyParams) -> Vec<ModeField> {
    let n = op.n_modes();
    let sd: Vec<f64> = op
        .eigenvalues()
        .iter()
        .map(|l| ((-(-2.0 * l * params.tau_r).exp_m1()) / (2.0 * l)).sqrt())
        .collect();
    if params.quasi_random {
        // Randomized Halton: one base per mode, Cranley-Patterson rotation from
        // the seed, normal quantile transform.
        let bases = primes(n);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut rng = stream_rng(params.seed, &[stream::MOLLIFY, u64::MAX]);
        let shifts: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        (0..params.n_mc)
            .map(|i| {
                ModeField::from_raw(
                    (0..n)
                        .map(|m| {
                            let u = (radical_inverse(i as u64 + 1, bases[m]) + shifts[m]).fract();
                            // Clamp away from 0/1 so the quantile stays finite.
                            let u = u.clamp(1e-12, 1.0 - 1e-12);
                            sd[m] * normal.inverse_cdf(u)
                        })
                        .collect(),
                )
            })
            .collect()
    } else {
        (0..params.n_mc)
            .map(|i| {
                let mut rng = stream_rng(params.seed, &[stream::MOLLIFY, i as u64]);
                ModeField::from_raw(
                    sd.iter()
                        .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            })
            .collect()
    }
}

/// Second stage: sampled mollification
/// `Bbar_R(x) = avg_i B'_R(e^{A tau_R} x + y_i)`.
///
/// The average uses pairwise summation per mode, so a constant integrand with a
/// power-of-two `n_mc` is reproduced exactly.
pub fn mollify_br(
    op: &SpectralOperator,
    inner: &DriftSpec,
    radius: f64,
    params: &MollifyParams,
    x: &ModeField,
) -> Result<ModeField> {
    if x.dim() != op.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: op.n_modes(),
            got: x.dim(),
        });
    }
    let base = op.semigroup(params.tau_r, x)?;
    let draws = mollifier_draws(op, params);
    let mut samples: Vec<ModeField> = Vec::with_capacity(params.n_mc);
    for y in &draws {
        samples.push(cutoff_drift(op, inner, radius, &base.add_scaled(1.0, y))?);
    }
    let n = op.n_modes();
    let mut coeffs = vec![0.0; n];
    let mut column = vec![0.0; params.n_mc];
    for (m, c) in coeffs.iter_mut().enumerate() {
        for (i, s) in samples.iter().enumerate() {
            column[i] = s.coeffs()[m];
        }
        *c = pairwise_sum(&column) / params.n_mc as f64;
    }
    Ok(ModeField::from_raw(coeffs))
}

/// Full pipeline: cutoff, mollify, recutoff. Satisfies the hard bound
/// `||B_R(x)|| <= a + b R + 1` for every x.
pub fn regularized_br(
    op: &SpectralOperator,
    inner: &DriftSpec,
    radius: f64,
    params: &MollifyParams,
    x: &ModeField,
) -> Result<ModeField> {
    let m = mollify_br(op, inner, radius, params, x)?;
    let (a, b) = inner.envelope();
    Ok(m.scaled(cutoff_rho(radius, a, b, m.norm_h())))
}

/// Sample a point of the ball `{ ||x||_{D((-A)^alpha)} <= r }`, radius-biased
/// toward the boundary (`r * sqrt(U)`), direction from an isotropic Gaussian.
fn sample_in_ball(op: &SpectralOperator, alpha: f64, r: f64, rng: &mut impl Rng) -> ModeField {
    let n = op.n_modes();
    loop {
        let g = ModeField::from_raw(
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let v = op.fractional_norm(alpha, &g);
        if v > 1e-300 {
            let radius = r * rng.gen::<f64>().sqrt();
            return g.scaled(radius / v);
        }
    }
}

/// Empirical continuity-modulus probe for the cutoff drift `B'_R`.
///
/// Returns the largest dyadic candidate `delta = (1/(2R)) 2^{-j}`, `j = 0..12`,
/// such that `||B'_R(x + delta h) - B'_R(x)|| < 1/R^2` over `n_pairs` sampled
/// pairs (`x` in the `alpha`-ball of radius `R + 1`, `h` a random unit
/// H-direction); falls back to the smallest candidate when none passes.
pub fn modulus_probe(
    op: &SpectralOperator,
    inner: &DriftSpec,
    radius: f64,
    alpha: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be at least 1".into()));
    }
    let target = 1.0 / (radius * radius);
    let mut delta = 1.0 / (2.0 * radius);
    for j in 0..=12u64 {
        let candidate = (1.0 / (2.0 * radius)) * 0.5_f64.powi(j as i32);
        let mut worst = 0.0_f64;
        for i in 0..n_pairs {
            let mut rng = stream_rng(seed, &[stream::PROBE, j, i as u64]);
            let x = sample_in_ball(op, alpha, radius + 1.0, &mut rng);
            let h = loop {
                let g = ModeField::from_raw(
                    (0..op.n_modes())
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                );
                let n = g.norm_h();
                if n > 1e-300 {
                    break g.scaled(1.0 / n);
                }
            };
            let y = x.add_scaled(candidate, &h);
            let d = cutoff_drift(op, inner, radius, &y)?
                .sub(&cutoff_drift(op, inner, radius, &x)?)
                .norm_h();
            worst = worst.max(d);
        }
        delta = candidate;
        if worst < target {
            break;
        }
    }
    Ok(delta)
}

/// Parameters of the regularization error scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanParams {
    /// Fractional exponent defining the balls `F_R`.
    pub alpha: f64,
    /// Mollifier draws per evaluation.
    pub n_mc: usize,
    /// Pairs per candidate scale in the modulus probe.
    pub probe_pairs: usize,
    /// Sup-error sample points per radius.
    pub samples_per_radius: usize,
    /// Use the quasi-random mollifier option.
    pub quasi_random: bool,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            n_mc: 256,
            probe_pairs: 48,
            samples_per_radius: 160,
            quasi_random: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub radius: f64,
    pub delta_r: f64,
    pub tau_r: f64,
    pub sup_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Log-log slope of sup_error against radius (None when an error vanishes).
    pub slope: Option<f64>,
}

impl ScanTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("radius,delta_r,tau_r,sup_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.radius, r.delta_r, r.tau_r, r.sup_error
            ));
        }
        out
    }
}

/// Measure `sup_{F_R} ||B_R - B||` over sampled points of each ball, with the
/// stock `delta_R` schedule `min(1/(2R), modulus_probe(R))`.
pub fn approx_error_scan(
    op: &SpectralOperator,
    inner: &DriftSpec,
    radii: &[f64],
    params: &ScanParams,
    seed: u64,
) -> Result<ScanTable> {
    if radii.is_empty() {
        return Err(Error::EmptyInput("radii"));
    }
    for pair in radii.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParameter(
                "radii must be strictly increasing".into(),
            ));
        }
    }
    if radii[0] < 1.0 {
        return Err(Error::InvalidParameter("radii must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &radius) in radii.iter().enumerate() {
        let probe_seed = derive_seed(seed, &[stream::PROBE, ri as u64]);
        let probed = modulus_probe(
            op,
            inner,
            radius,
            params.alpha,
            params.probe_pairs,
            probe_seed,
        )?;
        let delta_r = probed.min(1.0 / (2.0 * radius));
        let mp = MollifyParams::new(
            delta_r,
            op.lambda0(),
            params.n_mc,
            derive_seed(seed, &[stream::MOLLIFY, ri as u64]),
        )?
        .with_quasi_random(params.quasi_random);
        let mut sup_error = 0.0_f64;
        for i in 0..params.samples_per_radius {
            let mut rng = stream_rng(seed, &[stream::SCAN, ri as u64, i as u64]);
            let x = sample_in_ball(op, params.alpha, radius, &mut rng);
            let err = regularized_br(op, inner, radius, &mp, &x)?
                .sub(&inner.eval(op, &x)?)
                .norm_h();
            sup_error = sup_error.max(err);
        }
        rows.push(ScanRow {
            radius,
            delta_r,
            tau_r: mp.tau_r,
            sup_error,
        });
    }
    let slope = if rows.iter().all(|r| r.sup_error > 0.0) && rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.radius).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
        Some(loglog_slope(&xs, &ys))
    } else {
        None
    };
    Ok(ScanTable { rows, slope })
}

/// Empirical Lipschitz estimate: max difference quotient of `spec` over sampled
/// pairs in the `alpha`-ball of the given radius, at separations spanning
/// several decades.
pub fn empirical_lipschitz(
    op: &SpectralOperator,
    spec: &DriftSpec,
    radius: f64,
    alpha: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be at least 1".into()));
    }
    let mut worst = 0.0_f64;
    for i in 0..n_pairs {
        let mut rng = stream_rng(seed, &[stream::LIP, i as u64]);
        let x = sample_in_ball(op, alpha, radius, &mut rng);
        let h = loop {
            let g = ModeField::from_raw(
                (0..op.n_modes())
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            let n = g.norm_h();
            if n > 1e-300 {
                break g.scaled(1.0 / n);
            }
        };
        // Log-uniform separation in [1e-3, 1e-1].
        let sep = 10f64.powf(-3.0 + 2.0 * rng.gen::<f64>());
        let y = x.add_scaled(sep, &h);
        let q = spec.eval(op, &y)?.sub(&spec.eval(op, &x)?).norm_h() / sep;
        worst = worst.max(q);
    }
    Ok(worst)
}
