//! Diagonal self-adjoint operators on a real trigonometric basis of the torus.
//!
//! The linear part of every model here is a negative-definite diagonal
//! operator `A` with eigenvalues `-lambda_n`, `lambda_n > 0` nondecreasing.
//! States are truncations onto the first `n_modes` basis functions of
//! `L^2(0, 2*pi)`:
//!
//! * mode 0: the constant `1/sqrt(2*pi)` (frequency 0),
//! * frequency `+k`: `cos(k x)/sqrt(pi)`,
//! * frequency `-k`: `sin(k x)/sqrt(pi)`,
//!
//! ordered `0, +1, -1, +2, -2, ...` (ties in `|k|` broken by the positive
//! frequency). With this orthonormal basis the coefficient 2-norm equals the
//! `L^2` norm of the synthesized function, and fractional powers of `-A` act
//! diagonally: `||x||_{D((-A)^alpha)}^2 = sum_n lambda_n^{2 alpha} x_n^2`.
//!
//! The stock spectrum is the shifted fractional Laplacian
//! `lambda_n = |k(n)|^{2 sigma} + omega`. Its inverse power `(-A)^{-(1-delta)}`
//! is trace class (over the full, untruncated frequency ladder) if and only if
//! `delta < 1 - 1/(2 sigma)`; constructors enforce that gate so every
//! truncation is a faithful slice of an admissible infinite model.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A coefficient vector on the modal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    coeffs: Vec<f64>,
}

impl ModeField {
    /// Build a field, rejecting non-finite entries.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyInput("mode field"));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        Ok(Self { coeffs })
    }

    /// Internal constructor for freshly computed data.
    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![0.0; n],
        }
    }

    /// Unit coefficient on `mode`, scaled by `amplitude`.
    pub fn single_mode(n: usize, mode: usize, amplitude: f64) -> Result<Self> {
        if mode >= n {
            return Err(Error::InvalidParameter(format!(
                "mode index {mode} out of range for {n} modes"
            )));
        }
        let mut coeffs = vec![0.0; n];
        coeffs[mode] = amplitude;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Euclidean coefficient norm, i.e. the `L^2` norm of the synthesized function.
    pub fn norm_h(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ModeField) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scaled(&self, s: f64) -> ModeField {
        ModeField::from_raw(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `self + s * other`, element-wise.
    pub fn add_scaled(&self, s: f64, other: &ModeField) -> ModeField {
        debug_assert_eq!(self.dim(), other.dim());
        ModeField::from_raw(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &ModeField) -> ModeField {
        self.add_scaled(-1.0, other)
    }

    /// Midpoint of two fields.
    pub fn midpoint(&self, other: &ModeField) -> ModeField {
        debug_assert_eq!(self.dim(), other.dim());
        ModeField::from_raw(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        )
    }
}

/// How the eigenvalue ladder was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Spectrum {
    /// `lambda = |k|^{2 sigma} + omega` on the torus frequency ladder.
    TorusFractional { sigma: f64, omega: f64 },
    /// Caller-supplied eigenvalues (single-mode references, near-zero spectra, ...).
    Explicit,
}

/// A diagonal negative-definite operator together with its modal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    spectrum: Spectrum,
    delta: f64,
    eigenvalues: Vec<f64>,
    frequencies: Vec<i64>,
    grid_points: Vec<f64>,
    /// Row-major `grid_size x n_modes` table of basis values `e_n(x_j)`.
    basis: Vec<f64>,
}

/// Frequency of the n-th basis mode: 0, +1, -1, +2, -2, ...
fn frequency_of(n: usize) -> i64 {
    if n == 0 {
        0
    } else if n % 2 == 1 {
        n.div_ceil(2) as i64
    } else {
        -((n / 2) as i64)
    }
}

fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}

impl SpectralOperator {
    /// Shifted fractional Laplacian spectrum `lambda = |k|^{2 sigma} + omega`.
    pub fn torus_fractional(sigma: f64, omega: f64, n_modes: usize, delta: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be nonnegative, got {omega}"
            )));
        }
        if n_modes == 0 {
            return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
        }
        if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        let bound = 1.0 - 1.0 / (2.0 * sigma);
        if delta >= bound {
            return Err(Error::TraceClassGate {
                sigma,
                delta,
                bound,
            });
        }
        // The ordering starts at frequency 0, so the zero frequency is always
        // present and omega = 0 would make lambda_0 = 0.
        if omega == 0.0 {
            return Err(Error::ZeroFrequencyShift);
        }
        let eigenvalues: Vec<f64> = (0..n_modes)
            .map(|n| (frequency_of(n).unsigned_abs() as f64).powf(2.0 * sigma) + omega)
            .collect();
        Ok(Self::assemble(
            Spectrum::TorusFractional { sigma, omega },
            delta,
            eigenvalues,
        ))
    }

    /// Operator with caller-supplied eigenvalues on the standard basis.
    ///
    /// Positivity and monotonicity are enforced; the trace-class gate has no
    /// closed form for an arbitrary ladder and is the caller's responsibility.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, delta: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyInput("eigenvalues"));
        }
        if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        for pair in eigenvalues.windows(2) {
            if pair[1] < pair[0] {
                return Err(Error::InvalidParameter(
                    "eigenvalues must be nondecreasing".into(),
                ));
            }
        }
        if !eigenvalues.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be finite and strictly positive".into(),
            ));
        }
        Ok(Self::assemble(Spectrum::Explicit, delta, eigenvalues))
    }

    fn assemble(spectrum: Spectrum, delta: f64, eigenvalues: Vec<f64>) -> Self {
        let n_modes = eigenvalues.len();
        let grid_size = next_power_of_two(2 * n_modes);
        let grid_points: Vec<f64> = (0..grid_size)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / grid_size as f64)
            .collect();
        let frequencies: Vec<i64> = (0..n_modes).map(frequency_of).collect();
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let mut basis = vec![0.0; grid_size * n_modes];
        for (j, &x) in grid_points.iter().enumerate() {
            for (n, &k) in frequencies.iter().enumerate() {
                basis[j * n_modes + n] = if k == 0 {
                    inv_sqrt_2pi
                } else if k > 0 {
                    (k as f64 * x).cos() * inv_sqrt_pi
                } else {
                    ((-k) as f64 * x).sin() * inv_sqrt_pi
                };
            }
        }
        Self {
            spectrum,
            delta,
            eigenvalues,
            frequencies,
            grid_points,
            basis,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue (the spectral gap of `-A`).
    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Exponent of the stock fractional spectrum, if this operator has one.
    pub fn sigma(&self) -> Option<f64> {
        match self.spectrum {
            Spectrum::TorusFractional { sigma, .. } => Some(sigma),
            Spectrum::Explicit => None,
        }
    }

    pub fn omega(&self) -> Option<f64> {
        match self.spectrum {
            Spectrum::TorusFractional { omega, .. } => Some(omega),
            Spectrum::Explicit => None,
        }
    }

    pub fn frequencies(&self) -> &[i64] {
        &self.frequencies
    }

    pub fn grid_size(&self) -> usize {
        self.grid_points.len()
    }

    pub fn grid_points(&self) -> &[f64] {
        &self.grid_points
    }

    fn check_dim(&self, x: &ModeField) -> Result<()> {
        if x.dim() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Apply `e^{tA}`: multiply each coefficient by `e^{-lambda_n t}`.
    pub fn semigroup(&self, t: f64, x: &ModeField) -> Result<ModeField> {
        self.check_dim(x)?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "semigroup time must be >= 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(x.clone());
        }
        Ok(ModeField::from_raw(
            x.coeffs()
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, l)| c * (-l * t).exp())
                .collect(),
        ))
    }

    /// `||x||_{D((-A)^alpha)} = sqrt(sum lambda_n^{2 alpha} x_n^2)`.
    ///
    /// `alpha = 0` is the plain coefficient norm; negative `alpha` yields the
    /// corresponding smoothing norms and is permitted.
    pub fn fractional_norm(&self, alpha: f64, x: &ModeField) -> f64 {
        debug_assert_eq!(x.dim(), self.n_modes());
        if alpha == 0.0 {
            return x.norm_h();
        }
        x.coeffs()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| l.powf(2.0 * alpha) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// The parabolic smoothing quotient `t^beta ||(-A)^beta e^{tA} x|| / ||x||`.
    ///
    /// Always bounded by `smoothing_bound(beta) = (beta/e)^beta`, with equality
    /// in the single-mode case at `lambda t = beta`.
    pub fn smoothing_ratio(&self, beta: f64, t: f64, x: &ModeField) -> Result<f64> {
        self.check_dim(x)?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t must be positive, got {t}"
            )));
        }
        let denom = x.norm_h();
        if denom == 0.0 {
            return Err(Error::ZeroField);
        }
        let num = x
            .coeffs()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| {
                let w = l.powf(beta) * (-l * t).exp();
                w * w * c * c
            })
            .sum::<f64>()
            .sqrt();
        Ok(t.powf(beta) * num / denom)
    }

    /// Supremum of the smoothing quotient over all admissible spectra and states.
    pub fn smoothing_bound(beta: f64) -> f64 {
        (beta / std::f64::consts::E).powf(beta)
    }

    /// Synthesize grid values `u(x_j) = sum_n x_n e_n(x_j)` on the uniform torus
    /// grid of `grid_size()` points (the smallest power of two >= 2 * n_modes).
    pub fn to_grid(&self, x: &ModeField) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let n = self.n_modes();
        Ok(self
            .basis
            .chunks_exact(n)
            .map(|row| row.iter().zip(x.coeffs()).map(|(b, c)| b * c).sum())
            .collect())
    }

    /// Project grid values back onto the modes by the trapezoidal quadrature
    /// `c_n = (2 pi / M) sum_j u_j e_n(x_j)`.
    ///
    /// On this oversampled grid the quadrature is exact for band-limited data,
    /// so `from_grid(to_grid(x)) == x` up to round-off.
    pub fn from_grid(&self, values: &[f64]) -> Result<ModeField> {
        let m = self.grid_size();
        if values.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: values.len(),
            });
        }
        let n = self.n_modes();
        let weight = 2.0 * std::f64::consts::PI / m as f64;
        let mut coeffs = vec![0.0; n];
        for (j, &u) in values.iter().enumerate() {
            let row = &self.basis[j * n..(j + 1) * n];
            for (c, b) in coeffs.iter_mut().zip(row) {
                *c += u * b;
            }
        }
        for c in &mut coeffs {
            *c *= weight;
        }
        ModeField::new(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Fixed-step RK4 integrator for the decoupled linear system
    /// y_n' = -lambda_n y_n, used as an independent oracle for the semigroup.
    fn rk4_linear_decay(lambdas: &[f64], y0: &[f64], t: f64, steps: usize) -> Vec<f64> {
        let h = t / steps as f64;
        let mut y: Vec<f64> = y0.to_vec();
        for _ in 0..steps {
            for (yi, &l) in y.iter_mut().zip(lambdas) {
                let f = |v: f64| -l * v;
                let k1 = f(*yi);
                let k2 = f(*yi + 0.5 * h * k1);
                let k3 = f(*yi + 0.5 * h * k2);
                let k4 = f(*yi + h * k3);
                *yi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        y
    }

    #[test]
    fn torus_spectrum_small_case() {
        let op = SpectralOperator::torus_fractional(1.0, 1.0, 3, 0.4).unwrap();
        assert_eq!(op.eigenvalues(), &[1.0, 2.0, 2.0]);
        assert_eq!(op.frequencies(), &[0, 1, -1]);
        assert_eq!(op.lambda0(), 1.0);
    }

    #[test]
    fn trace_class_gate_rejects_sigma_half() {
        // sigma = 1/2 gives gate bound 0, so no delta in (0,1) is admissible.
        let err = SpectralOperator::torus_fractional(0.5, 1.0, 4, 0.1).unwrap_err();
        match err {
            Error::TraceClassGate { bound, .. } => assert_relative_eq!(bound, 0.0),
            other => panic!("expected trace-class gate error, got {other:?}"),
        }
    }

    #[test]
    fn gate_boundary_is_exclusive() {
        // sigma = 1 gives bound 0.5; delta = 0.5 must be rejected, 0.49 accepted.
        assert!(SpectralOperator::torus_fractional(1.0, 1.0, 2, 0.5).is_err());
        assert!(SpectralOperator::torus_fractional(1.0, 1.0, 2, 0.49).is_ok());
    }

    #[test]
    fn zero_shift_is_rejected() {
        let err = SpectralOperator::torus_fractional(1.0, 0.0, 5, 0.4).unwrap_err();
        assert!(matches!(err, Error::ZeroFrequencyShift));
    }

    #[test]
    fn explicit_spectrum_validates_order_and_sign() {
        assert!(SpectralOperator::from_eigenvalues(vec![1.0, 4.0], 0.4).is_ok());
        assert!(SpectralOperator::from_eigenvalues(vec![4.0, 1.0], 0.4).is_err());
        assert!(SpectralOperator::from_eigenvalues(vec![0.0, 1.0], 0.4).is_err());
        assert!(SpectralOperator::from_eigenvalues(vec![], 0.4).is_err());
    }

    #[test]
    fn semigroup_identity_at_zero_time() {
        let op = SpectralOperator::torus_fractional(1.0, 1.0, 5, 0.4).unwrap();
        let x = ModeField::new(vec![1.0, -2.0, 3.0, 0.5, -0.25]).unwrap();
        assert_eq!(op.semigroup(0.0, &x).unwrap(), x);
    }

    #[test]
    fn semigroup_halves_at_log_two_for_unit_spectrum() {
        let op = SpectralOperator::from_eigenvalues(vec![1.0, 1.0, 1.0], 0.4).unwrap();
        let x = ModeField::new(vec![2.0, -4.0, 6.0]).unwrap();
        let y = op.semigroup(std::f64::consts::LN_2, &x).unwrap();
        for (a, b) in y.coeffs().iter().zip(x.coeffs()) {
            assert_relative_eq!(*a, 0.5 * b, max_relative = 1e-14);
        }
    }

    #[test]
    fn semigroup_matches_ode_oracle() {
        // Oracle: RK4 on y' = -lambda y with a step fine enough for ~1e-12 accuracy.
        let op = SpectralOperator::from_eigenvalues(vec![1.0, 4.0], 0.3).unwrap();
        let x = ModeField::new(vec![2.0, 2.0]).unwrap();
        let got = op.semigroup(0.25, &x).unwrap();
        let want = rk4_linear_decay(&[1.0, 4.0], &[2.0, 2.0], 0.25, 4000);
        for (g, w) in got.coeffs().iter().zip(&want) {
            assert_relative_eq!(g, w, max_relative = 1e-12);
        }
    }

    #[test]
    fn semigroup_composes() {
        let op = SpectralOperator::torus_fractional(0.75, 0.3, 9, 0.2).unwrap();
        let x = ModeField::new((0..9).map(|i| (i as f64).sin() + 0.2).collect()).unwrap();
        let once = op.semigroup(0.7, &x).unwrap();
        let twice = op.semigroup(0.3, &op.semigroup(0.4, &x).unwrap()).unwrap();
        for (a, b) in once.coeffs().iter().zip(twice.coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn fractional_norm_simple_values() {
        let op = SpectralOperator::from_eigenvalues(vec![1.0, 4.0], 0.4).unwrap();
        let x = ModeField::new(vec![3.0, 4.0]).unwrap();
        // alpha = 0: plain norm.
        assert_relative_eq!(op.fractional_norm(0.0, &x), 5.0);
        // alpha = 1/2: sqrt(1*9 + 4*16) = sqrt(73).
        assert_relative_eq!(
            op.fractional_norm(0.5, &x),
            73.0_f64.sqrt(),
            max_relative = 1e-14
        );
        // alpha = 1: sqrt(1*9 + 16*16) = sqrt(265).
        assert_relative_eq!(
            op.fractional_norm(1.0, &x),
            265.0_f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn smoothing_ratio_closed_forms() {
        // Single mode lambda = 1, t = 1, beta = 1: ratio = e^{-1}, and the
        // bound (1/e)^1 is attained because lambda t = beta.
        let op = SpectralOperator::from_eigenvalues(vec![1.0], 0.4).unwrap();
        let x = ModeField::new(vec![1.0]).unwrap();
        let r = op.smoothing_ratio(1.0, 1.0, &x).unwrap();
        assert_relative_eq!(r, (-1.0_f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(
            r,
            SpectralOperator::smoothing_bound(1.0),
            max_relative = 1e-14
        );

        // Single mode lambda = 2, t = 0.25, beta = 0.5:
        // ratio = 0.25^0.5 * 2^0.5 * e^{-0.5} = sqrt(0.5) e^{-0.5}, again the
        // bound (0.5/e)^0.5 since lambda t = beta.
        let op = SpectralOperator::from_eigenvalues(vec![2.0], 0.4).unwrap();
        let r = op.smoothing_ratio(0.5, 0.25, &x).unwrap();
        assert_relative_eq!(r, (0.5_f64).sqrt() * (-0.5_f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(
            r,
            SpectralOperator::smoothing_bound(0.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn smoothing_ratio_rejects_zero_field() {
        let op = SpectralOperator::from_eigenvalues(vec![1.0, 2.0], 0.4).unwrap();
        let err = op
            .smoothing_ratio(0.5, 1.0, &ModeField::zeros(2))
            .unwrap_err();
        assert!(matches!(err, Error::ZeroField));
    }

    #[test]
    fn grid_size_is_smallest_power_of_two_covering_twice_the_modes() {
        for (n, m) in [(1, 2), (2, 4), (3, 8), (4, 8), (16, 32), (17, 64)] {
            let op = SpectralOperator::from_eigenvalues(vec![1.0; n], 0.4).unwrap();
            assert_eq!(op.grid_size(), m, "n_modes = {n}");
        }
    }

    #[test]
    fn constant_mode_synthesizes_to_constant_grid() {
        let op = SpectralOperator::torus_fractional(1.0, 1.0, 4, 0.4).unwrap();
        let c = 3.0;
        let x = ModeField::single_mode(4, 0, c).unwrap();
        let grid = op.to_grid(&x).unwrap();
        let expected = c / (2.0 * std::f64::consts::PI).sqrt();
        for v in grid {
            assert_relative_eq!(v, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn single_cosine_mode_matches_pointwise_evaluation() {
        let op = SpectralOperator::torus_fractional(1.0, 1.0, 5, 0.4).unwrap();
        // Mode 3 is frequency +2 (ordering 0, +1, -1, +2, -2): cos(2x)/sqrt(pi).
        let x = ModeField::single_mode(5, 3, 1.5).unwrap();
        let grid = op.to_grid(&x).unwrap();
        for (j, &xj) in op.grid_points().iter().enumerate() {
            let expected = 1.5 * (2.0 * xj).cos() / std::f64::consts::PI.sqrt();
            assert_relative_eq!(grid[j], expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn grid_round_trip_is_identity() {
        let op = SpectralOperator::torus_fractional(0.8, 0.5, 7, 0.3).unwrap();
        let x = ModeField::new(vec![0.3, -1.2, 0.8, 2.0, -0.1, 0.05, 1.1]).unwrap();
        let back = op.from_grid(&op.to_grid(&x).unwrap()).unwrap();
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn from_grid_rejects_wrong_length() {
        let op = SpectralOperator::torus_fractional(1.0, 1.0, 4, 0.4).unwrap();
        assert!(matches!(
            op.from_grid(&[0.0; 5]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 8,
                got: 5
            }
        ));
    }

    #[test]
    fn parseval_between_grid_and_coefficients() {
        let op = SpectralOperator::torus_fractional(1.0, 1.0, 8, 0.4).unwrap();
        let x =
            ModeField::new((0..8).map(|i| ((3 * i + 1) as f64 * 0.37).cos()).collect()).unwrap();
        let grid = op.to_grid(&x).unwrap();
        let w = 2.0 * std::f64::consts::PI / op.grid_size() as f64;
        let grid_norm2: f64 = grid.iter().map(|v| v * v * w).sum();
        assert_relative_eq!(grid_norm2, x.norm_h().powi(2), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn torus_eigenvalues_are_positive_and_nondecreasing(
            sigma in 0.55_f64..3.0,
            omega in 0.01_f64..5.0,
            n_modes in 1_usize..40,
        ) {
            let delta = 0.5 * (1.0 - 1.0 / (2.0 * sigma));
            let op = SpectralOperator::torus_fractional(sigma, omega, n_modes, delta).unwrap();
            prop_assert_eq!(op.lambda0(), omega);
            for pair in op.eigenvalues().windows(2) {
                prop_assert!(pair[0] > 0.0);
                prop_assert!(pair[1] >= pair[0]);
            }
        }

        #[test]
        fn semigroup_is_a_contraction(
            t in 0.0_f64..5.0,
            coeffs in prop::collection::vec(-10.0_f64..10.0, 1..12),
        ) {
            let n = coeffs.len();
            let op = SpectralOperator::torus_fractional(1.0, 0.7, n, 0.4).unwrap();
            let x = ModeField::new(coeffs).unwrap();
            let y = op.semigroup(t, &x).unwrap();
            prop_assert!(y.norm_h() <= x.norm_h() + 1e-12);
        }

        #[test]
        fn smoothing_quotient_respects_universal_bound(
            beta in 0.05_f64..2.0,
            t in 0.01_f64..4.0,
            coeffs in prop::collection::vec(-5.0_f64..5.0, 1..10),
        ) {
            let n = coeffs.len();
            let op = SpectralOperator::torus_fractional(1.0, 0.5, n, 0.4).unwrap();
            let x = ModeField::new(coeffs).unwrap();
            prop_assume!(x.norm_h() > 1e-9);
            let r = op.smoothing_ratio(beta, t, &x).unwrap();
            prop_assert!(r <= SpectralOperator::smoothing_bound(beta) * (1.0 + 1e-12));
        }

        #[test]
        fn grid_round_trip_property(
            coeffs in prop::collection::vec(-20.0_f64..20.0, 1..20),
        ) {
            let n = coeffs.len();
            let op = SpectralOperator::torus_fractional(1.0, 1.0, n, 0.4).unwrap();
            let x = ModeField::new(coeffs).unwrap();
            let back = op.from_grid(&op.to_grid(&x).unwrap()).unwrap();
            for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }
}
