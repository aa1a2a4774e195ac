//! Gaussian Wigner functionals on the grid.
//!
//! A thermal state `W ∝ exp(-2 α*◇Θ◇α)` is stored through its inverse kernel
//! `Θ⁻¹`, which is the primary object: `½Θ⁻¹(K',K) = ⟨α*(K) α(K')⟩`.
//! Symmetric ordering puts the vacuum at `Θ⁻¹ = (2π)²δ`, i.e. `1/w` on the
//! diagonal, and the occupation of a discrete mode is `w·⟨α*α⟩(K,K) - ½`.
//!
//! The functional normalization `𝒩₀ det{Θ}` and the phase-space cardinality
//! `Ω` are formal constants that never enter a computed moment.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{hermitian_deviation, TransverseGrid};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub theta_inv: DMatrix<Complex64>,
    /// Contraction weight of the grid the state lives on.
    pub weight: f64,
    pub z: f64,
}

impl ThermalState {
    /// Validates Hermiticity and positive semidefiniteness.
    pub fn new(theta_inv: DMatrix<Complex64>, weight: f64, z: f64) -> Result<Self> {
        let state = Self::new_unchecked(theta_inv, weight, z)?;
        let dev = hermitian_deviation(&state.theta_inv);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!(
                "inverse kernel is not Hermitian (relative deviation {dev:e})"
            )));
        }
        let (lo, hi) = state.eigen_range();
        if lo < -PSD_TOL * hi.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "inverse kernel is not positive semidefinite (eigenvalues in [{lo:e}, {hi:e}])"
            )));
        }
        Ok(state)
    }

    /// Shape checks only; used for evolved kernels whose positivity is
    /// tracked by a watchdog instead of enforced.
    pub fn new_unchecked(theta_inv: DMatrix<Complex64>, weight: f64, z: f64) -> Result<Self> {
        if theta_inv.nrows() != theta_inv.ncols() {
            return Err(Error::Dimension("inverse kernel must be square".into()));
        }
        if !(weight > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight must be positive, got {weight}"
            )));
        }
        Ok(Self {
            theta_inv,
            weight,
            z,
        })
    }

    /// Vacuum: `Θ⁻¹ = (2π)²δ`.
    pub fn vacuum(grid: &TransverseGrid, z: f64) -> Self {
        let n = grid.len();
        let w = grid.weight();
        Self {
            theta_inv: DMatrix::from_diagonal_element(n, n, Complex64::new(1.0 / w, 0.0)),
            weight: w,
            z,
        }
    }

    /// Rank-one inverse kernel of a classical coherent field `g`:
    /// `½Θ⁻¹(K',K) = g*(K) g(K')`.
    pub fn from_field(field: &[Complex64], weight: f64, z: f64) -> Result<Self> {
        let n = field.len();
        let m = DMatrix::from_fn(n, n, |b, a| field[a].conj() * field[b] * 2.0);
        Self::new(m, weight, z)
    }

    pub fn dim(&self) -> usize {
        self.theta_inv.nrows()
    }

    /// `Σ_K w Θ⁻¹(K,K)`.
    pub fn weighted_trace(&self) -> f64 {
        self.theta_inv.diagonal().iter().map(|v| v.re).sum::<f64>() * self.weight
    }

    /// Smallest and largest eigenvalue of the Hermitian part of Θ⁻¹.
    pub fn eigen_range(&self) -> (f64, f64) {
        let herm = (&self.theta_inv + self.theta_inv.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigenvalues();
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// The kernel Θ itself, from `Θ ◇ Θ⁻¹ = (2π)²δ`.
    pub fn theta(&self) -> Result<DMatrix<Complex64>> {
        let inv = self
            .theta_inv
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("inverse kernel is singular".into()))?;
        let w2 = self.weight * self.weight;
        Ok(inv / Complex64::new(w2, 0.0))
    }

    /// Mean occupation of each discrete mode, with the vacuum ½ removed.
    pub fn photon_numbers(&self) -> Vec<f64> {
        self.theta_inv
            .diagonal()
            .iter()
            .map(|v| 0.5 * v.re * self.weight - 0.5)
            .collect()
    }

    /// `U Θ⁻¹ U†` for a plain matrix `U`.
    pub fn transformed(&self, u: &DMatrix<Complex64>) -> Self {
        Self {
            theta_inv: u * &self.theta_inv * u.adjoint(),
            weight: self.weight,
            z: self.z,
        }
    }
}

/// Diagonal thermal state with the given per-mode occupations.
pub fn thermal_from_modes(grid: &TransverseGrid, occupations: &[f64]) -> Result<ThermalState> {
    if occupations.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} occupations for {} grid points",
            occupations.len(),
            grid.len()
        )));
    }
    if let Some(bad) = occupations.iter().find(|n| !(**n >= 0.0 && n.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "occupations must be finite and non-negative, got {bad}"
        )));
    }
    let w = grid.weight();
    let diag: Vec<Complex64> = occupations
        .iter()
        .map(|n| Complex64::new((2.0 * n + 1.0) / w, 0.0))
        .collect();
    let n = grid.len();
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    debug_assert_eq!(m.nrows(), n);
    Ok(ThermalState {
        theta_inv: m,
        weight: w,
        z: 0.0,
    })
}

/// `½Θ⁻¹`.
pub fn second_moment(state: &ThermalState) -> DMatrix<Complex64> {
    &state.theta_inv * Complex64::new(0.5, 0.0)
}

/// One field factor in a moment `⟨α*(a) … α(b) …⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Conj(usize),
    Plain(usize),
}

/// Gaussian moment of order up to 4 from Wick pairings of `½Θ⁻¹`.
///
/// Odd orders and unbalanced `α*`/`α` counts vanish and return exact zero.
pub fn gaussian_moment(theta_inv: &DMatrix<Complex64>, factors: &[Factor]) -> Result<Complex64> {
    if factors.len() > 4 {
        return Err(Error::InvalidArgument(format!(
            "moments above order 4 are not supported (order {})",
            factors.len()
        )));
    }
    let n = theta_inv.nrows();
    let mut conj = Vec::new();
    let mut plain = Vec::new();
    for f in factors {
        match *f {
            Factor::Conj(i) => conj.push(i),
            Factor::Plain(i) => plain.push(i),
        }
    }
    if let Some(i) = conj.iter().chain(&plain).find(|i| **i >= n) {
        return Err(Error::InvalidArgument(format!(
            "mode index {i} out of range"
        )));
    }
    if conj.len() != plain.len() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let pair = |a: usize, b: usize| theta_inv[(b, a)] * 0.5;
    Ok(match conj.len() {
        0 => Complex64::new(1.0, 0.0),
        1 => pair(conj[0], plain[0]),
        _ => {
            pair(conj[0], plain[0]) * pair(conj[1], plain[1])
                + pair(conj[0], plain[1]) * pair(conj[1], plain[0])
        }
    })
}

/// Coherent-state parameter function ζ(K).
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentState {
    pub zeta: Vec<Complex64>,
}

impl CoherentState {
    pub fn new(zeta: Vec<Complex64>) -> Result<Self> {
        if zeta.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument(
                "coherent amplitude must be finite".into(),
            ));
        }
        Ok(Self { zeta })
    }

    /// `‖ζ‖² = Σ_K w |ζ(K)|²`.
    pub fn norm_sqr(&self, weight: f64) -> f64 {
        self.zeta.iter().map(|v| v.norm_sqr()).sum::<f64>() * weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, grid_delta};

    #[test]
    fn equal_occupation_is_scaled_delta() {
        let g = build_grid(3, 1.0, 1.0).unwrap();
        let s = thermal_from_modes(&g, &[2.0; 9]).unwrap();
        let d = grid_delta(&g);
        assert!((&s.theta_inv - &d.values * Complex64::new(5.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_occupation_is_vacuum() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let s = thermal_from_modes(&g, &[0.0; 4]).unwrap();
        assert_eq!(s.theta_inv, ThermalState::vacuum(&g, 0.0).theta_inv);
        assert!(s.photon_numbers().iter().all(|n| n.abs() < 1e-12));
    }

    #[test]
    fn single_hot_mode() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let s = thermal_from_modes(&g, &[0.0, 3.0, 0.0, 0.0]).unwrap();
        let w = g.weight();
        assert!((s.theta_inv[(1, 1)].re - 7.0 / w).abs() < 1e-9);
        assert!((s.theta_inv[(0, 0)].re - 1.0 / w).abs() < 1e-9);
        assert!((s.photon_numbers()[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_occupation_rejected() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        assert!(matches!(
            thermal_from_modes(&g, &[0.0, -1.0, 0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn second_moment_is_half() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let w = g.weight();
        let two = DMatrix::from_diagonal_element(4, 4, Complex64::new(2.0 / w, 0.0));
        let s = ThermalState::new(two, w, 0.0).unwrap();
        let m = second_moment(&s);
        assert_eq!(m, grid_delta(&g).values);
        let tr: Complex64 = m.diagonal().iter().sum::<Complex64>() * w;
        assert!((tr.re - 0.5 * s.weighted_trace()).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::from_diagonal_element(2, 2, Complex64::new(1.0, 0.0));
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(ThermalState::new(m, 1.0, 0.0).is_err());
    }

    #[test]
    fn moment_orders() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.3, 0.4),
                Complex64::new(0.3, -0.4),
                Complex64::new(1.0, 0.0),
            ],
        );
        let second = gaussian_moment(&m, &[Factor::Conj(0), Factor::Plain(1)]).unwrap();
        assert_eq!(second, m[(1, 0)] * 0.5);
        let odd =
            gaussian_moment(&m, &[Factor::Conj(0), Factor::Plain(1), Factor::Plain(0)]).unwrap();
        assert_eq!(odd, Complex64::new(0.0, 0.0));
        let one = DMatrix::from_element(1, 1, Complex64::new(3.0, 0.0));
        let c = 1.5;
        let fourth = gaussian_moment(
            &one,
            &[
                Factor::Conj(0),
                Factor::Plain(0),
                Factor::Conj(0),
                Factor::Plain(0),
            ],
        )
        .unwrap();
        assert!((fourth.re - 2.0 * c * c).abs() < 1e-14);
        assert!(gaussian_moment(&one, &[Factor::Conj(0); 6]).is_err());
    }

    #[test]
    fn theta_is_inverse_under_measure() {
        let g = build_grid(2, 1.0, 1.0).unwrap();
        let s = thermal_from_modes(&g, &[0.5, 1.0, 2.0, 0.0]).unwrap();
        let theta = s.theta().unwrap();
        let w = s.weight;
        let prod = &theta * &s.theta_inv * Complex64::new(w, 0.0);
        assert!((prod - grid_delta(&g).values).norm() / grid_delta(&g).values.norm() < 1e-12);
    }
}
