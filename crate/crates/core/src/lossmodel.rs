//! Loss-based turbulence model: first-moment consistency diagnostics.
//!
//! A pure loss model predicts a K-independent rate for the first moment.
//! The diagonal of Φ₁ is constant in the Markovian limit only, so its relative
//! spread across the grid measures how badly the model fails.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TransverseGrid;
use crate::kernels::{phi1_compute, phi1_markovian};
use crate::states::{CoherentState, ThermalState};
use crate::turbulence::SpectrumModel;

/// Relative size of |mean| below which the spread is reported as infinite.
pub const MEAN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct LossDiagnostics {
    pub phi1_diag: Vec<Complex64>,
    pub mean_rate: Complex64,
    pub k_variation: f64,
    pub markovian: bool,
}

impl LossDiagnostics {
    pub fn from_diag(phi1_diag: Vec<Complex64>, markovian: bool) -> Self {
        let (mean_rate, k_variation) = spread(&phi1_diag);
        Self {
            phi1_diag,
            mean_rate,
            k_variation,
            markovian,
        }
    }
}

/// K-average and relative standard deviation of a diagonal.
fn spread(diag: &[Complex64]) -> (Complex64, f64) {
    if diag.is_empty() {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let mean = diag.iter().sum::<Complex64>() / diag.len() as f64;
    // a constant diagonal must give exactly zero, whatever the summation roundoff
    if diag.iter().all(|v| *v == diag[0]) {
        return (diag[0], 0.0);
    }
    let peak = diag.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if mean.norm() <= MEAN_FLOOR * peak {
        return (mean, f64::INFINITY);
    }
    let var = diag.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / diag.len() as f64;
    (mean, var.sqrt() / mean.norm())
}

/// Φ₁ diagonal at `z` and its spread across K.
pub fn first_moment_equation(
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
    z0: f64,
    markovian: bool,
) -> Result<LossDiagnostics> {
    if !(z > z0) {
        return Err(Error::InvalidInterval { z, z0 });
    }
    let kernel = if markovian {
        phi1_markovian(grid, model)?
    } else {
        phi1_compute(grid, model, z, z0)?
    };
    Ok(LossDiagnostics::from_diag(kernel.diag, markovian))
}

/// Displaced vacuum: W ∝ exp(-2‖α - Lζ‖²).
#[derive(Debug, Clone, PartialEq)]
pub struct LossyCoherent {
    pub center: Vec<Complex64>,
    pub loss: f64,
    pub covariance: ThermalState,
}

impl LossyCoherent {
    /// `Σ_K w |Lζ(K)|²`.
    pub fn mean_photon_number(&self) -> f64 {
        let w = self.covariance.weight;
        self.center.iter().map(|v| v.norm_sqr()).sum::<f64>() * w
    }
}

pub fn lossy_coherent_wigner(
    zeta: &CoherentState,
    grid: &TransverseGrid,
    loss: f64,
) -> Result<LossyCoherent> {
    if !(loss > 0.0 && loss <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "loss {loss} outside (0, 1]"
        )));
    }
    if zeta.zeta.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "coherent amplitude has {} modes, grid has {}",
            zeta.zeta.len(),
            grid.len()
        )));
    }
    Ok(LossyCoherent {
        center: zeta.zeta.iter().map(|v| v * loss).collect(),
        loss,
        covariance: ThermalState::vacuum(grid, 0.0),
    })
}
