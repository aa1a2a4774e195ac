//! Transverse wave-vector grid and the ◇-contraction algebra.
//!
//! Points sit at half-integer multiples of `delta_k`, so the grid is closed
//! under `K -> -K` and never contains `K = 0` itself. Every point is labelled
//! by an odd integer pair `(mx, my)` with `K = (mx, my) * delta_k / 2`; the
//! difference of two points is then an integer multiple of `delta_k` and
//! `|K|^2` is an integer multiple of `delta_k^2 / 4`. The kernels use these
//! integer labels as exact table keys.
//!
//! Continuum integrals `∫ d²k/(2π)²` become sums weighted by
//! `w = delta_k² / (2π)²`, and the identity kernel `(2π)² δ(K - K')` becomes
//! a diagonal matrix with entries `1/w`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransverseGrid {
    n_side: usize,
    delta_k: f64,
    k0: f64,
    points: Vec<[f64; 2]>,
}

impl TransverseGrid {
    pub fn new(n_side: usize, k_extent: f64, k0: f64) -> Result<Self> {
        if n_side < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_side must be at least 2, got {n_side}"
            )));
        }
        if !(k_extent > 0.0 && k_extent.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "k_extent must be positive, got {k_extent}"
            )));
        }
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "k0 must be positive, got {k0}"
            )));
        }
        let delta_k = 2.0 * k_extent / n_side as f64;
        let half = 0.5 * delta_k;
        let mut points = Vec::with_capacity(n_side * n_side);
        for ix in 0..n_side {
            for iy in 0..n_side {
                let (mx, my) = (lattice_coord(ix, n_side), lattice_coord(iy, n_side));
                points.push([mx as f64 * half, my as f64 * half]);
            }
        }
        Ok(Self {
            n_side,
            delta_k,
            k0,
            points,
        })
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    /// Number of grid points, `n_side²`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn k_extent(&self) -> f64 {
        0.5 * self.delta_k * self.n_side as f64
    }

    /// Optical wavenumber `2π/λ`.
    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    /// Contraction weight `delta_k² / (2π)²`.
    pub fn weight(&self) -> f64 {
        self.delta_k * self.delta_k / (4.0 * PI * PI)
    }

    /// Odd integer label `(mx, my)` of point `i`.
    pub fn lattice(&self, i: usize) -> (i64, i64) {
        let ix = i / self.n_side;
        let iy = i % self.n_side;
        (
            lattice_coord(ix, self.n_side),
            lattice_coord(iy, self.n_side),
        )
    }

    /// Point index for an odd integer label, if it lies on the grid.
    pub fn index_of(&self, mx: i64, my: i64) -> Option<usize> {
        let ix = axis_index(mx, self.n_side)?;
        let iy = axis_index(my, self.n_side)?;
        Some(ix * self.n_side + iy)
    }

    /// `|K_i|²` in units of `delta_k² / 4`.
    pub fn k2_units(&self, i: usize) -> i64 {
        let (mx, my) = self.lattice(i);
        mx * mx + my * my
    }

    pub fn k2(&self, i: usize) -> f64 {
        let [x, y] = self.points[i];
        x * x + y * y
    }

    /// Index of the point `-K_i`.
    pub fn negated(&self, i: usize) -> usize {
        let (mx, my) = self.lattice(i);
        self.index_of(-mx, -my)
            .expect("grid is closed under negation")
    }

    pub fn same_shape(&self, other: &TransverseGrid) -> bool {
        self.n_side == other.n_side && self.delta_k == other.delta_k && self.k0 == other.k0
    }
}

fn lattice_coord(i: usize, n: usize) -> i64 {
    2 * i as i64 - n as i64 + 1
}

fn axis_index(m: i64, n: usize) -> Option<usize> {
    let twice = m + n as i64 - 1;
    if twice < 0 || twice % 2 != 0 {
        return None;
    }
    let i = (twice / 2) as usize;
    (i < n).then_some(i)
}

/// Builds the zero-centered grid with `delta_k = 2 k_extent / n_side`.
pub fn build_grid(n_side: usize, k_extent: f64, k0: f64) -> Result<TransverseGrid> {
    TransverseGrid::new(n_side, k_extent, k0)
}

/// A two-point kernel realized on a grid, indexed `(point, point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearKernel {
    pub values: DMatrix<Complex64>,
    pub weight: f64,
    pub z_from: f64,
    pub z_to: f64,
    pub hermitian: bool,
}

impl BilinearKernel {
    pub fn new(values: DMatrix<Complex64>, weight: f64, z_from: f64, z_to: f64) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Dimension(format!(
                "kernel must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(Self {
            values,
            weight,
            z_from,
            z_to,
            hermitian: false,
        })
    }

    pub fn on_grid(grid: &TransverseGrid, values: DMatrix<Complex64>) -> Result<Self> {
        if values.nrows() != grid.len() {
            return Err(Error::Dimension(format!(
                "kernel side {} does not match grid size {}",
                values.nrows(),
                grid.len()
            )));
        }
        Self::new(values, grid.weight(), 0.0, 0.0)
    }

    /// Sets the Hermitian flag after checking `values(i,j) = conj(values(j,i))`.
    pub fn mark_hermitian(mut self, rel_tol: f64) -> Result<Self> {
        let dev = hermitian_deviation(&self.values);
        if dev > rel_tol {
            return Err(Error::Integrity(format!(
                "kernel is not Hermitian: relative deviation {dev:e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            values: self.values.adjoint(),
            weight: self.weight,
            z_from: self.z_from,
            z_to: self.z_to,
            hermitian: self.hermitian,
        }
    }

    /// Trace under the contraction measure, `Σ_i w · values(i,i)`.
    pub fn weighted_trace(&self) -> Complex64 {
        self.values.diagonal().iter().sum::<Complex64>() * self.weight
    }
}

/// `‖A - A†‖_F / ‖A‖_F` (zero for the zero matrix).
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// ◇-contraction `∫ A(K,K') B(K',K'') d²k'/(2π)²` as a weighted matrix product.
pub fn diamond(a: &BilinearKernel, b: &BilinearKernel) -> Result<BilinearKernel> {
    if a.dim() != b.dim() || a.weight != b.weight {
        return Err(Error::Dimension(format!(
            "cannot contract kernels of side {} (w={}) and {} (w={})",
            a.dim(),
            a.weight,
            b.dim(),
            b.weight
        )));
    }
    let values = (&a.values * &b.values) * Complex64::new(a.weight, 0.0);
    Ok(BilinearKernel {
        values,
        weight: a.weight,
        z_from: a.z_from.min(b.z_from),
        z_to: a.z_to.max(b.z_to),
        hermitian: false,
    })
}

/// Discrete `(2π)² δ(K - K')`: diagonal entries `1/w`.
pub fn grid_delta(grid: &TransverseGrid) -> BilinearKernel {
    let n = grid.len();
    let w = grid.weight();
    let values = DMatrix::from_diagonal_element(n, n, Complex64::new(1.0 / w, 0.0));
    BilinearKernel {
        values,
        weight: w,
        z_from: 0.0,
        z_to: 0.0,
        hermitian: true,
    }
}
