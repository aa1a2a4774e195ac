//! Classical Monte-Carlo reference: correlated random media, split-step
//! propagation of the paraxial field through them, and ensemble mutual
//! coherence estimates to compare with the second-moment evolution.
//!
//! Conventions match the kernels: `⟨ñ(x₁)ñ(x₂)⟩ = ∫ Φn(k) e^{-ik·(x₁-x₂)} d³k/(2π)³`,
//! `g(X) = ∫ G(K) e^{-iK·X} d²k/(2π)²`, and `G = exp(iz|K|²/2k) G_c`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::evolve::EvolutionResult;
use crate::grid::TransverseGrid;
use crate::turbulence::{longitudinal_correlation_unit, SpectrumModel, SpectrumVariant};

pub const NORM_TOL: f64 = 1e-10;
/// MCF differences below this fraction of the largest entry count as zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// A real refractive-index realization on a periodic box.
///
/// `values[(iz * nx + ix) * ny + iy]`; slabs of constant z are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium3D {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub mean: f64,
    /// Largest discarded imaginary part relative to the largest real value.
    pub imag_residue: f64,
    pub thin_screen: bool,
}

impl Medium3D {
    /// Wraps explicit values, e.g. a hand-built screen.
    pub fn from_values(dims: [usize; 3], spacings: [f64; 3], values: Vec<f64>) -> Result<Self> {
        check_box(dims, spacings)?;
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::Dimension(format!(
                "{} values for a {}x{}x{} box",
                values.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
            dx: spacings[0],
            dy: spacings[1],
            dz: spacings[2],
            values,
            seed: 0,
            stream: 0,
            mean,
            imag_residue: 0.0,
            thin_screen: false,
        })
    }

    pub fn slab(&self, iz: usize) -> &[f64] {
        let s = self.nx * self.ny;
        &self.values[iz * s..(iz + 1) * s]
    }

    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.values[(iz * self.nx + ix) * self.ny + iy]
    }

    /// Whether `dz ≤ l0/4`.
    pub fn resolves(&self, model: &SpectrumModel) -> bool {
        self.dz <= model.inner_scale / 4.0
    }
}

fn check_box(dims: [usize; 3], spacings: [f64; 3]) -> Result<()> {
    if dims.iter().any(|d| *d < 4) {
        return Err(Error::InvalidArgument(format!(
            "medium needs at least 4 points per axis, got {dims:?}"
        )));
    }
    if spacings.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "medium spacings must be positive, got {spacings:?}"
        )));
    }
    Ok(())
}

/// Signed FFT frequency index of bin `i` out of `n`.
fn signed_bin(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Deterministic sample for `(seed, stream 0)`.
pub fn sample_medium(
    model: &SpectrumModel,
    dims: [usize; 3],
    spacings: [f64; 3],
    seed: u64,
) -> Result<Medium3D> {
    sample_medium_with(model, dims, spacings, seed, 0, false)
}

/// Spectral synthesis: white noise, filtered by `sqrt(Φn ΔV / (2π)³)`.
///
/// With `thin_screen`, every slab is drawn from `Φn(q, 0)` independently,
/// i.e. the medium is delta-correlated along z on the scale of `dz`.
pub fn sample_medium_with(
    model: &SpectrumModel,
    dims: [usize; 3],
    spacings: [f64; 3],
    seed: u64,
    stream: u64,
    thin_screen: bool,
) -> Result<Medium3D> {
    check_box(dims, spacings)?;
    let model = model.validated()?;
    if model.variant == SpectrumVariant::Kolmogorov {
        return Err(Error::InvalidModel(
            "the Kolmogorov spectrum is singular at k = 0; use von_karman or tatarskii".into(),
        ));
    }
    let [nx, ny, nz] = dims;
    let total = nx * ny * nz;
    let mut medium = Medium3D {
        nx,
        ny,
        nz,
        dx: spacings[0],
        dy: spacings[1],
        dz: spacings[2],
        values: vec![0.0; total],
        seed,
        stream,
        mean: 0.0,
        imag_residue: 0.0,
        thin_screen,
    };
    if model.cn2 == 0.0 {
        return Ok(medium);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut data: Vec<Complex64> = (0..total)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    fft3(&mut data, dims, &mut planner, false);

    let dkx = 2.0 * PI / (nx as f64 * spacings[0]);
    let dky = 2.0 * PI / (ny as f64 * spacings[1]);
    let dkz = 2.0 * PI / (nz as f64 * spacings[2]);
    let cell = dkx * dky * dkz / (8.0 * PI * PI * PI) / total as f64;
    for iz in 0..nz {
        let kz = signed_bin(iz, nz) as f64 * dkz;
        for ix in 0..nx {
            let kx = signed_bin(ix, nx) as f64 * dkx;
            for iy in 0..ny {
                let ky = signed_bin(iy, ny) as f64 * dky;
                let kp2 = kx * kx + ky * ky;
                let kz_eff = if thin_screen { 0.0 } else { kz };
                let psd = if kp2 + kz_eff * kz_eff == 0.0 && !model.finite_at_origin() {
                    0.0
                } else {
                    model.cn2 * model.psd_unit(kp2, kz_eff)
                };
                data[(iz * nx + ix) * ny + iy] *= (psd * cell).sqrt();
            }
        }
    }
    fft3(&mut data, dims, &mut planner, true);

    let scale = data.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let imag = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    medium.imag_residue = if scale > 0.0 { imag / scale } else { 0.0 };
    medium.values = data.iter().map(|c| c.re).collect();
    medium.mean = medium.values.iter().sum::<f64>() / total as f64;
    Ok(medium)
}

/// Unnormalized 3-D transform, axis by axis.
fn fft3(data: &mut [Complex64], dims: [usize; 3], planner: &mut FftPlanner<f64>, inverse: bool) {
    let [nx, ny, nz] = dims;
    // layout index = (iz * nx + ix) * ny + iy
    let strides = [ny, 1, nx * ny];
    for axis in 0..3 {
        let n = dims[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride = strides[axis];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for iz in 0..nz {
            for ix in 0..nx {
                for iy in 0..ny {
                    let idx = [ix, iy, iz];
                    if idx[axis] != 0 {
                        continue;
                    }
                    let base = (iz * nx + ix) * ny + iy;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Co-propagating field spectrum `G_c` on the transverse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub gc: Vec<Complex64>,
    pub z: f64,
    /// Largest relative change of `Σ w |G|²` seen during propagation.
    pub norm_drift: f64,
    /// Fraction of the norm scattered outside the grid window.
    pub leakage: f64,
}

impl FieldRealization {
    pub fn new(gc: Vec<Complex64>, z: f64) -> Result<Self> {
        if gc.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("field must be finite".into()));
        }
        Ok(Self {
            gc,
            z,
            norm_drift: 0.0,
            leakage: 0.0,
        })
    }

    /// Normalized Gaussian beam `exp(-|K|²/2σ²)` with `Σ w |G|² = 1`.
    pub fn gaussian(grid: &TransverseGrid, sigma: f64, z: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beam width must be positive, got {sigma}"
            )));
        }
        let mut gc: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new((-grid.k2(i) / (2.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        let norm = (gc.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.weight()).sqrt();
        for v in &mut gc {
            *v /= norm;
        }
        Self::new(gc, z)
    }

    pub fn norm_sqr(&self, weight: f64) -> f64 {
        self.gc.iter().map(|v| v.norm_sqr()).sum::<f64>() * weight
    }
}

/// Transverse transforms between `G(K)` on the grid and `g(X)` on the
/// matching periodic position grid `X = p·2π/(n δk)`.
#[derive(Clone)]
pub struct SplitStep {
    n: usize,
    weight: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Half-cell offset of the odd-integer lattice, as a position phase.
    modulation: Vec<Complex64>,
    /// FFT bin of each grid column.
    bins: Vec<usize>,
}

impl std::fmt::Debug for SplitStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SplitStep").field("n", &self.n).finish()
    }
}

impl SplitStep {
    pub fn new(grid: &TransverseGrid) -> Self {
        let n = grid.n_side();
        let mut planner = FftPlanner::<f64>::new();
        let frac = if n % 2 == 0 { 0.5 } else { 0.0 };
        let modulation = (0..n)
            .map(|p| Complex64::from_polar(1.0, -2.0 * PI * frac * p as f64 / n as f64))
            .collect();
        let half = n / 2;
        let bins = (0..n).map(|j| (j + n - half) % n).collect();
        Self {
            n,
            weight: grid.weight(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            modulation,
            bins,
        }
    }

    /// Position spacing of the transverse grid, `2π / (n δk)`.
    pub fn position_spacing(grid: &TransverseGrid) -> f64 {
        2.0 * PI / (grid.n_side() as f64 * grid.delta_k())
    }

    fn transform2(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for row in data.chunks_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            fft.process_with_scratch(&mut col, &mut scratch);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }

    /// `g(X_p) = Σ_K w G(K) e^{-iK·X_p}`.
    pub fn to_position(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for jx in 0..n {
            for jy in 0..n {
                data[self.bins[jx] * n + self.bins[jy]] = spectrum[jx * n + jy];
            }
        }
        self.transform2(&mut data, &self.fwd);
        for px in 0..n {
            for py in 0..n {
                data[px * n + py] *= self.modulation[px] * self.modulation[py] * self.weight;
            }
        }
        data
    }

    /// `G(K) = Σ_p dx² g(X_p) e^{iK·X_p}`.
    pub fn to_spectrum(&self, position: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let cell = 1.0 / (self.weight * (n * n) as f64);
        let mut data: Vec<Complex64> = position.to_vec();
        for px in 0..n {
            for py in 0..n {
                data[px * n + py] *= (self.modulation[px] * self.modulation[py]).conj();
            }
        }
        self.transform2(&mut data, &self.inv);
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for jx in 0..n {
            for jy in 0..n {
                out[jx * n + jy] = data[self.bins[jx] * n + self.bins[jy]] * cell;
            }
        }
        out
    }
}

/// The grid embedded in a lattice about twice as wide with the same `δk`.
///
/// Propagation runs on this lattice so that the periodic transverse box does
/// not fold large momentum transfers back onto the grid window.
pub fn padded_grid(grid: &TransverseGrid) -> TransverseGrid {
    let n = grid.n_side();
    let ext = if n % 2 == 0 { 2 * n } else { 2 * n + 1 };
    TransverseGrid::new(ext, 0.5 * grid.delta_k() * ext as f64, grid.k0())
        .expect("a valid grid stays valid when widened")
}

/// Transverse point count and spacing of the medium matching `grid`.
pub fn medium_box(grid: &TransverseGrid) -> (usize, f64) {
    let ext = padded_grid(grid);
    (ext.n_side(), SplitStep::position_spacing(&ext))
}

/// Strang split-step propagation over `distance` using consecutive medium
/// slabs of thickness `dz`, starting at slab 0.
pub fn propagate_classical(
    initial: &FieldRealization,
    medium: &Medium3D,
    grid: &TransverseGrid,
    distance: f64,
) -> Result<FieldRealization> {
    propagate_with(
        &SplitStep::new(&padded_grid(grid)),
        initial,
        medium,
        grid,
        distance,
    )
}

/// As [`propagate_classical`], reusing a stepper built on [`padded_grid`].
pub fn propagate_with(
    stepper: &SplitStep,
    initial: &FieldRealization,
    medium: &Medium3D,
    grid: &TransverseGrid,
    distance: f64,
) -> Result<FieldRealization> {
    if initial.gc.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "field has {} entries, grid has {}",
            initial.gc.len(),
            grid.len()
        )));
    }
    let ext = padded_grid(grid);
    let n = ext.n_side();
    if stepper.n != n {
        return Err(Error::Dimension(format!(
            "stepper is {}x{}, padded grid is {n}x{n}",
            stepper.n, stepper.n
        )));
    }
    let dx = SplitStep::position_spacing(&ext);
    if medium.nx != n
        || medium.ny != n
        || (medium.dx - dx).abs() > 1e-12 * dx
        || (medium.dy - dx).abs() > 1e-12 * dx
    {
        return Err(Error::Dimension(format!(
            "medium transverse box {}x{} at ({}, {}) does not match {n}x{n} at {dx}",
            medium.nx, medium.ny, medium.dx, medium.dy
        )));
    }
    if !(distance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be >= 0, got {distance}"
        )));
    }
    let steps = (distance / medium.dz).round() as usize;
    if (steps as f64 * medium.dz - distance).abs() > 1e-9 * distance.max(medium.dz) {
        return Err(Error::InvalidArgument(format!(
            "distance {distance} is not a whole number of medium slabs of {}",
            medium.dz
        )));
    }
    if steps > medium.nz {
        return Err(Error::InvalidArgument(format!(
            "distance needs {steps} slabs, medium has {}",
            medium.nz
        )));
    }

    let window: Vec<usize> = (0..grid.len())
        .map(|i| {
            let (mx, my) = grid.lattice(i);
            ext.index_of(mx, my).expect("grid embeds in its padding")
        })
        .collect();
    let k = grid.k0();
    let w = grid.weight();
    let z0 = initial.z;
    let dz = medium.dz;
    let half: Vec<Complex64> = (0..ext.len())
        .map(|i| Complex64::from_polar(1.0, ext.k2(i) * dz / (4.0 * k)))
        .collect();
    let mut g = vec![Complex64::new(0.0, 0.0); ext.len()];
    for (i, &e) in window.iter().enumerate() {
        g[e] = initial.gc[i] * Complex64::from_polar(1.0, z0 * grid.k2(i) / (2.0 * k));
    }
    let norm0 = initial.norm_sqr(w);
    let mut drift: f64 = 0.0;
    for step in 0..steps {
        for (v, h) in g.iter_mut().zip(&half) {
            *v *= h;
        }
        let mut pos = stepper.to_position(&g);
        for (v, nt) in pos.iter_mut().zip(medium.slab(step)) {
            *v *= Complex64::from_polar(1.0, -k * nt * dz);
        }
        g = stepper.to_spectrum(&pos);
        for (v, h) in g.iter_mut().zip(&half) {
            *v *= h;
        }
        let norm = g.iter().map(|v| v.norm_sqr()).sum::<f64>() * w;
        if norm0 > 0.0 {
            drift = drift.max((norm - norm0).abs() / norm0);
        }
        if drift > NORM_TOL {
            return Err(Error::Integrity(format!(
                "norm drifted by {drift:e} at step {step}"
            )));
        }
    }
    let z = z0 + steps as f64 * dz;
    let gc: Vec<Complex64> = window
        .iter()
        .enumerate()
        .map(|(i, &e)| g[e] * Complex64::from_polar(1.0, -z * grid.k2(i) / (2.0 * k)))
        .collect();
    let inside = gc.iter().map(|v| v.norm_sqr()).sum::<f64>() * w;
    let total = g.iter().map(|v| v.norm_sqr()).sum::<f64>() * w;
    Ok(FieldRealization {
        gc,
        z,
        norm_drift: drift,
        leakage: if total > 0.0 {
            1.0 - inside / total
        } else {
            0.0
        },
    })
}

/// Ensemble mean `⟨G_c*(a) G_c(b)⟩`, stored at `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MCFEstimate {
    pub mcf: DMatrix<Complex64>,
    pub stderr: DMatrix<f64>,
    pub n_realizations: usize,
    pub z: f64,
}

pub fn estimate_mcf(ensemble: &[FieldRealization]) -> Result<MCFEstimate> {
    if ensemble.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 realizations, got {}",
            ensemble.len()
        )));
    }
    let dim = ensemble[0].gc.len();
    let z = ensemble[0].z;
    if ensemble.iter().any(|f| f.gc.len() != dim || f.z != z) {
        return Err(Error::Dimension("realizations differ in grid or z".into()));
    }
    let count = ensemble.len() as f64;
    let mut mean = DMatrix::<Complex64>::zeros(dim, dim);
    let mut sq = DMatrix::<f64>::zeros(dim, dim);
    for f in ensemble {
        for a in 0..dim {
            let ca = f.gc[a].conj();
            for b in a..dim {
                let v = ca * f.gc[b];
                mean[(a, b)] += v;
                sq[(a, b)] += v.norm_sqr();
            }
        }
    }
    let mut stderr = DMatrix::<f64>::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let m = mean[(a, b)] / count;
            let var = ((sq[(a, b)] - count * m.norm_sqr()) / (count - 1.0)).max(0.0);
            let se = (var / count).sqrt();
            mean[(a, b)] = m;
            mean[(b, a)] = m.conj();
            stderr[(a, b)] = se;
            stderr[(b, a)] = se;
        }
        mean[(a, a)].im = 0.0;
    }
    Ok(MCFEstimate {
        mcf: mean,
        stderr,
        n_realizations: ensemble.len(),
        z,
    })
}

/// Perturbative allowance added to the statistical error of each entry:
/// `rel · |moment increment| + abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allowance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Allowance {
    fn default() -> Self {
        Self { rel: 0.0, abs: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub z: f64,
    /// Signed z-scores, indexed like the MCF.
    pub z_scores: DMatrix<f64>,
    pub mcf_increment: DMatrix<Complex64>,
    pub moment_increment: DMatrix<Complex64>,
    pub frac_within_2: f64,
    pub frac_beyond_3: f64,
    /// Mean squared z-score.
    pub chi2_per_entry: f64,
    pub max_abs_z: f64,
}

/// Compares MCF increments from `initial_mcf` with `½(Θ⁻¹(z) - Θ⁻¹(z0))`
/// transposed to the MCF's `(a, b)` indexing.
pub fn compare_mcf_to_moment(
    estimate: &MCFEstimate,
    initial_mcf: &DMatrix<Complex64>,
    evo: &EvolutionResult,
    z: f64,
    allowance: Allowance,
) -> Result<ComparisonReport> {
    let dim = estimate.mcf.nrows();
    let idx = evo
        .z
        .iter()
        .position(|s| (s - z).abs() <= 1e-12 * z.abs().max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("z = {z} is not an evolution sample")))?;
    let th0 = &evo.states[0].theta_inv;
    let th = &evo.states[idx].theta_inv;
    if th.nrows() != dim || initial_mcf.nrows() != dim || initial_mcf.ncols() != dim {
        return Err(Error::Dimension(format!(
            "MCF is {dim}x{dim}, moment kernel is {}x{}",
            th.nrows(),
            th.ncols()
        )));
    }
    let mc = &estimate.mcf - initial_mcf;
    let moment = DMatrix::from_fn(dim, dim, |a, b| (th[(b, a)] - th0[(b, a)]) * 0.5);
    // FFT round trips leave ~ε-sized differences even in a zero medium, where
    // every realization coincides and the stderr is exactly zero
    let scale = estimate
        .mcf
        .iter()
        .chain(initial_mcf.iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let floor = ROUNDOFF_FLOOR * scale;
    let mut zs = DMatrix::<f64>::zeros(dim, dim);
    let (mut within2, mut beyond3, mut chi2, mut max_z) = (0usize, 0usize, 0.0, 0.0f64);
    for a in 0..dim {
        for b in 0..dim {
            let diff = (mc[(a, b)] - moment[(a, b)]).norm();
            let err =
                estimate.stderr[(a, b)] + allowance.rel * moment[(a, b)].norm() + allowance.abs;
            let zscore = if diff <= floor {
                0.0
            } else if err > 0.0 {
                diff / err
            } else {
                f64::INFINITY
            };
            zs[(a, b)] = zscore;
            if zscore < 2.0 {
                within2 += 1;
            }
            if zscore > 3.0 {
                beyond3 += 1;
            }
            chi2 += zscore * zscore;
            max_z = max_z.max(zscore);
        }
    }
    let total = (dim * dim) as f64;
    Ok(ComparisonReport {
        z,
        z_scores: zs,
        mcf_increment: mc,
        moment_increment: moment,
        frac_within_2: within2 as f64 / total,
        frac_beyond_3: beyond3 as f64 / total,
        chi2_per_entry: chi2 / total,
        max_abs_z: max_z,
    })
}

/// Shape and statistics of a Monte-Carlo ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub distance: f64,
    /// Medium slab count along z; the periodic box is `nz · dz` long.
    pub nz: usize,
    pub dz: f64,
    pub thin_screen: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub estimate: MCFEstimate,
    /// Per-realization norm drift, in realization order.
    pub norm_drift: Vec<f64>,
    pub leakage: Vec<f64>,
    pub medium_means: Vec<f64>,
}

/// Runs the ensemble on the current rayon pool. Realization `i` uses RNG
/// stream `i` of the configured seed, so the result does not depend on the
/// number of workers.
pub fn run_ensemble(
    grid: &TransverseGrid,
    model: &SpectrumModel,
    initial: &FieldRealization,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    let (n, dx) = medium_box(grid);
    let dims = [n, n, cfg.nz];
    let spacings = [dx, dx, cfg.dz];
    let stepper = SplitStep::new(&padded_grid(grid));
    let fields: Vec<(FieldRealization, f64)> = (0..cfg.realizations)
        .into_par_iter()
        .map(|i| {
            let medium =
                sample_medium_with(model, dims, spacings, cfg.seed, i as u64, cfg.thin_screen)?;
            let f = propagate_with(&stepper, initial, &medium, grid, cfg.distance)?;
            Ok((f, medium.mean))
        })
        .collect::<Result<Vec<_>>>()?;
    let norm_drift = fields.iter().map(|(f, _)| f.norm_drift).collect();
    let leakage = fields.iter().map(|(f, _)| f.leakage).collect();
    let medium_means = fields.iter().map(|(_, m)| *m).collect();
    let only: Vec<FieldRealization> = fields.into_iter().map(|(f, _)| f).collect();
    Ok(EnsembleResult {
        estimate: estimate_mcf(&only)?,
        norm_drift,
        leakage,
        medium_means,
    })
}

/// `⟨ñ(x, z) ñ(x, z + ℓ dz)⟩` averaged over the periodic box, `ℓ = 0..=max_lag`.
pub fn longitudinal_autocorrelation(medium: &Medium3D, max_lag: usize) -> Vec<f64> {
    let plane = medium.nx * medium.ny;
    let nz = medium.nz;
    (0..=max_lag)
        .map(|lag| {
            let mut acc = 0.0;
            for iz in 0..nz {
                let a = &medium.values[iz * plane..(iz + 1) * plane];
                let jz = (iz + lag) % nz;
                let b = &medium.values[jz * plane..(jz + 1) * plane];
                acc += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            }
            acc / (plane * nz) as f64
        })
        .collect()
}

/// Band-limited prediction for [`longitudinal_autocorrelation`]:
/// `Σ_q (δq²/(2π)²) B(q, ζ)` over the medium's transverse FFT lattice.
pub fn band_longitudinal_correlation(
    model: &SpectrumModel,
    dims: [usize; 3],
    spacings: [f64; 3],
    lags: &[f64],
) -> Result<Vec<f64>> {
    let [nx, ny, _] = dims;
    let dkx = 2.0 * PI / (nx as f64 * spacings[0]);
    let dky = 2.0 * PI / (ny as f64 * spacings[1]);
    let mut q2s: Vec<f64> = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let (a, b) = (
                signed_bin(ix, nx) as f64 * dkx,
                signed_bin(iy, ny) as f64 * dky,
            );
            q2s.push(a * a + b * b);
        }
    }
    let cell = dkx * dky / (4.0 * PI * PI);
    lags.par_iter()
        .map(|&zeta| {
            let mut acc = 0.0;
            for &q2 in &q2s {
                if q2 == 0.0 && !model.finite_at_origin() {
                    continue;
                }
                acc += longitudinal_correlation_unit(model, q2, zeta)?;
            }
            Ok(acc * cell * model.cn2)
        })
        .collect()
}
