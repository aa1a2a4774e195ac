//! Second-moment evolution of a thermal state, the drift-only field
//! transformation, and the quartic terms a Gaussian ansatz cannot absorb.
//!
//! With the state frozen at the anchor `z0`,
//!
//! ```text
//! ∂z Θ⁻¹(b,a) = Θ⁻¹(x,y) Φ₀(y,a,b,x) + Θ⁻¹(x,y) Φ₀(b,x,y,a)
//!             - Θ⁻¹(b,a) Φ₁*(a) - Φ₁(b) Θ⁻¹(b,a)
//! ```
//!
//! and `Θ⁻¹(z) = Θ⁻¹(z0) + ∫ RHS dz'` by a refined trapezoid over the
//! requested samples.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{hermitian_deviation, TransverseGrid};
use crate::kernels::{phi1_from_table, CorrelationTable, DriftKernel, LagRule, VertexKernel};
use crate::states::ThermalState;
use crate::turbulence::SpectrumModel;

/// Seed of the quadruple sample used by [`quartic_residual`] on large grids.
pub const QUARTIC_SEED: u64 = 0x5EED;
pub const QUARTIC_SAMPLES: usize = 10_000;
/// Grids up to this side length use the full quartic tensor.
pub const QUARTIC_FULL_SIDE: usize = 3;
pub const RHS_HERMITIAN_TOL: f64 = 1e-8;
pub const WATCHDOG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionMode {
    /// Right-hand side frozen at the initial state for the whole run.
    Literal,
    /// Anchor moved to the previous sample at every step.
    Resummed,
}

impl std::str::FromStr for EvolutionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "resummed" => Ok(Self::Resummed),
            other => Err(Error::InvalidArgument(format!(
                "unknown evolution mode '{other}'"
            ))),
        }
    }
}

/// Which right-hand-side terms to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermSet {
    Full,
    DriftOnly,
    VertexOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub mode: EvolutionMode,
    pub terms: TermSet,
    /// Trapezoid sub-intervals between consecutive samples.
    pub substeps: usize,
    pub quartic: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            mode: EvolutionMode::Literal,
            terms: TermSet::Full,
            substeps: 4,
            quartic: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub z: Vec<f64>,
    pub states: Vec<ThermalState>,
    /// `(tr_w Θ⁻¹(z) - tr_w Θ⁻¹(z0)) / tr_w Θ⁻¹(z0)`.
    pub trace_drift: Vec<f64>,
    pub quartic_norm: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub max_eigenvalue: Vec<f64>,
    /// First sample at which the positivity watchdog tripped.
    pub validity_exit: Option<usize>,
    pub quartic_seed: u64,
}

fn check_state(state: &ThermalState, grid: &TransverseGrid) -> Result<()> {
    if state.dim() != grid.len() {
        return Err(Error::Dimension(format!(
            "state has {} modes, grid has {}",
            state.dim(),
            grid.len()
        )));
    }
    if (state.weight - grid.weight()).abs() > 1e-12 * grid.weight() {
        return Err(Error::Dimension("state and grid weights differ".into()));
    }
    Ok(())
}

/// Evolve with the default options (literal anchor, all terms).
pub fn evolve_thermal(
    initial: &ThermalState,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z_samples: &[f64],
) -> Result<EvolutionResult> {
    evolve_thermal_with(initial, grid, model, z_samples, &EvolveOptions::default())
}

pub fn evolve_thermal_with(
    initial: &ThermalState,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z_samples: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    check_state(initial, grid)?;
    let model = model.validated()?;
    if z_samples.is_empty() {
        return Err(Error::InvalidArgument("no z samples".into()));
    }
    if z_samples[0] != initial.z {
        return Err(Error::InvalidArgument(format!(
            "first sample {} must equal the initial state's z {}",
            z_samples[0], initial.z
        )));
    }
    if z_samples.windows(2).any(|p| !(p[1] > p[0])) || z_samples.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidArgument(
            "z samples must be strictly increasing".into(),
        ));
    }
    let sub = opts.substeps.max(1);

    let tr0 = initial.weighted_trace();
    let (lo, hi) = initial.eigen_range();
    let mut result = EvolutionResult {
        z: z_samples.to_vec(),
        states: vec![initial.clone()],
        trace_drift: vec![0.0],
        quartic_norm: vec![0.0],
        min_eigenvalue: vec![lo],
        max_eigenvalue: vec![hi],
        validity_exit: None,
        quartic_seed: QUARTIC_SEED,
    };

    // literal: accumulated ∫ RHS from z0; resummed: restarted each interval
    let mut anchor = initial.clone();
    let mut acc = DMatrix::<Complex64>::zeros(grid.len(), grid.len());
    let mut rhs_prev = DMatrix::<Complex64>::zeros(grid.len(), grid.len());
    for i in 1..z_samples.len() {
        let (za, zb) = (z_samples[i - 1], z_samples[i]);
        if opts.mode == EvolutionMode::Resummed {
            acc.fill(Complex64::new(0.0, 0.0));
            rhs_prev.fill(Complex64::new(0.0, 0.0));
        }
        let h = (zb - za) / sub as f64;
        for s in 1..=sub {
            let zs = if s == sub { zb } else { za + h * s as f64 };
            let rhs = checked_rhs(&anchor.theta_inv, grid, &model, zs, anchor.z, opts.terms)?;
            acc += (&rhs_prev + &rhs) * Complex64::new(0.5 * h, 0.0);
            rhs_prev = rhs;
        }
        let mut m = &anchor.theta_inv + &acc;
        // exact Hermitian projection; the check above bounds what it removes
        let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        m = herm;
        let state = ThermalState::new_unchecked(m, grid.weight(), zb)?;
        let dev = hermitian_deviation(&state.theta_inv);
        if dev > 1e-10 {
            return Err(Error::Integrity(format!(
                "Hermiticity lost at z = {zb}: {dev:e}"
            )));
        }
        let tr = state.weighted_trace();
        let (lo, hi) = state.eigen_range();
        if result.validity_exit.is_none() && lo < -WATCHDOG_TOL * hi.abs() {
            result.validity_exit = Some(i);
        }
        let q = if opts.quartic {
            quartic_residual(&anchor, grid, &model, zb)?
        } else {
            0.0
        };
        result.trace_drift.push((tr - tr0) / tr0);
        result.quartic_norm.push(q);
        result.min_eigenvalue.push(lo);
        result.max_eigenvalue.push(hi);
        if opts.mode == EvolutionMode::Resummed {
            anchor = state.clone();
        }
        result.states.push(state);
    }
    Ok(result)
}

fn checked_rhs(
    theta_inv: &DMatrix<Complex64>,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
    z0: f64,
    terms: TermSet,
) -> Result<DMatrix<Complex64>> {
    let (rhs, scale) = rhs_with_scale(theta_inv, grid, model, z, z0, terms)?;
    // measured against the separate terms: at fixed points they cancel and
    // the sum itself is pure roundoff
    let dev = (&rhs - rhs.adjoint()).norm() / scale.max(f64::MIN_POSITIVE);
    if dev > RHS_HERMITIAN_TOL {
        return Err(Error::Integrity(format!(
            "right-hand side is not Hermitian (deviation {dev:e} relative to its terms)"
        )));
    }
    Ok(rhs)
}

/// Right-hand side at `z` for a state anchored at `z0`, building only the
/// kernels the term set needs.
pub fn rhs_at(
    theta_inv: &DMatrix<Complex64>,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
    z0: f64,
    terms: TermSet,
) -> Result<DMatrix<Complex64>> {
    rhs_with_scale(theta_inv, grid, model, z, z0, terms).map(|(r, _)| r)
}

/// The right-hand side and the summed norms of its vertex and drift parts.
fn rhs_with_scale(
    theta_inv: &DMatrix<Complex64>,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
    z0: f64,
    terms: TermSet,
) -> Result<(DMatrix<Complex64>, f64)> {
    if !(z >= z0) {
        return Err(Error::InvalidInterval { z, z0 });
    }
    let rule = LagRule::for_interval(grid, model, z - z0);
    let corr = CorrelationTable::build(grid, model, &rule)?;
    let n = grid.len();
    let mut rhs = DMatrix::zeros(n, n);
    let mut scale = 0.0;
    if terms != TermSet::DriftOnly {
        let vertex = VertexKernel::from_table(grid, model, z, z0, &rule, &corr);
        let part = rhs_matrix(theta_inv, grid, Some(&vertex), None);
        scale += part.norm();
        rhs += part;
    }
    if terms != TermSet::VertexOnly {
        let drift = phi1_from_table(grid, model, z, z0, &rule, &corr);
        let part = rhs_matrix(theta_inv, grid, None, Some(&drift));
        scale += part.norm();
        rhs += part;
    }
    Ok((rhs, scale))
}

/// The inverse-kernel right-hand side for the state `theta_inv`; a missing
/// kernel drops its terms.
pub fn rhs_matrix(
    theta_inv: &DMatrix<Complex64>,
    grid: &TransverseGrid,
    vertex: Option<&VertexKernel>,
    drift: Option<&DriftKernel>,
) -> DMatrix<Complex64> {
    let n = grid.len();
    let w = grid.weight();
    let lat: Vec<(i64, i64)> = (0..n).map(|i| grid.lattice(i)).collect();
    let shift = |i: usize, dx: i64, dy: i64| grid.index_of(lat[i].0 + dx, lat[i].1 + dy);

    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|b| {
            (0..n)
                .map(|a| {
                    let mut v = Complex64::new(0.0, 0.0);
                    if let Some(vk) = vertex {
                        let (dx, dy) = (lat[b].0 - lat[a].0, lat[b].1 - lat[a].1);
                        for y in 0..n {
                            // x = y - a + b
                            if let Some(x) = shift(y, dx, dy) {
                                v += theta_inv[(x, y)] * vk.eval_with_fourth(y, a, b, x) * w;
                            }
                        }
                        for x in 0..n {
                            // y = x + a - b
                            if let Some(y) = shift(x, -dx, -dy) {
                                v += theta_inv[(x, y)] * vk.eval_with_fourth(b, x, y, a) * w;
                            }
                        }
                    }
                    if let Some(dk) = drift {
                        v -= theta_inv[(b, a)] * (dk.diag[a].conj() + dk.diag[b]);
                    }
                    v
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |b, a| rows[b][a])
}

/// `tr_w` of the right-hand side at `z`, anchored at the state's z.
pub fn trace_rate(
    state: &ThermalState,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
) -> Result<f64> {
    check_state(state, grid)?;
    let rhs = rhs_at(&state.theta_inv, grid, model, z, state.z, TermSet::Full)?;
    Ok(rhs.diagonal().iter().map(|v| v.re).sum::<f64>() * grid.weight())
}

/// Norm `sqrt(Σ w⁴ |Q|²)` of the coefficient tensor of the quartic terms
/// `α*(p) α*(q) α(r) α(s)` produced by substituting the thermal state into
/// the full evolution equation, symmetrized over `p↔q` and `r↔s`.
///
/// Grids up to 3×3 use every quadruple; larger grids use a fixed-seed sample
/// of [`QUARTIC_SAMPLES`] quadruples, rescaled to the full count.
pub fn quartic_residual(
    state: &ThermalState,
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
) -> Result<f64> {
    check_state(state, grid)?;
    if !(z >= state.z) {
        return Err(Error::InvalidInterval { z, z0: state.z });
    }
    if z == state.z || model.cn2 == 0.0 {
        return Ok(0.0);
    }
    let theta = state.theta()?;
    let vk = VertexKernel::new(grid, model, z, state.z)?;
    let n = grid.len();
    let quads: Vec<[usize; 4]> = if grid.n_side() <= QUARTIC_FULL_SIDE {
        let mut all = Vec::with_capacity(n * n * n * n);
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        all.push([p, q, r, s]);
                    }
                }
            }
        }
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(QUARTIC_SEED);
        (0..QUARTIC_SAMPLES)
            .map(|_| {
                [
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                ]
            })
            .collect()
    };
    let w = grid.weight();
    let sum: f64 = quads
        .par_iter()
        .map(|&[p, q, r, s]| {
            let sym = (quartic_raw(&vk, &theta, grid, p, q, r, s)
                + quartic_raw(&vk, &theta, grid, q, p, r, s)
                + quartic_raw(&vk, &theta, grid, p, q, s, r)
                + quartic_raw(&vk, &theta, grid, q, p, s, r))
                * 0.25;
            sym.norm_sqr()
        })
        .sum();
    let total = (n as f64).powi(4);
    let scale = total / quads.len() as f64;
    Ok((sum * scale).sqrt() * w * w)
}

fn quartic_raw(
    vk: &VertexKernel,
    theta: &DMatrix<Complex64>,
    grid: &TransverseGrid,
    p: usize,
    q: usize,
    r: usize,
    s: usize,
) -> Complex64 {
    let n = grid.len();
    let w = grid.weight();
    let lat = |i: usize| grid.lattice(i);
    let combine = |a: usize, b: usize, c: usize| {
        let (la, lb, lc) = (lat(a), lat(b), lat(c));
        grid.index_of(la.0 - lb.0 + lc.0, la.1 - lb.1 + lc.1)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        // α*(K1)Θ(K2,Ka)α(Ka) α*(K3)Θ(K4,Kb)α(Kb), K1=p, K3=q, K2=k
        if let Some(k4) = combine(p, k, q) {
            acc += vk.eval_with_fourth(p, k, q, k4) * theta[(k, r)] * theta[(k4, s)];
        }
        // α*(Ka)Θ(Ka,K1)α(K2) α*(Kb)Θ(Kb,K3)α(K4), K1=k, K2=r, K4=s
        if let Some(k3) = combine(r, k, s) {
            acc += theta[(p, k)] * theta[(q, k3)] * vk.eval_with_fourth(k, r, k3, s);
        }
        // -α*(K1)Θ(K2,Ka)α(Ka) α*(Kb)Θ(Kb,K3)α(K4), K1=p, K4=s, K2=k
        if let Some(k3) = combine(k, p, s) {
            acc -= vk.eval_with_fourth(p, k, k3, s) * theta[(k, r)] * theta[(q, k3)];
        }
        // -α*(K3)α*(Ka)Θ(Ka,K1)α(K2)Θ(K4,Kb)α(Kb), K3=p, K2=r, K1=k
        if let Some(k4) = combine(k, r, p) {
            acc -= vk.eval_with_fourth(k, r, p, k4) * theta[(q, k)] * theta[(k4, s)];
        }
    }
    acc * (-4.0 * w)
}

/// Drift-only solution: `Y = 1 - ∫Φ₁`, `𝒩 = 1 - ∫ tr_w(Φ₁ + Φ₁*)`.
///
/// `y[i]` is the coefficient of the identity density at grid point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPropagator {
    pub y: Vec<Complex64>,
    pub norm_n: f64,
    pub z: f64,
    pub z0: f64,
}

impl DriftPropagator {
    pub fn identity(n: usize, z: f64) -> Self {
        Self {
            y: vec![Complex64::new(1.0, 0.0); n],
            norm_n: 1.0,
            z,
            z0: z,
        }
    }
}

/// `∫_{z0}^{z} φ(K, z') dz'` for every grid point.
///
/// Swapping the order of the two z-integrals leaves a single lag integral
/// with weight `(z - z0 - ζ)`.
pub fn integrated_drift(
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
    z0: f64,
) -> Result<Vec<Complex64>> {
    if !(z >= z0) {
        return Err(Error::InvalidInterval { z, z0 });
    }
    let n = grid.len();
    let length = z - z0;
    if length == 0.0 || model.cn2 == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let mut rule = LagRule::for_interval(grid, model, length);
    for (zeta, wt) in rule.zetas.iter().zip(rule.weights.iter_mut()) {
        *wt *= length - zeta;
    }
    let corr = CorrelationTable::build(grid, model, &rule)?;
    Ok(phi1_from_table(grid, model, z, z0, &rule, &corr).diag)
}

pub fn drift_only_propagator(
    grid: &TransverseGrid,
    model: &SpectrumModel,
    z: f64,
    z0: f64,
) -> Result<DriftPropagator> {
    let model = model.validated()?;
    let integral = integrated_drift(grid, &model, z, z0)?;
    let trace: f64 = integral.iter().map(|v| 2.0 * v.re).sum();
    Ok(DriftPropagator {
        y: integral
            .iter()
            .map(|v| Complex64::new(1.0, 0.0) - v)
            .collect(),
        norm_n: 1.0 - trace,
        z,
        z0,
    })
}

/// `Θ⁻¹ → Y⁻¹ ◇ Θ⁻¹ ◇ Y†⁻¹`. The normalization factor is bookkeeping only.
pub fn apply_field_transform(state: &ThermalState, prop: &DriftPropagator) -> Result<ThermalState> {
    let n = state.dim();
    if prop.y.len() != n {
        return Err(Error::Dimension(format!(
            "propagator has {} modes, state has {n}",
            prop.y.len()
        )));
    }
    if let Some(i) = prop
        .y
        .iter()
        .position(|v| !(v.norm() > 1e-300) || !v.re.is_finite())
    {
        return Err(Error::SingularTransform(format!(
            "Y vanishes at grid point {i}"
        )));
    }
    let m = DMatrix::from_fn(n, n, |b, a| {
        state.theta_inv[(b, a)] / (prop.y[b] * prop.y[a].conj())
    });
    ThermalState::new_unchecked(m, state.weight, prop.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::states::thermal_from_modes;

    fn setup() -> (TransverseGrid, SpectrumModel, ThermalState) {
        let grid = build_grid(2, 4.0, 20.0).unwrap();
        let model = SpectrumModel::von_karman(1e-6, 1.0, 0.2).unwrap();
        let mut s = thermal_from_modes(&grid, &[0.3, 1.0, 0.1, 2.0]).unwrap();
        s.theta_inv[(0, 3)] = Complex64::new(0.4, 0.2);
        s.theta_inv[(3, 0)] = Complex64::new(0.4, -0.2);
        (grid, model, s)
    }

    #[test]
    fn zero_cn2_is_static() {
        let (grid, model, s) = setup();
        let r = evolve_thermal(&s, &grid, &model.with_cn2(0.0), &[0.0, 0.5, 1.0]).unwrap();
        for st in &r.states {
            assert_eq!(st.theta_inv, s.theta_inv);
        }
        assert!(r.quartic_norm.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn trace_is_preserved() {
        let (grid, model, s) = setup();
        let r = evolve_thermal(&s, &grid, &model, &[0.0, 0.3, 0.8, 1.5]).unwrap();
        for d in &r.trace_drift {
            assert!(d.abs() < 1e-10, "trace drift {d:e}");
        }
        let changed = (&r.states[3].theta_inv - &s.theta_inv).norm();
        assert!(changed > 0.0);
    }

    #[test]
    fn trace_rate_vanishes_and_scales() {
        let (grid, model, s) = setup();
        let rhs = rhs_at(&s.theta_inv, &grid, &model, 0.7, 0.0, TermSet::Full).unwrap();
        let t = trace_rate(&s, &grid, &model, 0.7).unwrap();
        assert!(t.abs() < 1e-8 * rhs.norm() * grid.weight());
        assert_eq!(
            trace_rate(&s, &grid, &model.with_cn2(0.0), 0.7).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_non_monotone_samples() {
        let (grid, model, s) = setup();
        assert!(matches!(
            evolve_thermal(&s, &grid, &model, &[0.0, 0.5, 0.5]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(evolve_thermal(&s, &grid, &model, &[0.1, 0.5]).is_err());
    }

    #[test]
    fn quartic_zero_cases_and_linearity() {
        let (grid, model, s) = setup();
        assert_eq!(quartic_residual(&s, &grid, &model, 0.0).unwrap(), 0.0);
        assert_eq!(
            quartic_residual(&s, &grid, &model.with_cn2(0.0), 1.0).unwrap(),
            0.0
        );
        let a = quartic_residual(&s, &grid, &model, 1.0).unwrap();
        let b = quartic_residual(&s, &grid, &model.with_cn2(2e-6), 1.0).unwrap();
        assert!(a > 0.0);
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn drift_propagator_identity_cases() {
        let (grid, model, s) = setup();
        let p = drift_only_propagator(&grid, &model, 1.0, 1.0).unwrap();
        assert_eq!(p, DriftPropagator::identity(4, 1.0));
        let p0 = drift_only_propagator(&grid, &model.with_cn2(0.0), 2.0, 1.0).unwrap();
        assert!(p0.y.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        assert_eq!(p0.norm_n, 1.0);
        let t = apply_field_transform(&s, &p).unwrap();
        assert_eq!(t.theta_inv, s.theta_inv);
        assert!(matches!(
            drift_only_propagator(&grid, &model, 0.5, 1.0),
            Err(Error::InvalidInterval { .. })
        ));
    }

    #[test]
    fn scalar_transform_rescales() {
        let (_, _, s) = setup();
        let c = Complex64::new(0.6, 0.8) * 2.0;
        let p = DriftPropagator {
            y: vec![c; 4],
            norm_n: 1.0,
            z: 1.0,
            z0: 0.0,
        };
        let t = apply_field_transform(&s, &p).unwrap();
        let diff = (&t.theta_inv - &s.theta_inv * Complex64::new(0.25, 0.0)).norm();
        assert!(diff < 1e-14 * s.theta_inv.norm());
        let zero = DriftPropagator {
            y: vec![Complex64::new(0.0, 0.0); 4],
            ..p
        };
        assert!(matches!(
            apply_field_transform(&s, &zero),
            Err(Error::SingularTransform(_))
        ));
    }

    #[test]
    fn resummed_matches_literal_on_first_interval() {
        let (grid, model, s) = setup();
        let opts = EvolveOptions {
            mode: EvolutionMode::Resummed,
            ..Default::default()
        };
        let a = evolve_thermal(&s, &grid, &model, &[0.0, 0.5]).unwrap();
        let b = evolve_thermal_with(&s, &grid, &model, &[0.0, 0.5], &opts).unwrap();
        assert_eq!(a.states[1].theta_inv, b.states[1].theta_inv);
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        // vertex and drift terms cancel, leaving a roundoff-sized right-hand side
        let grid = build_grid(4, 2.0, 50.0).unwrap();
        let model = SpectrumModel::von_karman(1e-7, 10.0, 2.0).unwrap();
        let s = thermal_from_modes(&grid, &[0.5; 16]).unwrap();
        let evo = evolve_thermal(&s, &grid, &model, &[0.0, 1.0, 2.0]).unwrap();
        let moved = (&evo.states[2].theta_inv - &s.theta_inv).norm();
        assert!(moved < 1e-12 * s.theta_inv.norm(), "{moved:e}");
    }
}
