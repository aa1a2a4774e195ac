use num_complex::Complex64;
use scint_core::evolve::{integrated_drift, rhs_at};
use scint_core::kernels::phi1_compute;
use scint_core::quad::GaussLegendre;
use scint_core::{
    apply_field_transform, build_grid, drift_only_propagator, evolve_thermal_with, phi1_markovian,
    thermal_from_modes, EvolveOptions, SpectrumModel, TermSet, ThermalState,
};

#[test]
fn flat_kz_drift_rate_matches_markovian_constant() {
    // spectrum narrow against the grid so both lattice sums converge
    let grid = build_grid(16, 4.0, 1000.0).unwrap();
    let model = SpectrumModel::flat_kz(1e-12, 4.0, 3.95, 20.0).unwrap();
    let state = ThermalState::vacuum(&grid, 0.0);
    let rhs = rhs_at(
        &state.theta_inv,
        &grid,
        &model,
        10.0,
        0.0,
        TermSet::DriftOnly,
    )
    .unwrap();
    let markov = phi1_markovian(&grid, &model).unwrap().diag[0].re;
    let center: Vec<usize> = (0..grid.len()).filter(|&i| grid.k2(i) < 0.2).collect();
    assert_eq!(center.len(), 4);
    for i in center {
        let rate = -rhs[(i, i)].re / state.theta_inv[(i, i)].re;
        let rel = (rate - 2.0 * markov).abs() / (2.0 * markov);
        assert!(
            rel < 0.02,
            "mode {i}: rate {rate:e}, markovian {markov:e}, rel {rel:e}"
        );
    }
}

/// Outer z'-integral of independently computed drift kernels.
fn nested_drift(
    grid: &scint_core::TransverseGrid,
    model: &SpectrumModel,
    z: f64,
) -> Vec<Complex64> {
    let (zs, ws) = GaussLegendre::new(10).composite(0.0, z, 8);
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (zp, wt) in zs.iter().zip(&ws) {
        let rule = scint_core::kernels::LagRule::with_refinement(grid, model, *zp, 4);
        let corr = scint_core::kernels::CorrelationTable::build(grid, model, &rule).unwrap();
        let phi = scint_core::kernels::phi1_from_table(grid, model, *zp, 0.0, &rule, &corr);
        for (a, p) in acc.iter_mut().zip(&phi.diag) {
            *a += p * *wt;
        }
    }
    acc
}

#[test]
fn drift_propagator_matches_refined_nested_quadrature() {
    let grid = build_grid(2, 4.0, 20.0).unwrap();
    let model = SpectrumModel::von_karman(1e-6, 1.0, 0.2).unwrap();
    let z = 1.5;
    let prop = drift_only_propagator(&grid, &model, z, 0.0).unwrap();
    let oracle = nested_drift(&grid, &model, z);
    for (y, o) in prop.y.iter().zip(&oracle) {
        let one_minus = Complex64::new(1.0, 0.0) - y;
        let rel = (one_minus - o).norm() / o.norm();
        assert!(rel < 1e-6, "relative {rel:e}");
    }
    let trace: f64 = oracle.iter().map(|v| 2.0 * v.re).sum();
    assert!((prop.norm_n - (1.0 - trace)).abs() < 1e-6 * trace);
}

#[test]
fn integrated_drift_derivative_is_phi1() {
    let grid = build_grid(2, 4.0, 20.0).unwrap();
    let model = SpectrumModel::von_karman(1e-6, 1.0, 0.2).unwrap();
    let (z, h) = (0.9, 1e-3);
    let plus = integrated_drift(&grid, &model, z + h, 0.0).unwrap();
    let minus = integrated_drift(&grid, &model, z - h, 0.0).unwrap();
    let phi = phi1_compute(&grid, &model, z, 0.0).unwrap();
    for i in 0..grid.len() {
        let fd = (plus[i] - minus[i]) / (2.0 * h);
        assert!((fd - phi.diag[i]).norm() < 1e-5 * phi.diag[i].norm());
    }
}

#[test]
fn drift_terms_and_field_transform_are_both_first_order_in_cn2() {
    // the moment equation's drift terms damp Θ⁻¹; the literal transform
    // Y⁻¹◇Θ⁻¹◇Y†⁻¹ amplifies it at the same rate
    let grid = build_grid(2, 4.0, 20.0).unwrap();
    let state = thermal_from_modes(&grid, &[0.5, 1.0, 0.2, 0.0]).unwrap();
    let opts = EvolveOptions {
        terms: TermSet::DriftOnly,
        quartic: false,
        ..Default::default()
    };
    for cn2 in [1e-7, 1e-8] {
        let model = SpectrumModel::von_karman(cn2, 1.0, 0.2).unwrap();
        let zs: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        let ev = evolve_thermal_with(&state, &grid, &model, &zs, &opts).unwrap();
        let prop = drift_only_propagator(&grid, &model, 1.0, 0.0).unwrap();
        let tr = apply_field_transform(&state, &prop).unwrap();
        let d_ev = &ev.states[32].theta_inv - &state.theta_inv;
        let d_tr = &tr.theta_inv - &state.theta_inv;
        let ratio = (&d_tr + &d_ev).norm() / d_ev.norm();
        assert!(ratio < 1e-2, "cn2 {cn2:e}: opposite-sign ratio {ratio:e}");
    }
}
