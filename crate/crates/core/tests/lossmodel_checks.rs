use num_complex::Complex64;
use scint_core::{
    build_grid, first_moment_equation, gaussian_moment, lossy_coherent_wigner, CoherentState,
    Factor, SpectrumModel,
};

fn vk(cn2: f64) -> SpectrumModel {
    SpectrumModel::von_karman(cn2, 5.0, 0.5).unwrap()
}

#[test]
fn non_markovian_diagonal_depends_on_k() {
    let grid = build_grid(8, 4.0, 100.0).unwrap();
    let d = first_moment_equation(&grid, &vk(1e-9), 5.0, 0.0, false).unwrap();
    assert!(d.k_variation > 0.01);
    assert!(!d.markovian);
}

#[test]
fn spread_grows_with_extent_at_fixed_spacing() {
    // slow beam so the lag phase (|K|²-|K'|²)ζ/2k dominates the edge truncation
    let model = vk(1e-9);
    let spreads: Vec<f64> = [(4, 1.0), (8, 2.0), (16, 4.0)]
        .iter()
        .map(|&(n, ext)| {
            let grid = build_grid(n, ext, 1.0).unwrap();
            first_moment_equation(&grid, &model, 5.0, 0.0, false)
                .unwrap()
                .k_variation
        })
        .collect();
    assert!(spreads[0] > 0.0);
    assert!(spreads.windows(2).all(|p| p[1] > p[0]), "{spreads:?}");
}

#[test]
fn diagnostics_are_linear_in_cn2() {
    let grid = build_grid(4, 4.0, 100.0).unwrap();
    let a = first_moment_equation(&grid, &vk(1e-9), 5.0, 0.0, false).unwrap();
    let b = first_moment_equation(&grid, &vk(3e-9), 5.0, 0.0, false).unwrap();
    for (x, y) in a.phi1_diag.iter().zip(&b.phi1_diag) {
        assert!((y - x * 3.0).norm() < 1e-12 * y.norm());
    }
    assert!((a.k_variation - b.k_variation).abs() < 1e-12 * a.k_variation);
}

#[test]
fn lossy_photon_number_from_gaussian_moments() {
    let grid = build_grid(2, 2.0, 100.0).unwrap();
    let w = grid.weight();
    let zeta = CoherentState::new(vec![
        Complex64::new(0.3, 0.1),
        Complex64::new(-0.2, 0.5),
        Complex64::new(0.0, -0.4),
        Complex64::new(0.7, 0.0),
    ])
    .unwrap();
    for loss in [1.0, 0.6, 0.1] {
        let st = lossy_coherent_wigner(&zeta, &grid, loss).unwrap();
        // ⟨α*_a α_a⟩ = |c_a|² + centered moment; the vacuum part is w·½Θ⁻¹ = ½
        let mut n = 0.0;
        for a in 0..grid.len() {
            let centered = gaussian_moment(
                &st.covariance.theta_inv,
                &[Factor::Conj(a), Factor::Plain(a)],
            )
            .unwrap();
            n += w * (st.center[a].norm_sqr() + centered.re) - 0.5;
        }
        let expected = loss * loss * zeta.norm_sqr(w);
        assert!(
            (n - expected).abs() < 1e-12 * expected.max(1e-300),
            "{n} vs {expected}"
        );
    }
}
