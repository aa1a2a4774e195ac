use nalgebra::DMatrix;
use num_complex::Complex64;
use scint_core::{build_grid, gaussian_moment, second_moment, Factor, ThermalState};

/// Probabilists' 3-point Gauss–Hermite rule: exact for degree ≤ 5 per variable.
const NODES: [(f64, f64); 3] = [
    (0.0, 2.0 / 3.0),
    (1.732_050_807_568_877_2, 1.0 / 6.0),
    (-1.732_050_807_568_877_2, 1.0 / 6.0),
];

/// `E[Π factors]` for a circular complex Gaussian with `⟨α_i α*_j⟩ = C_ij`,
/// by product quadrature over the real vector `(Re α, Im α)`.
fn quadrature_moment(c: &DMatrix<Complex64>, factors: &[Factor]) -> Complex64 {
    let n = c.nrows();
    let mut cov = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = c[(i, j)] * 0.5;
            cov[(i, j)] = v.re;
            cov[(i + n, j + n)] = v.re;
            cov[(i, j + n)] = -v.im;
            cov[(i + n, j)] = v.im;
        }
    }
    let l = cov
        .cholesky()
        .expect("covariance must be positive definite")
        .l();
    let dims = 2 * n;
    let mut total = Complex64::new(0.0, 0.0);
    for idx in 0..3usize.pow(dims as u32) {
        let mut xi = vec![0.0; dims];
        let mut weight = 1.0;
        let mut rest = idx;
        for x in xi.iter_mut() {
            let (node, w) = NODES[rest % 3];
            *x = node;
            weight *= w;
            rest /= 3;
        }
        let v = &l * nalgebra::DVector::from_vec(xi);
        let alpha: Vec<Complex64> = (0..n).map(|i| Complex64::new(v[i], v[i + n])).collect();
        let prod = factors
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, f| match *f {
                Factor::Conj(i) => acc * alpha[i].conj(),
                Factor::Plain(i) => acc * alpha[i],
            });
        total += prod * weight;
    }
    total
}

fn two_mode_state() -> ThermalState {
    let grid = build_grid(2, 2.0, 1.0).unwrap();
    let w = grid.weight();
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.2, 0.3),
            Complex64::new(0.0, -0.1),
            Complex64::new(0.4, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.9, 0.0),
            Complex64::new(0.3, 0.2),
            Complex64::new(-0.1, 0.1),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.2, 0.0),
            Complex64::new(0.2, -0.3),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.7, 0.0),
        ],
    );
    let m = &a * a.adjoint() / Complex64::new(w, 0.0);
    ThermalState::new(m, w, 0.0).unwrap()
}

#[test]
fn one_mode_fourth_moment_is_twice_square() {
    let c = DMatrix::from_element(1, 1, Complex64::new(0.8, 0.0));
    let q = quadrature_moment(
        &c,
        &[
            Factor::Conj(0),
            Factor::Plain(0),
            Factor::Conj(0),
            Factor::Plain(0),
        ],
    );
    assert!((q - Complex64::new(2.0 * 0.64, 0.0)).norm() < 1e-13);
    let theta_inv = &c * Complex64::new(2.0, 0.0);
    let w = gaussian_moment(
        &theta_inv,
        &[
            Factor::Conj(0),
            Factor::Plain(0),
            Factor::Conj(0),
            Factor::Plain(0),
        ],
    )
    .unwrap();
    assert!((w - q).norm() < 1e-13);
}

#[test]
fn wick_moments_match_direct_integration() {
    let st = two_mode_state();
    let c = second_moment(&st);
    let n = st.dim();
    let all: Vec<Factor> = (0..n)
        .flat_map(|i| [Factor::Conj(i), Factor::Plain(i)])
        .collect();
    let mut checked = 0;
    for a in &all {
        for b in &all {
            let f2 = [*a, *b];
            let (x, y) = (
                gaussian_moment(&st.theta_inv, &f2).unwrap(),
                quadrature_moment(&c, &f2),
            );
            assert!(
                (x - y).norm() < 1e-12 * (1.0 + y.norm()),
                "{f2:?}: {x} vs {y}"
            );
        }
    }
    // every 4-factor product over 4 modes would be 8⁴ quadratures; sample a
    // fixed spread of balanced and unbalanced ones
    for (i, a) in all.iter().enumerate() {
        for (j, b) in all.iter().enumerate().skip(i) {
            let c1 = all[(i + 3) % all.len()];
            let c2 = all[(j * 5 + 1) % all.len()];
            let f4 = [*a, *b, c1, c2];
            let x = gaussian_moment(&st.theta_inv, &f4).unwrap();
            let y = quadrature_moment(&c, &f4);
            assert!(
                (x - y).norm() < 1e-11 * (1.0 + y.norm()),
                "{f4:?}: {x} vs {y}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 36);
}

#[test]
fn unitary_mixing_transforms_second_moment() {
    let st = two_mode_state();
    // Householder reflection: unitary and Hermitian
    let v = nalgebra::DVector::from_vec(vec![
        Complex64::new(0.5, 0.1),
        Complex64::new(-0.3, 0.4),
        Complex64::new(0.2, 0.0),
        Complex64::new(0.1, -0.6),
    ]);
    let vn = v.norm();
    let u = DMatrix::identity(4, 4) - (&v * v.adjoint()) * Complex64::new(2.0 / (vn * vn), 0.0);
    let moved = st.transformed(&u);
    let expected = &u * second_moment(&st) * u.adjoint();
    assert!((second_moment(&moved) - &expected).norm() < 1e-12 * expected.norm());
    let before: f64 = st.theta_inv.trace().re;
    let after: f64 = moved.theta_inv.trace().re;
    assert!((before - after).abs() < 1e-12 * before);
    // moments of the transformed state still match direct integration
    let f4 = [
        Factor::Conj(0),
        Factor::Plain(2),
        Factor::Conj(3),
        Factor::Plain(0),
    ];
    let x = gaussian_moment(&moved.theta_inv, &f4).unwrap();
    let y = quadrature_moment(&second_moment(&moved), &f4);
    assert!((x - y).norm() < 1e-11 * (1.0 + y.norm()));
}
