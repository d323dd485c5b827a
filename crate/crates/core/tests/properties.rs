use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg32;

use spintomo::angular::{d_matrix, three_j, wigner_d, wigner_small_d};
use spintomo::quadrature::integrate;
use spintomo::spin::{
    forward_closed_form_half, forward_point, forward_tomogram, reconstruct, SpinTomogram,
};
use spintomo::states::{density_from_bloch, density_from_spinor, purity};
use spintomo::top::{
    top_energy, top_forward_point, EnergyConvention, TopDensityMatrix, TopParameters,
};
use spintomo::{
    build_grid, minimal_grid, BlochVector, DensityMatrix, EulerAngles, HalfInt, Spinor,
};

fn h(t: i32) -> HalfInt {
    HalfInt::from_twice(t)
}

fn angles() -> impl Strategy<Value = EulerAngles> {
    (0.0..TAU, 0.0..=PI, 0.0..TAU)
        .prop_map(|(phi, theta, psi)| EulerAngles::new(phi, theta, psi).unwrap())
}

fn bloch() -> impl Strategy<Value = BlochVector> {
    (0.0..=0.5f64, 0.0..=PI, 0.0..TAU).prop_map(|(r, t, p)| {
        BlochVector::new(r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()).unwrap()
    })
}

fn random_state(twice_j: i32, seed: u64) -> DensityMatrix {
    DensityMatrix::random_mixed(h(twice_j), &mut Pcg32::seed_from_u64(seed))
}

/// `J_y` in the `j … -j` basis, built from the ladder operators.
fn j_y(twice_j: i32) -> DMatrix<Complex64> {
    let j = f64::from(twice_j) / 2.0;
    let n = (twice_j + 1) as usize;
    let mut jp = DMatrix::<Complex64>::zeros(n, n);
    for c in 1..n {
        let m = j - c as f64;
        jp[(c - 1, c)] = Complex64::from((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    let jm = jp.adjoint();
    (jp - jm) / Complex64::new(0.0, 2.0)
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_is_unitary(u in angles(), twice_j in 0..=12i32) {
        let d = d_matrix(h(twice_j), &u).unwrap();
        let n = d.nrows();
        prop_assert!(max_diff(&(&d * d.adjoint()), &DMatrix::identity(n, n)) < 1e-12);
    }

    #[test]
    fn d_conjugation_identity(u in angles(), twice_j in 0..=12i32) {
        let j = h(twice_j);
        for a in j.projections() {
            for b in j.projections() {
                let lhs = wigner_d(j, a, b, &u).unwrap().conj();
                let sign = if ((a.twice() - b.twice()) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let rhs = wigner_d(j, h(-a.twice()), h(-b.twice()), &u).unwrap() * sign;
                prop_assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn small_d_matches_matrix_exponential(theta in 0.0..=PI, twice_j in 0..=12i32) {
        let oracle = (j_y(twice_j) * Complex64::new(0.0, theta)).exp();
        let j = h(twice_j);
        for (r, a) in j.projections().enumerate() {
            for (c, b) in j.projections().enumerate() {
                let d = wigner_small_d(j, a, b, theta).unwrap();
                prop_assert!((oracle[(r, c)] - d).norm() < 1e-12, "{a} {b}: {} vs {d}", oracle[(r, c)]);
            }
        }
    }

    #[test]
    fn purity_identity(s in bloch()) {
        let mu = purity(&density_from_bloch(&s));
        prop_assert!((mu - (0.5 + 2.0 * s.norm_sqr())).abs() < 1e-12);
    }

    #[test]
    fn pure_states_have_unit_purity(re in prop::collection::vec(-1.0..1.0f64, 4), im in prop::collection::vec(-1.0..1.0f64, 4)) {
        prop_assume!(re.iter().chain(&im).any(|x| x.abs() > 1e-3));
        let amps: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let rho = density_from_spinor(&Spinor::normalized(h(3), amps).unwrap());
        prop_assert!((purity(&rho) - 1.0).abs() < 1e-12);
        for e in rho.eigenvalues() {
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&e));
        }
    }

    #[test]
    fn closed_form_parity(s in bloch(), u in angles()) {
        let rho = density_from_bloch(&s);
        let (wp, wm) = forward_closed_form_half(&rho, &u).unwrap();
        let w = forward_point(&rho, &u);
        prop_assert!((w[0] - wp).abs() < 1e-12 && (w[1] - wm).abs() < 1e-12);
        prop_assert!((wp + wm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_is_affine(u in angles(), lambda in 0.0..=1.0f64, seed in any::<u64>(), twice_j in 0..=6i32) {
        let a = random_state(twice_j, seed);
        let b = random_state(twice_j, seed ^ 0xABCD);
        let mix = DensityMatrix::new(
            h(twice_j),
            a.entries() * Complex64::from(lambda) + b.entries() * Complex64::from(1.0 - lambda),
        ).unwrap();
        let (wa, wb, wm) = (forward_point(&a, &u), forward_point(&b, &u), forward_point(&mix, &u));
        for i in 0..wm.len() {
            prop_assert!((wm[i] - (lambda * wa[i] + (1.0 - lambda) * wb[i])).abs() < 1e-11);
        }
    }

    #[test]
    fn psi_never_matters(u in angles(), psi in 0.0..TAU, seed in any::<u64>(), twice_j in 0..=8i32) {
        let rho = random_state(twice_j, seed);
        let v = EulerAngles::new(u.phi(), u.theta(), psi).unwrap();
        let (a, b) = (forward_point(&rho, &u), forward_point(&rho, &v));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn top_product_states_factorize(u in angles(), v in angles(), seed in any::<u64>(), twice_j in 0..=3i32) {
        let a = random_state(twice_j, seed);
        let b = random_state(twice_j, seed.wrapping_add(1));
        let w = top_forward_point(&TopDensityMatrix::product(&a, &b).unwrap(), &u, &v);
        let (wa, wb) = (forward_point(&a, &u), forward_point(&b, &v));
        let n = wa.len();
        for i1 in 0..n {
            for i2 in 0..n {
                prop_assert!((w[i1 * n + i2] - wa[i1] * wb[i2]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_is_even_in_k(twice_j in 0..=12i32, a in 0.1..10.0f64, c in 0.1..10.0f64) {
        let p = TopParameters::new(a, c, 1.0).unwrap();
        let j = h(twice_j);
        for conv in [EnergyConvention::Paper, EnergyConvention::Standard] {
            for k in j.projections() {
                let e1 = top_energy(j, k, &p, conv).unwrap();
                let e2 = top_energy(j, h(-k.twice()), &p, conv).unwrap();
                prop_assert_eq!(e1, e2);
            }
        }
    }
}

#[test]
fn three_j_orthogonality() {
    for tj1 in 0..=6 {
        for tj2 in 0..=6 {
            let (j1, j2) = (h(tj1), h(tj2));
            let lo = (tj1 - tj2).abs();
            let hi = tj1 + tj2;
            let j3s: Vec<i32> = (lo..=hi).step_by(2).collect();
            for &a in &j3s {
                for &b in &j3s {
                    for m3 in h(a).projections() {
                        for m3p in h(b).projections() {
                            let mut sum = 0.0;
                            for m1 in j1.projections() {
                                for m2 in j2.projections() {
                                    let x = three_j(j1, j2, h(a), m1, m2, m3).unwrap();
                                    let y = three_j(j1, j2, h(b), m1, m2, m3p).unwrap();
                                    sum += x * y;
                                }
                            }
                            sum *= f64::from(a + 1);
                            let expected = if a == b && m3 == m3p { 1.0 } else { 0.0 };
                            assert!(
                                (sum - expected).abs() < 1e-12,
                                "{tj1} {tj2} {a} {b} {m3} {m3p}: {sum}"
                            );
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn quadrature_is_exact_for_d_products() {
    let volume = 8.0 * PI * PI;
    for tj in 0..=6 {
        let j = h(tj);
        let n = j.multiplicity();
        for grid in [build_grid(j), minimal_grid(j)] {
            // gram[(a,b),(c,d)] = Σ weight · D_ab conj(D_cd)
            let mut gram = DMatrix::<Complex64>::zeros(n * n, n * n);
            for pt in grid.points() {
                let d = d_matrix(j, &pt.angles).unwrap();
                let v = DMatrix::from_iterator(n * n, 1, d.transpose().iter().copied());
                gram += &v * v.adjoint() * Complex64::from(pt.weight);
            }
            let expected = DMatrix::identity(n * n, n * n) * Complex64::from(volume / n as f64);
            assert!(
                max_diff(&gram, &expected) < 1e-11,
                "j={j}: {}",
                max_diff(&gram, &expected)
            );
        }
    }
    // the generic integrator agrees with the direct sum
    let j = h(3);
    let (a, b) = (h(1), h(-3));
    let v = integrate(&build_grid(j), |u| {
        wigner_d(j, a, b, u).unwrap().norm_sqr().into()
    });
    assert!((v.re - volume / 4.0).abs() < 1e-11);
}

#[test]
fn band_limit_is_saturated() {
    for tj in 1..=6 {
        let j = h(tj);
        let rho = random_state(tj, 100 + tj as u64);
        let grid = build_grid(j);
        let moments = |g: &spintomo::QuadratureGrid| {
            // Σ weight · w(i,u) · D^k_{0l}(u) for all i, k, l
            let mut out =
                vec![Complex64::new(0.0, 0.0); j.multiplicity() * (tj as usize + 1).pow(2)];
            for pt in g.points() {
                let w = forward_point(&rho, &pt.angles);
                let mut idx = 0;
                for wi in &w {
                    for k in 0..=tj {
                        for l in -k..=k {
                            let d = wigner_d(h(2 * k), h(0), h(2 * l), &pt.angles).unwrap();
                            out[idx] += d * (pt.weight * wi);
                            idx += 1;
                        }
                    }
                }
            }
            out
        };
        let (a, b) = (moments(&grid), moments(&grid.refined_theta()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12, "j={j}: {}", (x - y).norm());
        }
    }
}

#[test]
fn reconstruct_is_linear_in_the_tomogram() {
    let grid = build_grid(h(2));
    let a = forward_tomogram(&random_state(2, 1), &grid).unwrap();
    let b = forward_tomogram(&random_state(2, 2), &grid).unwrap();
    let lambda = 0.3;
    let mixed: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
        .collect();
    let m = reconstruct(&SpinTomogram::new(h(2), grid, mixed).unwrap()).unwrap();
    let (ra, rb) = (reconstruct(&a).unwrap(), reconstruct(&b).unwrap());
    let expected =
        ra.entries() * Complex64::from(lambda) + rb.entries() * Complex64::from(1.0 - lambda);
    assert!(max_diff(m.entries(), &expected) < 1e-11);
}

/// Spin 1, diagonal input: only `l = 0` moments survive, and
/// `ρ_mm = Σ_k (2k+1)² Σ_i (-1)^{i-m} ⟨w(i) P_k(cos θ)⟩ 3j(1 1 k; i -i 0) 3j(1 1 k; m -m 0)`.
#[test]
fn spin_one_reduced_formula() {
    let j = h(2);
    let rho = DensityMatrix::diagonal(j, &[1.0, 0.0, 0.0]).unwrap();
    let grid = build_grid(j);
    let volume = 8.0 * PI * PI;
    let full = reconstruct(&forward_tomogram(&rho, &grid).unwrap()).unwrap();
    for (mi, m) in j.projections().enumerate() {
        let mut acc = 0.0;
        for k in 0..=2 {
            let kk = h(2 * k);
            for (ii, i) in j.projections().enumerate() {
                let moment = integrate(&grid, |u| {
                    let p_k = wigner_small_d(kk, h(0), h(0), u.theta()).unwrap();
                    Complex64::from(forward_point(&rho, u)[ii] * p_k)
                })
                .re / volume;
                let sign = if ((i.twice() - m.twice()) / 2) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                let c1 = three_j(j, j, kk, i, h(-i.twice()), h(0)).unwrap();
                let c2 = three_j(j, j, kk, m, h(-m.twice()), h(0)).unwrap();
                acc += f64::from((2 * k + 1).pow(2)) * sign * moment * c1 * c2;
            }
        }
        assert!(
            (acc - rho.entries()[(mi, mi)].re).abs() < 1e-10,
            "m={m}: {acc}"
        );
        assert!((acc - full.entries()[(mi, mi)].re).abs() < 1e-10);
    }
}
