use std::f64::consts::PI;

use approx::assert_relative_eq;
use ifs_decay::cocycle::{lyapunov_chi, variance_r0};
use ifs_decay::examples::{lebesgue, nonlinear, two_ratio};
use ifs_decay::transfer::{
    c6_calibrate, curvature_check, decay_of_one, dolgopyat_check, leading_eigen,
    norm_theta_parts, CylinderFunction, OperatorConfig, TransferOperator,
};
use ifs_decay::{Error, Ifs};
use num_complex::Complex64;
use proptest::prelude::*;

fn op(ifs: &Ifs, theta: f64, depth: usize) -> TransferOperator {
    TransferOperator::new(
        ifs,
        OperatorConfig {
            theta,
            depth,
            recentred: false,
            chi: 0.0,
        },
    )
    .unwrap()
}

/// `Σ p_a e^{-2πiθ log r_a}` for an affine system.
fn character_sum(ratios: &[f64], probs: &[f64], theta: f64) -> Complex64 {
    ratios
        .iter()
        .zip(probs)
        .map(|(r, p)| Complex64::from_polar(*p, -2.0 * PI * theta * r.ln()))
        .sum()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn apply_at_zero_preserves_one() {
    let nl = nonlinear();
    let o = op(&nl, 0.0, 6);
    let out = o.apply(&o.one()).unwrap();
    for v in &out.values {
        assert!((v - c(1.0)).norm() <= 1e-15);
    }
}

#[test]
fn apply_affine_is_character_sum() {
    let tr = two_ratio();
    for theta in [0.3, 1.7, 25.0] {
        let o = op(&tr, theta, 5);
        let expect = character_sum(&[0.5, 1.0 / 3.0], &[0.5, 0.5], theta);
        for v in &o.apply(&o.one()).unwrap().values {
            assert!((v - expect).norm() <= 1e-14);
        }
    }
}

#[test]
fn apply_rejects_depth_mismatch() {
    let o = op(&lebesgue(), 1.0, 4);
    let phi = CylinderFunction::one(5, 2, 0.5).unwrap();
    assert!(matches!(o.apply(&phi), Err(Error::DepthMismatch { .. })));
}

#[test]
fn positive_cone_is_preserved() {
    let nl = nonlinear();
    let o = op(&nl, 0.0, 6);
    let phi = CylinderFunction::from_fn(6, 2, nl.rho(), |w| c(w.iter().map(|&s| s as f64).sum()))
        .unwrap();
    let out = o.apply(&phi).unwrap();
    assert!(out.values.iter().all(|v| v.re >= 0.0 && v.im.abs() <= 1e-15));
    assert!(out.sup_norm() <= phi.sup_norm());
}

#[test]
fn norm_examples() {
    let one = CylinderFunction::one(4, 2, 0.5).unwrap();
    assert_eq!(one.norm_lip(), 1.0);
    let ind = CylinderFunction::from_fn(2, 2, 0.5, |w| c(if w[0] == 0 { 1.0 } else { 0.0 }))
        .unwrap();
    assert_relative_eq!(ind.norm_lip(), 3.0, max_relative = 1e-15);
    let zero = CylinderFunction::constant(3, 2, 0.5, c(0.0)).unwrap();
    assert_eq!(zero.norm_lip(), 0.0);
}

#[test]
fn norm_theta_examples() {
    let one = CylinderFunction::one(4, 2, 0.5).unwrap();
    assert_eq!(one.norm_theta(3.0, 1.0).unwrap(), 1.0);
    assert_eq!(norm_theta_parts(1.0, 4.0, 1.0, 1.0).unwrap(), 2.0);
    assert_eq!(norm_theta_parts(1.0, 4.0, 10.0, 1.0).unwrap(), 1.0);
    assert!(one.norm_theta(0.0, 1.0).is_err());
}

#[test]
fn lipschitz_constant_matches_all_pairs() {
    let nl = nonlinear();
    let phi = CylinderFunction::from_fn(5, 2, nl.rho(), |w| {
        let x: f64 = w.iter().enumerate().map(|(j, &s)| (s as f64 + 0.3) * 0.7f64.powi(j as i32)).sum();
        Complex64::from_polar(1.0, 3.0 * x)
    })
    .unwrap();
    let words: Vec<Vec<u8>> = (0..phi.values.len())
        .map(|i| ifs_decay::transfer::index_word(i, 5, 2))
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let split = words[i].iter().zip(&words[j]).position(|(a, b)| a != b).unwrap() + 1;
            let r = (phi.values[i] - phi.values[j]).norm() / phi.rho.powi(split as i32);
            best = best.max(r);
        }
    }
    assert_relative_eq!(phi.lipschitz_constant(), best, max_relative = 1e-12);
}

#[test]
fn c6_calibration_examples() {
    let cal = c6_calibrate(&lebesgue(), &[1.0, 5.0, 17.0], 8, 6, 16, 1).unwrap();
    assert_eq!(cal.doublings, 0);
    assert_eq!(cal.c6, cal.start);
    let grid: Vec<f64> = (1..=100).map(f64::from).collect();
    let cal = c6_calibrate(&nonlinear(), &grid, 4, 6, 8, 1).unwrap();
    assert!(cal.c6.is_finite() && cal.c6 > 0.0);
}

#[test]
fn leading_eigen_at_zero() {
    for ifs in [lebesgue(), nonlinear()] {
        let e = leading_eigen(&op(&ifs, 0.0, 6)).unwrap();
        assert!((e.lambda - c(1.0)).norm() <= 1e-14);
        for v in &e.vector.values {
            assert!((v - c(1.0)).norm() <= 1e-10);
        }
    }
}

#[test]
fn leading_eigen_affine_closed_form() {
    let e = leading_eigen(&op(&two_ratio(), 0.05, 6)).unwrap();
    let expect = character_sum(&[0.5, 1.0 / 3.0], &[0.5, 0.5], 0.05);
    assert!((e.lambda - expect).norm() <= 1e-10);
}

#[test]
fn leading_eigen_rejects_large_theta() {
    assert!(matches!(
        leading_eigen(&op(&lebesgue(), 0.5, 4)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn leading_eigen_nonlinear_window_and_depth() {
    let nl = nonlinear();
    let chi = lyapunov_chi(&nl, 50_000, 100, 1).unwrap().value;
    let theta = 0.05;
    let eig = |depth| {
        leading_eigen(
            &TransferOperator::new(
                &nl,
                OperatorConfig {
                    theta,
                    depth,
                    recentred: true,
                    chi,
                },
            )
            .unwrap(),
        )
        .unwrap()
        .lambda
    };
    let l8 = eig(8);
    assert!(l8.norm() <= 1.0 + 1e-12);
    assert!(l8.norm() >= 1.0 - 10.0 * theta * theta);
    // successive depth differences shrink at least like ρ^2 per +2 levels
    let (l6, l10) = (eig(6), eig(10));
    let d1 = (l8 - l6).norm();
    let d2 = (l10 - l8).norm();
    let k = d1 / nl.rho().powi(6);
    assert!(d2 <= k * nl.rho().powi(8), "{d1} {d2}");
}

#[test]
fn curvature_examples() {
    let tr = two_ratio();
    let chi = 0.5 * (2f64.ln() + 3f64.ln());
    let var = variance_r0(&tr, 10, 100, 1).unwrap();
    let fit = curvature_check(&tr, &[0.02, 0.05, 0.1], 200, 4, &var, chi).unwrap();
    let target = (2.0 * PI).powi(2) * var.r0_sq / 2.0;
    assert!((fit.c - target).abs() <= 0.3 * target, "{} vs {target}", fit.c);

    let fit = curvature_check(&tr, &[0.0], 5, 4, &var, chi).unwrap_err();
    assert!(matches!(fit, Error::Numerical(_) | Error::InvalidInput(_) | Error::TooFewPoints { .. }));

    let nl = nonlinear();
    let chi = lyapunov_chi(&nl, 50_000, 100, 1).unwrap().value;
    let var = variance_r0(&nl, 20_000, 100, 1).unwrap();
    let fit = curvature_check(&nl, &[0.02, 0.05, 0.1], 100, 6, &var, chi).unwrap();
    assert!(fit.c > 0.0);

    let flat = variance_r0(&lebesgue(), 10, 100, 1).unwrap();
    assert!(matches!(
        curvature_check(&lebesgue(), &[0.05], 10, 4, &flat, 2f64.ln()),
        Err(Error::DegenerateVariance(_))
    ));
}

#[test]
fn curvature_theta_zero_row_is_one() {
    let tr = two_ratio();
    let o = TransferOperator::new(
        &tr,
        OperatorConfig {
            theta: 0.0,
            depth: 4,
            recentred: true,
            chi: 0.9,
        },
    )
    .unwrap();
    assert_eq!(o.apply_n(&o.one(), 50).unwrap().sup_norm(), 1.0);
}

#[test]
fn dolgopyat_homogeneous_has_no_gap() {
    let hom = lebesgue();
    let grid: Vec<f64> = (1..=6).map(|m| m as f64 / 2f64.ln()).filter(|t| *t > 1.0).collect();
    let cal = c6_calibrate(&hom, &grid, 4, 6, 8, 1).unwrap();
    let rep = dolgopyat_check(&hom, &grid, 2.0, 6, cal.c6, 8, 1).unwrap();
    for row in &rep.rows {
        assert!(row.norm_estimate >= 1.0 - 1e-12, "{row:?}");
    }
}

#[test]
fn dolgopyat_rejects_small_theta() {
    assert!(dolgopyat_check(&nonlinear(), &[0.5, 2.0], 2.0, 4, 3.0, 4, 1).is_err());
}

#[test]
fn dolgopyat_pointwise_contraction_gives_gap() {
    // for two_ratio, |P𝟙| = |cos(πθ log(3/2))| < 1 away from resonances
    let tr = two_ratio();
    let theta = 2.0;
    let cal = c6_calibrate(&tr, &[theta], 2, 5, 8, 1).unwrap();
    let rep = dolgopyat_check(&tr, &[theta], 2.0, 5, cal.c6, 8, 1).unwrap();
    assert!(rep.rows[0].norm_estimate < 1.0);
}

#[test]
fn decay_of_one_examples() {
    let theta = 2.0;
    let g = decay_of_one(&op(&lebesgue(), theta, 5), 1, 0.1).unwrap();
    assert_relative_eq!(g, 1.0, max_relative = 1e-14);
    let g = decay_of_one(&op(&two_ratio(), theta, 5), 1, 0.1).unwrap();
    let closed = (PI * theta * 1.5f64.ln()).cos().abs();
    assert_relative_eq!(g, closed, max_relative = 1e-13);

    let nl = nonlinear();
    let o = op(&nl, 8.0, 8);
    assert!(decay_of_one(&o, 64, 2.0).unwrap() <= 1.0);
    let mut prev = f64::INFINITY;
    for n in [16, 32, 64, 128] {
        let v = decay_of_one(&o, n, 2.0).unwrap();
        assert!(v <= prev + 1e-15);
        prev = v;
    }
    assert!(decay_of_one(&o, 2, 2.0).is_err());
    assert!(decay_of_one(&op(&nl, 0.5, 4), 10, 2.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sup_norm_contraction(theta in -50.0f64..50.0, seed in 0u64..1000) {
        let nl = nonlinear();
        let o = op(&nl, theta, 5);
        let phi = CylinderFunction::from_fn(5, 2, nl.rho(), |w| {
            let h = w.iter().fold(seed, |a, &s| a.wrapping_mul(6364136223846793005).wrapping_add(s as u64 + 1));
            Complex64::from_polar((h >> 11) as f64 / (1u64 << 53) as f64, (h % 628) as f64 / 100.0)
        }).unwrap();
        prop_assert!(o.apply(&phi).unwrap().sup_norm() <= phi.sup_norm() * (1.0 + 1e-14));
    }
}
