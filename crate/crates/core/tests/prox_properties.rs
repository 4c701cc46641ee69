mod common;

use common::*;
use proptest::prelude::*;
use smm_core::prox::*;
use smm_core::spectral::{JacobianMode, SpectralJacobian, ThinSvd};
use smm_core::{Matrix, Vector};

fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-20.0..20.0f64, n),
            prop::collection::vec(-20.0..20.0f64, n),
            0.01..10.0f64,
        )
    })
}

fn mat_strategy() -> impl Strategy<Value = (Matrix, Matrix, f64)> {
    (1usize..7, 1usize..7).prop_flat_map(|(p, q)| {
        (
            prop::collection::vec(-5.0..5.0f64, p * q),
            prop::collection::vec(-5.0..5.0f64, p * q),
            0.0..1.3f64,
        )
            .prop_map(move |(a, b, t)| {
                let x = Matrix::from_vec(p, q, a);
                let top = ThinSvd::compute(&x).unwrap().spectral_norm();
                (x, Matrix::from_vec(p, q, b), t * top)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn box_moreau_and_nonexpansive((x, y, c) in vec_strategy()) {
        let x = Vector::from_vec(x);
        let y = Vector::from_vec(y);
        let px = project_box(&x, c);
        prop_assert!(((&px + prox_support_fn(&x, c)) - &x).norm() <= 1e-12 * x.norm().max(1.0));
        prop_assert!(px.iter().all(|&v| (0.0..=c).contains(&v)));
        prop_assert_eq!(project_box(&px, c), px.clone());
        let py = project_box(&y, c);
        prop_assert!((&px - &py).norm() <= (&x - &y).norm() * (1.0 + 1e-12));
    }

    #[test]
    fn box_envelope_gradient_is_projection((x, _y, c) in vec_strategy()) {
        let x = Vector::from_vec(x);
        let grad = project_box(&x, c);
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (env_support_fn(&xp, c) - env_support_fn(&xm, c)) / (2.0 * h);
            prop_assert!((fd - grad[k]).abs() <= 1e-6 * (1.0 + c));
        }
    }

    #[test]
    fn envelope_value_matches_definition((x, _y, c) in vec_strategy()) {
        let x = Vector::from_vec(x);
        let p = prox_support_fn(&x, c);
        let direct = support_fn(&p, c) + 0.5 * (&p - &x).norm_squared();
        prop_assert!((env_support_fn(&x, c) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn spectral_moreau_against_svd_oracle((x, y, tau) in mat_strategy()) {
        let prox = prox_nuclear(&x, tau).unwrap();
        let proj = project_spectral_ball(&x, tau).unwrap();
        let scale = x.norm().max(1.0);
        prop_assert!((&prox.y - spectral_map(&x, |s| (s - tau).max(0.0))).norm() <= 1e-12 * scale);
        prop_assert!((&proj + &prox.y - &x).norm() <= 1e-12 * scale);
        prop_assert!(ThinSvd::compute(&proj).unwrap().spectral_norm() <= tau * (1.0 + 1e-12) + 1e-12);
        prop_assert!((project_spectral_ball(&proj, tau).unwrap() - &proj).norm() <= 1e-12 * scale);
        let py = project_spectral_ball(&y, tau).unwrap();
        prop_assert!((&proj - &py).norm() <= (&x - &y).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn prox_is_positively_homogeneous((x, _y, tau) in mat_strategy(), t in 0.1..10.0f64) {
        let a = prox_nuclear(&(&x * t), tau * t).unwrap().y;
        let b = prox_nuclear(&x, tau).unwrap().y * t;
        prop_assert!((&a - &b).norm() <= 1e-11 * (1.0 + b.norm()));
    }

    #[test]
    fn rank_of_prox_is_count_above_tau((x, _y, tau) in mat_strategy()) {
        let prox = prox_nuclear(&x, tau).unwrap();
        let nu = ThinSvd::compute(&x).unwrap().nu;
        prop_assert_eq!(prox.k_bar, nu.iter().filter(|&&s| s > tau).count());
    }
}

#[test]
fn nuclear_envelope_gradient_is_projection() {
    let mut r = rng(11);
    for _ in 0..30 {
        let x = gaussian(4, 3, &mut r) * 2.0;
        let tau = 1.5;
        let grad = project_spectral_ball(&x, tau).unwrap();
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (env_nuclear(&xp, tau).unwrap() - env_nuclear(&xm, tau).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6, "{fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn envelope_decreases_as_tau_decreases() {
    // E_{τ‖·‖_*}(X) = min_Y τ‖Y‖_* + ½‖Y − X‖² is nondecreasing in τ.
    let mut r = rng(12);
    for _ in 0..20 {
        let x = gaussian(3, 5, &mut r) * 3.0;
        let taus = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0];
        let vals: Vec<f64> = taus.iter().map(|&t| env_nuclear(&x, t).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{vals:?}");
        assert!((vals[taus.len() - 1] - 0.5 * x.norm_squared()).abs() < 1e-9);
    }
}

/// The Jacobian of the projection agrees with central differences where the
/// projection is differentiable (no singular value at `τ`).
#[test]
fn spectral_jacobian_matches_finite_differences() {
    let mut r = rng(13);
    let mut tested = 0;
    while tested < 25 {
        let (p, q) = (3 + tested % 3, 5 - tested % 2);
        let x = gaussian(p, q, &mut r) * 2.0;
        let nu = ThinSvd::compute(&x).unwrap().nu;
        let tau = 0.5 * (nu[0] + nu[nu.len() - 1]);
        if nu.iter().any(|&s| (s - tau).abs() < 0.05) {
            continue;
        }
        tested += 1;
        let jac = SpectralJacobian::build(&x, tau).unwrap();
        let d = gaussian(p, q, &mut r);
        let h = 1e-6;
        let fd = (project_spectral_ball(&(&x + &d * h), tau).unwrap()
            - project_spectral_ball(&(&x - &d * h), tau).unwrap())
            / (2.0 * h);
        for mode in [JacobianMode::Fast, JacobianMode::Dense] {
            let g = jac.apply(&d, mode).unwrap();
            assert!((&g - &fd).norm() < 1e-6 * d.norm(), "{mode:?}");
        }
    }
}

#[test]
fn interior_jacobian_is_identity_and_zero_ball_is_zero() {
    let mut r = rng(14);
    let x = gaussian(3, 4, &mut r);
    let d = gaussian(3, 4, &mut r);
    let top = ThinSvd::compute(&x).unwrap().spectral_norm();
    let jac = SpectralJacobian::build(&x, top * 1.5).unwrap();
    assert!(jac.is_interior());
    assert_eq!(jac.apply(&d, JacobianMode::Fast).unwrap(), d);
    let zero = SpectralJacobian::build(&x, 0.0).unwrap();
    assert_eq!(zero.apply(&d, JacobianMode::Fast).unwrap(), Matrix::zeros(3, 4));
}

#[test]
fn transposed_orientation_matches() {
    let mut r = rng(15);
    for _ in 0..10 {
        let x = gaussian(6, 3, &mut r) * 2.0;
        let d = gaussian(6, 3, &mut r);
        let tau = 1.0;
        let a = SpectralJacobian::build(&x, tau).unwrap().apply(&d, JacobianMode::Fast).unwrap();
        let b = SpectralJacobian::build(&x.transpose(), tau)
            .unwrap()
            .apply(&d.transpose(), JacobianMode::Fast)
            .unwrap();
        assert!((a - b.transpose()).norm() < 1e-12 * d.norm().max(1.0));
    }
}
