use std::f64::consts::FRAC_2_PI;

use mesoscope_core::conditioning::{condition_on_quadrature, uniform_grid};
use mesoscope_core::fock::quadrature_wavefunction;
use mesoscope_core::frame::{gif_evolve, reconstruct_lab_state, GifState};
use mesoscope_core::opa::{evolve_phase_matched, full_oracle_evolve};
use mesoscope_core::phase_space::{state_fidelity, wigner};
use mesoscope_core::{FockVector, GaussianFrame, HamiltonianSpec, C64};

fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

#[test]
fn fock_wigner_matches_laguerre_form() {
    let xs = uniform_grid(-3.0, 3.0, 25);
    for n in 0..10 {
        let grid = wigner(&FockVector::basis(&[16], &[n]), &xs, &xs).unwrap();
        for (ip, p) in xs.iter().enumerate() {
            for (ix, x) in xs.iter().enumerate() {
                let r2 = x * x + p * p;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let want = FRAC_2_PI * sign * (-2.0 * r2).exp() * laguerre(n, 4.0 * r2);
                assert!((grid.at(ix, ip) - want).abs() < 1e-12, "n={n} at ({x},{p})");
            }
        }
    }
}

#[test]
fn coherent_wigner_is_a_displaced_gaussian() {
    let alpha = C64::new(1.2, -0.7);
    let s = FockVector::coherent(50, alpha).normalized().unwrap();
    let xs = uniform_grid(-2.0, 3.0, 21);
    let ps = uniform_grid(-3.0, 2.0, 21);
    let grid = wigner(&s, &xs, &ps).unwrap();
    for (ip, p) in ps.iter().enumerate() {
        for (ix, x) in xs.iter().enumerate() {
            let d2 = (x - alpha.re).powi(2) + (p - alpha.im).powi(2);
            assert!((grid.at(ix, ip) - FRAC_2_PI * (-2.0 * d2).exp()).abs() < 1e-10);
        }
    }
}

#[test]
fn coherent_quadrature_density_is_gaussian() {
    let alpha = C64::new(-0.8, 0.4);
    let s = FockVector::coherent(40, alpha).normalized().unwrap();
    let xs = uniform_grid(-3.0, 2.0, 51);
    let psi = quadrature_wavefunction(&s, 0, &xs).unwrap();
    for (x, a) in xs.iter().zip(&psi) {
        let want = (2.0 / std::f64::consts::PI).sqrt() * (-2.0 * (x - alpha.re).powi(2)).exp();
        assert!((a.norm_sqr() - want).abs() < 1e-10);
    }
}

fn gif_vs_lab(alpha: C64, n: f64, delta: f64, t: f64) -> f64 {
    let spec = HamiltonianSpec::chi2(1.0, delta);
    let beta = C64::new(0.0, n.sqrt());
    let lab_dims = [24, 32];
    let initial = GifState { frame: GaussianFrame::opa(alpha, beta), residual: FockVector::vacuum(&[16, 16]) };
    let gif = gif_evolve(&spec, &initial, t, 0.005, 1e-8).unwrap();
    let lab0 = FockVector::tensor(
        &FockVector::coherent(lab_dims[0], alpha).normalized().unwrap(),
        &FockVector::coherent(lab_dims[1], beta).normalized().unwrap(),
    )
    .unwrap();
    let oracle = full_oracle_evolve(&spec, &lab0, t, 0.005, 1e-8).unwrap();
    assert!(gif.trust.is_trusted() && oracle.trust.is_trusted());
    let lab = reconstruct_lab_state(&gif.state, &lab_dims, 1e-8).unwrap();
    state_fidelity(&lab, &oracle.state).unwrap()
}

#[test]
fn gif_matches_lab_oracle() {
    for (n, delta) in [(4.0f64, 0.0), (4.0, 6.0), (6.0, 0.0), (6.0, 3.0 * 6f64.sqrt())] {
        let f = gif_vs_lab(C64::default(), n, delta, 0.2);
        assert!(f > 0.999999, "n={n} delta={delta}: {f}");
    }
}

#[test]
fn gif_matches_lab_oracle_with_seeded_signal() {
    let f = gif_vs_lab(C64::new(0.6, -0.3), 4.0, 2.0, 0.15);
    assert!(f > 0.999999, "{f}");
}

#[test]
fn reconstruction_of_the_identity_frame_is_the_residual() {
    let residual = FockVector::tensor(&FockVector::basis(&[6], &[2]), &FockVector::basis(&[5], &[1])).unwrap();
    let state = GifState { frame: GaussianFrame::identity(2), residual: residual.clone() };
    let lab = reconstruct_lab_state(&state, &[6, 5], 1e-8).unwrap();
    assert!((state_fidelity(&lab, &residual).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn cubic_model_matches_gif_at_large_n() {
    // In the Gaussian frame the residual of a phase-matched run is generated
    // by the cubic QND term; check the joint state and a conditional slice.
    let (n, t) = (100.0, 0.15);
    let dims = [40, 40];
    let spec = HamiltonianSpec::chi2(1.0, 0.0);
    let initial = GifState { frame: GaussianFrame::opa(C64::default(), C64::new(0.0, 10.0)), residual: FockVector::vacuum(&dims) };
    let gif = gif_evolve(&spec, &initial, t, 0.005, 1e-6).unwrap();
    assert!(gif.trust.is_trusted());
    let eff = evolve_phase_matched(&FockVector::vacuum(&dims), n, 1.0, t).unwrap();
    let joint = state_fidelity(&gif.state.residual, &eff).unwrap();
    assert!(joint > 0.99, "joint fidelity {joint}");
    let a = condition_on_quadrature(&gif.state.residual, std::f64::consts::FRAC_PI_2, -0.2).unwrap();
    let b = condition_on_quadrature(&eff, std::f64::consts::FRAC_PI_2, -0.2).unwrap();
    let cond = state_fidelity(&a.conditional_state, &b.conditional_state).unwrap();
    assert!(cond > 0.99, "conditional fidelity {cond}");
}
