//! Degenerate χ² parametric amplification: exact two-mode evolution and the
//! reduced single-interaction models valid at large pump photon number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockVector;
use crate::frame::HamiltonianSpec;
use crate::linalg::{expm_multiply, SparseMatrix};
use crate::poly::OperatorPoly;
use crate::trust::Trust;
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub state: FockVector,
    pub trust: Trust,
    pub initial_charge: f64,
    pub final_charge: f64,
    /// `(t, state)` after every step, when recording was requested.
    #[serde(skip)]
    pub samples: Vec<(f64, FockVector)>,
}

/// `<Σ w_m a_m†a_m>` from the photon-number distributions.
pub fn charge_expectation(state: &FockVector, weights: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(m, w)| w * state.photon_distribution(m).iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>())
        .sum()
}

pub fn full_oracle_evolve(spec: &HamiltonianSpec, state: &FockVector, t: f64, dt: f64, tail_tolerance: f64) -> Result<OracleRun> {
    oracle_run(spec, state, t, dt, tail_tolerance, false)
}

/// As [`full_oracle_evolve`], also keeping the state after every step.
pub fn full_oracle_trajectory(spec: &HamiltonianSpec, state: &FockVector, t: f64, dt: f64, tail_tolerance: f64) -> Result<OracleRun> {
    oracle_run(spec, state, t, dt, tail_tolerance, true)
}

/// Schrödinger evolution under the full Hamiltonian on the truncated space,
/// stepping by `dt` with a norm check after every step.
fn oracle_run(
    spec: &HamiltonianSpec,
    state: &FockVector,
    t: f64,
    dt: f64,
    tail_tolerance: f64,
    record: bool,
) -> Result<OracleRun> {
    spec.validate()?;
    if state.modes() != spec.modes() {
        return Err(Error::ModeMismatch { expected: spec.modes(), found: state.modes() });
    }
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t >= 0 (dt={dt}, t={t})")));
    }
    let steps = ((t / dt) - 1e-12).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mat = SparseMatrix::from_poly(&spec.poly(), state.dims());
    let weights = spec.charge_weights().unwrap_or_default();
    let initial_charge = charge_expectation(state, &weights);
    let norm0 = state.norm();
    let mut trust = Trust::with_tolerance(tail_tolerance);
    trust.tail_mass = state.tail_mass();
    let mut psi = state.amplitudes().to_vec();
    let mut samples = Vec::new();
    for s in 0..steps {
        psi = expm_multiply(&mat, &psi, C64::new(0.0, -h));
        let drift = (crate::linalg::norm(&psi) - norm0).abs();
        trust.norm_drift = trust.norm_drift.max(drift);
        if drift > Trust::NORM_TOLERANCE {
            return Err(Error::NormDrift { drift });
        }
        let cur = FockVector::new(state.dims().to_vec(), psi.clone())?;
        trust.tail_mass = trust.tail_mass.max(cur.tail_mass());
        if !weights.is_empty() {
            let q = charge_expectation(&cur, &weights);
            trust.charge_drift = trust.charge_drift.max((q - initial_charge).abs() / initial_charge.abs().max(1.0));
        }
        if record {
            samples.push(((s + 1) as f64 * h, cur));
        }
    }
    if trust.tail_mass > tail_tolerance {
        return Err(Error::TruncationOverflow { mass: trust.tail_mass, tolerance: tail_tolerance });
    }
    let out = FockVector::new(state.dims().to_vec(), psi)?;
    let final_charge = charge_expectation(&out, &weights);
    Ok(OracleRun { state: out, trust, initial_charge, final_charge, samples })
}

/// `g e^{2√n g t}`, the enhanced cubic coupling of the phase-matched regime.
pub fn phase_matched_gain(n: f64, g: f64, t: f64) -> f64 {
    g * (2.0 * n.sqrt() * g * t).exp()
}

/// `∫_0^t g_eff dt' = (e^{2√n g t} - 1)/(2√n)`.
pub fn phase_matched_area(n: f64, g: f64, t: f64) -> f64 {
    let k = 2.0 * n.sqrt();
    if k == 0.0 {
        return g * t;
    }
    ((k * g * t).exp() - 1.0) / k
}

/// `x_a² x_b` on the (signal, pump) pair.
pub fn cubic_qnd_operator() -> OperatorPoly {
    let xa = OperatorPoly::quadrature_x(2, 0);
    let xb = OperatorPoly::quadrature_x(2, 1);
    &(&xa * &xa) * &xb
}

/// `H_eff = g_eff(t) x_a² x_b` and `g_eff(t)`.
pub fn effective_phase_matched(n: f64, g: f64, t: f64) -> (OperatorPoly, f64) {
    let g_eff = phase_matched_gain(n, g, t);
    (cubic_qnd_operator() * g_eff, g_eff)
}

/// Evolves a two-mode state under the phase-matched effective model from 0
/// to `t`. All `H_eff(t)` commute, so the propagator is
/// `exp(-i A(t) x_a² x_b)` with the closed-form area `A(t)`.
pub fn evolve_phase_matched(state: &FockVector, n: f64, g: f64, t: f64) -> Result<FockVector> {
    if state.modes() != 2 {
        return Err(Error::ModeMismatch { expected: 2, found: state.modes() });
    }
    let area = phase_matched_area(n, g, t);
    let mat = SparseMatrix::from_poly(&cubic_qnd_operator(), state.dims());
    let psi = expm_multiply(&mat, state.amplitudes(), C64::new(0.0, -area));
    FockVector::new(state.dims().to_vec(), psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeClass {
    PhaseMatched,
    PhaseMismatched,
    Intermediate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpaRegime {
    pub n: f64,
    pub g: f64,
    pub delta: f64,
    pub classification: RegimeClass,
    /// `½ atanh(g√n/δ)`, mismatched regime only.
    pub u: Option<f64>,
    /// `√(δ² - g²n)`, mismatched regime only.
    pub big_delta: Option<f64>,
}

/// Phase matched at `δ = 0`, mismatched for `|δ| > g√n`, intermediate otherwise.
pub fn classify_regime(n: f64, g: f64, delta: f64) -> OpaRegime {
    let coupling = g * n.sqrt();
    let mut r = OpaRegime { n, g, delta, classification: RegimeClass::Intermediate, u: None, big_delta: None };
    if delta == 0.0 {
        r.classification = RegimeClass::PhaseMatched;
    } else if delta.abs() > coupling {
        r.classification = RegimeClass::PhaseMismatched;
        r.u = Some(0.5 * (coupling / delta.abs()).atanh());
        r.big_delta = Some((delta * delta - coupling * coupling).sqrt());
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct PonderomotiveModel {
    pub poly: OperatorPoly,
    /// The squeezed mode `Â` whose number operator couples to the pump.
    pub mode_op: OperatorPoly,
    pub g_eff: f64,
    pub u: f64,
    pub big_delta: f64,
    /// Pump quadrature angle that is displaced by the coupling, i.e. the
    /// informative homodyne angle.
    pub readout_angle: f64,
}

/// `H_eff = g sinh(2u) Â†Â x_b` with `Â = cosh u a - sinh u a†`.
pub fn effective_phase_mismatched(n: f64, g: f64, delta: f64) -> Result<PonderomotiveModel> {
    ponderomotive_model(n, g, delta, std::f64::consts::PI)
}

/// Ponderomotive model for a pump mean field `β = √n e^{iφ}`.
///
/// The Bogoliubov mode is `C = e^{-iφ/2}(cosh u a + e^{iφ} sinh u a†)` and
/// `H_eff = -g sinh(2u) C†C x_b(φ)`, where `x_b(φ)` is the pump quadrature at
/// angle `φ`. At `φ = π` this is `g sinh(2u) Â†Â x_b`.
pub fn ponderomotive_model(n: f64, g: f64, delta: f64, pump_phase: f64) -> Result<PonderomotiveModel> {
    let coupling = g * n.sqrt();
    if !(delta > coupling) {
        return Err(Error::RegimeViolation(format!(
            "ponderomotive model needs delta > g*sqrt(n) (delta={delta}, g*sqrt(n)={coupling})"
        )));
    }
    let u = 0.5 * (coupling / delta).atanh();
    let big_delta = (delta * delta - coupling * coupling).sqrt();
    let g_eff = g * (2.0 * u).sinh();
    let a = OperatorPoly::annihilation(2, 0);
    let ad = OperatorPoly::creation(2, 0);
    let c = (a * u.cosh() + ad * (C64::from_polar(u.sinh(), pump_phase))) * C64::from_polar(1.0, -pump_phase / 2.0);
    let number = &c.adjoint() * &c;
    let b = OperatorPoly::annihilation(2, 1);
    let bd = OperatorPoly::creation(2, 1);
    let xb = (b * C64::from_polar(0.5, -pump_phase)) + (bd * C64::from_polar(0.5, pump_phase));
    let poly = (&number * &xb) * (-g_eff);
    Ok(PonderomotiveModel {
        poly,
        mode_op: c,
        g_eff,
        u,
        big_delta,
        readout_angle: pump_phase + std::f64::consts::FRAC_PI_2,
    })
}

/// Evolves under a time-independent two-mode poly for time `t`.
pub fn evolve_static(poly: &OperatorPoly, state: &FockVector, t: f64) -> Result<FockVector> {
    if poly.modes() != state.modes() {
        return Err(Error::ModeMismatch { expected: poly.modes(), found: state.modes() });
    }
    let mat = SparseMatrix::from_poly(poly, state.dims());
    let psi = expm_multiply(&mat, state.amplitudes(), C64::new(0.0, -t));
    FockVector::new(state.dims().to_vec(), psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::expectation;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_coupling_oracle_is_identity() {
        let s = FockVector::tensor(&FockVector::coherent(10, c(0.5, 0.1)), &FockVector::basis(&[4], &[1])).unwrap();
        let run = full_oracle_evolve(&HamiltonianSpec::chi2(0.0, 0.0), &s, 1.0, 0.1, 1e-6).unwrap();
        assert_eq!(run.state, s);
    }

    #[test]
    fn two_level_transfer() {
        let s = FockVector::basis(&[5, 3], &[0, 1]);
        let run = full_oracle_trajectory(&HamiltonianSpec::chi2(1.0, 0.0), &s, 3.0, 0.01, 1e-8).unwrap();
        for (t, st) in &run.samples {
            let p = st.amplitude(&[2, 0]).norm_sqr();
            let want = (t / 2f64.sqrt()).sin().powi(2);
            assert!((p - want).abs() < 1e-6);
        }
        assert!(run.trust.charge_drift < 1e-8);
    }

    #[test]
    fn coherent_pump_conserves_charge() {
        let pump = FockVector::coherent(24, c(0.0, 2.0)).normalized().unwrap();
        let s = FockVector::tensor(&FockVector::vacuum(&[32]), &pump).unwrap();
        let run = full_oracle_evolve(&HamiltonianSpec::chi2(1.0, 0.0), &s, 0.3, 0.01, 1e-6).unwrap();
        assert!((run.final_charge - run.initial_charge).abs() < 1e-8);
    }

    #[test]
    fn phase_matched_gain_values() {
        assert_eq!(effective_phase_matched(100.0, 1.0, 0.0).1, 1.0);
        let (_, g) = effective_phase_matched(100.0, 1.0, 0.1);
        assert!((g - 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn ponderomotive_parameters() {
        let m = effective_phase_mismatched(1.0, 0.5, 1.0).unwrap();
        assert!((m.u - 0.27465307216702745).abs() < 1e-12);
        assert!((m.g_eff / 0.5 - 0.5 / 0.75f64.sqrt()).abs() < 1e-12);
        let m = effective_phase_mismatched(1.0, 1.0, 2.0).unwrap();
        assert!((m.big_delta - 3f64.sqrt()).abs() < 1e-12);
        let m = effective_phase_mismatched(1.0, 1e-9, 2.0).unwrap();
        assert!(m.u.abs() < 1e-9 && m.g_eff.abs() < 1e-17);
    }

    #[test]
    fn ponderomotive_literal_form() {
        // at φ = π the model is g sinh(2u) Â†Â x_b with Â = cosh u a - sinh u a†
        let m = effective_phase_mismatched(4.0, 0.5, 3.0).unwrap();
        let a = OperatorPoly::annihilation(2, 0);
        let ad = OperatorPoly::creation(2, 0);
        let big_a = a * m.u.cosh() - ad * m.u.sinh();
        let want = &(&big_a.adjoint() * &big_a) * &OperatorPoly::quadrature_x(2, 1);
        let diff = (m.poly.clone() - want * m.g_eff).prune(1e-12);
        assert!(diff.is_empty(), "{diff}");
    }

    #[test]
    fn regime_violation() {
        let err = effective_phase_mismatched(100.0, 1.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::RegimeViolation(_)));
    }

    #[test]
    fn regime_classes() {
        assert_eq!(classify_regime(100.0, 1.0, 0.0).classification, RegimeClass::PhaseMatched);
        let r = classify_regime(100.0, 1.0, 20.0);
        assert_eq!(r.classification, RegimeClass::PhaseMismatched);
        let (u, d) = (r.u.unwrap(), r.big_delta.unwrap());
        assert!((d * (2.0 * u).cosh() - 20.0).abs() < 1e-10);
        assert!((d * (2.0 * u).sinh() - 10.0).abs() < 1e-10);
        let r = classify_regime(100.0, 1.0, 5.0);
        assert_eq!(r.classification, RegimeClass::Intermediate);
        assert!(r.u.is_none() && r.big_delta.is_none());
    }

    #[test]
    fn ponderomotive_conserves_squeezed_number() {
        let m = ponderomotive_model(25.0, 0.2, 2.0, std::f64::consts::FRAC_PI_2).unwrap();
        let number = &m.mode_op.adjoint() * &m.mode_op;
        let signal = FockVector::coherent(40, c(0.6, 0.3)).normalized().unwrap();
        let s = FockVector::tensor(&signal, &FockVector::vacuum(&[40])).unwrap();
        let before = expectation(&number, &s).unwrap().re;
        let after_state = evolve_static(&m.poly, &s, 2.0).unwrap();
        let after = expectation(&number, &after_state).unwrap().re;
        assert!((after - before).abs() < 1e-8, "{before} {after}");
    }
}
