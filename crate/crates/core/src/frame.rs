//! Gaussian interaction frame.
//!
//! A lab state is factorized as `|Ψ> = D(α) S(μ,ν) |φ>`: `D` carries the
//! classical mean field, `S` the linearized (Gaussian) fluctuations, and the
//! residual `|φ>` evolves under `H_eff = U†HU - iU†∂_tU` with `U = D S`.
//! Signal modes use a full frame; the pump is tracked as a mean field only.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{displace_mode, squeeze_mode, FockVector};
use crate::linalg::{expm_multiply, SparseMatrix};
use crate::poly::{Monomial, OperatorPoly};
use crate::trust::Trust;
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);
const PRUNE: f64 = 1e-9;
const FRAME_TOLERANCE: f64 = 1e-6;

/// `H = (g/2)(a†² b + a² b†) + δ a†a` with the signal as mode 0, pump as mode 1.
pub fn chi2_hamiltonian(g: f64, delta: f64) -> OperatorPoly {
    let ad2b = OperatorPoly::monomial(2, 0, 2, 0) * OperatorPoly::annihilation(2, 1);
    let a2bd = OperatorPoly::monomial(2, 0, 0, 2) * OperatorPoly::creation(2, 1);
    (ad2b + a2bd) * (0.5 * g) + OperatorPoly::number(2, 0) * delta
}

#[derive(Clone, Debug, PartialEq)]
pub enum HamiltonianForm {
    Chi2,
    Custom(OperatorPoly),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub g: f64,
    pub delta: f64,
    pub form: HamiltonianForm,
}

impl HamiltonianSpec {
    pub fn chi2(g: f64, delta: f64) -> Self {
        HamiltonianSpec { g, delta, form: HamiltonianForm::Chi2 }
    }

    pub fn custom(poly: OperatorPoly) -> Self {
        HamiltonianSpec { g: 0.0, delta: 0.0, form: HamiltonianForm::Custom(poly) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coupling must satisfy g >= 0 with finite delta (g={}, delta={})",
                self.g, self.delta
            )));
        }
        Ok(())
    }

    pub fn poly(&self) -> OperatorPoly {
        match &self.form {
            HamiltonianForm::Chi2 => chi2_hamiltonian(self.g, self.delta),
            HamiltonianForm::Custom(p) => p.clone(),
        }
    }

    pub fn modes(&self) -> usize {
        match &self.form {
            HamiltonianForm::Chi2 => 2,
            HamiltonianForm::Custom(p) => p.modes(),
        }
    }

    /// Weights `w_m` of the conserved charge `Σ w_m a_m†a_m`, when known.
    pub fn charge_weights(&self) -> Option<Vec<f64>> {
        match self.form {
            HamiltonianForm::Chi2 => Some(vec![1.0, 2.0]),
            HamiltonianForm::Custom(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameRole {
    Full,
    MeanField,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeFrame {
    pub alpha: C64,
    pub mu: C64,
    pub nu: C64,
    pub role: FrameRole,
}

impl ModeFrame {
    pub fn new(alpha: C64, role: FrameRole) -> Self {
        ModeFrame { alpha, mu: C64::new(1.0, 0.0), nu: C64::default(), role }
    }

    pub fn symplectic_defect(&self) -> f64 {
        self.mu.norm_sqr() - self.nu.norm_sqr() - 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFrame {
    pub modes: Vec<ModeFrame>,
    pub time: f64,
}

impl GaussianFrame {
    pub fn identity(modes: usize) -> Self {
        GaussianFrame {
            modes: vec![ModeFrame::new(C64::default(), FrameRole::Full); modes],
            time: 0.0,
        }
    }

    /// Signal (mode 0) with a full frame, pump (mode 1) as a mean field.
    pub fn opa(alpha: C64, beta: C64) -> Self {
        GaussianFrame {
            modes: vec![ModeFrame::new(alpha, FrameRole::Full), ModeFrame::new(beta, FrameRole::MeanField)],
            time: 0.0,
        }
    }

    pub fn alphas(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.alpha).collect()
    }

    pub fn symplectic_defect(&self) -> f64 {
        self.modes.iter().map(|m| m.symplectic_defect().abs()).fold(0.0, f64::max)
    }

    fn pack(&self) -> Vec<C64> {
        self.modes.iter().flat_map(|m| [m.alpha, m.mu, m.nu]).collect()
    }

    fn unpack(&self, y: &[C64], time: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .zip(y.chunks(3))
            .map(|(m, c)| ModeFrame { alpha: c[0], mu: c[1], nu: c[2], role: m.role })
            .collect();
        GaussianFrame { modes, time }
    }
}

/// Time derivatives of every frame parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRates {
    pub alpha_dot: Vec<C64>,
    pub mu_dot: Vec<C64>,
    pub nu_dot: Vec<C64>,
}

impl FrameRates {
    pub fn zero(modes: usize) -> Self {
        FrameRates {
            alpha_dot: vec![C64::default(); modes],
            mu_dot: vec![C64::default(); modes],
            nu_dot: vec![C64::default(); modes],
        }
    }

    fn pack(&self) -> Vec<C64> {
        (0..self.alpha_dot.len())
            .flat_map(|m| [self.alpha_dot[m], self.mu_dot[m], self.nu_dot[m]])
            .collect()
    }
}

/// `(∂_tα, ∂_tβ) = -i ∂H/∂(α*, β*)` for a two-mode Hamiltonian.
pub fn mean_field_rhs(spec: &HamiltonianSpec, alpha: C64, beta: C64) -> (C64, C64) {
    let grad = spec.poly().classical_gradient_conj(&[alpha, beta]);
    (-I * grad[0], -I * grad[1])
}

fn displaced(h: &OperatorPoly, frame: &GaussianFrame) -> OperatorPoly {
    let subs: Vec<_> = frame
        .modes
        .iter()
        .enumerate()
        .map(|(m, f)| OperatorPoly::annihilation(h.modes(), m) + OperatorPoly::scalar(h.modes(), f.alpha))
        .collect();
    h.substitute(&subs)
}

/// Single-mode quadratic part of `D†HD` on `mode`, with every other mode
/// replaced by its mean field.
pub fn quadratic_generator(h: &OperatorPoly, frame: &GaussianFrame, mode: usize) -> OperatorPoly {
    let d = displaced(h, frame);
    let mut hg = OperatorPoly::zero(h.modes());
    for (w, c) in d.single_mode_terms(mode, 2) {
        hg.add_term(w.clone(), *c);
    }
    hg
}

/// `(∂_tμ, ∂_tν) = (i[S†[H_G,a]S, a†], -i[S†[H_G,a]S, a])` for one mode.
pub fn gaussian_rhs_mode(h: &OperatorPoly, frame: &GaussianFrame, mode: usize) -> Result<(C64, C64)> {
    let f = frame.modes[mode];
    let defect = f.symplectic_defect();
    if defect.abs() > Trust::SYMPLECTIC_TOLERANCE {
        return Err(Error::NotSymplectic { defect });
    }
    Ok(gaussian_rates(h, frame, mode))
}

fn gaussian_rates(h: &OperatorPoly, frame: &GaussianFrame, mode: usize) -> (C64, C64) {
    let f = frame.modes[mode];
    let k = h.modes();
    let a = OperatorPoly::annihilation(k, mode);
    let ad = OperatorPoly::creation(k, mode);
    let hg = quadratic_generator(h, frame, mode);
    let inner = OperatorPoly::commutator(&hg, &a);
    let subs: Vec<_> = (0..k)
        .map(|m| {
            if m == mode {
                a.clone() * f.mu + ad.clone() * f.nu
            } else {
                OperatorPoly::annihilation(k, m)
            }
        })
        .collect();
    let x = inner.substitute(&subs);
    let mu_dot = I * OperatorPoly::commutator(&x, &ad).constant();
    let nu_dot = -I * OperatorPoly::commutator(&x, &a).constant();
    (mu_dot, nu_dot)
}

/// Signal-mode `(∂_tμ, ∂_tν)` for a two-mode Hamiltonian.
pub fn gaussian_rhs(spec: &HamiltonianSpec, frame: &GaussianFrame) -> Result<(C64, C64)> {
    gaussian_rhs_mode(&spec.poly(), frame, 0)
}

pub fn frame_rates(h: &OperatorPoly, frame: &GaussianFrame) -> Result<FrameRates> {
    if frame.modes.len() != h.modes() {
        return Err(Error::ModeMismatch { expected: h.modes(), found: frame.modes.len() });
    }
    let grad = h.classical_gradient_conj(&frame.alphas());
    let mut rates = FrameRates::zero(h.modes());
    for (m, g) in grad.into_iter().enumerate() {
        rates.alpha_dot[m] = -I * g;
        if frame.modes[m].role == FrameRole::Full {
            let (mu, nu) = gaussian_rates(h, frame, m);
            rates.mu_dot[m] = mu;
            rates.nu_dot[m] = nu;
        }
    }
    Ok(rates)
}

/// `U†HU - iU†∂_tU` for `U = D(α) S(μ,ν)`, constants dropped.
///
/// Terms below `1e-9` are pruned. Linear or quadratic single-mode terms on
/// a fully framed mode above `1e-6` mean the rates do not satisfy the frame
/// equations and are reported as [`Error::FrameInconsistent`].
pub fn conjugate_hamiltonian(h: &OperatorPoly, frame: &GaussianFrame, rates: &FrameRates) -> Result<OperatorPoly> {
    let k = h.modes();
    if frame.modes.len() != k {
        return Err(Error::ModeMismatch { expected: k, found: frame.modes.len() });
    }
    let mut subs = Vec::with_capacity(k);
    let mut generator = OperatorPoly::zero(k);
    for (m, f) in frame.modes.iter().enumerate() {
        let a = OperatorPoly::annihilation(k, m);
        let ad = OperatorPoly::creation(k, m);
        let ad_dot = rates.alpha_dot[m];
        match f.role {
            FrameRole::Full => {
                let (mu, nu) = (f.mu, f.nu);
                subs.push(a.clone() * mu + ad.clone() * nu + OperatorPoly::scalar(k, f.alpha));
                // displacement part, transformed by S
                let s_ad = ad.clone() * mu.conj() + a.clone() * nu.conj();
                let s_a = a.clone() * mu + ad.clone() * nu;
                generator += (s_ad * ad_dot - s_a * ad_dot.conj()) * (-I);
                // squeeze part
                let (mu_dot, nu_dot) = (rates.mu_dot[m], rates.nu_dot[m]);
                let c1 = I * (mu.conj() * mu_dot - nu * nu_dot.conj());
                let c2 = I * (mu.conj() * nu_dot - nu * mu_dot.conj());
                let g = OperatorPoly::number(k, m) * c1
                    + OperatorPoly::monomial(k, m, 2, 0) * (c2 * 0.5)
                    + OperatorPoly::monomial(k, m, 0, 2) * (c2.conj() * 0.5);
                generator += -g;
            }
            FrameRole::MeanField => {
                subs.push(a.clone() + OperatorPoly::scalar(k, f.alpha));
                generator += (ad * ad_dot - a * ad_dot.conj()) * (-I);
            }
        }
    }
    let heff = (h.substitute(&subs) + generator).without_constant().prune(PRUNE);
    for (m, f) in frame.modes.iter().enumerate() {
        if f.role != FrameRole::Full {
            continue;
        }
        for order in 1..=2 {
            let worst = heff.single_mode_terms(m, order).map(|(_, c)| c.norm()).fold(0.0, f64::max);
            if worst > FRAME_TOLERANCE {
                return Err(Error::FrameInconsistent { mode: m, order: order as usize, magnitude: worst });
            }
        }
    }
    Ok(heff)
}

fn rk4_step<F>(f: &F, t: f64, y: &[C64], h: f64) -> Result<Vec<C64>>
where
    F: Fn(f64, &[C64]) -> Result<Vec<C64>>,
{
    let axpy = |a: &[C64], b: &[C64], s: f64| -> Vec<C64> { a.iter().zip(b).map(|(x, y)| x + y * s).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + h / 2.0, &axpy(y, &k1, h / 2.0))?;
    let k3 = f(t + h / 2.0, &axpy(y, &k2, h / 2.0))?;
    let k4 = f(t + h, &axpy(y, &k3, h))?;
    Ok((0..y.len())
        .map(|i| y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect())
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("need dt > 0 and t_final >= 0 (dt={dt}, t_final={t_final})")));
    }
    Ok(((t_final / dt) - 1e-12).ceil().max(0.0) as usize)
}

fn classical_charge(weights: &[f64], alphas: &[C64]) -> f64 {
    weights.iter().zip(alphas).map(|(w, a)| w * a.norm_sqr()).sum()
}

fn relative_drift(now: f64, start: f64) -> f64 {
    (now - start).abs() / start.abs().max(1.0)
}

const CHARGE_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
    pub dt: f64,
    pub charge_drift: f64,
    /// Step-halving estimate of the final-point error.
    pub error_estimate: f64,
}

fn run_mean_field(poly: &OperatorPoly, y0: [C64; 2], t_final: f64, steps: usize) -> Result<(Vec<f64>, Vec<[C64; 2]>)> {
    let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let rhs = |_t: f64, y: &[C64]| -> Result<Vec<C64>> {
        Ok(poly.classical_gradient_conj(y).into_iter().map(|g| -I * g).collect())
    };
    let mut times = vec![0.0];
    let mut ys = vec![y0];
    let mut y = y0.to_vec();
    for s in 0..steps {
        y = rk4_step(&rhs, s as f64 * h, &y, h)?;
        times.push((s + 1) as f64 * h);
        ys.push([y[0], y[1]]);
    }
    Ok((times, ys))
}

/// Fixed-step RK4 for the classical coupled-mode equations. The step is
/// shrunk so that an integer number of steps lands on `t_final`.
pub fn integrate_mean_field(
    spec: &HamiltonianSpec,
    initial: (C64, C64),
    t_final: f64,
    dt: f64,
) -> Result<MeanFieldTrajectory> {
    spec.validate()?;
    if spec.modes() != 2 {
        return Err(Error::ModeMismatch { expected: 2, found: spec.modes() });
    }
    let steps = step_count(t_final, dt)?;
    let poly = spec.poly();
    let y0 = [initial.0, initial.1];
    let (times, ys) = run_mean_field(&poly, y0, t_final, steps)?;
    let (_, fine) = run_mean_field(&poly, y0, t_final, 2 * steps)?;
    let last = ys.last().expect("nonempty");
    let fine_last = fine.last().expect("nonempty");
    let error_estimate = ((last[0] - fine_last[0]).norm_sqr() + (last[1] - fine_last[1]).norm_sqr()).sqrt() * 16.0 / 15.0;
    let mut charge_drift = 0.0;
    if let Some(w) = spec.charge_weights() {
        let q0 = classical_charge(&w, &y0);
        charge_drift = ys.iter().map(|y| relative_drift(classical_charge(&w, y), q0)).fold(0.0, f64::max);
        if charge_drift > CHARGE_LIMIT {
            return Err(Error::StepTooLarge { drift: charge_drift });
        }
    }
    Ok(MeanFieldTrajectory {
        times,
        alpha: ys.iter().map(|y| y[0]).collect(),
        beta: ys.iter().map(|y| y[1]).collect(),
        dt: if steps == 0 { 0.0 } else { t_final / steps as f64 },
        charge_drift,
        error_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameTrajectory {
    pub samples: Vec<GaussianFrame>,
    pub dt: f64,
    pub error_estimate: f64,
    pub max_symplectic_defect: f64,
    pub max_charge_drift: f64,
}

impl FrameTrajectory {
    pub fn last(&self) -> &GaussianFrame {
        self.samples.last().expect("trajectory holds the initial frame")
    }
}

fn frame_step(h: &OperatorPoly, frame: &GaussianFrame, dt: f64) -> Result<GaussianFrame> {
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> { Ok(frame_rates(h, &frame.unpack(y, t))?.pack()) };
    let y = rk4_step(&rhs, frame.time, &frame.pack(), dt)?;
    Ok(frame.unpack(&y, frame.time + dt))
}

const FRAME_PHASE_STEP: f64 = 0.02;

/// `frame_step` split into sub-steps of at most `FRAME_PHASE_STEP` radians of
/// the fastest frame rotation.
fn frame_advance(h: &OperatorPoly, frame: &GaussianFrame, dt: f64) -> Result<GaussianFrame> {
    let rates = frame_rates(h, frame)?;
    let mut omega: f64 = 0.0;
    for (m, f) in frame.modes.iter().enumerate() {
        omega = omega.max(rates.alpha_dot[m].norm() / f.alpha.norm().max(1.0));
        if f.role == FrameRole::Full {
            omega = omega.max((rates.mu_dot[m].norm() + rates.nu_dot[m].norm()) / (f.mu.norm() + f.nu.norm()));
        }
    }
    let parts = ((dt.abs() * omega / FRAME_PHASE_STEP).ceil() as usize).max(1);
    let h_sub = dt / parts as f64;
    let mut out = frame.clone();
    for _ in 0..parts {
        out = frame_step(h, &out, h_sub)?;
    }
    Ok(out)
}

fn run_frame(h: &OperatorPoly, initial: &GaussianFrame, t_final: f64, steps: usize) -> Result<Vec<GaussianFrame>> {
    let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let mut out = vec![initial.clone()];
    for s in 0..steps {
        let mut next = frame_step(h, out.last().expect("nonempty"), dt)?;
        next.time = initial.time + (s + 1) as f64 * dt;
        let defect = next.symplectic_defect();
        if defect > Trust::SYMPLECTIC_TOLERANCE {
            return Err(Error::NotSymplectic { defect });
        }
        out.push(next);
    }
    Ok(out)
}

/// Co-integrates the mean field and every full mode's `(μ, ν)` with
/// fixed-step RK4. Never renormalizes: a symplectic defect above `1e-8` is
/// an error.
pub fn integrate_frame(
    spec: &HamiltonianSpec,
    initial: &GaussianFrame,
    t_final: f64,
    dt: f64,
) -> Result<FrameTrajectory> {
    spec.validate()?;
    let h = spec.poly();
    let steps = step_count(t_final, dt)?;
    let samples = run_frame(&h, initial, t_final, steps)?;
    let fine = run_frame(&h, initial, t_final, 2 * steps)?;
    let a = samples.last().expect("nonempty").pack();
    let b = fine.last().expect("nonempty").pack();
    let error_estimate = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() * 16.0 / 15.0;
    let max_symplectic_defect = samples.iter().map(GaussianFrame::symplectic_defect).fold(0.0, f64::max);
    let mut max_charge_drift = 0.0;
    if let Some(w) = spec.charge_weights() {
        let q0 = classical_charge(&w, &initial.alphas());
        max_charge_drift = samples
            .iter()
            .map(|f| relative_drift(classical_charge(&w, &f.alphas()), q0))
            .fold(0.0, f64::max);
        if max_charge_drift > CHARGE_LIMIT {
            return Err(Error::StepTooLarge { drift: max_charge_drift });
        }
    }
    Ok(FrameTrajectory {
        samples,
        dt: if steps == 0 { 0.0 } else { t_final / steps as f64 },
        error_estimate,
        max_symplectic_defect,
        max_charge_drift,
    })
}

/// Frame plus residual state: `|Ψ> = D S |φ>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GifState {
    pub frame: GaussianFrame,
    pub residual: FockVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GifOutcome {
    pub state: GifState,
    pub steps: usize,
    pub trust: Trust,
}

/// Caches one sparse matrix per monomial so that time-dependent
/// Hamiltonians with fixed structure are re-assembled cheaply.
pub struct MonomialCache {
    dims: Vec<usize>,
    cache: HashMap<Monomial, SparseMatrix>,
}

impl MonomialCache {
    pub fn new(dims: &[usize]) -> Self {
        MonomialCache { dims: dims.to_vec(), cache: HashMap::new() }
    }

    /// `Σ_i w_i H_i` assembled from the monomials of several polys.
    pub fn assemble(&mut self, parts: &[(f64, &OperatorPoly)]) -> SparseMatrix {
        let mut coeffs: HashMap<Monomial, C64> = HashMap::new();
        for (w, p) in parts {
            for (m, c) in p.terms() {
                *coeffs.entry(m.clone()).or_default() += c * *w;
            }
        }
        let mut keys: Vec<_> = coeffs.keys().cloned().collect();
        keys.sort();
        let modes = self.dims.len();
        for k in &keys {
            if !self.cache.contains_key(k) {
                let mut p = OperatorPoly::zero(modes);
                p.add_term(k.clone(), C64::new(1.0, 0.0));
                self.cache.insert(k.clone(), SparseMatrix::from_poly(&p, &self.dims));
            }
        }
        let list: Vec<(C64, &SparseMatrix)> = keys.iter().map(|k| (coeffs[k], &self.cache[k])).collect();
        if list.is_empty() {
            let zero = OperatorPoly::zero(modes);
            return SparseMatrix::from_poly(&zero, &self.dims);
        }
        SparseMatrix::combine(&list)
    }
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const CF4_C: [f64; 2] = [0.5 - SQRT3_6, 0.5 + SQRT3_6];
const CF4_A: [f64; 2] = [0.25 - SQRT3_6, 0.25 + SQRT3_6];

/// Advances `|φ>` through one step of a time-dependent Hamiltonian with the
/// fourth-order commutator-free Magnus scheme; `h_at(c)` returns `H(t + c·dt)`.
pub fn cf4_step<F>(cache: &mut MonomialCache, psi: &[C64], dt: f64, mut h_at: F) -> Result<Vec<C64>>
where
    F: FnMut(f64) -> Result<OperatorPoly>,
{
    let h1 = h_at(CF4_C[0])?;
    let h2 = h_at(CF4_C[1])?;
    let first = cache.assemble(&[(CF4_A[1], &h1), (CF4_A[0], &h2)]);
    let second = cache.assemble(&[(CF4_A[0], &h1), (CF4_A[1], &h2)]);
    let mid = expm_multiply(&first, psi, C64::new(0.0, -dt));
    Ok(expm_multiply(&second, &mid, C64::new(0.0, -dt)))
}

/// Co-evolves frame and residual from `initial` to `t_final`.
pub fn gif_evolve(spec: &HamiltonianSpec, initial: &GifState, t_final: f64, dt: f64, tail_tolerance: f64) -> Result<GifOutcome> {
    spec.validate()?;
    let h = spec.poly();
    if initial.residual.modes() != h.modes() {
        return Err(Error::ModeMismatch { expected: h.modes(), found: initial.residual.modes() });
    }
    let steps = step_count(t_final, dt)?;
    let dt = if steps == 0 { 0.0 } else { t_final / steps as f64 };
    let dims = initial.residual.dims().to_vec();
    let mut cache = MonomialCache::new(&dims);
    let mut frame = initial.frame.clone();
    let mut psi = initial.residual.amplitudes().to_vec();
    let norm0 = crate::linalg::norm(&psi);
    let mut trust = Trust::with_tolerance(tail_tolerance);
    let weights = spec.charge_weights();
    let q0 = weights.as_ref().map(|w| classical_charge(w, &frame.alphas()));
    let t0 = frame.time;
    for s in 0..steps {
        let start = frame.clone();
        // Frame values at the Gauss points by RK4 sub-steps.
        let f1 = frame_advance(&h, &start, CF4_C[0] * dt)?;
        let f2 = frame_advance(&h, &f1, (CF4_C[1] - CF4_C[0]) * dt)?;
        let f3 = frame_advance(&h, &f2, (1.0 - CF4_C[1]) * dt)?;
        let gauss = [f1, f2];
        let mut idx = 0;
        psi = cf4_step(&mut cache, &psi, dt, |_c| {
            let f = &gauss[idx];
            idx += 1;
            let rates = frame_rates(&h, f)?;
            conjugate_hamiltonian(&h, f, &rates)
        })?;
        frame = f3;
        frame.time = t0 + (s + 1) as f64 * dt;
        trust.symplectic_drift = trust.symplectic_drift.max(frame.symplectic_defect());
        if let (Some(w), Some(q0)) = (&weights, q0) {
            trust.charge_drift = trust.charge_drift.max(relative_drift(classical_charge(w, &frame.alphas()), q0));
        }
        let state = FockVector::new(dims.clone(), psi.clone())?;
        trust.tail_mass = trust.tail_mass.max(state.tail_mass());
    }
    let residual = FockVector::new(dims, psi)?;
    trust.tail_mass = trust.tail_mass.max(residual.tail_mass());
    trust.norm_drift = (residual.norm() - norm0).abs();
    if trust.norm_drift > Trust::NORM_TOLERANCE {
        return Err(Error::NormDrift { drift: trust.norm_drift });
    }
    Ok(GifOutcome { state: GifState { frame, residual }, steps, trust })
}

/// `D(α) S(μ,ν) |φ>` in the lab truncation `lab_dims`.
pub fn reconstruct_lab_state(state: &GifState, lab_dims: &[usize], tail_tolerance: f64) -> Result<FockVector> {
    let frame = &state.frame;
    if frame.modes.len() != state.residual.modes() || lab_dims.len() != state.residual.modes() {
        return Err(Error::ModeMismatch { expected: frame.modes.len(), found: state.residual.modes() });
    }
    let (mut psi, lost) = state.residual.resized(lab_dims);
    if lost > tail_tolerance {
        return Err(Error::TruncationOverflow { mass: lost, tolerance: tail_tolerance });
    }
    for (m, f) in frame.modes.iter().enumerate() {
        if f.role == FrameRole::Full {
            psi = squeeze_mode(&psi, m, f.mu, f.nu, Trust::SYMPLECTIC_TOLERANCE, tail_tolerance)?;
        }
    }
    for (m, f) in frame.modes.iter().enumerate() {
        if f.alpha != C64::default() {
            psi = displace_mode(&psi, m, f.alpha, tail_tolerance)?;
        }
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mean_field_examples() {
        let s = HamiltonianSpec::chi2(1.0, 0.0);
        assert_eq!(mean_field_rhs(&s, C64::default(), c(0.7, 0.0)), (C64::default(), C64::default()));
        let (da, db) = mean_field_rhs(&s, c(1.0, 0.0), c(0.0, 1.0));
        assert!((da - c(1.0, 0.0)).norm() < 1e-15);
        // the pump equation carries the g/2 of the Hamiltonian
        assert!((db - c(0.0, -0.5)).norm() < 1e-15);
        let s = HamiltonianSpec::chi2(0.0, 2.0);
        let (da, db) = mean_field_rhs(&s, c(1.0, 0.0), C64::default());
        assert!((da - c(0.0, -2.0)).norm() < 1e-15);
        assert_eq!(db, C64::default());
    }

    #[test]
    fn mean_field_vacuum_signal_is_stationary() {
        let s = HamiltonianSpec::chi2(1.0, 0.3);
        let tr = integrate_mean_field(&s, (C64::default(), c(0.2, 0.9)), 1.0, 0.01).unwrap();
        assert!(tr.alpha.iter().all(|a| *a == C64::default()));
        assert!(tr.beta.iter().all(|b| *b == c(0.2, 0.9)));
    }

    #[test]
    fn mean_field_conserves_charge() {
        let s = HamiltonianSpec::chi2(1.0, 0.0);
        let tr = integrate_mean_field(&s, (c(2.0, 0.0), c(0.0, 1.0)), 1.0, 1e-3).unwrap();
        let (a, b) = (tr.alpha.last().unwrap(), tr.beta.last().unwrap());
        assert!((a.norm_sqr() + 2.0 * b.norm_sqr() - 6.0).abs() < 1e-8);
    }

    #[test]
    fn coarse_mean_field_step_is_rejected() {
        let s = HamiltonianSpec::chi2(1.0, 0.0);
        let err = integrate_mean_field(&s, (c(2.0, 0.0), c(0.0, 1.0)), 3.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn free_frame_has_zero_rates() {
        let s = HamiltonianSpec::chi2(0.0, 0.0);
        let f = GaussianFrame::opa(C64::default(), c(0.0, 2.0));
        assert_eq!(gaussian_rhs(&s, &f).unwrap(), (C64::default(), C64::default()));
    }

    #[test]
    fn phase_matched_gain_rate() {
        let n: f64 = 25.0;
        let s = HamiltonianSpec::chi2(1.0, 0.0);
        let f = GaussianFrame::opa(C64::default(), c(0.0, n.sqrt()));
        let (mu_dot, nu_dot) = gaussian_rhs(&s, &f).unwrap();
        assert!(mu_dot.norm() < 1e-12);
        assert!((nu_dot.norm() - n.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn detuning_only_rates() {
        let delta = 0.8;
        let s = HamiltonianSpec::chi2(0.0, delta);
        let mut f = GaussianFrame::opa(C64::default(), C64::default());
        let (mu_dot, nu_dot) = gaussian_rhs(&s, &f).unwrap();
        assert!((mu_dot - c(0.0, -delta)).norm() < 1e-14);
        assert_eq!(nu_dot, C64::default());
        // ν rotates with the same generator: ∂ν = -iδν
        let r: f64 = 0.3;
        f.modes[0].mu = c(r.cosh(), 0.0);
        f.modes[0].nu = c(r.sinh(), 0.0);
        let (mu_dot, nu_dot) = gaussian_rhs(&s, &f).unwrap();
        assert!((mu_dot - c(0.0, -delta * r.cosh())).norm() < 1e-14);
        assert!((nu_dot - c(0.0, -delta * r.sinh())).norm() < 1e-14);
    }

    #[test]
    fn squeezer_frame_follows_sinh() {
        let n: f64 = 25.0;
        let s = HamiltonianSpec::chi2(1.0, 0.0);
        let f = GaussianFrame::opa(C64::default(), c(0.0, n.sqrt()));
        let tr = integrate_frame(&s, &f, 0.3, 1e-3).unwrap();
        for fr in &tr.samples {
            let want = (n.sqrt() * fr.time).sinh();
            if fr.time > 0.0 {
                assert!((fr.modes[0].nu.norm() - want).abs() / want < 1e-4);
            }
        }
        assert!(tr.max_symplectic_defect < 1e-8);
    }

    #[test]
    fn uncoupled_frame_only_rotates() {
        let s = HamiltonianSpec::chi2(0.0, 1.5);
        let f = GaussianFrame::opa(c(0.5, 0.0), c(0.0, 1.0));
        let tr = integrate_frame(&s, &f, 1.0, 1e-2).unwrap();
        let last = tr.last();
        assert!((last.modes[0].alpha - c(0.5, 0.0) * C64::from_polar(1.0, -1.5)).norm() < 1e-8);
        assert!((last.modes[0].mu - C64::from_polar(1.0, -1.5)).norm() < 1e-8);
        assert_eq!(last.modes[1].alpha, c(0.0, 1.0));
    }

    #[test]
    fn identity_frame_leaves_hamiltonian_unchanged() {
        let h = chi2_hamiltonian(1.0, 0.0);
        let f = GaussianFrame::identity(2);
        let out = conjugate_hamiltonian(&h, &f, &FrameRates::zero(2)).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn displacement_absorbs_detuning() {
        let delta = 1.7;
        let h = OperatorPoly::number(1, 0) * delta;
        let alpha = c(0.4, -0.9);
        let mut f = GaussianFrame::identity(1);
        f.modes[0] = ModeFrame::new(alpha, FrameRole::MeanField);
        let mut rates = FrameRates::zero(1);
        rates.alpha_dot[0] = -I * delta * alpha;
        let out = conjugate_hamiltonian(&h, &f, &rates).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.coefficient(&[(1, 1)]) - c(delta, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inconsistent_rates_are_rejected() {
        let h = OperatorPoly::number(1, 0) * 1.0;
        let mut f = GaussianFrame::identity(1);
        f.modes[0].alpha = c(1.0, 0.0);
        let err = conjugate_hamiltonian(&h, &f, &FrameRates::zero(1)).unwrap_err();
        assert!(matches!(err, Error::FrameInconsistent { order: 1, .. }));
    }

    #[test]
    fn frame_absorbs_linear_and_quadratic_terms() {
        let s = HamiltonianSpec::chi2(1.0, 0.4);
        let h = s.poly();
        let f0 = GaussianFrame::opa(c(0.3, 0.2), c(0.1, 2.0));
        let tr = integrate_frame(&s, &f0, 0.2, 1e-3).unwrap();
        let f = tr.last();
        let rates = frame_rates(&h, f).unwrap();
        let heff = conjugate_hamiltonian(&h, f, &rates).unwrap();
        assert!(heff.is_hermitian(1e-12));
        for order in 1..=2 {
            assert_eq!(heff.single_mode_terms(0, order).count(), 0);
        }
    }

    #[test]
    fn phase_matched_cubic_coefficient_tracks_gain() {
        let n: f64 = 100.0;
        let s = HamiltonianSpec::chi2(1.0, 0.0);
        let h = s.poly();
        let f0 = GaussianFrame::opa(C64::default(), c(0.0, n.sqrt()));
        let tr = integrate_frame(&s, &f0, 0.25, 1e-4).unwrap();
        for f in tr.samples.iter().filter(|f| n.sqrt() * f.time >= 2.0) {
            let heff = conjugate_hamiltonian(&h, f, &frame_rates(&h, f).unwrap()).unwrap();
            // x_a² x_b coefficient from its a†²b, a†²b† and a†ab images
            let s1 = heff.coefficient(&[(2, 0), (0, 1)]) + heff.coefficient(&[(2, 0), (1, 0)]);
            let s2 = heff.coefficient(&[(1, 1), (0, 1)]);
            let cxx = (s1 + s2) * 2.0;
            let want = (2.0 * n.sqrt() * f.time).exp();
            assert!((cxx.re / want - 1.0).abs() < 0.1, "t={} ratio={}", f.time, cxx.re / want);
        }
    }

    #[test]
    fn zero_coupling_keeps_residual() {
        let s = HamiltonianSpec::chi2(0.0, 0.0);
        let res = FockVector::tensor(&FockVector::basis(&[6], &[1]), &FockVector::vacuum(&[5])).unwrap();
        let init = GifState { frame: GaussianFrame::opa(C64::default(), c(0.0, 2.0)), residual: res.clone() };
        let out = gif_evolve(&s, &init, 0.2, 0.01, 1e-8).unwrap();
        assert_eq!(out.state.residual.amplitudes(), res.amplitudes());
    }
}
