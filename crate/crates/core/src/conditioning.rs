//! Ideal homodyne detection of the pump (mode 1) and the conditional
//! signal states it prepares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{expectation, quadrature_basis, squeeze_mode, FockVector};
use crate::frame::chi2_hamiltonian;
use crate::linalg::{expm_multiply, SparseMatrix};
use crate::poly::OperatorPoly;
use crate::trust::Trust;
use crate::C64;

pub const MIN_DENSITY: f64 = 1e-12;
pub const DEFAULT_RESOLUTION: f64 = 0.01;

const PUMP: usize = 1;

/// Outcome grid spanning ±6 vacuum standard deviations times `stretch`.
pub fn default_outcome_grid(stretch: f64, resolution: f64) -> Vec<f64> {
    let half = 6.0 * 0.5 * stretch.max(1.0);
    let n = (half / resolution).ceil() as i64;
    (-n..=n).map(|i| i as f64 * resolution).collect()
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + i as f64 * h).collect()
}

/// Trapezoid rule on a (possibly non-uniform) grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn check_two_mode(state: &FockVector) -> Result<()> {
    if state.modes() != 2 {
        return Err(Error::ModeMismatch { expected: 2, found: state.modes() });
    }
    Ok(())
}

/// Unnormalized conditional signal amplitudes `<x_θ = x|_b |Ψ>`.
fn project(state: &FockVector, theta: f64, x: f64) -> Result<FockVector> {
    let w = quadrature_basis(state.dims()[PUMP], theta, x);
    state.contract_mode(PUMP, &w)
}

/// Marginal density of the pump quadrature `x_θ`.
pub fn pump_quadrature_density(state: &FockVector, theta: f64, xs: &[f64]) -> Result<Vec<f64>> {
    check_two_mode(state)?;
    if xs.is_empty() {
        return Err(Error::GridEmpty);
    }
    xs.iter().map(|&x| Ok(project(state, theta, x)?.norm().powi(2))).collect()
}

/// Marginal density of the pump `x_b` quadrature.
pub fn pump_homodyne_density(state: &FockVector, xs: &[f64]) -> Result<Vec<f64>> {
    pump_quadrature_density(state, 0.0, xs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningResult {
    pub outcome: f64,
    pub theta: f64,
    pub density: f64,
    pub conditional_state: FockVector,
}

pub fn condition_on_quadrature(state: &FockVector, theta: f64, outcome: f64) -> Result<ConditioningResult> {
    check_two_mode(state)?;
    let psi = project(state, theta, outcome)?;
    let density = psi.norm().powi(2);
    if !(density >= MIN_DENSITY) {
        return Err(Error::ZeroDensity { density });
    }
    Ok(ConditioningResult { outcome, theta, density, conditional_state: psi.normalized()? })
}

pub fn condition_on_xb(state: &FockVector, outcome: f64) -> Result<ConditioningResult> {
    condition_on_quadrature(state, 0.0, outcome)
}

fn cumulative(density: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    density
        .iter()
        .map(|d| {
            acc += d.max(0.0);
            acc
        })
        .collect()
}

fn draw(xs: &[f64], cdf: &[f64], u: f64) -> f64 {
    let total = *cdf.last().expect("nonempty");
    let target = u * total;
    let i = cdf.partition_point(|c| *c <= target).min(xs.len() - 1);
    xs[i]
}

/// Draws one grid point by the discrete inverse CDF of `density`.
pub fn sample_outcome(xs: &[f64], density: &[f64], seed: u64) -> Result<f64> {
    Ok(sample_outcomes(xs, density, seed, 1)?[0])
}

/// Draws `count` outcomes from one seeded ChaCha stream.
pub fn sample_outcomes(xs: &[f64], density: &[f64], seed: u64, count: usize) -> Result<Vec<f64>> {
    if xs.is_empty() || xs.len() != density.len() {
        return Err(Error::GridEmpty);
    }
    let cdf = cumulative(density);
    let total = *cdf.last().expect("nonempty");
    if !(total > 0.0) {
        return Err(Error::ZeroDensity { density: total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| draw(xs, &cdf, rng.random::<f64>())).collect())
}

/// `x p + p x = i(a†² - a²)/2` on mode 0 of a `modes`-mode space.
pub fn xp_px(modes: usize) -> OperatorPoly {
    (OperatorPoly::monomial(modes, 0, 2, 0) - OperatorPoly::monomial(modes, 0, 0, 2)) * C64::new(0.0, 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QndMode {
    /// `gλ(xp + px) p_b` only.
    Effective,
    /// The full Hamiltonian conjugated by the pump squeezer, in closed form:
    /// `gλ(xp + px) p_b + (g/λ)(x² - p²) x_b`.
    Exact,
    /// Squeeze the pump, evolve under the full Hamiltonian, unsqueeze.
    ExactLiteral,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QndSettings {
    pub lambda: f64,
    pub g: f64,
    pub t: f64,
    pub mode: QndMode,
    pub outcomes: Vec<f64>,
    pub shots: usize,
    pub seed: u64,
    pub tail_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QndResult {
    pub mode: QndMode,
    pub lambda: f64,
    pub g: f64,
    pub t: f64,
    /// Pump `x_b` before the interaction.
    pub x_b_initial: f64,
    pub outcomes: Vec<f64>,
    pub density: Vec<f64>,
    pub density_integral: f64,
    /// `(<x_b(t)> - <x_b(0)>) / (gλt/2)` from the full outcome density.
    pub inferred_mean: f64,
    pub shots: usize,
    pub sample_mean: f64,
    pub standard_error: f64,
    pub first_shot: Option<ConditioningResult>,
    pub trust: Trust,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub joint: Option<FockVector>,
}

/// Pump squeezer `S_b` with `S_b† b S_b = λ⁻¹ x_b + iλ p_b`.
pub fn pump_squeezer(lambda: f64) -> (C64, C64) {
    (C64::new(0.5 * (lambda + 1.0 / lambda), 0.0), C64::new(0.5 * (1.0 / lambda - lambda), 0.0))
}

pub fn qnd_effective_hamiltonian(g: f64, lambda: f64) -> OperatorPoly {
    &xp_px(2) * &OperatorPoly::quadrature_p(2, 1) * (g * lambda)
}

pub fn qnd_exact_hamiltonian(g: f64, lambda: f64) -> OperatorPoly {
    let x = OperatorPoly::quadrature_x(2, 0);
    let p = OperatorPoly::quadrature_p(2, 0);
    let diff = &x * &x - &p * &p;
    qnd_effective_hamiltonian(g, lambda) + &diff * &OperatorPoly::quadrature_x(2, 1) * (g / lambda)
}

fn evolve(h: &OperatorPoly, state: &FockVector, t: f64) -> Result<FockVector> {
    let m = SparseMatrix::from_poly(h, state.dims());
    FockVector::new(state.dims().to_vec(), expm_multiply(&m, state.amplitudes(), C64::new(0.0, -t)))
}

/// Runs the `xp + px` readout: signal and pump interact, the pump `x_b` is
/// measured, and the displacement of `x_b` is converted into an estimate of
/// `<xp + px>` on the signal.
pub fn qnd_xppx_protocol(signal: &FockVector, pump: &FockVector, settings: &QndSettings) -> Result<QndResult> {
    let QndSettings { lambda, g, t, mode, .. } = *settings;
    if signal.modes() != 1 || pump.modes() != 1 {
        return Err(Error::ModeMismatch { expected: 1, found: signal.modes().max(pump.modes()) });
    }
    if !(lambda > 1.0) || !(g > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need lambda > 1, g > 0, t > 0 (lambda={lambda}, g={g}, t={t})"
        )));
    }
    if settings.outcomes.is_empty() {
        return Err(Error::GridEmpty);
    }
    let mut warnings = Vec::new();
    if lambda < 5.0 {
        warnings.push(format!(
            "regime warning: lambda = {lambda} < 5, the O(1/lambda) terms are not negligible"
        ));
    }
    let x_b_initial = expectation(&OperatorPoly::quadrature_x(1, 0), pump)?.re;
    let joint0 = FockVector::tensor(signal, pump)?;
    let joint = match mode {
        QndMode::Effective => evolve(&qnd_effective_hamiltonian(g, lambda), &joint0, t)?,
        QndMode::Exact => evolve(&qnd_exact_hamiltonian(g, lambda), &joint0, t)?,
        QndMode::ExactLiteral => {
            let (mu, nu) = pump_squeezer(lambda);
            let tol = settings.tail_tolerance;
            let squeezed = squeeze_mode(&joint0, PUMP, mu, nu, 1e-10, tol)?;
            let evolved = evolve(&chi2_hamiltonian(g, 0.0), &squeezed, t)?;
            squeeze_mode(&evolved, PUMP, mu.conj(), -nu, 1e-10, tol)?
        }
    };
    let mut trust = Trust::with_tolerance(settings.tail_tolerance);
    trust.tail_mass = joint.tail_mass();
    trust.norm_drift = (joint.norm() - joint0.norm()).abs();

    let xs = &settings.outcomes;
    let density = pump_homodyne_density(&joint, xs)?;
    let density_integral = trapezoid(xs, &density);
    let weighted: Vec<f64> = xs.iter().zip(&density).map(|(x, d)| x * d).collect();
    let mean_x = trapezoid(xs, &weighted) / density_integral;
    let scale = g * lambda * t / 2.0;
    let inferred_mean = (mean_x - x_b_initial) / scale;

    let (sample_mean, standard_error, first_shot) = if settings.shots > 0 {
        let draws = sample_outcomes(xs, &density, settings.seed, settings.shots)?;
        let inferred: Vec<f64> = draws.iter().map(|x| (x - x_b_initial) / scale).collect();
        let n = inferred.len() as f64;
        let mean = inferred.iter().sum::<f64>() / n;
        let var = if inferred.len() > 1 {
            inferred.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let first = condition_on_xb(&joint, draws[0])?;
        (mean, (var / n).sqrt(), Some(first))
    } else {
        (f64::NAN, f64::NAN, None)
    };

    Ok(QndResult {
        mode,
        lambda,
        g,
        t,
        x_b_initial,
        outcomes: xs.clone(),
        density,
        density_integral,
        inferred_mean,
        shots: settings.shots,
        sample_mean,
        standard_error,
        first_shot,
        trust,
        warnings,
        joint: Some(joint),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezedFockFit {
    pub k: usize,
    pub r: f64,
    pub phi: f64,
    pub fidelity: f64,
}

/// `S(ζ)|k>` for `k ≤ k_max`, `ζ = r e^{iφ}`, truncated to `dim` levels.
///
/// Starts from the closed-form squeezed vacuum and climbs with
/// `S a† S† = cosh r a† + e^{-iφ} sinh r a`.
pub fn squeezed_fock_states(dim: usize, r: f64, phi: f64, k_max: usize) -> Vec<Vec<C64>> {
    let big = dim + k_max + 2;
    let mut vac = vec![C64::default(); big];
    let t = -C64::from_polar(r.tanh(), phi);
    let mut amp = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    for m in 0..big.div_ceil(2) {
        vac[2 * m] = amp;
        // ratio of √((2m)!)/(2^m m!) between m+1 and m
        amp *= t * (((2 * m + 1) * (2 * m + 2)) as f64).sqrt() / (2.0 * (m + 1) as f64);
    }
    let (ch, sh) = (C64::new(r.cosh(), 0.0), C64::from_polar(r.sinh(), -phi));
    let mut out = vec![vac];
    for k in 1..=k_max {
        let prev = &out[k - 1];
        let mut next = vec![C64::default(); big];
        for n in 0..big {
            if n + 1 < big {
                next[n + 1] += ch * prev[n] * ((n + 1) as f64).sqrt();
            }
            if n > 0 {
                next[n - 1] += sh * prev[n] * (n as f64).sqrt();
            }
        }
        next.iter_mut().for_each(|c| *c /= (k as f64).sqrt());
        out.push(next);
    }
    out.into_iter()
        .map(|mut v| {
            v.truncate(dim);
            v
        })
        .collect()
}

fn squeezed_fock_overlaps(state: &FockVector, r: f64, phi: f64, k_max: usize) -> Vec<f64> {
    squeezed_fock_states(state.len(), r, phi, k_max)
        .iter()
        .map(|v| crate::linalg::inner(v, state.amplitudes()).norm_sqr())
        .collect()
}

/// Best squeezed Fock state `S(r e^{iφ})|k>` for `k ≤ k_max`: a coarse scan
/// over `(r, φ)` followed by a shrinking pattern search.
pub fn best_fit_squeezed_fock(state: &FockVector, k_max: usize, r_max: f64) -> Result<SqueezedFockFit> {
    if state.modes() != 1 {
        return Err(Error::ModeMismatch { expected: 1, found: state.modes() });
    }
    let state = state.clone().normalized()?;
    let mut best = SqueezedFockFit { k: 0, r: 0.0, phi: 0.0, fidelity: -1.0 };
    let consider = |r: f64, phi: f64, best: &mut SqueezedFockFit| {
        for (k, f) in squeezed_fock_overlaps(&state, r, phi, k_max).into_iter().enumerate() {
            if f > best.fidelity {
                *best = SqueezedFockFit { k, r, phi, fidelity: f };
            }
        }
    };
    let (nr, nphi) = (16, 16);
    for i in 0..=nr {
        for j in 0..nphi {
            let r = r_max * i as f64 / nr as f64;
            let phi = std::f64::consts::TAU * j as f64 / nphi as f64;
            consider(r, phi, &mut best);
            if i == 0 {
                break;
            }
        }
    }
    let (mut hr, mut hphi) = (r_max / nr as f64, std::f64::consts::TAU / nphi as f64);
    while hr > 1e-4 {
        let start = best;
        for (dr, dp) in [(hr, 0.0), (-hr, 0.0), (0.0, hphi), (0.0, -hphi)] {
            let r = (start.r + dr).max(0.0);
            consider(r, start.phi + dp, &mut best);
        }
        if best == start {
            hr /= 2.0;
            hphi /= 2.0;
        }
    }
    best.phi = best.phi.rem_euclid(std::f64::consts::TAU);
    Ok(best)
}

/// Grid points where `density` has a strict local maximum above `floor`
/// times the global maximum.
pub fn local_maxima(xs: &[f64], density: &[f64], floor: f64) -> Vec<(f64, f64)> {
    let top = density.iter().copied().fold(0.0, f64::max);
    (1..density.len().saturating_sub(1))
        .filter(|&i| density[i] > density[i - 1] && density[i] >= density[i + 1] && density[i] >= floor * top)
        .map(|i| (xs[i], density[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::displacement;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn coherent_pump_marginal() {
        let beta = c(0.7, 0.4);
        let pump = displacement(beta, &FockVector::vacuum(&[30])).unwrap();
        let s = FockVector::tensor(&FockVector::basis(&[3], &[1]), &pump).unwrap();
        let xs = uniform_grid(-4.0, 4.0, 1601);
        let d = pump_homodyne_density(&s, &xs).unwrap();
        for (x, p) in xs.iter().zip(&d) {
            let want = (2.0 / std::f64::consts::PI).sqrt() * (-2.0 * (x - beta.re).powi(2)).exp();
            assert!((p - want).abs() < 1e-8);
        }
        assert!((trapezoid(&xs, &d) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_photon_pump_vanishes_at_origin() {
        let s = FockVector::tensor(&FockVector::vacuum(&[2]), &FockVector::basis(&[4], &[1])).unwrap();
        let d = pump_homodyne_density(&s, &[0.0]).unwrap();
        assert!(d[0].abs() < 1e-30);
        let err = condition_on_xb(&s, 0.0).unwrap_err();
        assert!(matches!(err, Error::ZeroDensity { .. }));
    }

    #[test]
    fn product_state_conditioning_is_trivial() {
        let sig = FockVector::coherent(12, c(0.3, -0.2)).normalized().unwrap();
        let pump = FockVector::coherent(20, c(1.0, 0.5)).normalized().unwrap();
        let s = FockVector::tensor(&sig, &pump).unwrap();
        for x in [-1.0, 0.2, 1.3] {
            let r = condition_on_xb(&s, x).unwrap();
            assert!(r.conditional_state.inner(&sig).unwrap().norm_sqr() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_hits_delta() {
        let xs = uniform_grid(-1.0, 1.0, 21);
        let mut d = vec![0.0; 21];
        d[13] = 1.0;
        assert_eq!(sample_outcome(&xs, &d, 7).unwrap(), xs[13]);
        let g: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        assert_eq!(sample_outcome(&xs, &g, 99).unwrap(), sample_outcome(&xs, &g, 99).unwrap());
    }

    #[test]
    fn gaussian_sample_mean() {
        let xs = uniform_grid(-8.0, 8.0, 3201);
        let d: Vec<f64> = xs.iter().map(|x| (-x * x / 2.0).exp()).collect();
        let n = 100_000;
        let s = sample_outcomes(&xs, &d, 2024, n).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn squeezed_fock_fit_recovers_parameters() {
        let (r, phi): (f64, f64) = (0.4, 1.1);
        let mu = c(r.cosh(), 0.0);
        let nu = -C64::from_polar(r.sinh(), phi);
        let st = crate::fock::squeeze(mu, nu, &FockVector::basis(&[40], &[2])).unwrap();
        let fit = best_fit_squeezed_fock(&st, 2, 1.5).unwrap();
        assert_eq!(fit.k, 2);
        assert!(fit.fidelity > 1.0 - 1e-6);
        assert!((fit.r - r).abs() < 1e-3);
    }

    #[test]
    fn qnd_vacuum_signal_has_zero_mean() {
        let settings = QndSettings {
            lambda: 10.0,
            g: 1.0,
            t: 0.4,
            mode: QndMode::Effective,
            outcomes: uniform_grid(-6.0, 6.0, 601),
            shots: 200,
            seed: 3,
            tail_tolerance: 1e-2,
        };
        let r = qnd_xppx_protocol(&FockVector::vacuum(&[30]), &FockVector::vacuum(&[60]), &settings).unwrap();
        assert!(r.inferred_mean.abs() < 1e-10);
        assert!(r.sample_mean.abs() < 3.0 * r.standard_error);
    }

    #[test]
    fn exact_hamiltonian_matches_conjugated_chi2() {
        // S_b† H S_b with b -> μ b + ν b† equals the closed form
        let lambda = 3.0;
        let (mu, nu) = pump_squeezer(lambda);
        let h = chi2_hamiltonian(1.0, 0.0);
        let subs = vec![
            OperatorPoly::annihilation(2, 0),
            OperatorPoly::annihilation(2, 1) * mu + OperatorPoly::creation(2, 1) * nu,
        ];
        let diff = (h.substitute(&subs) - qnd_exact_hamiltonian(1.0, lambda)).prune(1e-12);
        assert!(diff.is_empty(), "{diff}");
    }
}
