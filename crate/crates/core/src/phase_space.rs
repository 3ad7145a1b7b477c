//! Wigner functions, negativity, marginals and fidelities.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{projected_expectation, FockVector};
use crate::poly::OperatorPoly;
use crate::C64;

pub const CONVENTION: &str = "x=(a+a^dag)/2, p=(a-a^dag)/(2i), hbar=1/2";
const MAGNITUDE_SLACK: f64 = 1e-6;
const RING_TAIL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// Row-major, `values[i_p * xs.len() + i_x]`.
    pub values: Vec<f64>,
    pub norm_defect: f64,
    pub convention: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    P,
}

/// Weights of the composite trapezoid rule on a grid.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        w[i] += h / 2.0;
        w[i + 1] += h / 2.0;
    }
    w
}

/// `(2/π) <ψ|D(α) Π D†(α)|ψ> = (2/π) Σ_{m,n} c_m* c_n (-1)^n <m|D(2α)|n>`.
///
/// Along each diagonal `m = n + k` the elements are `e^{ikθ} s_n` with
/// `s_n = |β|^k e^{-|β|²/2} √(n!/(n+k)!) L_n^{(k)}(|β|²)`, obtained from the
/// normalised Laguerre recurrence so every term stays bounded by one.
fn displaced_parity(c: &[C64], alpha: C64, ln_fact: &[f64]) -> f64 {
    let d = c.len();
    let beta = 2.0 * alpha;
    let x = beta.norm_sqr();
    let (r, theta) = (beta.norm(), beta.arg());
    let ln_r = if r > 0.0 { r.ln() } else { f64::NEG_INFINITY };
    let mut total = 0.0;
    for k in 0..d {
        let s0 = if k == 0 {
            (-x / 2.0).exp()
        } else if r == 0.0 {
            0.0
        } else {
            (k as f64 * ln_r - x / 2.0 - ln_fact[k] / 2.0).exp()
        };
        let phase = C64::from_polar(1.0, k as f64 * theta);
        let kf = k as f64;
        let (mut prev, mut cur) = (0.0, s0);
        let mut sum = 0.0;
        for n in 0..d - k {
            let term = if k == 0 {
                c[n].norm_sqr()
            } else {
                2.0 * (c[n + k].conj() * c[n] * phase).re
            };
            sum += if n % 2 == 0 { cur * term } else { -cur * term };
            let nf = n as f64;
            let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf * (nf + kf)).sqrt() * prev)
                / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
            prev = cur;
            cur = next;
        }
        total += sum;
    }
    total * 2.0 / std::f64::consts::PI
}

/// `W(x, p) = (2/π) <ψ|D(α) Π D†(α)|ψ>` with `α = x + ip`.
pub fn wigner(state: &FockVector, xs: &[f64], ps: &[f64]) -> Result<WignerGrid> {
    if state.modes() != 1 {
        return Err(Error::ModeMismatch { expected: 1, found: state.modes() });
    }
    if xs.is_empty() || ps.is_empty() {
        return Err(Error::GridEmpty);
    }
    let amps = state.amplitudes();
    let last = amps.iter().rposition(|c| *c != C64::default()).map_or(1, |i| i + 1);
    let c = &amps[..last];
    let mut ln_fact = vec![0.0; last + 1];
    for k in 1..=last {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let bound = 2.0 / std::f64::consts::PI * state.norm().powi(2) + MAGNITUDE_SLACK;
    let rows: Vec<Vec<f64>> = ps
        .par_iter()
        .map(|&p| xs.iter().map(|&x| displaced_parity(c, C64::new(x, p), &ln_fact)).collect())
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let worst = values.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if !worst.is_finite() || worst > bound {
        return Err(Error::TruncationOverflow { mass: worst - bound + MAGNITUDE_SLACK, tolerance: MAGNITUDE_SLACK });
    }
    let mut grid = WignerGrid {
        xs: xs.to_vec(),
        ps: ps.to_vec(),
        values,
        norm_defect: 0.0,
        convention: CONVENTION.to_string(),
    };
    grid.norm_defect = (grid.integral() - 1.0).abs();
    Ok(grid)
}

fn projected_expectation_re(op: &OperatorPoly, state: &FockVector) -> Result<f64> {
    Ok(projected_expectation(op, state)?.re / state.norm().powi(2))
}

/// Grid centred on `(<x>, <p>)` spanning `±extent` standard deviations of
/// the wider quadrature (never narrower than the vacuum), widened to cover
/// the phase-space ring of the highest populated Fock levels.
pub fn default_wigner_axes(state: &FockVector, extent: f64, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = OperatorPoly::quadrature_x(1, 0);
    let p = OperatorPoly::quadrature_p(1, 0);
    let mx = projected_expectation_re(&x, state)?;
    let mp = projected_expectation_re(&p, state)?;
    let vx = projected_expectation_re(&(&x * &x), state)? - mx * mx;
    let vp = projected_expectation_re(&(&p * &p), state)? - mp * mp;
    let sigma = vx.max(vp).max(0.25).sqrt();
    let probs = state.photon_distribution(0);
    let mut tail = 0.0;
    let mut level = probs.len();
    while level > 0 && tail + probs[level - 1] < RING_TAIL {
        tail += probs[level - 1];
        level -= 1;
    }
    let ring = (level as f64 + 0.5).sqrt() + 1.5 + mx.hypot(mp);
    let half = (extent * sigma).max(ring);
    let axis = |m: f64| crate::conditioning::uniform_grid(m - half, m + half, points);
    Ok((axis(mx), axis(mp)))
}

impl WignerGrid {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ip * self.xs.len() + ix]
    }

    fn integrate_with<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let wx = trapezoid_weights(&self.xs);
        let wp = trapezoid_weights(&self.ps);
        let mut total = 0.0;
        for (ip, wpi) in wp.iter().enumerate() {
            for (ix, wxi) in wx.iter().enumerate() {
                total += wpi * wxi * f(self.at(ix, ip));
            }
        }
        total
    }

    pub fn integral(&self) -> f64 {
        self.integrate_with(|w| w)
    }

    /// Header row of x values, first column p values, `{:.16e}` numbers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p\\x");
        for x in &self.xs {
            out.push_str(&format!(",{x:.16e}"));
        }
        out.push('\n');
        for (ip, p) in self.ps.iter().enumerate() {
            out.push_str(&format!("{p:.16e}"));
            for ix in 0..self.xs.len() {
                out.push_str(&format!(",{:.16e}", self.at(ix, ip)));
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "convention": self.convention,
            "norm_defect": self.norm_defect,
            "negativity_volume": negativity_volume(self),
            "x_range": [self.xs.first(), self.xs.last()],
            "p_range": [self.ps.first(), self.ps.last()],
            "x_points": self.xs.len(),
            "p_points": self.ps.len(),
        })
    }
}

pub fn negativity_volume(grid: &WignerGrid) -> f64 {
    grid.integrate_with(|w| (-w).max(0.0))
}

/// `∫ W dp` (axis `X`) or `∫ W dx` (axis `P`).
pub fn wigner_marginal(grid: &WignerGrid, axis: Axis) -> Vec<f64> {
    let (nx, np) = (grid.xs.len(), grid.ps.len());
    match axis {
        Axis::X => {
            let w = trapezoid_weights(&grid.ps);
            (0..nx).map(|ix| (0..np).map(|ip| w[ip] * grid.at(ix, ip)).sum()).collect()
        }
        Axis::P => {
            let w = trapezoid_weights(&grid.xs);
            (0..np).map(|ip| (0..nx).map(|ix| w[ix] * grid.at(ix, ip)).sum()).collect()
        }
    }
}

/// `|<a|b>|²`; states with the same mode count but different truncations
/// are compared in the larger space.
pub fn state_fidelity(a: &FockVector, b: &FockVector) -> Result<f64> {
    if a.modes() != b.modes() {
        return Err(Error::ModeMismatch { expected: a.modes(), found: b.modes() });
    }
    if a.dims() == b.dims() {
        return Ok(a.inner(b)?.norm_sqr());
    }
    let dims: Vec<usize> = a.dims().iter().zip(b.dims()).map(|(x, y)| *x.max(y)).collect();
    Ok(a.resized(&dims).0.inner(&b.resized(&dims).0)?.norm_sqr())
}

/// `½ Σ |λ_i(ρ - σ)|` for Hermitian matrices.
pub fn trace_distance(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    let diff = rho - sigma;
    let eig = nalgebra::SymmetricEigen::new(diff);
    0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::uniform_grid;
    use crate::fock::displacement;

    const TWO_OVER_PI: f64 = 2.0 / std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_and_single_photon_at_origin() {
        let w = wigner(&FockVector::vacuum(&[4]), &[0.0], &[0.0]).unwrap();
        assert!((w.values[0] - TWO_OVER_PI).abs() < 1e-12);
        let w = wigner(&FockVector::basis(&[4], &[1]), &[0.0], &[0.0]).unwrap();
        assert!((w.values[0] + TWO_OVER_PI).abs() < 1e-12);
    }

    #[test]
    fn vacuum_profile() {
        let xs = uniform_grid(-2.0, 2.0, 9);
        let w = wigner(&FockVector::vacuum(&[3]), &xs, &xs).unwrap();
        for (ip, p) in xs.iter().enumerate() {
            for (ix, x) in xs.iter().enumerate() {
                let want = TWO_OVER_PI * (-2.0 * (x * x + p * p)).exp();
                assert!((w.at(ix, ip) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coherent_peak_location() {
        let s = displacement(c(1.0, 1.0), &FockVector::vacuum(&[30])).unwrap();
        let xs = uniform_grid(-1.0, 3.0, 81);
        let w = wigner(&s, &xs, &xs).unwrap();
        let (imax, _) = w.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let (ix, ip) = (imax % xs.len(), imax / xs.len());
        assert!((xs[ix] - 1.0).abs() < 0.051 && (xs[ip] - 1.0).abs() < 0.051);
    }

    #[test]
    fn displaced_state_far_from_origin() {
        let a0 = c(3.0, -2.0);
        let s = displacement(a0, &FockVector::vacuum(&[80])).unwrap();
        let xs = uniform_grid(-7.0, 7.0, 29);
        let w = wigner(&s, &xs, &xs).unwrap();
        for (ip, p) in xs.iter().enumerate() {
            for (ix, x) in xs.iter().enumerate() {
                let want = TWO_OVER_PI * (-2.0 * (C64::new(*x, *p) - a0).norm_sqr()).exp();
                assert!((w.at(ix, ip) - want).abs() < 1e-9, "{x} {p}");
            }
        }
    }

    #[test]
    fn single_photon_negativity() {
        let s = FockVector::basis(&[4], &[1]);
        let (xs, ps) = default_wigner_axes(&s, 5.0, 201).unwrap();
        let w = wigner(&s, &xs, &ps).unwrap();
        let want = 2.0 * (-0.5f64).exp() - 1.0;
        assert!((negativity_volume(&w) - want).abs() < 1e-3);
        assert!(w.norm_defect < 1e-4);
    }

    #[test]
    fn gaussian_states_are_nonnegative() {
        let r: f64 = 0.4;
        let sq = crate::fock::squeeze(c(r.cosh(), 0.0), c(r.sinh(), 0.0), &FockVector::vacuum(&[40])).unwrap();
        let s = displacement(c(0.5, -0.3), &sq).unwrap();
        let (xs, ps) = default_wigner_axes(&s, 5.0, 121).unwrap();
        let w = wigner(&s, &xs, &ps).unwrap();
        assert!(negativity_volume(&w) < 1e-6);
    }

    #[test]
    fn marginal_of_vacuum() {
        let s = FockVector::vacuum(&[3]);
        let (xs, ps) = default_wigner_axes(&s, 5.0, 201).unwrap();
        let w = wigner(&s, &xs, &ps).unwrap();
        let m = wigner_marginal(&w, Axis::X);
        let tw = trapezoid_weights(&xs);
        let mass: f64 = m.iter().zip(&tw).map(|(a, b)| a * b).sum();
        let var: f64 = m.iter().zip(&tw).zip(&xs).map(|((a, b), x)| a * b * x * x).sum::<f64>() / mass;
        assert!((var - 0.25).abs() < 1e-4);
        assert!((mass - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fidelity_examples() {
        let a = FockVector::basis(&[5], &[2]);
        assert!((state_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(state_fidelity(&a, &FockVector::basis(&[5], &[3])).unwrap(), 0.0);
        let coh = FockVector::coherent(40, c(1.0, 0.0));
        let f = state_fidelity(&FockVector::vacuum(&[40]), &coh).unwrap();
        assert!((f - (-1.0f64).exp()).abs() < 1e-8);
        let err = state_fidelity(&a, &FockVector::vacuum(&[5, 2])).unwrap_err();
        assert!(matches!(err, Error::ModeMismatch { .. }));
    }

    #[test]
    fn csv_layout() {
        let w = wigner(&FockVector::vacuum(&[2]), &[0.0, 1.0], &[-1.0]).unwrap();
        let csv = w.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p\\x,0.0000000000000000e0,1.0000000000000000e0");
        assert!(lines[1].starts_with("-1.0000000000000000e0,"));
    }
}
