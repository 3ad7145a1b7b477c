//! Truncated Fock-space pure states for one or two bosonic modes.
//!
//! Quadrature convention used throughout the crate:
//! `x = (a + a†)/2`, `p = (a - a†)/(2i)`, so `[x, p] = i/2` and the vacuum
//! has `<x²> = 1/4`. Rotated quadratures are `x_θ = (a e^{-iθ} + a† e^{iθ})/2`;
//! `θ = π/2` gives `p`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{levels_of, strides, SparseMatrix};
use crate::poly::{Ladder, OperatorPoly};
use crate::C64;

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// Number of top levels per mode that count towards the tail mass.
pub fn tail_levels(dim: usize) -> usize {
    3.min(dim / 2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    mode_dims: Vec<usize>,
    amplitudes: Vec<C64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl FockVector {
    pub fn new(mode_dims: Vec<usize>, amplitudes: Vec<C64>) -> Result<Self> {
        if mode_dims.is_empty() || mode_dims.len() > 2 || mode_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "mode_dims must hold one or two positive entries, got {mode_dims:?}"
            )));
        }
        let len: usize = mode_dims.iter().product();
        if amplitudes.len() != len {
            return Err(Error::InvalidArgument(format!(
                "expected {len} amplitudes for dims {mode_dims:?}, got {}",
                amplitudes.len()
            )));
        }
        Ok(FockVector { mode_dims, amplitudes, label: None })
    }

    pub fn zeros(mode_dims: &[usize]) -> Self {
        let len = mode_dims.iter().product();
        Self::new(mode_dims.to_vec(), vec![C64::default(); len]).expect("valid dims")
    }

    pub fn basis(mode_dims: &[usize], levels: &[usize]) -> Self {
        let mut v = Self::zeros(mode_dims);
        let idx = v.index_of(levels);
        v.amplitudes[idx] = C64::new(1.0, 0.0);
        v
    }

    pub fn vacuum(mode_dims: &[usize]) -> Self {
        Self::basis(mode_dims, &vec![0; mode_dims.len()])
    }

    /// Closed-form coherent-state expansion, truncated (not renormalized).
    pub fn coherent(dim: usize, alpha: C64) -> Self {
        let mut amps = Vec::with_capacity(dim);
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..dim {
            amps.push(c);
            c = c * alpha / ((n + 1) as f64).sqrt();
        }
        Self::new(vec![dim], amps).expect("valid dims")
    }

    /// Two-mode product state `|a> ⊗ |b>`.
    pub fn tensor(a: &FockVector, b: &FockVector) -> Result<Self> {
        if a.modes() != 1 || b.modes() != 1 {
            return Err(Error::ModeMismatch { expected: 1, found: a.modes().max(b.modes()) });
        }
        let mut amps = Vec::with_capacity(a.len() * b.len());
        for x in &a.amplitudes {
            for y in &b.amplitudes {
                amps.push(x * y);
            }
        }
        Self::new(vec![a.len(), b.len()], amps)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn index_of(&self, levels: &[usize]) -> usize {
        assert_eq!(levels.len(), self.modes());
        strides(&self.mode_dims).iter().zip(levels).map(|(s, l)| s * l).sum()
    }

    pub fn amplitude(&self, levels: &[usize]) -> C64 {
        self.amplitudes[self.index_of(levels)]
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amplitudes)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        self.amplitudes.iter_mut().for_each(|c| *c /= n);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        self.check_same_dims(other)?;
        Ok(crate::linalg::inner(&self.amplitudes, &other.amplitudes))
    }

    fn check_same_dims(&self, other: &FockVector) -> Result<()> {
        if self.modes() != other.modes() {
            return Err(Error::ModeMismatch { expected: self.modes(), found: other.modes() });
        }
        if self.mode_dims != other.mode_dims {
            return Err(Error::InvalidArgument(format!(
                "truncation mismatch: {:?} vs {:?}",
                self.mode_dims, other.mode_dims
            )));
        }
        Ok(())
    }

    /// Photon-number distribution of one mode.
    pub fn photon_distribution(&self, mode: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.mode_dims[mode]];
        for (i, c) in self.amplitudes.iter().enumerate() {
            p[levels_of(i, &self.mode_dims)[mode]] += c.norm_sqr();
        }
        p
    }

    /// Probability held in the top levels of each mode.
    pub fn tail_masses(&self) -> Vec<f64> {
        (0..self.modes())
            .map(|m| {
                let d = self.mode_dims[m];
                self.photon_distribution(m)[d - tail_levels(d)..].iter().sum()
            })
            .collect()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_masses().into_iter().fold(0.0, f64::max)
    }

    pub fn check_tail(&self, tolerance: f64) -> Result<()> {
        let mass = self.tail_mass();
        if mass > tolerance {
            return Err(Error::TruncationOverflow { mass, tolerance });
        }
        Ok(())
    }

    /// Copy into a different truncation, zero-padding or dropping levels.
    /// Returns the new vector and the probability that was dropped.
    pub fn resized(&self, mode_dims: &[usize]) -> (FockVector, f64) {
        assert_eq!(mode_dims.len(), self.modes());
        let mut out = FockVector::zeros(mode_dims);
        let mut lost = 0.0;
        for (i, c) in self.amplitudes.iter().enumerate() {
            let l = levels_of(i, &self.mode_dims);
            if l.iter().zip(mode_dims).all(|(a, d)| a < d) {
                let j = out.index_of(&l);
                out.amplitudes[j] = *c;
            } else {
                lost += c.norm_sqr();
            }
        }
        out.label = self.label.clone();
        (out, lost)
    }

    /// Applies a `rows × dim(mode)` matrix along one mode. Rows beyond the
    /// current dimension are accumulated and reported as the lost mass; the
    /// result keeps the original truncation.
    pub fn apply_mode_matrix(&self, mode: usize, m: &DMatrix<C64>) -> (FockVector, f64) {
        let dims = &self.mode_dims;
        assert_eq!(m.ncols(), dims[mode]);
        let mut big_dims = dims.clone();
        big_dims[mode] = m.nrows();
        let mut big = FockVector::zeros(&big_dims);
        let st = strides(dims);
        let bst = strides(&big_dims);
        let other = if self.modes() == 2 { 1 - mode } else { usize::MAX };
        let other_dim = if other == usize::MAX { 1 } else { dims[other] };
        for o in 0..other_dim {
            let (src_off, dst_off) = if other == usize::MAX {
                (0, 0)
            } else {
                (o * st[other], o * bst[other])
            };
            for r in 0..m.nrows() {
                let mut acc = C64::default();
                for c in 0..m.ncols() {
                    acc += m[(r, c)] * self.amplitudes[src_off + c * st[mode]];
                }
                big.amplitudes[dst_off + r * bst[mode]] = acc;
            }
        }
        let (mut out, lost) = big.resized(dims);
        out.label = self.label.clone();
        (out, lost)
    }

    /// Contracts one mode against the weights `w_n` and returns the
    /// (unnormalized) state of the remaining mode, `Σ_n w_n <n|_mode |Ψ>`.
    pub fn contract_mode(&self, mode: usize, weights: &[C64]) -> Result<FockVector> {
        if self.modes() != 2 {
            return Err(Error::ModeMismatch { expected: 2, found: self.modes() });
        }
        assert_eq!(weights.len(), self.mode_dims[mode]);
        let other = 1 - mode;
        let st = strides(&self.mode_dims);
        let mut out = FockVector::zeros(&[self.mode_dims[other]]);
        for (k, amp) in out.amplitudes.iter_mut().enumerate() {
            *amp = weights
                .iter()
                .enumerate()
                .map(|(n, w)| w * self.amplitudes[n * st[mode] + k * st[other]])
                .sum();
        }
        Ok(out)
    }

    /// Reduced density matrix of one mode.
    pub fn reduced_density(&self, mode: usize) -> DMatrix<C64> {
        let d = self.mode_dims[mode];
        if self.modes() == 1 {
            let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
            return &v * v.adjoint();
        }
        let other = 1 - mode;
        let st = strides(&self.mode_dims);
        let mut rho = DMatrix::zeros(d, d);
        for k in 0..self.mode_dims[other] {
            for i in 0..d {
                let ai = self.amplitudes[i * st[mode] + k * st[other]];
                if ai == C64::default() {
                    continue;
                }
                for j in 0..d {
                    rho[(i, j)] += ai * self.amplitudes[j * st[mode] + k * st[other]].conj();
                }
            }
        }
        rho
    }
}

fn check_modes(op: &OperatorPoly, state: &FockVector) -> Result<()> {
    if op.modes() != state.modes() {
        return Err(Error::ModeMismatch { expected: op.modes(), found: state.modes() });
    }
    Ok(())
}

pub fn apply_operator(op: &OperatorPoly, state: &FockVector) -> Result<FockVector> {
    apply_operator_with_tolerance(op, state, DEFAULT_TAIL_TOLERANCE)
}

/// `op|ψ>` (unnormalized). Amplitude that would be written above the
/// highest retained level is collected; its probability must not exceed
/// `tolerance`.
pub fn apply_operator_with_tolerance(
    op: &OperatorPoly,
    state: &FockVector,
    tolerance: f64,
) -> Result<FockVector> {
    check_modes(op, state)?;
    let dims = state.dims();
    let mut out = FockVector::zeros(dims);
    let mut overflow: HashMap<Vec<usize>, C64> = HashMap::new();
    for (i, amp) in state.amplitudes().iter().enumerate() {
        if *amp == C64::default() {
            continue;
        }
        let levels = levels_of(i, dims);
        'term: for (word, c) in op.terms() {
            let mut target = Vec::with_capacity(dims.len());
            let mut f = 1.0;
            for (m, &(j, k)) in word.iter().enumerate() {
                let n = levels[m];
                if k as usize > n {
                    continue 'term;
                }
                let mid = n - k as usize;
                let top = mid + j as usize;
                f *= ((mid + 1)..=n).map(|v| v as f64).product::<f64>().sqrt();
                f *= ((mid + 1)..=top).map(|v| v as f64).product::<f64>().sqrt();
                target.push(top);
            }
            let val = amp * c * f;
            if target.iter().zip(dims).all(|(t, d)| t < d) {
                let idx = out.index_of(&target);
                out.amplitudes[idx] += val;
            } else {
                *overflow.entry(target).or_default() += val;
            }
        }
    }
    let mass: f64 = overflow.values().map(|v| v.norm_sqr()).sum();
    if mass > tolerance {
        return Err(Error::TruncationOverflow { mass, tolerance });
    }
    Ok(out)
}

/// Applies a raw (not normal-ordered) product of ladder factors, rightmost
/// factor first, in a space padded by the word length so no intermediate
/// amplitude is lost.
pub fn apply_word(coeff: C64, word: &[Ladder], state: &FockVector) -> Result<FockVector> {
    if let Some(f) = word.iter().find(|f| f.mode >= state.modes()) {
        return Err(Error::ModeMismatch { expected: f.mode + 1, found: state.modes() });
    }
    let pad = word.len();
    let big_dims: Vec<usize> = state.dims().iter().map(|d| d + pad).collect();
    let (mut cur, _) = state.resized(&big_dims);
    for f in word.iter().rev() {
        let op = if f.dagger {
            OperatorPoly::creation(state.modes(), f.mode)
        } else {
            OperatorPoly::annihilation(state.modes(), f.mode)
        };
        cur = apply_operator_with_tolerance(&op, &cur, f64::INFINITY)?;
    }
    cur.amplitudes.iter_mut().for_each(|c| *c *= coeff);
    Ok(cur.resized(state.dims()).0)
}

pub fn expectation(op: &OperatorPoly, state: &FockVector) -> Result<C64> {
    let v = apply_operator(op, state)?;
    state.inner(&v)
}

fn ladder_matrices(dim: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    (a, ad)
}

fn padded_dim(dim: usize, extra: f64) -> usize {
    (dim + 24 + extra.ceil() as usize).min((dim + 24).max(640))
}

/// `<ψ|P op P|ψ>` with `P` the projector onto the truncated space; never
/// reports overflow.
pub fn projected_expectation(op: &OperatorPoly, state: &FockVector) -> Result<C64> {
    if state.modes() != op.modes() {
        return Err(Error::ModeMismatch { expected: op.modes(), found: state.modes() });
    }
    let m = SparseMatrix::from_poly(op, state.dims());
    Ok(crate::linalg::inner(state.amplitudes(), &m.matvec(state.amplitudes())))
}

/// Matrix of `D(α)` with `dim` input columns and padded output rows.
pub fn displacement_matrix(dim: usize, alpha: C64) -> DMatrix<C64> {
    let r = alpha.norm();
    let big = padded_dim(dim, r * r + 6.0 * r * (dim as f64).sqrt() + 8.0 * r);
    let (a, ad) = ladder_matrices(big);
    let gen = ad * alpha - a * alpha.conj();
    gen.exp().columns(0, dim).into_owned()
}

fn symplectic_defect(mu: C64, nu: C64) -> f64 {
    mu.norm_sqr() - nu.norm_sqr() - 1.0
}

/// Matrix of `S(μ,ν)`, `S† a S = μ a + ν a†`, with `dim` input columns and
/// padded output rows. Built as `S(ζ) R(-arg μ)`.
pub fn squeeze_matrix(dim: usize, mu: C64, nu: C64) -> DMatrix<C64> {
    let r = nu.norm().asinh();
    let phi_mu = mu.arg();
    let theta = nu.arg() + phi_mu + std::f64::consts::PI;
    let zeta = C64::from_polar(r, theta);
    let stretch = (2.0 * r).exp();
    let big = padded_dim(dim, (dim as f64 + 12.0) * (stretch - 1.0) + 16.0 * r);
    let (a, ad) = ladder_matrices(big);
    let gen = (&a * &a * zeta.conj() - &ad * &ad * zeta) * C64::new(0.5, 0.0);
    let mut m = gen.exp().columns(0, dim).into_owned();
    for n in 0..dim {
        let ph = C64::from_polar(1.0, phi_mu * n as f64);
        m.column_mut(n).iter_mut().for_each(|c| *c *= ph);
    }
    m
}

pub fn displacement(alpha: C64, state: &FockVector) -> Result<FockVector> {
    displace_mode(state, 0, alpha, DEFAULT_TAIL_TOLERANCE)
}

/// `D(α)` on one mode of a one- or two-mode state.
pub fn displace_mode(state: &FockVector, mode: usize, alpha: C64, tolerance: f64) -> Result<FockVector> {
    if mode >= state.modes() {
        return Err(Error::ModeMismatch { expected: mode + 1, found: state.modes() });
    }
    let m = displacement_matrix(state.dims()[mode], alpha);
    let (out, lost) = state.apply_mode_matrix(mode, &m);
    let mass = lost + out.tail_mass();
    if mass > tolerance {
        return Err(Error::TruncationOverflow { mass, tolerance });
    }
    Ok(out)
}

pub fn squeeze(mu: C64, nu: C64, state: &FockVector) -> Result<FockVector> {
    squeeze_mode(state, 0, mu, nu, 1e-10, DEFAULT_TAIL_TOLERANCE)
}

/// `S(μ,ν)` on one mode, after checking `|μ|² - |ν|² = 1` within `symplectic_tol`.
pub fn squeeze_mode(
    state: &FockVector,
    mode: usize,
    mu: C64,
    nu: C64,
    symplectic_tol: f64,
    tolerance: f64,
) -> Result<FockVector> {
    if mode >= state.modes() {
        return Err(Error::ModeMismatch { expected: mode + 1, found: state.modes() });
    }
    let defect = symplectic_defect(mu, nu);
    if defect.abs() > symplectic_tol || !defect.is_finite() {
        return Err(Error::NotSymplectic { defect });
    }
    let m = squeeze_matrix(state.dims()[mode], mu, nu);
    let (out, lost) = state.apply_mode_matrix(mode, &m);
    let mass = lost + out.tail_mass();
    if mass > tolerance {
        return Err(Error::TruncationOverflow { mass, tolerance });
    }
    Ok(out)
}

/// `exp(-iφ a†a)` on one mode.
pub fn rotate_mode(state: &FockVector, mode: usize, phi: f64) -> FockVector {
    let d = state.dims()[mode];
    let m = DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::from_polar(1.0, -phi * r as f64)
        } else {
            C64::default()
        }
    });
    state.apply_mode_matrix(mode, &m).0
}

/// Hermite functions `φ_0..φ_{count-1}` at `x` in the `<x²>_vac = 1/4`
/// convention, by the stable three-term recurrence.
pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let y = std::f64::consts::SQRT_2 * x;
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let scale = 2f64.powf(0.25);
    let p0 = std::f64::consts::PI.powf(-0.25) * (-y * y / 2.0).exp();
    out.push(p0);
    if count > 1 {
        out.push(std::f64::consts::SQRT_2 * y * p0);
    }
    for n in 2..count {
        let nf = n as f64;
        let v = (2.0 / nf).sqrt() * y * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
        out.push(v);
    }
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// `<x_θ = x | n>` for `n < count`.
pub fn quadrature_basis(count: usize, theta: f64, x: f64) -> Vec<C64> {
    hermite_functions(count, x)
        .into_iter()
        .enumerate()
        .map(|(n, h)| C64::from_polar(h, -theta * n as f64))
        .collect()
}

pub fn quadrature_wavefunction(state: &FockVector, mode: usize, xs: &[f64]) -> Result<Vec<C64>> {
    rotated_quadrature_wavefunction(state, mode, 0.0, xs)
}

/// `ψ(x) = <x_θ = x|ψ>` for a single-mode state.
pub fn rotated_quadrature_wavefunction(
    state: &FockVector,
    mode: usize,
    theta: f64,
    xs: &[f64],
) -> Result<Vec<C64>> {
    if xs.is_empty() {
        return Err(Error::GridEmpty);
    }
    if state.modes() != 1 || mode != 0 {
        return Err(Error::ModeMismatch { expected: 1, found: state.modes().max(mode + 1) });
    }
    let d = state.len();
    Ok(xs
        .iter()
        .map(|&x| {
            quadrature_basis(d, theta, x)
                .iter()
                .zip(state.amplitudes())
                .map(|(b, c)| b * c)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn annihilating_vacuum_gives_zero() {
        let v = apply_operator(&OperatorPoly::annihilation(1, 0), &FockVector::vacuum(&[5])).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn creation_on_three() {
        let v = apply_operator(&OperatorPoly::creation(1, 0), &FockVector::basis(&[8], &[3])).unwrap();
        assert!((v.amplitude(&[4]) - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coherent_number_expectation() {
        let s = FockVector::coherent(30, c(1.0, 0.0));
        let v = apply_operator(&OperatorPoly::number(1, 0), &s).unwrap();
        assert!((s.inner(&v).unwrap().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn overflow_detected() {
        let s = FockVector::basis(&[4], &[3]);
        let err = apply_operator(&OperatorPoly::creation(1, 0), &s).unwrap_err();
        assert!(matches!(err, Error::TruncationOverflow { .. }));
    }

    #[test]
    fn mode_mismatch_detected() {
        let err = apply_operator(&OperatorPoly::number(2, 0), &FockVector::vacuum(&[4])).unwrap_err();
        assert_eq!(err, Error::ModeMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn expectation_examples() {
        let vac = FockVector::vacuum(&[6]);
        assert_eq!(expectation(&OperatorPoly::number(1, 0), &vac).unwrap(), C64::default());
        let coh = FockVector::coherent(40, c(0.0, 2.0));
        let e = expectation(&OperatorPoly::annihilation(1, 0), &coh).unwrap();
        assert!((e - c(0.0, 2.0)).norm() < 1e-8);
        let x = OperatorPoly::quadrature_x(1, 0);
        let e = expectation(&(&x * &x), &FockVector::basis(&[6], &[1])).unwrap();
        assert!((e - c(0.75, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn displaced_vacuum_is_coherent() {
        let alpha = c(1.0, 0.5);
        let s = displacement(alpha, &FockVector::vacuum(&[30])).unwrap();
        let a = expectation(&OperatorPoly::annihilation(1, 0), &s).unwrap();
        assert!((a - alpha).norm() < 1e-8);
    }

    #[test]
    fn displaced_vacuum_is_poisson() {
        let s = displacement(c(1.0, 0.0), &FockVector::vacuum(&[30])).unwrap();
        let p = s.photon_distribution(0);
        let mut poisson = (-1.0f64).exp();
        for (n, pn) in p.iter().enumerate() {
            assert!((pn - poisson).abs() < 1e-8, "n={n}");
            poisson /= (n + 1) as f64;
        }
    }

    #[test]
    fn displacement_inverse_pair() {
        let amps: Vec<C64> = (0..20)
            .map(|k| if k < 6 { c(0.3 * k as f64 - 0.5, 0.1 * k as f64) } else { C64::default() })
            .collect();
        let s = FockVector::new(vec![20], amps).unwrap().normalized().unwrap();
        let alpha = c(0.4, -0.7);
        let there = displace_mode(&s, 0, alpha, 1e-6).unwrap();
        let back = displace_mode(&there, 0, -alpha, 1e-6).unwrap();
        assert!(s.inner(&back).unwrap().norm_sqr() >= 1.0 - 1e-8);
    }

    #[test]
    fn squeeze_identity_and_variance() {
        let s = FockVector::basis(&[10], &[2]);
        let same = squeeze(c(1.0, 0.0), C64::default(), &s).unwrap();
        assert!(s.inner(&same).unwrap().norm_sqr() > 1.0 - 1e-14);

        let r: f64 = 0.5;
        let sq = squeeze(c(r.cosh(), 0.0), c(r.sinh(), 0.0), &FockVector::vacuum(&[50])).unwrap();
        let x = OperatorPoly::quadrature_x(1, 0);
        let var = expectation(&(&x * &x), &sq).unwrap().re;
        assert!((var - (2.0 * r).exp() / 4.0).abs() < 1e-6);
    }

    #[test]
    fn squeeze_conjugation_action() {
        // <S† a S> on a displaced vacuum equals μα + να*
        let (mu, nu) = (C64::from_polar(0.6f64.cosh(), 0.3), C64::from_polar(0.6f64.sinh(), -1.1));
        let alpha = c(0.3, 0.2);
        let psi = displacement(alpha, &FockVector::vacuum(&[60])).unwrap();
        let sq = squeeze_mode(&psi, 0, mu, nu, 1e-10, 1e-8).unwrap();
        // S|ψ> has <a> = <ψ|S† a S|ψ>
        let a = expectation(&OperatorPoly::annihilation(1, 0), &sq).unwrap();
        assert!((a - (mu * alpha + nu * alpha.conj())).norm() < 1e-8);
    }

    #[test]
    fn squeeze_inverse_pair() {
        let r: f64 = 0.5;
        let (mu, nu) = (c(r.cosh(), 0.0), c(r.sinh(), 0.0));
        let s = FockVector::basis(&[60], &[2]);
        let there = squeeze(mu, nu, &s).unwrap();
        let back = squeeze(mu.conj(), -nu, &there).unwrap();
        assert!(s.inner(&back).unwrap().norm_sqr() >= 1.0 - 1e-8);
    }

    #[test]
    fn not_symplectic_rejected() {
        let err = squeeze(c(1.0, 0.0), c(0.1, 0.0), &FockVector::vacuum(&[5])).unwrap_err();
        assert!(matches!(err, Error::NotSymplectic { .. }));
    }

    #[test]
    fn wavefunction_examples() {
        let xs = [0.0];
        let vac = quadrature_wavefunction(&FockVector::vacuum(&[4]), 0, &xs).unwrap();
        assert!((vac[0].norm_sqr() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-10);
        let one = quadrature_wavefunction(&FockVector::basis(&[4], &[1]), 0, &xs).unwrap();
        assert!(one[0].norm() < 1e-15);
        assert_eq!(quadrature_wavefunction(&FockVector::vacuum(&[4]), 0, &[]), Err(Error::GridEmpty));
    }

    #[test]
    fn fock_three_wavefunction_normalized() {
        let h = 0.005;
        let xs: Vec<f64> = (-1200..=1200).map(|i| i as f64 * h).collect();
        let psi = quadrature_wavefunction(&FockVector::basis(&[5], &[3]), 0, &xs).unwrap();
        let total: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * h;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn p_quadrature_of_coherent_state() {
        // |<p|α>|² peaks at Im α
        let s = FockVector::coherent(40, c(0.0, 1.5));
        let xs: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.01).collect();
        let psi = rotated_quadrature_wavefunction(&s, 0, std::f64::consts::FRAC_PI_2, &xs).unwrap();
        let (imax, _) = psi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!((xs[imax] - 1.5).abs() < 0.011);
    }

    #[test]
    fn tail_mass_counts_top_levels() {
        let s = FockVector::basis(&[10, 4], &[8, 0]);
        assert_eq!(s.tail_masses(), vec![1.0, 0.0]);
        let s = FockVector::basis(&[10, 4], &[6, 2]);
        assert_eq!(s.tail_masses(), vec![0.0, 1.0]);
        assert_eq!(tail_levels(1), 0);
    }

    #[test]
    fn contraction_of_product_state() {
        let a = FockVector::coherent(12, c(0.3, 0.1));
        let b = FockVector::basis(&[5], &[2]);
        let ab = FockVector::tensor(&a, &b).unwrap();
        let w: Vec<C64> = (0..5).map(|n| if n == 2 { c(1.0, 0.0) } else { C64::default() }).collect();
        let got = ab.contract_mode(1, &w).unwrap();
        for (x, y) in got.amplitudes().iter().zip(a.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }
}
