//! Normal-ordered polynomials in bosonic ladder operators.
//!
//! Every Hamiltonian in the crate is an [`OperatorPoly`]. Terms are stored as
//! per-mode powers `(a†)^j a^k`, creation factors always to the left, so the
//! representation is canonical: two polys are equal as operators iff their
//! term maps are equal.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

/// Per-mode `(creation power, annihilation power)`; one entry per mode.
pub type Monomial = Vec<(u32, u32)>;

/// A single raw ladder factor, used to build words that are not yet normal-ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn a(mode: usize) -> Self {
        Ladder { mode, dagger: false }
    }

    pub fn ad(mode: usize) -> Self {
        Ladder { mode, dagger: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorPoly {
    modes: usize,
    terms: BTreeMap<Monomial, C64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// Normal-ordered expansion of `(a†^j a^k)(a†^l a^m)` for one mode.
fn single_mode_product(left: (u32, u32), right: (u32, u32)) -> Vec<(f64, (u32, u32))> {
    let (j, k) = left;
    let (l, m) = right;
    (0..=k.min(l))
        .map(|r| {
            let c = binomial(k, r) * binomial(l, r) * factorial(r);
            (c, (j + l - r, k + m - r))
        })
        .collect()
}

fn monomial_product(left: &Monomial, right: &Monomial) -> Vec<(f64, Monomial)> {
    let mut acc: Vec<(f64, Monomial)> = vec![(1.0, Vec::with_capacity(left.len()))];
    for (l, r) in left.iter().zip(right) {
        let factors = single_mode_product(*l, *r);
        let mut next = Vec::with_capacity(acc.len() * factors.len());
        for (c0, word) in &acc {
            for (c1, pw) in &factors {
                let mut w = word.clone();
                w.push(*pw);
                next.push((c0 * c1, w));
            }
        }
        acc = next;
    }
    acc
}

impl OperatorPoly {
    pub fn zero(modes: usize) -> Self {
        OperatorPoly { modes, terms: BTreeMap::new() }
    }

    pub fn scalar(modes: usize, c: C64) -> Self {
        let mut p = Self::zero(modes);
        p.add_term(vec![(0, 0); modes], c);
        p
    }

    pub fn identity(modes: usize) -> Self {
        Self::scalar(modes, C64::new(1.0, 0.0))
    }

    /// `(a_mode†)^j (a_mode)^k` with unit coefficient.
    pub fn monomial(modes: usize, mode: usize, creation: u32, annihilation: u32) -> Self {
        assert!(mode < modes, "mode {mode} out of range for {modes}-mode poly");
        let mut word = vec![(0, 0); modes];
        word[mode] = (creation, annihilation);
        let mut p = Self::zero(modes);
        p.add_term(word, C64::new(1.0, 0.0));
        p
    }

    pub fn annihilation(modes: usize, mode: usize) -> Self {
        Self::monomial(modes, mode, 0, 1)
    }

    pub fn creation(modes: usize, mode: usize) -> Self {
        Self::monomial(modes, mode, 1, 0)
    }

    pub fn number(modes: usize, mode: usize) -> Self {
        Self::monomial(modes, mode, 1, 1)
    }

    /// Position quadrature `x = (a + a†)/2`.
    pub fn quadrature_x(modes: usize, mode: usize) -> Self {
        (Self::annihilation(modes, mode) + Self::creation(modes, mode)) * C64::new(0.5, 0.0)
    }

    /// Momentum quadrature `p = (a - a†)/(2i)`.
    pub fn quadrature_p(modes: usize, mode: usize) -> Self {
        (Self::annihilation(modes, mode) - Self::creation(modes, mode)) * C64::new(0.0, -0.5)
    }

    /// Normal-orders an arbitrary product of ladder factors, read left to right.
    pub fn from_word(modes: usize, coeff: C64, word: &[Ladder]) -> Self {
        let mut acc = Self::scalar(modes, coeff);
        for f in word {
            let factor = if f.dagger {
                Self::creation(modes, f.mode)
            } else {
                Self::annihilation(modes, f.mode)
            };
            acc = &acc * &factor;
        }
        acc
    }

    pub fn from_words<'a, I>(modes: usize, words: I) -> Self
    where
        I: IntoIterator<Item = (C64, &'a [Ladder])>,
    {
        words
            .into_iter()
            .fold(Self::zero(modes), |acc, (c, w)| acc + Self::from_word(modes, c, w))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, word: &[(u32, u32)]) -> C64 {
        self.terms.get(word).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, word: Monomial, c: C64) {
        assert_eq!(word.len(), self.modes, "word length must equal mode count");
        if c == C64::default() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(word) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == C64::default() {
                    o.remove();
                }
            }
        }
    }

    /// Re-expresses the poly as raw words and rebuilds it; a no-op on canonical input.
    pub fn canonicalize(&self) -> Self {
        let words: Vec<(C64, Vec<Ladder>)> = self
            .terms
            .iter()
            .map(|(w, c)| (*c, word_to_ladders(w)))
            .collect();
        Self::from_words(self.modes, words.iter().map(|(c, w)| (*c, w.as_slice())))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.modes);
        for (w, c) in &self.terms {
            let flipped = w.iter().map(|&(j, k)| (k, j)).collect();
            out.add_term(flipped, c.conj());
        }
        out
    }

    /// Largest coefficient of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        (self.clone() - self.adjoint())
            .terms
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn commutator(a: &Self, b: &Self) -> Self {
        a * b - b * a
    }

    /// Drops terms whose coefficient magnitude is at most `tol`.
    pub fn prune(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    pub fn constant(&self) -> C64 {
        self.coefficient(&vec![(0, 0); self.modes])
    }

    pub fn without_constant(mut self) -> Self {
        self.terms.remove(&vec![(0, 0); self.modes]);
        self
    }

    /// Total ladder degree of the highest term.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|w| w.iter().map(|(j, k)| j + k).sum())
            .max()
            .unwrap_or(0)
    }

    /// Terms that act only on `mode` with total degree `order` (≥ 1).
    pub fn single_mode_terms(&self, mode: usize, order: u32) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter().filter(move |(w, _)| {
            w.iter()
                .enumerate()
                .all(|(m, &(j, k))| if m == mode { j + k == order } else { j + k == 0 })
        })
    }

    /// Replaces each mode's annihilation operator by `subs[mode]` (and its
    /// creation operator by the adjoint), then re-normal-orders.
    pub fn substitute(&self, subs: &[OperatorPoly]) -> Self {
        assert_eq!(subs.len(), self.modes);
        let adj: Vec<_> = subs.iter().map(OperatorPoly::adjoint).collect();
        let mut pow_cache: BTreeMap<(usize, bool, u32), OperatorPoly> = BTreeMap::new();
        let mut power = |mode: usize, dagger: bool, e: u32| -> OperatorPoly {
            if let Some(p) = pow_cache.get(&(mode, dagger, e)) {
                return p.clone();
            }
            let base = if dagger { &adj[mode] } else { &subs[mode] };
            let mut acc = OperatorPoly::identity(self.modes);
            for _ in 0..e {
                acc = &acc * base;
            }
            pow_cache.insert((mode, dagger, e), acc.clone());
            acc
        };
        let mut out = Self::zero(self.modes);
        for (w, c) in &self.terms {
            let mut term = Self::scalar(self.modes, *c);
            for (m, &(j, k)) in w.iter().enumerate() {
                if j > 0 {
                    term = &term * &power(m, true, j);
                }
                if k > 0 {
                    term = &term * &power(m, false, k);
                }
            }
            out += term;
        }
        out
    }

    /// Classical value with `a_m → α_m`, `a_m† → α_m*`.
    pub fn classical_value(&self, alphas: &[C64]) -> C64 {
        assert_eq!(alphas.len(), self.modes);
        self.terms
            .iter()
            .map(|(w, c)| {
                w.iter().zip(alphas).fold(*c, |acc, (&(j, k), a)| {
                    acc * a.conj().powu(j) * a.powu(k)
                })
            })
            .sum()
    }

    /// `∂H/∂α_m*` for every mode, the right-hand side of the classical
    /// equations `∂_t α = -i ∂H/∂α*`.
    pub fn classical_gradient_conj(&self, alphas: &[C64]) -> Vec<C64> {
        assert_eq!(alphas.len(), self.modes);
        let mut grad = vec![C64::default(); self.modes];
        for (w, c) in &self.terms {
            for (m, g) in grad.iter_mut().enumerate() {
                let (jm, _) = w[m];
                if jm == 0 {
                    continue;
                }
                let mut v = *c * f64::from(jm);
                for (n, (&(j, k), a)) in w.iter().zip(alphas).enumerate() {
                    let j = if n == m { j - 1 } else { j };
                    v *= a.conj().powu(j) * a.powu(k);
                }
                *g += v;
            }
        }
        grad
    }
}

fn word_to_ladders(w: &[(u32, u32)]) -> Vec<Ladder> {
    let mut out = Vec::new();
    for (m, &(j, k)) in w.iter().enumerate() {
        out.extend(std::iter::repeat_n(Ladder::ad(m), j as usize));
        out.extend(std::iter::repeat_n(Ladder::a(m), k as usize));
    }
    out
}

impl Add for OperatorPoly {
    type Output = OperatorPoly;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for OperatorPoly {
    fn add_assign(&mut self, rhs: Self) {
        assert_eq!(self.modes, rhs.modes);
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
    }
}

impl Neg for OperatorPoly {
    type Output = OperatorPoly;
    fn neg(self) -> Self {
        self * C64::new(-1.0, 0.0)
    }
}

impl Sub for OperatorPoly {
    type Output = OperatorPoly;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul<C64> for OperatorPoly {
    type Output = OperatorPoly;
    fn mul(mut self, rhs: C64) -> Self {
        if rhs == C64::default() {
            self.terms.clear();
            return self;
        }
        for c in self.terms.values_mut() {
            *c *= rhs;
        }
        self
    }
}

impl Mul<f64> for OperatorPoly {
    type Output = OperatorPoly;
    fn mul(self, rhs: f64) -> Self {
        self * C64::new(rhs, 0.0)
    }
}

impl Mul<&OperatorPoly> for &OperatorPoly {
    type Output = OperatorPoly;
    fn mul(self, rhs: &OperatorPoly) -> OperatorPoly {
        assert_eq!(self.modes, rhs.modes);
        let mut out = OperatorPoly::zero(self.modes);
        for (wl, cl) in &self.terms {
            for (wr, cr) in &rhs.terms {
                for (f, w) in monomial_product(wl, wr) {
                    out.add_term(w, cl * cr * f);
                }
            }
        }
        out
    }
}

impl Mul for OperatorPoly {
    type Output = OperatorPoly;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl fmt::Display for OperatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6e}{:+.6e}i)", c.re, c.im)?;
            for (m, &(j, k)) in w.iter().enumerate() {
                match j {
                    0 => {}
                    1 => write!(f, " a{m}†")?,
                    _ => write!(f, " a{m}†^{j}")?,
                }
                match k {
                    0 => {}
                    1 => write!(f, " a{m}")?,
                    _ => write!(f, " a{m}^{k}")?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn canonical_commutator() {
        let a = OperatorPoly::annihilation(1, 0);
        let ad = OperatorPoly::creation(1, 0);
        assert_eq!(OperatorPoly::commutator(&a, &ad), OperatorPoly::identity(1));
    }

    #[test]
    fn word_reordering() {
        // a a† a† = a†^2 a + 2 a†
        let p = OperatorPoly::from_word(1, c(1.0), &[Ladder::a(0), Ladder::ad(0), Ladder::ad(0)]);
        assert_eq!(p.coefficient(&[(2, 1)]), c(1.0));
        assert_eq!(p.coefficient(&[(1, 0)]), c(2.0));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn x_squared_expansion() {
        let x = OperatorPoly::quadrature_x(1, 0);
        let x2 = &x * &x;
        assert!((x2.constant() - c(0.25)).norm() < 1e-15);
        assert!((x2.coefficient(&[(1, 1)]) - c(0.5)).norm() < 1e-15);
        assert!((x2.coefficient(&[(2, 0)]) - c(0.25)).norm() < 1e-15);
        assert!((x2.coefficient(&[(0, 2)]) - c(0.25)).norm() < 1e-15);
    }

    #[test]
    fn quadrature_commutator_is_half_i() {
        let x = OperatorPoly::quadrature_x(1, 0);
        let p = OperatorPoly::quadrature_p(1, 0);
        let comm = OperatorPoly::commutator(&x, &p);
        assert_eq!(comm.len(), 1);
        assert!((comm.constant() - C64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn modes_commute() {
        let a0 = OperatorPoly::annihilation(2, 0);
        let ad1 = OperatorPoly::creation(2, 1);
        assert!(OperatorPoly::commutator(&a0, &ad1).is_empty());
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let a = OperatorPoly::annihilation(2, 0);
        let b = OperatorPoly::annihilation(2, 1);
        let h = &(&a.adjoint() * &a.adjoint()) * &b;
        assert!(!h.is_hermitian(1e-12));
        let herm = h.clone() + h.adjoint();
        assert!(herm.is_hermitian(1e-12));
    }

    #[test]
    fn substitution_of_displacement() {
        // a†a under a -> a + α gives a†a + α a† + α* a + |α|^2
        let alpha = C64::new(0.3, -1.2);
        let n = OperatorPoly::number(1, 0);
        let sub = OperatorPoly::annihilation(1, 0) + OperatorPoly::scalar(1, alpha);
        let out = n.substitute(&[sub]);
        assert!((out.coefficient(&[(1, 0)]) - alpha).norm() < 1e-15);
        assert!((out.coefficient(&[(0, 1)]) - alpha.conj()).norm() < 1e-15);
        assert!((out.constant() - C64::new(alpha.norm_sqr(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn classical_gradient_matches_hand_derivative() {
        // H = (g/2)(a†^2 b + a^2 b†) + δ a†a
        let (g, delta) = (0.7, 0.4);
        let h = chi2(g, delta);
        let (al, be) = (C64::new(0.3, 0.8), C64::new(-0.2, 1.1));
        let grad = h.classical_gradient_conj(&[al, be]);
        let want_a = g * al.conj() * be + delta * al;
        let want_b = 0.5 * g * al * al;
        assert!((grad[0] - want_a).norm() < 1e-14);
        assert!((grad[1] - want_b).norm() < 1e-14);
    }

    fn chi2(g: f64, delta: f64) -> OperatorPoly {
        let a = OperatorPoly::annihilation(2, 0);
        let b = OperatorPoly::annihilation(2, 1);
        let ad = a.adjoint();
        let bd = b.adjoint();
        let t = &(&ad * &ad) * &b;
        let u = &(&a * &a) * &bd;
        (t + u) * (0.5 * g) + OperatorPoly::number(2, 0) * delta
    }

    #[test]
    fn canonicalize_is_identity_on_canonical_input() {
        let h = chi2(1.3, 0.2);
        assert_eq!(h.canonicalize(), h);
    }
}
