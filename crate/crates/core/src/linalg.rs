//! Sparse Hamiltonian matrices on truncated Fock spaces and the action of
//! their exponential on a vector.

use rayon::prelude::*;

use crate::poly::OperatorPoly;
use crate::C64;

const PAR_THRESHOLD: usize = 4096;

/// Row-major strides for a tensor with the given per-mode dimensions.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for m in (0..dims.len().saturating_sub(1)).rev() {
        s[m] = s[m + 1] * dims[m + 1];
    }
    s
}

pub fn levels_of(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for m in (0..dims.len()).rev() {
        out[m] = index % dims[m];
        index /= dims[m];
    }
    out
}

/// `sqrt(n (n-1) ... (n-k+1))`
fn falling_sqrt(n: usize, k: u32) -> f64 {
    (0..k as usize).map(|i| (n - i) as f64).product::<f64>().sqrt()
}

/// Result of applying a monomial to a basis level of one mode: target level
/// and matrix element, or `None` if annihilated.
fn apply_word_level(n: usize, creation: u32, annihilation: u32) -> Option<(usize, f64)> {
    if (annihilation as usize) > n {
        return None;
    }
    let mid = n - annihilation as usize;
    let out = mid + creation as usize;
    Some((out, falling_sqrt(n, annihilation) * falling_sqrt(out, creation)))
}

/// Compressed sparse row matrix over the truncated tensor-product basis.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Matrix of `op` restricted to the truncated space, i.e. `P op P` with
    /// `P` the projector onto levels below `dims`.
    pub fn from_poly(op: &OperatorPoly, dims: &[usize]) -> Self {
        assert_eq!(op.modes(), dims.len());
        let dim: usize = dims.iter().product();
        let st = strides(dims);
        let terms: Vec<_> = op.terms().map(|(w, c)| (w.clone(), *c)).collect();
        // Build column by column, then transpose into rows.
        let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
        for col in 0..dim {
            let levels = levels_of(col, dims);
            'term: for (w, c) in &terms {
                let mut row = 0;
                let mut amp = *c;
                for (m, &(j, k)) in w.iter().enumerate() {
                    match apply_word_level(levels[m], j, k) {
                        Some((out, f)) if out < dims[m] => {
                            row += out * st[m];
                            amp *= f;
                        }
                        _ => continue 'term,
                    }
                }
                triplets.push((row, col, amp));
            }
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { dim, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row_dot(&self, r: usize, x: &[C64]) -> C64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&c, v)| v * x[c])
            .sum()
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        if self.dim >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = self.row_dot(r, x));
        } else {
            for (r, out) in y.iter_mut().enumerate() {
                *out = self.row_dot(r, x);
            }
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut cols = vec![0.0; self.dim];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            cols[*c] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Linear combination `Σ c_i M_i` of matrices sharing a basis.
    pub fn combine(parts: &[(C64, &SparseMatrix)]) -> Self {
        let dim = parts.first().map_or(0, |p| p.1.dim);
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc: std::collections::BTreeMap<usize, C64> = Default::default();
        for r in 0..dim {
            acc.clear();
            for (s, m) in parts {
                assert_eq!(m.dim, dim);
                for i in m.row_ptr[r]..m.row_ptr[r + 1] {
                    *acc.entry(m.col_idx[i]).or_default() += s * m.values[i];
                }
            }
            for (&c, &v) in &acc {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[r + 1] = col_idx.len();
        }
        SparseMatrix { dim, row_ptr, col_idx, values }
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `exp(scale · A) v` by a truncated Taylor series on substeps of bounded norm.
pub fn expm_multiply(a: &SparseMatrix, v: &[C64], scale: C64) -> Vec<C64> {
    const STEP_NORM: f64 = 1.0;
    const MAX_TERMS: usize = 60;
    const TOL: f64 = 1e-17;
    let total = scale.norm() * a.one_norm();
    if total == 0.0 {
        return v.to_vec();
    }
    let steps = (total / STEP_NORM).ceil().max(1.0) as usize;
    let h = scale / steps as f64;
    let mut out = v.to_vec();
    let mut term = vec![C64::default(); a.dim];
    let mut next = vec![C64::default(); a.dim];
    for _ in 0..steps {
        term.copy_from_slice(&out);
        let base = norm(&out).max(f64::MIN_POSITIVE);
        for k in 1..=MAX_TERMS {
            a.matvec_into(&term, &mut next);
            let f = h / k as f64;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * f;
            }
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
            if norm(&term) <= TOL * base {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_and_levels_roundtrip() {
        let dims = [4, 3];
        assert_eq!(strides(&dims), vec![3, 1]);
        for i in 0..12 {
            let l = levels_of(i, &dims);
            assert_eq!(l[0] * 3 + l[1], i);
        }
    }

    #[test]
    fn creation_matrix_elements() {
        let ad = OperatorPoly::creation(1, 0);
        let m = SparseMatrix::from_poly(&ad, &[5]);
        let mut e3 = vec![C64::default(); 5];
        e3[3] = C64::new(1.0, 0.0);
        let y = m.matvec(&e3);
        assert!((y[4].re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn expm_of_number_operator_is_phase() {
        let n = OperatorPoly::number(1, 0);
        let m = SparseMatrix::from_poly(&n, &[6]);
        let v: Vec<C64> = (0..6).map(|k| C64::new(1.0 / (k as f64 + 1.0), 0.0)).collect();
        let t = 2.7;
        let out = expm_multiply(&m, &v, C64::new(0.0, -t));
        for k in 0..6 {
            let want = v[k] * C64::from_polar(1.0, -t * k as f64);
            assert!((out[k] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn combine_matches_sum() {
        let a = SparseMatrix::from_poly(&OperatorPoly::annihilation(2, 0), &[3, 2]);
        let b = SparseMatrix::from_poly(&OperatorPoly::creation(2, 1), &[3, 2]);
        let s = SparseMatrix::combine(&[(C64::new(2.0, 0.0), &a), (C64::new(0.0, 1.0), &b)]);
        let x: Vec<C64> = (0..6).map(|k| C64::new(k as f64, 1.0)).collect();
        let want: Vec<C64> = a
            .matvec(&x)
            .iter()
            .zip(b.matvec(&x))
            .map(|(p, q)| p * 2.0 + q * C64::new(0.0, 1.0))
            .collect();
        let got = s.matvec(&x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-14);
        }
    }
}
