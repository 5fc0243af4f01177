//! Variable-band LU factorization with partial pivoting.
//!
//! The matrix is first permuted by reverse Cuthill–McKee. Row interchanges
//! stay inside the lower band, so all fill lies in a band of width
//! `2 kl + ku + 1`; the per-step extents are tightened using the envelope of
//! the permuted pattern. The interchanges and multipliers are stored in the
//! `L = P₁ L₁ P₂ L₂ …` form and applied in sequence during the solve.

use crate::error::LinSolveError;
use crate::sparse::CsrMatrix;

use super::ordering::{bandwidth, invert, reverse_cuthill_mckee, symmetric_adjacency};

/// Ordering and band extents, reusable for every matrix with the same
/// sparsity pattern.
#[derive(Clone, Debug)]
pub struct BandSymbolic {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    perm: Vec<usize>,
    inv: Vec<usize>,
    kl: usize,
    ku: usize,
    /// Last row touched when eliminating column `k`.
    row_reach: Vec<usize>,
    /// Last column of any active row at step `k`.
    col_reach: Vec<usize>,
}

impl BandSymbolic {
    pub fn analyze(a: &CsrMatrix) -> Result<Self, LinSolveError> {
        if a.nrows() != a.ncols() {
            return Err(LinSolveError::Dimension(format!("matrix is {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let adj = symmetric_adjacency(a);
        let perm = reverse_cuthill_mckee(&adj);
        let inv = invert(&perm);
        let band = bandwidth(&adj, &inv);

        let mut first = (0..n).collect::<Vec<_>>();
        let mut last = (0..n).collect::<Vec<_>>();
        for old in 0..n {
            let i = inv[old];
            for (c, _) in a.row(old) {
                let j = inv[c];
                first[i] = first[i].min(j);
                last[i] = last[i].max(j);
            }
        }
        let kl = (0..n).map(|i| i - first[i]).max().unwrap_or(0);
        let ku = (0..n).map(|i| last[i] - i).max().unwrap_or(0);
        debug_assert!(kl <= band && ku <= band);

        let mut row_reach = (0..n).collect::<Vec<_>>();
        for i in 0..n {
            row_reach[first[i]] = row_reach[first[i]].max(i);
        }
        for k in 1..n {
            row_reach[k] = row_reach[k].max(row_reach[k - 1]);
        }
        let mut last_prefix = last.clone();
        for i in 1..n {
            last_prefix[i] = last_prefix[i].max(last_prefix[i - 1]);
        }
        let col_reach = (0..n).map(|k| last_prefix[row_reach[k]]).collect();

        Ok(BandSymbolic {
            indptr: a.indptr().to_vec(),
            indices: a.indices().to_vec(),
            perm,
            inv,
            kl,
            ku,
            row_reach,
            col_reach,
        })
    }

    /// Whether `a` has exactly the pattern this analysis was built for.
    pub fn matches(&self, a: &CsrMatrix) -> bool {
        a.nrows() == a.ncols() && a.indptr() == self.indptr.as_slice() && a.indices() == self.indices.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Lower and upper half-bandwidths after reordering.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    perm: Vec<usize>,
    col_reach: Vec<usize>,
    row_reach: Vec<usize>,
    rows: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(sym: &BandSymbolic, a: &CsrMatrix) -> Result<Self, LinSolveError> {
        if !sym.matches(a) {
            return Err(LinSolveError::Dimension("pattern differs from the symbolic analysis".into()));
        }
        let n = sym.dim();
        let (kl, ku) = (sym.kl, sym.ku);
        let width = 2 * kl + ku + 1;
        let at = |i: usize, c: usize| i * width + c + kl - i;

        let mut rows = vec![0.0; n * width];
        for old in 0..n {
            let i = sym.inv[old];
            for (c, v) in a.row(old) {
                rows[at(i, sym.inv[c])] += v;
            }
        }
        let scale = rows.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut multipliers = vec![0.0; n * kl];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let rlast = sym.row_reach[k];
            let clast = sym.col_reach[k];

            let mut p = k;
            let mut best = rows[at(k, k)].abs();
            for i in k + 1..=rlast {
                let v = rows[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > f64::EPSILON * 1e-6 * scale) {
                return Err(LinSolveError::Factorization(format!("zero pivot in column {k}")));
            }
            pivots[k] = p;
            if p != k {
                for c in k..=clast {
                    rows.swap(at(k, c), at(p, c));
                }
            }

            let len = clast - k;
            let (head, tail) = rows.split_at_mut((k + 1) * width);
            let pivot_row = &head[k * width..];
            let diag = pivot_row[kl];
            let upper = &pivot_row[kl + 1..kl + 1 + len];
            for i in k + 1..=rlast {
                let row = &mut tail[(i - k - 1) * width..(i - k) * width];
                let off = k + kl - i;
                let l = row[off] / diag;
                row[off] = 0.0;
                multipliers[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for (x, &u) in row[off + 1..off + 1 + len].iter_mut().zip(upper) {
                        *x -= l * u;
                    }
                }
            }
        }

        Ok(BandLu {
            n,
            kl,
            width,
            perm: sym.perm.clone(),
            col_reach: sym.col_reach.clone(),
            row_reach: sym.row_reach.clone(),
            rows,
            multipliers,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (kl, width) = (self.kl, self.width);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..self.n {
            y.swap(k, self.pivots[k]);
            let yk = y[k];
            if yk != 0.0 {
                for i in k + 1..=self.row_reach[k] {
                    y[i] -= self.multipliers[k * kl + (i - k - 1)] * yk;
                }
            }
        }
        for k in (0..self.n).rev() {
            let row = &self.rows[k * width..(k + 1) * width];
            let len = self.col_reach[k] - k;
            let s: f64 = row[kl + 1..kl + 1 + len].iter().zip(&y[k + 1..k + 1 + len]).map(|(a, b)| a * b).sum();
            y[k] = (y[k] - s) / row[kl];
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
