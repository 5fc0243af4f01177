#![allow(clippy::needless_range_loop)]

mod common;

use pminres::linsolve::{
    assemble_saddle, solve_symmetric_indefinite, LinearSolverKind, LinearSolverOptions, SaddleSolver,
};
use pminres::sparse::{CsrMatrix, TripletBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense symmetric-indefinite factorization `P A Pᵀ = L D Lᵀ` with
/// Bunch–Kaufman pivoting (1×1 and 2×2 blocks).
struct DenseLdl {
    a: Vec<Vec<f64>>,
    perm: Vec<usize>,
    blocks: Vec<(usize, usize)>,
}

impl DenseLdl {
    fn factor(mut a: Vec<Vec<f64>>) -> Self {
        let n = a.len();
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let swap = |a: &mut Vec<Vec<f64>>, perm: &mut Vec<usize>, k: usize, i: usize, j: usize| {
            if i == j {
                return;
            }
            a.swap(i, j);
            perm.swap(i, j);
            for row in a.iter_mut().skip(k) {
                row.swap(i, j);
            }
        };
        let mut k = 0;
        while k < n {
            let absakk = a[k][k].abs();
            let (imax, colmax) =
                (k + 1..n).map(|i| (i, a[i][k].abs())).fold((k, 0.0), |b, c| if c.1 > b.1 { c } else { b });
            assert!(absakk.max(colmax) > 0.0, "singular oracle matrix");
            let kstep = if absakk >= alpha * colmax {
                1
            } else {
                let rowmax = (k..n).filter(|&j| j != imax).map(|j| a[imax][j].abs()).fold(0.0, f64::max);
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    1
                } else if a[imax][imax].abs() >= alpha * rowmax {
                    swap(&mut a, &mut perm, k, k, imax);
                    1
                } else {
                    swap(&mut a, &mut perm, k, k + 1, imax);
                    2
                }
            };
            if kstep == 1 {
                let d = a[k][k];
                let w: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    let l = w[ii] / d;
                    for (jj, j) in (k + 1..n).enumerate() {
                        a[i][j] -= l * w[jj];
                    }
                    a[i][k] = l;
                }
            } else {
                let (p, q, r) = (a[k][k], a[k + 1][k], a[k + 1][k + 1]);
                let det = p * r - q * q;
                let w: Vec<[f64; 2]> = (k + 2..n).map(|i| [a[i][k], a[i][k + 1]]).collect();
                for (ii, i) in (k + 2..n).enumerate() {
                    let l = [(w[ii][0] * r - w[ii][1] * q) / det, (w[ii][1] * p - w[ii][0] * q) / det];
                    for (jj, j) in (k + 2..n).enumerate() {
                        a[i][j] -= l[0] * w[jj][0] + l[1] * w[jj][1];
                    }
                    a[i][k] = l[0];
                    a[i][k + 1] = l[1];
                }
            }
            blocks.push((k, kstep));
            k += kstep;
        }
        DenseLdl { a, perm, blocks }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let a = &self.a;
        let mut in_block = vec![n; n];
        for &(k, s) in &self.blocks {
            for i in k..k + s {
                in_block[i] = k;
            }
        }
        let is_l = |i: usize, j: usize| i > j && in_block[i] != in_block[j];
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                if is_l(i, j) {
                    y[i] -= a[i][j] * y[j];
                }
            }
        }
        for &(k, s) in &self.blocks {
            if s == 1 {
                y[k] /= a[k][k];
            } else {
                let (p, q, r) = (a[k][k], a[k + 1][k], a[k + 1][k + 1]);
                let det = p * r - q * q;
                let (y0, y1) = (y[k], y[k + 1]);
                y[k] = (r * y0 - q * y1) / det;
                y[k + 1] = (p * y1 - q * y0) / det;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                if is_l(j, i) {
                    y[i] -= a[j][i] * y[j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

fn random_saddle(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (CsrMatrix, CsrMatrix, Vec<f64>, Vec<f64>) {
    let mut t = TripletBuilder::new(n, n);
    for i in 0..n {
        t.push(i, i, 4.0 + rng.random_range(0.0..1.0));
        for _ in 0..2 {
            let j = rng.random_range(0..n);
            if j != i {
                let v = rng.random_range(-0.5..0.5);
                t.push(i, j, v);
                t.push(j, i, v);
            }
        }
    }
    let g = t.build();
    let mut t = TripletBuilder::new(n, m);
    for j in 0..m {
        t.push(j, j, 1.0 + rng.random_range(0.0..1.0));
        for _ in 0..3 {
            t.push(rng.random_range(0..n), j, rng.random_range(-1.0..1.0));
        }
    }
    (g, t.build(), common::random_vec(rng, n, 1.0), common::random_vec(rng, m, 1.0))
}

#[test]
fn oracle_solves_indefinite_systems_that_need_two_by_two_pivots() {
    let a = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 3.0], vec![2.0, 3.0, 0.0]];
    let f = DenseLdl::factor(a.clone());
    assert!(f.blocks.iter().any(|&(_, s)| s == 2));
    let b = [1.0, -2.0, 0.5];
    let x = f.solve(&b);
    for i in 0..3 {
        let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
        assert!(r.abs() < 1e-13);
    }
}

#[test]
fn random_saddle_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..10 {
        let (g, b, top, bottom) = random_saddle(&mut rng, 40, 15);
        let sys = assemble_saddle(g, b, top, bottom).unwrap();
        let oracle = DenseLdl::factor(sys.k().to_dense()).solve(&sys.rhs());
        let scale = common::norm(&oracle);

        let (dr, du, report) = solve_symmetric_indefinite(&sys, 1e-12).unwrap();
        assert_eq!(report.method, LinearSolverKind::Direct);
        let direct: Vec<f64> = dr.into_iter().chain(du).collect();
        let gap: Vec<f64> = direct.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        assert!(common::norm(&gap) <= 1e-8 * scale, "direct gap {}", common::norm(&gap) / scale);

        let mut it = SaddleSolver::new(LinearSolverOptions {
            kind: LinearSolverKind::Minres,
            rel_tol: 1e-12,
            max_iterations: 1000,
        });
        let (dr, du, report) = it.solve(&sys).unwrap();
        assert!(report.iterations > 0);
        let iterative: Vec<f64> = dr.into_iter().chain(du).collect();
        let gap: Vec<f64> = iterative.iter().zip(&oracle).map(|(a, b)| a - b).collect();
        assert!(common::norm(&gap) <= 1e-8 * scale, "minres gap {}", common::norm(&gap) / scale);
    }
}

#[test]
fn assembled_system_is_symmetric_and_blocks_are_recoverable() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (g, b, top, bottom) = random_saddle(&mut rng, 12, 5);
    let sys = assemble_saddle(g.clone(), b.clone(), top, bottom).unwrap();
    let k = sys.k();
    for i in 0..k.nrows() {
        for (j, v) in k.row(i) {
            assert_eq!(k.get(j, i), v);
        }
    }
    assert_eq!(k.block(0..12, 12..17).to_dense(), b.to_dense());
    assert_eq!(k.block(0..12, 0..12).to_dense(), g.to_dense());
}

#[test]
fn reference_three_by_three_residual() {
    let g = CsrMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
    let b = CsrMatrix::from_dense(&[vec![1.0], vec![1.0]]);
    let sys = assemble_saddle(g, b, vec![1.0, 1.0], vec![1.0]).unwrap();
    let (dr, du, _) = solve_symmetric_indefinite(&sys, 1e-10).unwrap();
    let x: Vec<f64> = dr.into_iter().chain(du).collect();
    let kx = sys.k().mul_vec(&x);
    let res: Vec<f64> = kx.iter().zip(sys.rhs()).map(|(a, b)| a - b).collect();
    assert!(common::norm(&res) <= 1e-10);
}
