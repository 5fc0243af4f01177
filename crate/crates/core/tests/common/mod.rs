//! Oracles and fixtures shared by the integration tests. Everything here is
//! computed from mesh coordinates directly and does not go through the
//! library's spaces or quadrature.

#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use pminres::driver::build_spaces;
use pminres::estimate::ExactSolution;
use pminres::forms::NonlinearForms;
use pminres::mesh::{Mesh, Point};
use pminres::quadrature::QuadRule;
use pminres::spaces::DofMap;
use rand::Rng;

pub mod checks;

pub const SIGMA: f64 = 0.97;
pub const SMOOTH_X0: Point = [-1.0, -1.0];

/// Gauss–Legendre nodes and weights on `[0, 1]`, Newton on the three-term
/// recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (x + 1.0), 0.5 * w)
        })
        .collect()
}

/// `∫_T f` through the collapsed square, `n` Gauss points per direction.
pub fn integrate_triangle(tri: [Point; 3], n: usize, mut f: impl FnMut(Point) -> f64) -> f64 {
    let area = signed_area(tri);
    let gl = gauss_legendre(n);
    let mut sum = 0.0;
    for &(s, ws) in &gl {
        for &(t, wt) in &gl {
            let (a, b) = (s, t * (1.0 - s));
            let x = [
                tri[0][0] + a * (tri[1][0] - tri[0][0]) + b * (tri[2][0] - tri[0][0]),
                tri[0][1] + a * (tri[1][1] - tri[0][1]) + b * (tri[2][1] - tri[0][1]),
            ];
            sum += ws * wt * (1.0 - s) * f(x);
        }
    }
    2.0 * area * sum
}

pub fn signed_area(t: [Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

/// Gradients of the three hat functions on `t`.
pub fn hat_gradients(t: [Point; 3]) -> [[f64; 2]; 3] {
    let a2 = 2.0 * signed_area(t);
    [0, 1, 2].map(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        [(t[j][1] - t[k][1]) / a2, (t[k][0] - t[j][0]) / a2]
    })
}

/// Gradient of the P1 function with vertex values `u` on triangle `t`.
pub fn p1_gradient(mesh: &Mesh, u: &[f64], t: usize) -> [f64; 2] {
    let tri = mesh.triangle(t);
    let g = hat_gradients(mesh.triangle_points(t));
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += u[tri[k]] * g[k][0];
        out[1] += u[tri[k]] * g[k][1];
    }
    out
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Conforming P1 Galerkin solution of `-Δu = f`, `u = g` on the boundary,
/// assembled densely. Returns vertex values.
pub fn p1_galerkin(mesh: &Mesh, f: impl Fn(Point) -> f64, g: impl Fn(Point) -> f64, nq: usize) -> Vec<f64> {
    let nv = mesh.num_vertices();
    let mut k = vec![vec![0.0; nv]; nv];
    let mut load = vec![0.0; nv];
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        let tri = mesh.triangle(t);
        let area = signed_area(pts);
        let gr = hat_gradients(pts);
        for i in 0..3 {
            for j in 0..3 {
                k[tri[i]][tri[j]] += area * (gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1]);
            }
            load[tri[i]] += integrate_triangle(pts, nq, |x| {
                let li = gr[i][0] * (x[0] - pts[(i + 1) % 3][0]) + gr[i][1] * (x[1] - pts[(i + 1) % 3][1]);
                f(x) * li
            });
        }
    }
    let boundary: Vec<bool> = (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect();
    let mut u: Vec<f64> = (0..nv).map(|v| if boundary[v] { g(mesh.vertex(v)) } else { 0.0 }).collect();
    let free: Vec<usize> = (0..nv).filter(|&v| !boundary[v]).collect();
    let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| k[i][j]).collect()).collect();
    let b: Vec<f64> = free
        .iter()
        .map(|&i| load[i] - (0..nv).filter(|&j| boundary[j]).map(|j| k[i][j] * u[j]).sum::<f64>())
        .collect();
    for (&i, v) in free.iter().zip(dense_solve(a, b)) {
        u[i] = v;
    }
    u
}

/// `(Σ_T |T| |∇(u − w)|²)^{1/2}` for P1 vertex values.
pub fn h1_seminorm_diff(mesh: &Mesh, u: &[f64], w: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - b).collect();
    (0..mesh.num_triangles())
        .map(|t| {
            let g = p1_gradient(mesh, &d, t);
            signed_area(mesh.triangle_points(t)) * (g[0] * g[0] + g[1] * g[1])
        })
        .sum::<f64>()
        .sqrt()
}

/// Forms for the smooth benchmark load on `mesh`.
pub fn smooth_forms(mesh: Arc<Mesh>, p: f64) -> NonlinearForms {
    let es = ExactSolution::new(p, SIGMA, SMOOTH_X0);
    let (trial, test) = build_spaces(&mesh, &es);
    NonlinearForms::new(trial, test, p, es.load(), &QuadRule::with_degree(10)).unwrap()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Complete vector of `dm` with random free values and its prescribed
/// constrained values.
pub fn random_state(rng: &mut impl Rng, dm: &DofMap, scale: f64) -> Vec<f64> {
    dm.expand(&random_vec(rng, dm.n_free(), scale))
}

/// Smallest gradient magnitude over the triangles (`componentwise`: smallest
/// component magnitude).
pub fn min_gradient(dm: &DofMap, coeffs: &[f64], componentwise: bool) -> f64 {
    (0..dm.mesh().num_triangles())
        .map(|t| {
            let g = dm.element_gradient(coeffs, t).unwrap();
            if componentwise {
                g[0].abs().min(g[1].abs())
            } else {
                g[0].hypot(g[1])
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random complete vector whose gradients stay at least `floor` away from
/// zero (per component when `componentwise`).
pub fn nondegenerate_state(rng: &mut impl Rng, dm: &DofMap, scale: f64, floor: f64, componentwise: bool) -> Vec<f64> {
    loop {
        let v = random_state(rng, dm, scale);
        if min_gradient(dm, &v, componentwise) >= floor {
            return v;
        }
    }
}

/// Adds `h · dir` to the free entries of the complete vector `base`.
pub fn perturb(dm: &DofMap, base: &[f64], dir: &[f64], h: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    for (&d, &v) in dm.free_dofs().iter().zip(dir) {
        out[d] += h * v;
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative gap between a centered difference of `op` along `dir` and the
/// Jacobian action `jd`.
pub fn fd_gap(
    dm: &DofMap,
    base: &[f64],
    dir: &[f64],
    h: f64,
    op: impl Fn(&[f64]) -> Vec<f64>,
    jd: &[f64],
) -> f64 {
    let plus = op(&perturb(dm, base, dir, h));
    let minus = op(&perturb(dm, base, dir, -h));
    let fd: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    let diff: Vec<f64> = fd.iter().zip(jd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(jd)
}

/// `−div(|∇u|^{p−2}∇u)` by fourth-order centered differences of the flux
/// built from `grad`.
pub fn minus_div_flux(grad: impl Fn(Point) -> [f64; 2], p: f64, x: Point, h: f64) -> f64 {
    let flux = |y: Point, k: usize| {
        let g = grad(y);
        g[0].hypot(g[1]).powf(p - 2.0) * g[k]
    };
    let mut div = 0.0;
    for k in 0..2 {
        let at = |s: f64| {
            let mut y = x;
            y[k] += s;
            flux(y, k)
        };
        div += (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
    }
    -div
}

/// Fourth-order centered gradient of a scalar field.
pub fn fd_gradient(f: impl Fn(Point) -> f64, x: Point, h: f64) -> [f64; 2] {
    [0, 1].map(|k| {
        let at = |s: f64| {
            let mut y = x;
            y[k] += s;
            f(y)
        };
        (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
    })
}

/// Euclidean distance from `x` to the closed triangle `t`.
pub fn distance_to_triangle(t: [Point; 3], x: Point) -> f64 {
    let inside = (0..3).all(|i| {
        let (a, b) = (t[i], t[(i + 1) % 3]);
        (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|i| {
            let (a, b) = (t[i], t[(i + 1) % 3]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let s = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
            (x[0] - a[0] - s * d[0]).hypot(x[1] - a[1] - s * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}
