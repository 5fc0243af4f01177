//! Randomized property checks. Each draws one instance from `rng` and
//! returns the measured quantity; callers own the tolerances.

use std::sync::Arc;

use pminres::estimate::ExactSolution;
use pminres::mesh::{refine_marked, unit_square_mesh, Mesh, Point};
use pminres::spaces::{cr_interpolate, embed_p1_in_cr, gauss_edge_mean};
use rand::Rng;

use super::*;

/// Unit-square mesh with a few rounds of random bisection.
pub fn random_mesh(rng: &mut impl Rng) -> Arc<Mesh> {
    let mut mesh = unit_square_mesh(rng.random_range(2..=3)).unwrap();
    for _ in 0..rng.random_range(0..=2) {
        let nt = mesh.num_triangles();
        let marked: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..nt)).collect();
        mesh = refine_marked(&mesh, &marked).unwrap();
    }
    Arc::new(mesh)
}

/// `⟨A(u) − A(w), u − w⟩` for random trial functions with equal boundary
/// data, divided by `|∇(u − w)|_{L^p}^p`.
pub fn monotonicity(rng: &mut impl Rng, p: f64) -> f64 {
    let forms = smooth_forms(random_mesh(rng), p);
    let trial = forms.trial();
    let mesh = trial.mesh().clone();
    let u = random_state(rng, trial, 1.0);
    let w = random_state(rng, trial, 1.0);
    let d: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
    let dc = forms.test().restrict(&embed_p1_in_cr(&mesh, &d));
    let au = forms.apply_a(&u).unwrap();
    let aw = forms.apply_a(&w).unwrap();
    let diff: Vec<f64> = au.iter().zip(&aw).map(|(a, b)| a - b).collect();
    let scale: f64 = (0..mesh.num_triangles())
        .map(|t| {
            let g = p1_gradient(&mesh, &d, t);
            signed_area(mesh.triangle_points(t)) * g[0].hypot(g[1]).powf(p)
        })
        .sum();
    dot(&diff, &dc) / scale
}

/// Relative gap in `⟨J(r), r⟩ = ‖r‖_h^p`.
pub fn duality(rng: &mut impl Rng, p: f64) -> f64 {
    let forms = smooth_forms(random_mesh(rng), p);
    let test = forms.test();
    let r = random_state(rng, test, 1.0);
    let pairing = dot(&forms.apply_j(&r).unwrap(), &test.restrict(&r));
    let norm_p: f64 = (0..test.mesh().num_triangles())
        .map(|t| {
            let g = test.element_gradient(&r, t).unwrap();
            test.geometry(t).area * (g[0].abs().powf(p) + g[1].abs().powf(p))
        })
        .sum();
    (pairing - norm_p).abs() / norm_p
}

/// Relative max-norm gap in `J(λr) = λ|λ|^{p−2} J(r)`.
pub fn homogeneity(rng: &mut impl Rng, p: f64) -> f64 {
    let forms = smooth_forms(random_mesh(rng), p);
    let r = random_state(rng, forms.test(), 1.0);
    let lambda = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
    let scaled: Vec<f64> = r.iter().map(|v| lambda * v).collect();
    let lhs = forms.apply_j(&scaled).unwrap();
    let factor = lambda * lambda.abs().powf(p - 2.0);
    let rhs: Vec<f64> = forms.apply_j(&r).unwrap().iter().map(|v| factor * v).collect();
    let worst = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    worst / rhs.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// `⟨A_h(w), v − Π_h v⟩` for a random P1 `w` and a smooth `v` vanishing on
/// the boundary, relative to `Σ_T |flux_T| |∫_T ∇v|`.
pub fn fortin(rng: &mut impl Rng, p: f64) -> f64 {
    let forms = smooth_forms(random_mesh(rng), p);
    let trial = forms.trial();
    let mesh = trial.mesh().clone();
    let w = random_state(rng, trial, 1.0);
    let (a, b, c) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(1.0..3.0));
    let pi = std::f64::consts::PI;
    let v = move |x: Point| (pi * x[0]).sin() * (pi * x[1]).sin() * (1.0 + a * x[0] + b * x[1] * x[1]) * c;
    let grad_v = move |x: Point| {
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        let m = 1.0 + a * x[0] + b * x[1] * x[1];
        [c * (pi * cx * sy * m + sx * sy * a), c * (pi * sx * cy * m + sx * sy * 2.0 * b * x[1])]
    };

    let mut exact = 0.0;
    let mut scale = 0.0;
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        let g = p1_gradient(&mesh, &w, t);
        let mag = g[0].hypot(g[1]);
        let weight = if mag == 0.0 { 0.0 } else { mag.powf(p - 2.0) };
        let flux = [weight * g[0], weight * g[1]];
        let iv = [0, 1].map(|k| integrate_triangle(pts, 8, |x| grad_v(x)[k]));
        exact += flux[0] * iv[0] + flux[1] * iv[1];
        scale += flux[0].hypot(flux[1]) * iv[0].hypot(iv[1]);
    }
    let pv = cr_interpolate(&mesh, gauss_edge_mean(v, 8));
    let discrete = dot(&forms.apply_a(&w).unwrap(), &forms.test().restrict(&pv));
    (exact - discrete).abs() / scale
}

/// Relative gap between `assemble_da(u)·δ` and a centered difference of
/// `apply_a` at a state with gradients away from zero.
pub fn jacobian_da(rng: &mut impl Rng, p: f64) -> f64 {
    let forms = smooth_forms(Arc::new(unit_square_mesh(rng.random_range(2..=3)).unwrap()), p);
    let trial = forms.trial();
    let u = nondegenerate_state(rng, trial, 1.0, 0.1, false);
    let dir = random_vec(rng, trial.n_free(), 1.0);
    let jd = forms.assemble_da(&u).unwrap().mul_vec(&dir);
    fd_gap(trial, &u, &dir, 1e-5, |x| forms.apply_a(x).unwrap(), &jd)
}

/// As [`jacobian_da`] for `assemble_dj` against `apply_j`.
pub fn jacobian_dj(rng: &mut impl Rng, p: f64) -> f64 {
    let forms = smooth_forms(Arc::new(unit_square_mesh(rng.random_range(2..=3)).unwrap()), p);
    let test = forms.test();
    let r = nondegenerate_state(rng, test, 1.0, 0.1, true);
    let dir = random_vec(rng, test.n_free(), 1.0);
    let jd = forms.assemble_dj(&r).unwrap().mul_vec(&dir);
    fd_gap(test, &r, &dir, 1e-5, |x| forms.apply_j(x).unwrap(), &jd)
}

/// Relative gap in `−div(|∇u|^{p−2}∇u) = r^{−σ}` at a random point with
/// `r ∈ [0.1, 0.9]`, together with the gap between the closed-form
/// gradient and a difference quotient of the value.
pub fn manufactured(rng: &mut impl Rng, p: f64) -> (f64, f64) {
    let x0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let es = ExactSolution::new(p, SIGMA, x0);
    let (r, theta) = (rng.random_range(0.1..0.9), rng.random_range(0.0..std::f64::consts::TAU));
    let x = [x0[0] + r * theta.cos(), x0[1] + r * theta.sin()];
    let h = 5e-4;
    let lhs = minus_div_flux(|y| es.gradient(y).unwrap(), p, x, h);
    let f = r.powf(-SIGMA);
    let g = es.gradient(x).unwrap();
    let gf = fd_gradient(|y| es.value(y), x, h);
    let ggap = (g[0] - gf[0]).hypot(g[1] - gf[1]) / g[0].hypot(g[1]);
    ((lhs - f).abs() / f, ggap)
}
