//! Preconditioned MINRES for symmetric (indefinite) systems with a symmetric
//! positive definite preconditioner.

use crate::sparse::dot;

pub struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final preconditioned residual norm relative to the initial one.
    pub relative_estimate: f64,
}

/// Solves `A x = b` from `x = 0`. `apply` computes `A v`, `precond` computes
/// `M⁻¹ v`. Stops when the preconditioned residual estimate drops below
/// `tol` times its initial value or after `max_iter` iterations.
pub fn minres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> MinresOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut v_prev = vec![0.0; n];
    let mut v = b.to_vec();
    let mut z = precond(&v);
    let mut gamma = dot(&z, &v).max(0.0).sqrt();
    if gamma == 0.0 {
        return MinresOutcome { x, iterations: 0, relative_estimate: 0.0 };
    }
    let gamma0 = gamma;
    let mut gamma_prev = 1.0;
    let mut eta = gamma;
    let (mut s_prev, mut s) = (0.0, 0.0);
    let (mut c_prev, mut c) = (1.0, 1.0);
    let mut w_prev = vec![0.0; n];
    let mut w = vec![0.0; n];

    let mut it = 0;
    while it < max_iter {
        it += 1;
        z.iter_mut().for_each(|zi| *zi /= gamma);
        let az = apply(&z);
        let delta = dot(&az, &z);
        let v_next: Vec<f64> = (0..n).map(|i| az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i]).collect();
        let z_next = precond(&v_next);
        let gamma_next = dot(&z_next, &v_next).max(0.0).sqrt();

        let a0 = c * delta - c_prev * s * gamma;
        let a1 = a0.hypot(gamma_next);
        let a2 = s * delta + c_prev * c * gamma;
        let a3 = s_prev * gamma;
        let c_next = a0 / a1;
        let s_next = gamma_next / a1;
        let w_next: Vec<f64> = (0..n).map(|i| (z[i] - a3 * w_prev[i] - a2 * w[i]) / a1).collect();
        for i in 0..n {
            x[i] += c_next * eta * w_next[i];
        }
        eta *= -s_next;

        w_prev = std::mem::replace(&mut w, w_next);
        v_prev = std::mem::replace(&mut v, v_next);
        z = z_next;
        gamma_prev = gamma;
        gamma = gamma_next;
        s_prev = s;
        s = s_next;
        c_prev = c;
        c = c_next;

        if eta.abs() <= tol * gamma0 || gamma == 0.0 {
            break;
        }
    }
    MinresOutcome { x, iterations: it, relative_estimate: eta.abs() / gamma0 }
}
