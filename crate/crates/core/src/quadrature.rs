//! Quadrature on the reference triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.
//!
//! Points are stored in barycentric form `(λ0, λ1, λ2)` with `ξ = λ1`,
//! `η = λ2`; weights sum to the reference area 1/2. All rules use interior
//! points only, so integrands that are singular at a vertex are never
//! sampled there.

use crate::mesh::Point;

#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    /// Three interior points at barycentric `(2/3, 1/6, 1/6)` and permutations.
    pub fn degree2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        QuadRule { points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 6.0; 3], degree: 2 }
    }

    /// Collapsed (Duffy) tensor Gauss–Legendre rule exact for total degree
    /// `degree`: `ξ = s`, `η = t (1 - s)` with `n = ⌈(degree + 2) / 2⌉`
    /// points per direction.
    pub fn collapsed_gauss(degree: usize) -> Self {
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let xi = x[i];
                let eta = x[j] * (1.0 - x[i]);
                points.push([1.0 - xi - eta, xi, eta]);
                weights.push(w[i] * w[j] * (1.0 - x[i]));
            }
        }
        QuadRule { points, weights, degree: 2 * n - 2 }
    }

    /// Smallest rule in this module reaching the requested exactness.
    pub fn with_degree(degree: usize) -> Self {
        if degree <= 2 {
            Self::degree2()
        } else {
            Self::collapsed_gauss(degree)
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and weights (already scaled by `2 |T|`) on a triangle.
    pub fn mapped<'a>(&'a self, tri: [Point; 3], area: f64) -> impl Iterator<Item = (Point, f64, [f64; 3])> + 'a {
        let jac = 2.0 * area;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let x = [
                l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
                l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
            ];
            (x, w * jac, *l)
        })
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|&t| 0.5 * (t + 1.0)).collect(), w.iter().map(|&v| 0.5 * v).collect())
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the three-term recurrence started from the Chebyshev-like guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let kf = k as f64;
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * kf + 1.0) * z * p1 - kf * p2) / (kf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
