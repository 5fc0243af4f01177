//! Nonlinear forms of the mixed residual-minimization problem and their
//! Jacobians.
//!
//! Trial functions are P1, test functions are Crouzeix–Raviart. All
//! gradients are piecewise constant, so every element integral except the
//! load is exact with a one-point rule. Vectors returned here are indexed by
//! free DOFs; coefficient vectors passed in are complete.
//!
//! Two gradient-norm conventions coexist on purpose:
//! * the operator `A(u)` uses the Euclidean `|∇u|`;
//! * the duality map `J(r)` is the exact gradient of `(1/p) ‖r‖_h^p` for the
//!   componentwise broken norm `‖r‖_h^p = Σ_T |T| (|∂₁r|^p + |∂₂r|^p)`.
//!
//! Residual evaluations are unregularized. Jacobians replace `|g|²` by
//! `|g|² + ε²` with `ε = max(1e-10 · scale, 1e-10)`, where `scale` is the
//! `L^p` norm of the gradient of the linearization point.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::FormsError;
use crate::mesh::Point;
use crate::quadrature::QuadRule;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::spaces::DofMap;

pub const EPS_RELATIVE: f64 = 1e-10;
pub const EPS_FLOOR: f64 = 1e-10;

/// Right-hand side `f` of `-div(|∇u|^{p-2} ∇u) = f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LoadSpec {
    Constant(f64),
    /// `f(x) = |x - x0|^{-σ}`.
    RadialPower { sigma: f64, x0: Point },
}

impl LoadSpec {
    pub fn eval(&self, x: Point) -> Result<f64, FormsError> {
        let v = match *self {
            LoadSpec::Constant(c) => c,
            LoadSpec::RadialPower { sigma, x0 } => {
                let r = (x[0] - x0[0]).hypot(x[1] - x0[1]);
                if r == 0.0 {
                    return Err(FormsError::SingularPoint(x));
                }
                r.powf(-sigma)
            }
        };
        if !v.is_finite() {
            return Err(FormsError::NonFinite(x));
        }
        Ok(v)
    }
}

/// `∫ f φ_i` for every free test DOF, using `quad` on each element.
pub fn assemble_f(load: &LoadSpec, test: &DofMap, quad: &QuadRule) -> Result<Vec<f64>, FormsError> {
    let mesh = test.mesh();
    let local: Vec<[f64; 3]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let mut out = [0.0; 3];
            let geo = test.geometry(t);
            for (x, w, l) in quad.mapped(mesh.triangle_points(t), geo.area) {
                let fx = load.eval(x)?;
                for k in 0..3 {
                    let phi = match test.kind() {
                        crate::spaces::SpaceKind::P1 => l[k],
                        crate::spaces::SpaceKind::CrouzeixRaviart => 1.0 - 2.0 * l[k],
                    };
                    out[k] += w * fx * phi;
                }
            }
            Ok(out)
        })
        .collect::<Result<_, FormsError>>()?;
    let mut rhs = vec![0.0; test.n_free()];
    scatter_vector(test, &local, &mut rhs);
    Ok(rhs)
}

fn scatter_vector(dm: &DofMap, local: &[[f64; 3]], out: &mut [f64]) {
    for (t, vals) in local.iter().enumerate() {
        for (d, v) in dm.element_dofs(t).into_iter().zip(vals) {
            if let Some(i) = dm.free_index(d) {
                out[i] += v;
            }
        }
    }
}

/// `|x|^{p-2} x` with the convention `0 ↦ 0`.
fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p - 2.0) * x
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Forms for one exponent `p` on a fixed pair of trial/test spaces.
#[derive(Clone, Debug)]
pub struct NonlinearForms {
    trial: Arc<DofMap>,
    test: Arc<DofMap>,
    p: f64,
    load: LoadSpec,
    load_vector: Arc<Vec<f64>>,
}

impl NonlinearForms {
    pub fn new(
        trial: Arc<DofMap>,
        test: Arc<DofMap>,
        p: f64,
        load: LoadSpec,
        quad: &QuadRule,
    ) -> Result<Self, FormsError> {
        if !Arc::ptr_eq(trial.mesh(), test.mesh()) && trial.mesh().triangles() != test.mesh().triangles() {
            return Err(FormsError::MeshMismatch);
        }
        if p.is_nan() || p <= 1.0 {
            return Err(crate::error::SpaceError::InvalidExponent(p).into());
        }
        let load_vector = Arc::new(assemble_f(&load, &test, quad)?);
        Ok(NonlinearForms { trial, test, p, load, load_vector })
    }

    /// Same spaces and load at another exponent; the load vector is shared.
    pub fn with_p(&self, p: f64) -> Result<Self, FormsError> {
        if p.is_nan() || p <= 1.0 {
            return Err(crate::error::SpaceError::InvalidExponent(p).into());
        }
        Ok(NonlinearForms { p, ..self.clone() })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn trial(&self) -> &Arc<DofMap> {
        &self.trial
    }

    pub fn test(&self) -> &Arc<DofMap> {
        &self.test
    }

    pub fn load(&self) -> &LoadSpec {
        &self.load
    }

    /// `F_i = ∫ f φ_i` over free test DOFs.
    pub fn load_vector(&self) -> &[f64] {
        &self.load_vector
    }

    fn num_triangles(&self) -> usize {
        self.test.mesh().num_triangles()
    }

    /// `A(u)_i = Σ_T |T| |∇u|^{p-2} ∇u · ∇φ_i`.
    pub fn apply_a(&self, u: &[f64]) -> Result<Vec<f64>, FormsError> {
        self.trial.check_len(u)?;
        let p = self.p;
        let local: Vec<[f64; 3]> = (0..self.num_triangles())
            .into_par_iter()
            .map(|t| {
                let g = self.trial.gradient_unchecked(u, t);
                let norm = g[0].hypot(g[1]);
                let weight = if norm == 0.0 { 0.0 } else { norm.powf(p - 2.0) };
                let geo = self.test.geometry(t);
                let flux = [geo.area * weight * g[0], geo.area * weight * g[1]];
                geo.grads.map(|gp| dot(flux, gp))
            })
            .collect();
        let mut out = vec![0.0; self.test.n_free()];
        scatter_vector(&self.test, &local, &mut out);
        Ok(out)
    }

    /// `J(r)_i = Σ_T |T| Σ_k |∂_k r|^{p-2} ∂_k r ∂_k φ_i`.
    pub fn apply_j(&self, r: &[f64]) -> Result<Vec<f64>, FormsError> {
        self.test.check_len(r)?;
        let p = self.p;
        let local: Vec<[f64; 3]> = (0..self.num_triangles())
            .into_par_iter()
            .map(|t| {
                let g = self.test.gradient_unchecked(r, t);
                let geo = self.test.geometry(t);
                let flux = [geo.area * signed_pow(g[0], p), geo.area * signed_pow(g[1], p)];
                geo.grads.map(|gp| dot(flux, gp))
            })
            .collect();
        let mut out = vec![0.0; self.test.n_free()];
        scatter_vector(&self.test, &local, &mut out);
        Ok(out)
    }

    /// Regularization parameter used by the Jacobians at `coeffs`.
    pub fn jacobian_eps(&self, dm: &DofMap, coeffs: &[f64]) -> f64 {
        let p = self.p;
        let sum: f64 = (0..self.num_triangles())
            .map(|t| {
                let g = dm.gradient_unchecked(coeffs, t);
                dm.geometry(t).area * g[0].hypot(g[1]).powf(p)
            })
            .sum();
        (EPS_RELATIVE * sum.powf(1.0 / p)).max(EPS_FLOOR)
    }

    fn local_da(&self, u: &[f64], t: usize, eps2: f64) -> [[f64; 3]; 3] {
        let p = self.p;
        let g = self.trial.gradient_unchecked(u, t);
        let s = dot(g, g) + eps2;
        let mu = s.powf(0.5 * (p - 2.0));
        let tg = self.test.geometry(t);
        let ug = self.trial.geometry(t);
        let mut k = [[0.0; 3]; 3];
        for (i, row) in k.iter_mut().enumerate() {
            let gi = tg.grads[i];
            for (j, v) in row.iter_mut().enumerate() {
                let gj = ug.grads[j];
                *v = tg.area * mu * (dot(gj, gi) + (p - 2.0) * dot(g, gj) * dot(g, gi) / s);
            }
        }
        k
    }

    /// Jacobian of `A` at `u`: rows are free test DOFs, columns free trial
    /// DOFs.
    pub fn assemble_da(&self, u: &[f64]) -> Result<CsrMatrix, FormsError> {
        self.trial.check_len(u)?;
        let eps2 = self.jacobian_eps(&self.trial, u).powi(2);
        let local: Vec<[[f64; 3]; 3]> =
            (0..self.num_triangles()).into_par_iter().map(|t| self.local_da(u, t, eps2)).collect();
        Ok(self.scatter_matrix(&self.test, &self.trial, &local))
    }

    /// `B(u)ᵀ r` over free trial DOFs without forming `B`; `r` is complete
    /// and its constrained entries are ignored.
    pub fn apply_da_transpose(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>, FormsError> {
        self.trial.check_len(u)?;
        self.test.check_len(r)?;
        let eps2 = self.jacobian_eps(&self.trial, u).powi(2);
        let local: Vec<[f64; 3]> = (0..self.num_triangles())
            .into_par_iter()
            .map(|t| {
                let k = self.local_da(u, t, eps2);
                let rd = self.test.element_dofs(t);
                let rl = rd.map(|d| if self.test.free_index(d).is_some() { r[d] } else { 0.0 });
                [0, 1, 2].map(|j| (0..3).map(|i| k[i][j] * rl[i]).sum())
            })
            .collect();
        let mut out = vec![0.0; self.trial.n_free()];
        scatter_vector(&self.trial, &local, &mut out);
        Ok(out)
    }

    /// Jacobian of `J` at `r`, symmetric over free test DOFs.
    pub fn assemble_dj(&self, r: &[f64]) -> Result<CsrMatrix, FormsError> {
        self.test.check_len(r)?;
        let p = self.p;
        let eps2 = self.jacobian_eps(&self.test, r).powi(2);
        let local: Vec<[[f64; 3]; 3]> = (0..self.num_triangles())
            .into_par_iter()
            .map(|t| {
                let g = self.test.gradient_unchecked(r, t);
                let geo = self.test.geometry(t);
                let w = [0, 1].map(|c| geo.area * (p - 1.0) * (g[c] * g[c] + eps2).powf(0.5 * (p - 2.0)));
                let mut k = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in i..3 {
                        let (a, b) = (geo.grads[i], geo.grads[j]);
                        k[i][j] = w[0] * a[0] * b[0] + w[1] * a[1] * b[1];
                        k[j][i] = k[i][j];
                    }
                }
                k
            })
            .collect();
        Ok(self.scatter_matrix(&self.test, &self.test, &local))
    }

    fn scatter_matrix(&self, rows: &DofMap, cols: &DofMap, local: &[[[f64; 3]; 3]]) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(rows.n_free(), cols.n_free(), 9 * local.len());
        for (t, k) in local.iter().enumerate() {
            let rd = rows.element_dofs(t);
            let cd = cols.element_dofs(t);
            for i in 0..3 {
                let Some(fi) = rows.free_index(rd[i]) else { continue };
                for j in 0..3 {
                    if let Some(fj) = cols.free_index(cd[j]) {
                        b.push(fi, fj, k[i][j]);
                    }
                }
            }
        }
        b.build()
    }

    /// `m_T = |T| Σ_k |∂_k r|^p`; the masses sum to `‖r‖_h^p`.
    pub fn local_indicators(&self, r: &[f64]) -> Result<Vec<f64>, FormsError> {
        self.test.check_len(r)?;
        let p = self.p;
        Ok((0..self.num_triangles())
            .into_par_iter()
            .map(|t| {
                let g = self.test.gradient_unchecked(r, t);
                self.test.geometry(t).area * (g[0].abs().powf(p) + g[1].abs().powf(p))
            })
            .collect())
    }
}
