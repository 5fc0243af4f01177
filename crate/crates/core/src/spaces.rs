//! Degrees of freedom for the conforming P1 trial space and the lowest-order
//! Crouzeix–Raviart test space.
//!
//! P1 has one DOF per vertex; DOFs on boundary vertices are constrained to
//! prescribed values. CR has one DOF per edge (the value at its midpoint);
//! boundary-edge DOFs are constrained to zero. Coefficient vectors handed to
//! element-level routines are *complete*: they cover every DOF, constrained
//! ones included.
//!
//! On a triangle with barycentric coordinates `λ_k`, the P1 basis function
//! of local vertex `k` is `λ_k` and the CR basis function of local edge `k`
//! (opposite vertex `k`) is `1 - 2 λ_k`. Both have constant gradients.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::SpaceError;
use crate::mesh::{Mesh, Point};
use crate::quadrature::gauss_legendre_unit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    P1,
    CrouzeixRaviart,
}

/// Area and constant basis gradients of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    /// Geometry of triangle `t` for the basis of `kind`.
    pub fn new(mesh: &Mesh, t: usize, kind: SpaceKind) -> Self {
        let p = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        let scale = match kind {
            SpaceKind::P1 => 1.0 / (2.0 * area),
            SpaceKind::CrouzeixRaviart => -1.0 / area,
        };
        let mut grads = [[0.0; 2]; 3];
        for (k, g) in grads.iter_mut().enumerate() {
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            *g = [-(b[1] - a[1]) * scale, (b[0] - a[0]) * scale];
        }
        ElementGeometry { area, grads }
    }

    pub fn gradient(&self, local_coeffs: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (c, gk) in local_coeffs.iter().zip(&self.grads) {
            g[0] += c * gk[0];
            g[1] += c * gk[1];
        }
        g
    }
}

#[derive(Clone, Debug)]
pub struct DofMap {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
    free: Vec<usize>,
    constrained: Vec<usize>,
    free_index: Vec<Option<usize>>,
    constrained_values: Vec<f64>,
    geometry: Vec<ElementGeometry>,
}

impl DofMap {
    /// Builds the DOF map of `kind` on `mesh`.
    ///
    /// `boundary_values` maps boundary vertices to prescribed values and is
    /// only accepted for P1; vertices it omits default to zero.
    pub fn build(
        mesh: Arc<Mesh>,
        kind: SpaceKind,
        boundary_values: Option<&HashMap<usize, f64>>,
    ) -> Result<Self, SpaceError> {
        let n_total = match kind {
            SpaceKind::P1 => mesh.num_vertices(),
            SpaceKind::CrouzeixRaviart => mesh.num_edges(),
        };
        let is_constrained = |d: usize| match kind {
            SpaceKind::P1 => mesh.is_boundary_vertex(d),
            SpaceKind::CrouzeixRaviart => mesh.is_boundary_edge(d),
        };
        let mut constrained_values = vec![0.0; n_total];
        if let Some(values) = boundary_values {
            if kind == SpaceKind::CrouzeixRaviart {
                return Err(SpaceError::BoundaryValuesForCr);
            }
            for (&v, &val) in values {
                if v >= n_total {
                    return Err(SpaceError::NoSuchVertex(v));
                }
                if !is_constrained(v) {
                    return Err(SpaceError::NotBoundary(v));
                }
                constrained_values[v] = val;
            }
        }

        let mut free = Vec::new();
        let mut constrained = Vec::new();
        let mut free_index = vec![None; n_total];
        for d in 0..n_total {
            if is_constrained(d) {
                constrained.push(d);
            } else {
                free_index[d] = Some(free.len());
                free.push(d);
            }
        }
        let geometry = (0..mesh.num_triangles()).map(|t| ElementGeometry::new(&mesh, t, kind)).collect();
        Ok(DofMap { kind, mesh, free, constrained, free_index, constrained_values, geometry })
    }

    /// P1 map whose boundary DOFs take the values of `g` at the vertices.
    pub fn p1_with_boundary(mesh: Arc<Mesh>, g: impl Fn(Point) -> f64) -> Self {
        let values: HashMap<usize, f64> =
            (0..mesh.num_vertices()).filter(|&v| mesh.is_boundary_vertex(v)).map(|v| (v, g(mesh.vertex(v)))).collect();
        Self::build(mesh, SpaceKind::P1, Some(&values)).expect("boundary vertices are valid")
    }

    pub fn cr(mesh: Arc<Mesh>) -> Self {
        Self::build(mesh, SpaceKind::CrouzeixRaviart, None).expect("no boundary values")
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_total(&self) -> usize {
        self.free_index.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Prescribed values of the constrained DOFs (zero at free DOFs).
    pub fn constrained_values(&self) -> &[f64] {
        &self.constrained_values
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    /// Global DOFs of triangle `t`, ordered like the local basis.
    pub fn element_dofs(&self, t: usize) -> [usize; 3] {
        match self.kind {
            SpaceKind::P1 => self.mesh.triangle(t),
            SpaceKind::CrouzeixRaviart => self.mesh.triangle_edges(t),
        }
    }

    /// Complete coefficient vector with the given free values and the
    /// prescribed constrained values.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut full = self.constrained_values.clone();
        for (&d, &v) in self.free.iter().zip(free_values) {
            full[d] = v;
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Complete vector with zero free values.
    pub fn initial_coefficients(&self) -> Vec<f64> {
        self.constrained_values.clone()
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<(), SpaceError> {
        if coeffs.len() != self.n_total() {
            return Err(SpaceError::Length { expected: self.n_total(), actual: coeffs.len() });
        }
        Ok(())
    }

    /// Nodal interpolant (P1: vertex values, CR: edge-midpoint values).
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        match self.kind {
            SpaceKind::P1 => self.mesh.vertices().iter().map(|&x| f(x)).collect(),
            SpaceKind::CrouzeixRaviart => (0..self.mesh.num_edges()).map(|e| f(self.mesh.edge_midpoint(e))).collect(),
        }
    }

    fn local(&self, coeffs: &[f64], t: usize) -> [f64; 3] {
        self.element_dofs(t).map(|d| coeffs[d])
    }

    /// Constant gradient of the discrete function on triangle `t`.
    pub fn element_gradient(&self, coeffs: &[f64], t: usize) -> Result<[f64; 2], SpaceError> {
        let nt = self.mesh.num_triangles();
        if t >= nt {
            return Err(SpaceError::TriangleOutOfRange { index: t, num_triangles: nt });
        }
        self.check_len(coeffs)?;
        Ok(self.gradient_unchecked(coeffs, t))
    }

    pub(crate) fn gradient_unchecked(&self, coeffs: &[f64], t: usize) -> [f64; 2] {
        self.geometry[t].gradient(self.local(coeffs, t))
    }

    /// Value of the discrete function at barycentric coordinates `l` on `t`.
    pub fn eval_barycentric(&self, coeffs: &[f64], t: usize, l: [f64; 3]) -> f64 {
        let c = self.local(coeffs, t);
        match self.kind {
            SpaceKind::P1 => c[0] * l[0] + c[1] * l[1] + c[2] * l[2],
            SpaceKind::CrouzeixRaviart => c.iter().zip(&l).map(|(ck, lk)| ck * (1.0 - 2.0 * lk)).sum(),
        }
    }

    /// `Σ_T |T| Σ_k |∂_k v|^p` for the piecewise-constant gradients.
    pub fn broken_seminorm_pow(&self, coeffs: &[f64], p: f64) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let g = self.gradient_unchecked(coeffs, t);
                self.geometry[t].area * (g[0].abs().powf(p) + g[1].abs().powf(p))
            })
            .sum()
    }

    /// Broken `W^{1,p}` seminorm `(Σ_T Σ_k ‖∂_k v‖^p_{L^p(T)})^{1/p}`.
    pub fn broken_seminorm(&self, coeffs: &[f64], p: f64) -> Result<f64, SpaceError> {
        if p.is_nan() || p <= 1.0 {
            return Err(SpaceError::InvalidExponent(p));
        }
        self.check_len(coeffs)?;
        Ok(self.broken_seminorm_pow(coeffs, p).powf(1.0 / p))
    }
}

/// CR coefficients of a P1 function: each edge takes the mean of its
/// endpoint values.
pub fn embed_p1_in_cr(mesh: &Mesh, p1: &[f64]) -> Vec<f64> {
    mesh.edges().iter().map(|&[a, b]| 0.5 * (p1[a] + p1[b])).collect()
}

/// Crouzeix–Raviart interpolation: the coefficient of each edge is the mean
/// of the target over that edge. Boundary coefficients are returned too.
pub fn cr_interpolate(mesh: &Mesh, edge_mean: impl Fn(Point, Point) -> f64) -> Vec<f64> {
    mesh.edges().iter().map(|&[a, b]| edge_mean(mesh.vertex(a), mesh.vertex(b))).collect()
}

/// Mean of a smooth function over the segment `[a, b]` by `n`-point
/// Gauss–Legendre quadrature.
pub fn gauss_edge_mean(f: impl Fn(Point) -> f64, n: usize) -> impl Fn(Point, Point) -> f64 {
    let (x, w) = gauss_legendre_unit(n);
    move |a, b| x.iter().zip(&w).map(|(s, wi)| wi * f([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])).sum()
}
