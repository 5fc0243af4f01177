//! Conforming triangulations of polygonal domains.
//!
//! A [`Mesh`] stores vertex coordinates, counter-clockwise vertex triples,
//! the derived edge list and per-triangle edge indices. Local edge `k` of a
//! triangle is the edge opposite its local vertex `k`. Each triangle also
//! carries the local index of its refinement edge, used by newest-vertex
//! bisection.
//!
//! Meshes are immutable; the refinement routines in [`refine`] return new
//! meshes that remember one generation of genealogy.

mod export;
pub mod refine;

use std::collections::HashMap;

use crate::error::MeshError;

pub type Point = [f64; 2];

/// Relative tolerance used by [`Mesh::check_invariants`] for area and
/// boundary-length conservation.
pub const CONSERVATION_RTOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
    boundary_edges: Vec<bool>,
    boundary_vertices: Vec<bool>,
    refinement_edge: Vec<u8>,
    genealogy: Option<Genealogy>,
    domain_area: f64,
    domain_perimeter: f64,
}

/// One generation of refinement history.
#[derive(Clone, Debug, PartialEq)]
pub struct Genealogy {
    /// Parent triangle (index into the coarser mesh) of every triangle.
    pub parent: Vec<usize>,
    /// Number of vertices of the coarser mesh. Vertices below this index
    /// are shared with it.
    pub coarse_vertices: usize,
    /// For every vertex created by the refinement, the coarse edge
    /// endpoints whose midpoint it is (indexed by `v - coarse_vertices`).
    pub midpoint_of: Vec<[usize; 2]>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

impl Mesh {
    /// Builds a mesh from raw connectivity.
    ///
    /// Triangles must be counter-clockwise. When `refinement_edge` is `None`
    /// every triangle gets its longest edge, ties broken by the lowest
    /// global edge index.
    pub fn from_triangles(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Option<Vec<u8>>,
    ) -> Result<Self, MeshError> {
        let mut mesh = Self::assemble(vertices, triangles, refinement_edge.unwrap_or_default(), None)?;
        if mesh.refinement_edge.is_empty() {
            mesh.refinement_edge = mesh.longest_edges();
        }
        mesh.domain_area = mesh.triangle_areas().sum();
        mesh.domain_perimeter = mesh.boundary_length();
        Ok(mesh)
    }

    pub(crate) fn assemble(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        genealogy: Option<Genealogy>,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        if !refinement_edge.is_empty() && refinement_edge.len() != triangles.len() {
            return Err(MeshError::Inconsistent(format!(
                "{} refinement edges for {} triangles",
                refinement_edge.len(),
                triangles.len()
            )));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange { triangle: t });
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.is_nan() || area <= 0.0 {
                return Err(MeshError::Orientation { triangle: t, area });
            }
        }

        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::with_capacity(triangles.len() * 2);
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::with_capacity(triangles.len() * 2);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for (k, slot) in te.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push([None, None]);
                    edges.len() - 1
                });
                match edge_triangles[e] {
                    [None, _] => edge_triangles[e][0] = Some(t),
                    [Some(_), None] => edge_triangles[e][1] = Some(t),
                    [Some(_), Some(_)] => return Err(MeshError::NonManifoldEdge { edge: key }),
                }
                *slot = e;
            }
            triangle_edges.push(te);
        }

        let boundary_edges: Vec<bool> = edge_triangles.iter().map(|et| et[1].is_none()).collect();
        let mut boundary_vertices = vec![false; nv];
        for (e, &b) in edges.iter().zip(&boundary_edges) {
            if b {
                boundary_vertices[e[0]] = true;
                boundary_vertices[e[1]] = true;
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_edges,
            boundary_vertices,
            refinement_edge,
            genealogy,
            domain_area: 0.0,
            domain_perimeter: 0.0,
        })
    }

    fn longest_edges(&self) -> Vec<u8> {
        (0..self.num_triangles())
            .map(|t| {
                let mut best = 0u8;
                for k in 1..3u8 {
                    let (lk, lb) = (self.edge_length_local(t, k), self.edge_length_local(t, best));
                    let (ek, eb) = (self.triangle_edges[t][k as usize], self.triangle_edges[t][best as usize]);
                    if lk > lb || (lk == lb && ek < eb) {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    fn edge_length_local(&self, t: usize, k: u8) -> f64 {
        let e = self.edges[self.triangle_edges[t][k as usize]];
        dist(self.vertices[e[0]], self.vertices[e[1]])
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices of triangle `t`; entry `k` is opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// Triangles adjacent to edge `e` (the second slot is empty on the boundary).
    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_triangles[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edges[e]
    }

    pub fn boundary_edge_flags(&self) -> &[bool] {
        &self.boundary_edges
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices[v]
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.boundary_edges.iter().filter(|&&b| b).count()
    }

    pub fn refinement_edge(&self, t: usize) -> u8 {
        self.refinement_edge[t]
    }

    pub fn genealogy(&self) -> Option<&Genealogy> {
        self.genealogy.as_ref()
    }

    pub fn domain_area(&self) -> f64 {
        self.domain_area
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        midpoint(self.vertices[a], self.vertices[b])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn triangle_areas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_triangles()).map(|t| self.triangle_area(t))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Diameter (longest edge) of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        (0..3).map(|k| self.edge_length_local(t, k)).fold(0.0, f64::max)
    }

    /// Mesh size `h`: the largest triangle diameter.
    pub fn h_max(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Smallest interior angle of triangle `t`, in radians.
    pub fn min_angle(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        (0..3)
            .map(|k| {
                let o = p[k];
                let u = [p[(k + 1) % 3][0] - o[0], p[(k + 1) % 3][1] - o[1]];
                let w = [p[(k + 2) % 3][0] - o[0], p[(k + 2) % 3][1] - o[1]];
                let cross = u[0] * w[1] - u[1] * w[0];
                let dot = u[0] * w[0] + u[1] * w[1];
                cross.abs().atan2(dot)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest interior angle over the whole mesh, in radians.
    pub fn min_angle_overall(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.min_angle(t)).fold(f64::INFINITY, f64::min)
    }

    fn boundary_length(&self) -> f64 {
        (0..self.num_edges()).filter(|&e| self.boundary_edges[e]).map(|e| self.edge_length(e)).sum()
    }

    /// Checks every structural invariant: positive orientation, edge
    /// adjacency counts in {1, 2}, closed boundary loops, area and
    /// boundary-length conservation against the initial domain, and absence
    /// of hanging nodes.
    pub fn check_invariants(&self) -> Result<(), MeshError> {
        for t in 0..self.num_triangles() {
            let area = self.triangle_area(t);
            if area <= 0.0 {
                return Err(MeshError::Orientation { triangle: t, area });
            }
            if self.refinement_edge[t] > 2 {
                return Err(MeshError::Inconsistent(format!("triangle {t} has refinement edge > 2")));
            }
        }

        let mut counts = vec![0u8; self.num_edges()];
        for te in &self.triangle_edges {
            for &e in te {
                counts[e] += 1;
            }
        }
        for (e, &c) in counts.iter().enumerate() {
            if c == 0 || c > 2 {
                return Err(MeshError::Adjacency { edge: e, count: c as usize });
            }
            if (c == 1) != self.boundary_edges[e] {
                return Err(MeshError::Inconsistent(format!("boundary flag of edge {e}")));
            }
        }

        // Every vertex on the boundary meets exactly two boundary edges.
        let mut degree = vec![0u32; self.num_vertices()];
        for (e, ends) in self.edges.iter().enumerate() {
            if self.boundary_edges[e] {
                degree[ends[0]] += 1;
                degree[ends[1]] += 1;
            }
        }
        if let Some(v) = degree.iter().position(|&d| d != 0 && d != 2) {
            return Err(MeshError::HangingNode { vertex: v });
        }

        // A hanging node sits at the midpoint of an edge that only one side sees.
        let mut by_coord: HashMap<(u64, u64), usize> = HashMap::with_capacity(self.num_vertices());
        for (v, x) in self.vertices.iter().enumerate() {
            by_coord.insert((x[0].to_bits(), x[1].to_bits()), v);
        }
        for e in 0..self.num_edges() {
            if self.boundary_edges[e] {
                let m = self.edge_midpoint(e);
                if let Some(&v) = by_coord.get(&(m[0].to_bits(), m[1].to_bits())) {
                    return Err(MeshError::HangingNode { vertex: v });
                }
            }
        }

        let area: f64 = self.triangle_areas().sum();
        if (area - self.domain_area).abs() > CONSERVATION_RTOL * self.domain_area {
            return Err(MeshError::AreaMismatch { expected: self.domain_area, actual: area });
        }
        let perimeter = self.boundary_length();
        if (perimeter - self.domain_perimeter).abs() > CONSERVATION_RTOL * self.domain_perimeter {
            return Err(MeshError::BoundaryMismatch { expected: self.domain_perimeter, actual: perimeter });
        }
        Ok(())
    }
}

/// Structured mesh of the unit square: an `n`×`n` grid of cells, each split
/// along its bottom-left to top-right diagonal.
pub fn unit_square_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidResolution);
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_triangles(vertices, triangles, None)
}

pub use refine::{refine_marked, refine_uniform};
