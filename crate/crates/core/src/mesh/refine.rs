//! Uniform red refinement and newest-vertex bisection.

use std::collections::VecDeque;

use super::{midpoint, Genealogy, Mesh, Point};
use crate::error::MeshError;

/// Splits every triangle into four congruent children through its edge
/// midpoints. The midpoint of edge `e` becomes vertex `nv + e`.
///
/// Local edge `j` of each child is parallel to local edge `j` of its parent,
/// so children inherit the parent's refinement-edge index.
pub fn refine_uniform(m: &Mesh) -> Result<Mesh, MeshError> {
    let nv = m.num_vertices();
    let nt = m.num_triangles();
    let mut vertices: Vec<Point> = m.vertices.clone();
    vertices.reserve(m.num_edges());
    let mut midpoint_of = Vec::with_capacity(m.num_edges());
    for &[a, b] in &m.edges {
        vertices.push(midpoint(m.vertices[a], m.vertices[b]));
        midpoint_of.push([a, b]);
    }

    let mut triangles = Vec::with_capacity(4 * nt);
    let mut refinement_edge = Vec::with_capacity(4 * nt);
    let mut parent = Vec::with_capacity(4 * nt);
    for t in 0..nt {
        let [v0, v1, v2] = m.triangles[t];
        let [e0, e1, e2] = m.triangle_edges[t];
        let (m0, m1, m2) = (nv + e0, nv + e1, nv + e2);
        for child in [[v0, m2, m1], [m2, v1, m0], [m1, m0, v2], [m0, m1, m2]] {
            triangles.push(child);
            refinement_edge.push(m.refinement_edge[t]);
            parent.push(t);
        }
    }

    let genealogy = Genealogy { parent, coarse_vertices: nv, midpoint_of };
    finish(m, vertices, triangles, refinement_edge, genealogy)
}

/// Newest-vertex bisection of the `marked` triangles plus the conforming
/// closure.
///
/// Closure works on edges: the refinement edge of every marked triangle is
/// flagged, and any triangle owning a flagged edge also flags its own
/// refinement edge, until nothing changes. Each triangle is then bisected
/// along its refinement edge, and children whose (inherited) refinement edge
/// is flagged are bisected again. Shared edges are split at a single shared
/// midpoint, so the output has no hanging nodes.
pub fn refine_marked(m: &Mesh, marked: &[usize]) -> Result<Mesh, MeshError> {
    let nt = m.num_triangles();
    if let Some(&bad) = marked.iter().find(|&&t| t >= nt) {
        return Err(MeshError::MarkedOutOfRange { index: bad, num_triangles: nt });
    }
    let refinement_edge_of = |t: usize| m.triangle_edges[t][m.refinement_edge[t] as usize];

    let mut flagged = vec![false; m.num_edges()];
    let mut queue = VecDeque::new();
    for &t in marked {
        let e = refinement_edge_of(t);
        if !flagged[e] {
            flagged[e] = true;
            queue.push_back(e);
        }
    }
    while let Some(e) = queue.pop_front() {
        for t in m.edge_triangles[e].into_iter().flatten() {
            let r = refinement_edge_of(t);
            if !flagged[r] {
                flagged[r] = true;
                queue.push_back(r);
            }
        }
    }

    let nv = m.num_vertices();
    let mut vertices = m.vertices.clone();
    let mut midpoint_of = Vec::new();
    let mut new_vertex = vec![usize::MAX; m.num_edges()];
    for (e, &f) in flagged.iter().enumerate() {
        if f {
            let [a, b] = m.edges[e];
            new_vertex[e] = vertices.len();
            vertices.push(midpoint(m.vertices[a], m.vertices[b]));
            midpoint_of.push([a, b]);
        }
    }

    let mut out = Bisection {
        flagged: &flagged,
        new_vertex: &new_vertex,
        triangles: Vec::with_capacity(nt + 2 * marked.len()),
        refinement_edge: Vec::with_capacity(nt + 2 * marked.len()),
        parent: Vec::with_capacity(nt + 2 * marked.len()),
    };
    for t in 0..nt {
        let te = m.triangle_edges[t];
        out.bisect(t, m.triangles[t], m.refinement_edge[t] as usize, [Some(te[0]), Some(te[1]), Some(te[2])]);
    }

    let genealogy = Genealogy { parent: out.parent, coarse_vertices: nv, midpoint_of };
    finish(m, vertices, out.triangles, out.refinement_edge, genealogy)
}

struct Bisection<'a> {
    flagged: &'a [bool],
    new_vertex: &'a [usize],
    triangles: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    parent: Vec<usize>,
}

impl Bisection<'_> {
    /// `coarse_edges[k]` is the coarse edge index of local edge `k`, or
    /// `None` for edges created during this refinement (never flagged).
    fn bisect(&mut self, parent: usize, verts: [usize; 3], refine: usize, coarse_edges: [Option<usize>; 3]) {
        let split = coarse_edges[refine].filter(|&e| self.flagged[e]);
        let Some(e) = split else {
            self.triangles.push(verts);
            self.refinement_edge.push(refine as u8);
            self.parent.push(parent);
            return;
        };
        let a = verts[refine];
        let b = verts[(refine + 1) % 3];
        let c = verts[(refine + 2) % 3];
        let mid = self.new_vertex[e];
        // (a, b, mid): edge (a, b) is opposite mid and was local edge refine+2.
        self.bisect(parent, [a, b, mid], 2, [None, None, coarse_edges[(refine + 2) % 3]]);
        // (a, mid, c): edge (c, a) is opposite mid and was local edge refine+1.
        self.bisect(parent, [a, mid, c], 1, [None, coarse_edges[(refine + 1) % 3], None]);
    }
}

fn finish(
    coarse: &Mesh,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    refinement_edge: Vec<u8>,
    genealogy: Genealogy,
) -> Result<Mesh, MeshError> {
    let mut mesh = Mesh::assemble(vertices, triangles, refinement_edge, Some(genealogy))?;
    mesh.domain_area = coarse.domain_area;
    mesh.domain_perimeter = coarse.domain_perimeter;
    Ok(mesh)
}
