//! SVG wireframes and legacy-VTK ASCII output.
//!
//! SVG: one `<polygon>` per triangle, coordinates flipped so that `y` points
//! up, scaled to fit a square canvas of `size` pixels with a 2% margin.
//!
//! VTK: `# vtk DataFile Version 3.0`, `DATASET UNSTRUCTURED_GRID`, points
//! written as `x y 0`, triangle cells (type 5), and an optional
//! `CELL_DATA` scalar field.

use std::io::{self, Write};

use super::Mesh;

impl Mesh {
    pub fn write_svg<W: Write>(&self, mut w: W, size: f64) -> io::Result<()> {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let margin = 0.02 * size;
        let scale = (size - 2.0 * margin) / extent;
        let map = |p: [f64; 2]| (margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale);
        let stroke = (0.5 * size / 800.0).max(0.05);

        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        )?;
        writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
        writeln!(w, r#"<g fill="none" stroke="black" stroke-width="{stroke:.3}" stroke-linejoin="round">"#)?;
        for t in 0..self.num_triangles() {
            let pts = self.triangle_points(t).map(map);
            writeln!(
                w,
                r#"<polygon points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}"/>"#,
                pts[0].0, pts[0].1, pts[1].0, pts[1].1, pts[2].0, pts[2].1
            )?;
        }
        writeln!(w, "</g>")?;
        writeln!(w, "</svg>")
    }

    pub fn write_vtk<W: Write>(&self, mut w: W, cell_data: Option<(&str, &[f64])>) -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "triangle mesh")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.num_vertices())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
        }
        let nt = self.num_triangles();
        writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(w, "5")?;
        }
        if let Some((name, values)) = cell_data {
            if values.len() != nt {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    format!("cell field '{name}' has {} values for {nt} cells", values.len()),
                ));
            }
            writeln!(w, "CELL_DATA {nt}")?;
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(w, "{v:.17e}")?;
            }
        }
        Ok(())
    }
}
