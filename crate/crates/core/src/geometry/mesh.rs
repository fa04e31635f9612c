use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Triangle surface mesh with outward (counter-clockwise) faces.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn corners(&self, f: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Area-weighted normal `(b−a)×(c−a)/2`; its length is the face area.
    pub fn face_vector_area(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a)) * 0.5
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_vector_area(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        self.face_vector_area(f).normalize()
    }

    pub fn face_centroid(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(f);
        (a + b + c) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_faces()).map(|f| self.face_area(f)).sum()
    }

    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c]))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn vertex_mean(&self) -> Vector3<f64> {
        self.vertices.iter().sum::<Vector3<f64>>() / self.num_vertices() as f64
    }

    /// Count of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.directed_edges().len() / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    fn directed_edges(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::with_capacity(self.faces.len() * 3);
        for (f, face) in self.faces.iter().enumerate() {
            for k in 0..3 {
                edges.insert((face[k], face[(k + 1) % 3]), f);
            }
        }
        edges
    }

    /// Pairs of faces sharing an edge.
    pub fn adjacent_faces(&self) -> Vec<(usize, usize)> {
        let edges = self.directed_edges();
        let mut pairs: Vec<(usize, usize)> = edges
            .iter()
            .filter_map(|(&(i, j), &f)| {
                let g = *edges.get(&(j, i))?;
                (f < g).then_some((f, g))
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vertices()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                out[v].push(f);
            }
        }
        out
    }

    /// Area-weighted average of incident face normals.
    pub fn area_weighted_vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut acc = vec![Vector3::zeros(); self.num_vertices()];
        for f in 0..self.num_faces() {
            let va = self.face_vector_area(f);
            for &v in &self.faces[f] {
                acc[v] += va;
            }
        }
        acc.into_iter().map(|n| n.normalize()).collect()
    }

    /// Watertight, consistently oriented, genus-zero, positively oriented.
    pub fn validate(&self) -> Result<()> {
        let nv = self.num_vertices();
        for (f, face) in self.faces.iter().enumerate() {
            if face.iter().any(|&v| v >= nv) {
                return Err(Error::Degenerate(format!("face {f} references a missing vertex")));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::Degenerate(format!("face {f} repeats a vertex")));
            }
            if self.face_area(f) <= 1e-300 || !self.face_area(f).is_finite() {
                return Err(Error::Degenerate(format!("face {f} has zero area")));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for face in &self.faces {
            for k in 0..3 {
                *directed.entry((face[k], face[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(i, j), &count) in &directed {
            if count > 1 {
                return Err(Error::NotWatertight(format!(
                    "edge {i}->{j} is used {count} times in the same direction (inconsistent orientation or non-manifold)"
                )));
            }
            if !directed.contains_key(&(j, i)) {
                return Err(Error::NotWatertight(format!("edge {i}-{j} has only one incident face")));
            }
        }
        let chi = self.euler_characteristic();
        if chi != 2 {
            return Err(Error::NotWatertight(format!("Euler characteristic {chi}, expected 2")));
        }
        let volume = self.signed_volume();
        if volume <= 0.0 {
            return Err(Error::InvertedOrientation { volume });
        }
        Ok(())
    }

    /// Icosahedron subdivided `subdiv` times, vertices on the unit sphere.
    pub fn icosphere(subdiv: u32) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vector3<f64>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|p| Vector3::new(p[0], p[1], p[2]).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdiv {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |i: usize, j: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
                let key = (i.min(j), i.max(j));
                *midpoints.entry(key).or_insert_with(|| {
                    verts.push(((verts[i] + verts[j]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriMesh { vertices, faces }
    }

    /// Parse ASCII OFF (triangles only).
    pub fn parse_off(text: &str) -> Result<TriMesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };

        let (line, header) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
        let mut header_tokens = header.split_whitespace();
        if header_tokens.next() != Some("OFF") {
            return Err(parse_err(line, "missing OFF header"));
        }
        let rest: Vec<&str> = header_tokens.collect();
        let counts: Vec<&str> = if rest.is_empty() {
            let (_, l) = lines.next().ok_or_else(|| parse_err(line, "missing counts"))?;
            l.split_whitespace().collect()
        } else {
            rest
        };
        if counts.len() < 2 {
            return Err(parse_err(line, "expected vertex and face counts"));
        }
        let nv: usize = counts[0].parse().map_err(|_| parse_err(line, "bad vertex count"))?;
        let nf: usize = counts[1].parse().map_err(|_| parse_err(line, "bad face count"))?;

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = lines.next().ok_or_else(|| parse_err(0, "truncated vertex list"))?;
            let xyz: Vec<f64> = l
                .split_whitespace()
                .take(3)
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(line, "bad vertex coordinate"))?;
            if xyz.len() != 3 {
                return Err(parse_err(line, "vertex needs three coordinates"));
            }
            vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (line, l) = lines.next().ok_or_else(|| parse_err(0, "truncated face list"))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(line, "bad face index"))?;
            if idx.first() != Some(&3) || idx.len() < 4 {
                return Err(parse_err(line, "only triangular faces are supported"));
            }
            if idx[1..4].iter().any(|&v| v >= nv) {
                return Err(parse_err(line, "face index out of range"));
            }
            faces.push([idx[1], idx[2], idx[3]]);
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn read_off(path: &Path) -> Result<TriMesh> {
        TriMesh::parse_off(&std::fs::read_to_string(path)?)
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.num_vertices(), self.num_faces());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = TriMesh::icosphere(s);
            assert_eq!(m.num_faces(), 20 * 4usize.pow(s));
            assert_eq!(m.euler_characteristic(), 2);
            m.validate().unwrap();
        }
        assert_eq!(TriMesh::icosphere(3).num_faces(), 1280);
    }

    #[test]
    fn closed_surface_vector_area_vanishes() {
        let m = TriMesh::icosphere(3);
        let total: Vector3<f64> = (0..m.num_faces()).map(|f| m.face_vector_area(f)).sum();
        assert!(total.norm() < 1e-10);
    }

    #[test]
    fn flipped_mesh_is_rejected() {
        let mut m = TriMesh::icosphere(1);
        for f in &mut m.faces {
            f.swap(1, 2);
        }
        assert!(matches!(m.validate(), Err(Error::InvertedOrientation { .. })));
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mut m = TriMesh::icosphere(1);
        m.faces.pop();
        assert!(matches!(m.validate(), Err(Error::NotWatertight(_))));
    }

    #[test]
    fn off_roundtrip() {
        let m = TriMesh::icosphere(1);
        let back = TriMesh::parse_off(&m.to_off()).unwrap();
        assert_eq!(back.faces, m.faces);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn off_rejects_quads_and_garbage() {
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(TriMesh::parse_off(quad), Err(Error::Parse { .. })));
        assert!(TriMesh::parse_off("PLY\n").is_err());
        assert!(TriMesh::parse_off("OFF\n3 1 0\n0 0 0\n1 0\n").is_err());
    }
}
