//! Triangle mesh container, validity checking, and the plain-text ingest format.
//!
//! A mesh is valid when every face references three distinct in-range
//! vertices, every vertex is used, orientation is consistent, and the
//! surface is 2-manifold (every edge borders one or two faces, every
//! vertex umbrella is a single fan). Validation runs at ingest; the
//! level-of-detail operators rely on it and preserve it.

mod collapse;
mod record;
mod simplify;
mod stream;

pub use collapse::{edge_collapse, vertex_split, VertexSplit};
pub use record::{
    decode_record, encode_record, RecordPayload, ResolutionRecord, RECORD_HEADER_BYTES,
    SPLIT_WIRE_BYTES, SYNTHETIC_BASE_BYTES, SYNTHETIC_LEVEL_BYTES,
};
pub use simplify::{simplify, simplify_to_target, MIN_SIMPLIFY_VERTICES};
pub use stream::{PmStream, LEVEL_COUNT};

use std::collections::HashMap;

use thiserror::Error;

use crate::real::Real;
use crate::vec3::Vec3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("mesh is not manifold: {0}")]
    NotManifold(String),
    #[error("no face contains edge ({vs}, {vt})")]
    NonExistentEdge { vs: u32, vt: u32 },
    #[error("collapse of ({vs}, {vt}) rejected: {reason}")]
    TopologyViolation { vs: u32, vt: u32, reason: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("mesh has {vertices} vertices, need at least {minimum}")]
    MeshTooSmall { vertices: usize, minimum: usize },
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<S> {
    pub object_id: u32,
    pub vertices: Vec<Vec3<S>>,
    /// Counter-clockwise vertex index triples.
    pub faces: Vec<[u32; 3]>,
}

impl<S: Real> TriangleMesh<S> {
    pub fn new(object_id: u32, vertices: Vec<Vec3<S>>, faces: Vec<[u32; 3]>) -> Self {
        Self {
            object_id,
            vertices,
            faces,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Full structural check: index ranges, degenerate faces, orientation,
    /// edge multiplicity, and vertex fans. Returns the first violation found.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.vertices.len() < 3 || self.faces.is_empty() {
            return Err(MeshError::NotManifold(format!(
                "too little geometry: {} vertices, {} faces",
                self.vertices.len(),
                self.faces.len()
            )));
        }
        let n = self.vertices.len() as u32;
        let mut used = vec![false; self.vertices.len()];
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::NotManifold(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                if a >= n {
                    return Err(MeshError::NotManifold(format!(
                        "face {fi} references vertex {a}, mesh has {n}"
                    )));
                }
                used[a as usize] = true;
                if directed.insert((a, b), fi as u32).is_some() {
                    return Err(MeshError::NotManifold(format!(
                        "directed edge ({a}, {b}) appears twice; duplicate or flipped face"
                    )));
                }
            }
        }
        if let Some(idx) = used.iter().position(|u| !u) {
            return Err(MeshError::NotManifold(format!(
                "vertex {idx} is not referenced by any face"
            )));
        }
        // Directed-edge uniqueness already bounds undirected multiplicity at 2,
        // so edge manifoldness is covered; fans catch the rest.
        drop(directed);
        self.check_vertex_fans()?;
        Ok(())
    }

    /// Every vertex umbrella must be a single fan: one closed cycle of wedges
    /// (interior vertex) or one open chain (boundary vertex).
    fn check_vertex_fans(&self) -> Result<(), MeshError> {
        let mut wedges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            // At corner v of ccw face (v, a, b) the wedge runs a -> b.
            wedges[f[0] as usize].push((f[1], f[2]));
            wedges[f[1] as usize].push((f[2], f[0]));
            wedges[f[2] as usize].push((f[0], f[1]));
        }
        for (v, ws) in wedges.iter().enumerate() {
            let mut next: HashMap<u32, u32> = HashMap::with_capacity(ws.len());
            let mut indeg: HashMap<u32, u32> = HashMap::with_capacity(ws.len());
            for &(from, to) in ws {
                if next.insert(from, to).is_some() {
                    return Err(MeshError::NotManifold(format!(
                        "vertex {v}: two faces share wedge start {from}"
                    )));
                }
                *indeg.entry(to).or_insert(0) += 1;
                if indeg[&to] > 1 {
                    return Err(MeshError::NotManifold(format!(
                        "vertex {v}: two faces share wedge end {to}"
                    )));
                }
            }
            // Starts are wedge sources nobody points at. 0 starts = cycle, 1 = path.
            let mut starts: Vec<u32> = ws
                .iter()
                .map(|&(from, _)| from)
                .filter(|from| !indeg.contains_key(from))
                .collect();
            starts.sort_unstable();
            let origin = match starts.len() {
                0 => ws[0].0,
                1 => starts[0],
                more => {
                    return Err(MeshError::NotManifold(format!(
                        "vertex {v}: umbrella splits into {more} fans"
                    )))
                }
            };
            let mut seen = 1usize;
            let mut cur = next[&origin];
            while cur != origin {
                match next.get(&cur) {
                    Some(&n) => {
                        cur = n;
                        seen += 1;
                    }
                    None => break, // open chain ended
                }
                if seen > ws.len() {
                    break;
                }
            }
            if seen != ws.len() {
                return Err(MeshError::NotManifold(format!(
                    "vertex {v}: umbrella is not a single fan"
                )));
            }
        }
        Ok(())
    }

    /// Neighbor vertex ids of `v`, sorted ascending.
    pub fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for f in &self.faces {
            if f.contains(&v) {
                for &w in f {
                    if w != v && !out.contains(&w) {
                        out.push(w);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Order-insensitive equality key: sorted face list keyed by position bits
    /// (cyclic rotation fixed so the smallest corner leads, which preserves
    /// orientation) plus the sorted vertex position multiset.
    pub fn canonical_signature(&self) -> ([Vec<[[u64; 3]; 3]>; 1], Vec<[u64; 3]>) {
        let bits: Vec<[u64; 3]> = self.vertices.iter().map(|v| v.wire_bits()).collect();
        let mut faces: Vec<[[u64; 3]; 3]> = self
            .faces
            .iter()
            .map(|f| {
                let corners = [
                    bits[f[0] as usize],
                    bits[f[1] as usize],
                    bits[f[2] as usize],
                ];
                let lead = (0..3).min_by_key(|&i| corners[i]).unwrap();
                [
                    corners[lead],
                    corners[(lead + 1) % 3],
                    corners[(lead + 2) % 3],
                ]
            })
            .collect();
        faces.sort_unstable();
        let mut verts = bits;
        verts.sort_unstable();
        ([faces], verts)
    }

    /// Equality up to face order and vertex numbering; positions must match bit for bit.
    pub fn canonically_equal(&self, other: &Self) -> bool {
        self.canonical_signature() == other.canonical_signature()
    }

    /// Parse the plain-text format: `v x y z` and `f i j k` lines with 1-based
    /// face indices; `#` starts a comment. The result is fully validated.
    pub fn parse_ascii(object_id: u32, text: &str) -> Result<Self, MeshError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut parts = body.split_whitespace();
            let tag = parts.next().unwrap();
            let rest: Vec<&str> = parts.collect();
            match tag {
                "v" => {
                    if rest.len() != 3 {
                        return Err(MeshError::Format {
                            line,
                            message: format!("vertex needs 3 coordinates, got {}", rest.len()),
                        });
                    }
                    let mut coords = [0.0f64; 3];
                    for (slot, tok) in coords.iter_mut().zip(&rest) {
                        *slot = tok.parse().map_err(|_| MeshError::Format {
                            line,
                            message: format!("bad coordinate {tok:?}"),
                        })?;
                    }
                    vertices.push(Vec3::new(
                        S::from_wire(coords[0]),
                        S::from_wire(coords[1]),
                        S::from_wire(coords[2]),
                    ));
                }
                "f" => {
                    if rest.len() != 3 {
                        return Err(MeshError::Format {
                            line,
                            message: format!("face needs 3 indices, got {}", rest.len()),
                        });
                    }
                    let mut idx = [0u32; 3];
                    for (slot, tok) in idx.iter_mut().zip(&rest) {
                        let one_based: usize = tok.parse().map_err(|_| MeshError::Format {
                            line,
                            message: format!("bad index {tok:?}"),
                        })?;
                        if one_based == 0 || one_based > vertices.len() {
                            return Err(MeshError::Format {
                                line,
                                message: format!(
                                    "index {one_based} out of range 1..={}",
                                    vertices.len()
                                ),
                            });
                        }
                        *slot = (one_based - 1) as u32;
                    }
                    faces.push(idx);
                }
                other => {
                    return Err(MeshError::Format {
                        line,
                        message: format!("unknown line tag {other:?}"),
                    });
                }
            }
        }
        let mesh = Self::new(object_id, vertices, faces);
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn write_ascii(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!(
                "v {} {} {}\n",
                v.x.to_wire(),
                v.y.to_wire(),
                v.z.to_wire()
            ));
        }
        for f in &self.faces {
            out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        out
    }
}

/// Regular tetrahedron, the smallest closed mesh. Used all over the tests.
pub fn tetrahedron<S: Real>(object_id: u32) -> TriangleMesh<S> {
    let s = |v: f64| S::from_wire(v);
    let vertices = vec![
        Vec3::new(s(1.0), s(1.0), s(1.0)),
        Vec3::new(s(1.0), s(-1.0), s(-1.0)),
        Vec3::new(s(-1.0), s(1.0), s(-1.0)),
        Vec3::new(s(-1.0), s(-1.0), s(1.0)),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriangleMesh::new(object_id, vertices, faces)
}

/// Closed sphere with `segments` meridians and `rings` latitude bands,
/// giving `segments * (rings - 1) + 2` vertices. Poles are shared.
pub fn uv_sphere<S: Real>(object_id: u32, segments: u32, rings: u32, radius: f64) -> TriangleMesh<S> {
    assert!(segments >= 3 && rings >= 3);
    let mut vertices: Vec<Vec3<S>> = Vec::new();
    let conv = |v: f64| S::from_wire(v);
    vertices.push(Vec3::new(conv(0.0), conv(radius), conv(0.0))); // north pole
    for r in 1..rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(
                conv(radius * phi.sin() * theta.cos()),
                conv(radius * phi.cos()),
                conv(radius * phi.sin() * theta.sin()),
            ));
        }
    }
    vertices.push(Vec3::new(conv(0.0), conv(-radius), conv(0.0))); // south pole
    let south = (vertices.len() - 1) as u32;
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);

    let mut faces: Vec<[u32; 3]> = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s + 1), ring(1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let a = ring(r, s);
            let b = ring(r, s + 1);
            let c = ring(r + 1, s);
            let d = ring(r + 1, s + 1);
            faces.push([a, b, c]);
            faces.push([b, d, c]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring(rings - 1, s), ring(rings - 1, s + 1)]);
    }
    TriangleMesh::new(object_id, vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedron_is_valid() {
        tetrahedron::<f64>(0).validate().unwrap();
    }

    #[test]
    fn uv_sphere_counts_and_validity() {
        // 14 segments x 8 rings = 100 vertices exactly.
        let m = uv_sphere::<f64>(0, 14, 8, 1.0);
        assert_eq!(m.vertex_count(), 100);
        assert_eq!(m.face_count(), 2 * 14 * 7);
        m.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_index() {
        let mut m = tetrahedron::<f64>(0);
        m.faces[0][0] = 9;
        assert!(matches!(m.validate(), Err(MeshError::NotManifold(_))));
    }

    #[test]
    fn rejects_duplicate_face() {
        let mut m = tetrahedron::<f64>(0);
        m.faces.push(m.faces[0]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn rejects_unused_vertex() {
        let mut m = tetrahedron::<f64>(0);
        m.vertices.push(Vec3::new(5.0, 5.0, 5.0));
        assert!(matches!(m.validate(), Err(MeshError::NotManifold(_))));
    }

    #[test]
    fn rejects_two_fans_at_a_vertex() {
        // Two triangles sharing only vertex 0: a bowtie.
        let verts = vec![
            Vec3::new(0.0f64, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ];
        let faces = vec![[0, 1, 2], [0, 3, 4]];
        let m = TriangleMesh::new(0, verts, faces);
        assert!(matches!(m.validate(), Err(MeshError::NotManifold(_))));
    }

    #[test]
    fn boundary_strip_is_accepted() {
        // Single quad split in two: manifold with boundary.
        let verts = vec![
            Vec3::new(0.0f64, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let faces = vec![[0, 1, 2], [0, 2, 3]];
        TriangleMesh::new(0, verts, faces).validate().unwrap();
    }

    #[test]
    fn ascii_round_trip() {
        let m = tetrahedron::<f64>(7);
        let text = m.write_ascii();
        let back = TriangleMesh::<f64>::parse_ascii(7, &text).unwrap();
        assert!(m.canonically_equal(&back));
        assert_eq!(m.vertices, back.vertices);
    }

    #[test]
    fn ascii_errors_carry_line_numbers() {
        let bad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        match TriangleMesh::<f64>::parse_ascii(0, bad) {
            Err(MeshError::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_equality_survives_reordering() {
        let m = tetrahedron::<f64>(0);
        let mut shuffled = m.clone();
        shuffled.faces.swap(0, 3);
        shuffled.faces.swap(1, 2);
        // Rotate a face cyclically: same orientation, same signature.
        let f = shuffled.faces[0];
        shuffled.faces[0] = [f[1], f[2], f[0]];
        assert!(m.canonically_equal(&shuffled));
        // Flipping a face changes orientation and must break equality.
        let f = shuffled.faces[0];
        shuffled.faces[0] = [f[0], f[2], f[1]];
        assert!(!m.canonically_equal(&shuffled));
    }
}
