//! Quadric-driven mesh simplification.
//!
//! Collapses are ordered by quadric error with a deterministic tie-break
//! (cost, then the smaller vertex pair), so the same input always yields the
//! same stream. Each collapse keeps one endpoint in place; the kept endpoint
//! is whichever of the two has the lower quadric error, ties keeping the
//! smaller index. Vertices are never reindexed while simplifying; the final
//! pass renumbers so base vertices come first and split j reinserts vertex
//! `base + j`, which keeps every stored index valid at application time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::real::Real;
use crate::vec3::Vec3;

use super::stream::{PmStream, LEVEL_COUNT};
use super::{MeshError, TriangleMesh, VertexSplit};

/// Simplification refuses meshes smaller than this.
pub const MIN_SIMPLIFY_VERTICES: usize = 20;

/// Plane-sum error quadric, stored as the upper triangle of the symmetric
/// 4x4 form. Evaluation is v^T Q v for homogeneous v = (x, y, z, 1).
#[derive(Debug, Clone, Copy, Default)]
struct Quadric {
    m: [f64; 10],
}

impl Quadric {
    fn from_plane(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            m: [
                a * a,
                a * b,
                a * c,
                a * d,
                b * b,
                b * c,
                b * d,
                c * c,
                c * d,
                d * d,
            ],
        }
    }

    fn add(&mut self, o: &Quadric) {
        for (s, v) in self.m.iter_mut().zip(o.m.iter()) {
            *s += v;
        }
    }

    fn evaluate(&self, p: [f64; 3]) -> f64 {
        let [x, y, z] = p;
        let m = &self.m;
        m[0] * x * x
            + 2.0 * m[1] * x * y
            + 2.0 * m[2] * x * z
            + 2.0 * m[3] * x
            + m[4] * y * y
            + 2.0 * m[5] * y * z
            + 2.0 * m[6] * y
            + m[7] * z * z
            + 2.0 * m[8] * z
            + m[9]
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    ver_a: u32,
    ver_b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // Max-heap; reversed so the cheapest edge pops first, ties on (a, b).
    fn cmp(&self, o: &Self) -> Ordering {
        self.cost
            .total_cmp(&o.cost)
            .then(self.a.cmp(&o.a))
            .then(self.b.cmp(&o.b))
            .reverse()
    }
}

struct CollapseRec<S> {
    vs: u32,
    vt: u32,
    vl: u32,
    vr: u32,
    vt_position: Vec3<S>,
    vs_position: Vec3<S>,
}

/// Mutable simplification state over stable vertex ids.
struct Working<S> {
    positions: Vec<Vec3<S>>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vert_alive: Vec<bool>,
    incident: Vec<Vec<u32>>, // vertex -> live face ids
    quadrics: Vec<Quadric>,
    version: Vec<u32>,
    alive_count: usize,
}

impl<S: Real> Working<S> {
    fn new(mesh: &TriangleMesh<S>) -> Self {
        let nv = mesh.vertices.len();
        let mut incident = vec![Vec::new(); nv];
        for (fi, f) in mesh.faces.iter().enumerate() {
            for &v in f {
                incident[v as usize].push(fi as u32);
            }
        }
        let mut quadrics = vec![Quadric::default(); nv];
        for f in &mesh.faces {
            let p0 = mesh.vertices[f[0] as usize];
            let p1 = mesh.vertices[f[1] as usize];
            let p2 = mesh.vertices[f[2] as usize];
            let n = (p1 - p0).cross(p2 - p0);
            let len = n.length().to_wire();
            if len == 0.0 {
                continue;
            }
            let nx = n.x.to_wire() / len;
            let ny = n.y.to_wire() / len;
            let nz = n.z.to_wire() / len;
            let d = -(nx * p0.x.to_wire() + ny * p0.y.to_wire() + nz * p0.z.to_wire());
            let q = Quadric::from_plane(nx, ny, nz, d);
            for &v in f {
                quadrics[v as usize].add(&q);
            }
        }
        Self {
            positions: mesh.vertices.clone(),
            faces: mesh.faces.clone(),
            face_alive: vec![true; mesh.faces.len()],
            vert_alive: vec![true; nv],
            incident,
            quadrics,
            version: vec![0; nv],
            alive_count: nv,
        }
    }

    fn wire(&self, v: u32) -> [f64; 3] {
        let p = self.positions[v as usize];
        [p.x.to_wire(), p.y.to_wire(), p.z.to_wire()]
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for &fi in &self.incident[v as usize] {
            for &w in &self.faces[fi as usize] {
                if w != v && !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Pair cost assuming the cheaper endpoint survives in place.
    /// Returns (cost, keep, remove).
    fn pair_cost(&self, a: u32, b: u32) -> (f64, u32, u32) {
        let mut q = self.quadrics[a as usize];
        q.add(&self.quadrics[b as usize]);
        let cost_a = q.evaluate(self.wire(a));
        let cost_b = q.evaluate(self.wire(b));
        if cost_b < cost_a {
            (cost_b, b, a)
        } else {
            (cost_a, a, b) // ties keep the smaller id, a < b by construction
        }
    }

    /// Wings of directed edge pair (keep, remove), or None if not interior.
    fn wings(&self, keep: u32, remove: u32) -> Option<(u32, u32, u32, u32)> {
        let mut left = None;
        let mut right = None;
        for &fi in &self.incident[keep as usize] {
            let f = &self.faces[fi as usize];
            for k in 0..3 {
                let x = f[k];
                let y = f[(k + 1) % 3];
                if x == keep && y == remove {
                    left = Some((f[(k + 2) % 3], fi));
                } else if x == remove && y == keep {
                    right = Some((f[(k + 2) % 3], fi));
                }
            }
        }
        match (left, right) {
            (Some((vl, fl)), Some((vr, fr))) => Some((vl, vr, fl, fr)),
            _ => None,
        }
    }

    fn collapse_legal(&self, keep: u32, remove: u32, vl: u32, vr: u32) -> bool {
        if vl == vr {
            return false;
        }
        let ns = self.neighbors(keep);
        let nt = self.neighbors(remove);
        let shared: Vec<u32> = ns.iter().copied().filter(|v| nt.contains(v)).collect();
        shared == [vl.min(vr), vl.max(vr)]
    }

    fn drop_face(&mut self, fi: u32) {
        self.face_alive[fi as usize] = false;
        let f = self.faces[fi as usize];
        for &v in &f {
            let inc = &mut self.incident[v as usize];
            if let Some(pos) = inc.iter().position(|&g| g == fi) {
                inc.swap_remove(pos);
            }
        }
    }

    fn collapse(&mut self, keep: u32, remove: u32, fl: u32, fr: u32) {
        self.drop_face(fl);
        self.drop_face(fr);
        let moved: Vec<u32> = self.incident[remove as usize].clone();
        for fi in moved {
            for v in self.faces[fi as usize].iter_mut() {
                if *v == remove {
                    *v = keep;
                }
            }
            self.incident[keep as usize].push(fi);
        }
        self.incident[remove as usize].clear();
        self.vert_alive[remove as usize] = false;
        self.alive_count -= 1;
        let q = self.quadrics[remove as usize];
        self.quadrics[keep as usize].add(&q);
        self.version[keep as usize] += 1;
        self.version[remove as usize] += 1;
        for n in self.neighbors(keep) {
            self.version[n as usize] += 1;
        }
    }
}

/// Simplify down to `target_vertices` (floored at 4), recording the collapse
/// stream. If no legal collapse remains early, the stream is flagged stalled
/// and keeps the larger base.
pub fn simplify_to_target<S: Real>(
    mesh: &TriangleMesh<S>,
    target_vertices: usize,
) -> Result<PmStream<S>, MeshError> {
    mesh.validate()?;
    let target = target_vertices.max(4);
    let mut w = Working::new(mesh);
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();

    let mut seed_edges: Vec<(u32, u32)> = Vec::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let a = f[k].min(f[(k + 1) % 3]);
            let b = f[k].max(f[(k + 1) % 3]);
            seed_edges.push((a, b));
        }
    }
    seed_edges.sort_unstable();
    seed_edges.dedup();
    for (a, b) in seed_edges {
        let (cost, _, _) = w.pair_cost(a, b);
        heap.push(Candidate {
            cost,
            a,
            b,
            ver_a: w.version[a as usize],
            ver_b: w.version[b as usize],
        });
    }

    let mut collapses: Vec<CollapseRec<S>> = Vec::new();
    while w.alive_count > target {
        let Some(cand) = heap.pop() else {
            break; // stalled: no candidate edges left
        };
        let (a, b) = (cand.a, cand.b);
        if !w.vert_alive[a as usize] || !w.vert_alive[b as usize] {
            continue;
        }
        if cand.ver_a != w.version[a as usize] || cand.ver_b != w.version[b as usize] {
            continue; // stale entry; a fresh one was pushed on the last touch
        }
        let (_, keep, remove) = w.pair_cost(a, b);
        let Some((vl, vr, fl, fr)) = w.wings(keep, remove) else {
            continue; // became a boundary or vanished
        };
        if !w.collapse_legal(keep, remove, vl, vr) {
            continue;
        }
        collapses.push(CollapseRec {
            vs: keep,
            vt: remove,
            vl,
            vr,
            vt_position: w.positions[remove as usize],
            vs_position: w.positions[keep as usize],
        });
        w.collapse(keep, remove, fl, fr);
        for n in w.neighbors(keep) {
            let (x, y) = (keep.min(n), keep.max(n));
            let (cost, _, _) = w.pair_cost(x, y);
            heap.push(Candidate {
                cost,
                a: x,
                b: y,
                ver_a: w.version[x as usize],
                ver_b: w.version[y as usize],
            });
        }
    }
    let stalled = w.alive_count > target;

    // Renumber: surviving vertices keep relative order as 0..base; the vertex
    // removed by collapse k comes back as base + (n_collapses - 1 - k).
    let n_collapses = collapses.len();
    let mut new_id = vec![u32::MAX; w.positions.len()];
    let mut base_vertices = Vec::new();
    for (old, &alive) in w.vert_alive.iter().enumerate() {
        if alive {
            new_id[old] = base_vertices.len() as u32;
            base_vertices.push(w.positions[old]);
        }
    }
    let base_count = base_vertices.len();
    for (k, rec) in collapses.iter().enumerate() {
        new_id[rec.vt as usize] = (base_count + (n_collapses - 1 - k)) as u32;
    }
    let base_faces: Vec<[u32; 3]> = w
        .faces
        .iter()
        .zip(&w.face_alive)
        .filter(|(_, alive)| **alive)
        .map(|(f, _)| [new_id[f[0] as usize], new_id[f[1] as usize], new_id[f[2] as usize]])
        .collect();
    let base = TriangleMesh::new(mesh.object_id, base_vertices, base_faces);
    debug_assert!(base.validate().is_ok());

    let splits: Vec<VertexSplit<S>> = collapses
        .iter()
        .rev()
        .map(|rec| VertexSplit {
            vs: new_id[rec.vs as usize],
            vl: new_id[rec.vl as usize],
            vr: new_id[rec.vr as usize],
            vt_position: rec.vt_position,
            vs_position_after: rec.vs_position,
        })
        .collect();

    Ok(PmStream::assemble(
        mesh.object_id,
        base,
        splits,
        mesh.vertices.len(),
        stalled,
    ))
}

/// Simplify to the standard base size: a tenth of the vertices, rounded up,
/// never below 4. The stream spans [`LEVEL_COUNT`] resolution levels.
pub fn simplify<S: Real>(mesh: &TriangleMesh<S>) -> Result<PmStream<S>, MeshError> {
    if mesh.vertices.len() < MIN_SIMPLIFY_VERTICES {
        return Err(MeshError::MeshTooSmall {
            vertices: mesh.vertices.len(),
            minimum: MIN_SIMPLIFY_VERTICES,
        });
    }
    let target = mesh.vertices.len().div_ceil(LEVEL_COUNT);
    simplify_to_target(mesh, target)
}
