//! The edge collapse / vertex split operator pair.
//!
//! Collapsing interior edge (vs, vt) removes vt and the two wing faces and
//! returns the exact inverse record. Applying that record to the collapsed
//! mesh restores the original up to vertex numbering and face order, with
//! positions bit-identical. Only interior edges collapse: a split always adds
//! two faces, so a boundary collapse would have no valid inverse here.

use std::collections::HashMap;

use crate::real::Real;
use crate::vec3::Vec3;

use super::{MeshError, TriangleMesh};

/// Inverse of one edge collapse. `vs`, `vl`, `vr` index the mesh the split
/// applies to; the new vertex is appended at the end of the vertex list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexSplit<S> {
    pub vs: u32,
    pub vl: u32,
    pub vr: u32,
    pub vt_position: Vec3<S>,
    pub vs_position_after: Vec3<S>,
}

/// Wing vertices of interior edge (vs, vt): `vl` from the face holding the
/// directed edge vs->vt, `vr` from the one holding vt->vs.
fn find_wings<S: Real>(
    mesh: &TriangleMesh<S>,
    vs: u32,
    vt: u32,
) -> Result<(u32, u32, usize, usize), MeshError> {
    let mut left: Option<(u32, usize)> = None;
    let mut right: Option<(u32, usize)> = None;
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let a = f[k];
            let b = f[(k + 1) % 3];
            if a == vs && b == vt {
                left = Some((f[(k + 2) % 3], fi));
            } else if a == vt && b == vs {
                right = Some((f[(k + 2) % 3], fi));
            }
        }
    }
    match (left, right) {
        (Some((vl, fl)), Some((vr, fr))) => Ok((vl, vr, fl, fr)),
        (None, None) => Err(MeshError::NonExistentEdge { vs, vt }),
        _ => Err(MeshError::TopologyViolation {
            vs,
            vt,
            reason: "boundary edge; collapse is defined for interior edges only".into(),
        }),
    }
}

/// Collapse interior edge (vs, vt): vt disappears, vs keeps its position.
/// Returns the new mesh and the split that undoes the collapse. The input is
/// untouched; on error nothing is produced.
pub fn edge_collapse<S: Real>(
    mesh: &TriangleMesh<S>,
    vs: u32,
    vt: u32,
) -> Result<(TriangleMesh<S>, VertexSplit<S>), MeshError> {
    let n = mesh.vertices.len() as u32;
    if vs >= n || vt >= n || vs == vt {
        return Err(MeshError::NonExistentEdge { vs, vt });
    }
    let (vl, vr, fl, fr) = find_wings(mesh, vs, vt)?;
    if vl == vr {
        return Err(MeshError::TopologyViolation {
            vs,
            vt,
            reason: "wing vertices coincide; collapse would flatten the surface".into(),
        });
    }
    // Link condition: shared neighbors must be exactly the two wings,
    // otherwise the collapse pinches the surface together.
    let ns = mesh.neighbors(vs);
    let nt = mesh.neighbors(vt);
    let shared: Vec<u32> = ns.iter().copied().filter(|v| nt.contains(v)).collect();
    let mut wings = [vl.min(vr), vl.max(vr)];
    wings.sort_unstable();
    if shared != wings {
        return Err(MeshError::TopologyViolation {
            vs,
            vt,
            reason: format!("shared neighbors {shared:?} differ from wings {wings:?}"),
        });
    }

    let vt_position = mesh.vertices[vt as usize];
    let vs_position = mesh.vertices[vs as usize];

    let mut vertices = mesh.vertices.clone();
    let mut faces: Vec<[u32; 3]> = Vec::with_capacity(mesh.faces.len() - 2);
    for (fi, f) in mesh.faces.iter().enumerate() {
        if fi == fl || fi == fr {
            continue;
        }
        let mut g = *f;
        for v in g.iter_mut() {
            if *v == vt {
                *v = vs;
            }
        }
        faces.push(g);
    }
    // Drop vt by swapping in the last vertex; remap the moved index.
    let last = (vertices.len() - 1) as u32;
    vertices.swap_remove(vt as usize);
    let remap = |v: u32| if v == last { vt } else { v };
    if last != vt {
        for f in faces.iter_mut() {
            for v in f.iter_mut() {
                *v = remap(*v);
            }
        }
    }
    let out = TriangleMesh::new(mesh.object_id, vertices, faces);
    let split = VertexSplit {
        vs: remap(vs),
        vl: remap(vl),
        vr: remap(vr),
        vt_position,
        vs_position_after: vs_position,
    };
    Ok((out, split))
}

/// Wedge map around `vs`: for each face (vs, a, b), records a -> (b, face id).
fn wedges_at<S: Real>(mesh: &TriangleMesh<S>, vs: u32) -> HashMap<u32, (u32, usize)> {
    let mut out = HashMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            if f[k] == vs {
                out.insert(f[(k + 1) % 3], (f[(k + 2) % 3], fi));
            }
        }
    }
    out
}

/// Faces to hand over to the new vertex: the fan arc around `vs` walked from
/// `vr` to `vl`. Fails if the walk leaves the fan or never reaches `vl`.
pub(super) fn split_arc(
    wedges: &HashMap<u32, (u32, usize)>,
    vr: u32,
    vl: u32,
) -> Result<Vec<usize>, MeshError> {
    let mut moved = Vec::new();
    let mut cur = vr;
    let mut steps = 0usize;
    while cur != vl {
        let Some(&(nxt, face)) = wedges.get(&cur) else {
            return Err(MeshError::InvalidSplit(format!(
                "fan walk from {vr} toward {vl} stops at {cur}"
            )));
        };
        moved.push(face);
        cur = nxt;
        steps += 1;
        if steps > wedges.len() {
            return Err(MeshError::InvalidSplit(format!(
                "fan walk from {vr} never reaches {vl}"
            )));
        }
    }
    Ok(moved)
}

/// Undo a collapse: append the removed vertex, hand the arc of faces between
/// the wings back to it, and add the two wing faces. The input mesh is
/// untouched on error.
pub fn vertex_split<S: Real>(
    mesh: &TriangleMesh<S>,
    split: &VertexSplit<S>,
) -> Result<TriangleMesh<S>, MeshError> {
    let n = mesh.vertices.len() as u32;
    let VertexSplit { vs, vl, vr, .. } = *split;
    if vs >= n || vl >= n || vr >= n {
        return Err(MeshError::InvalidSplit(format!(
            "indices ({vs}, {vl}, {vr}) out of range for {n} vertices"
        )));
    }
    if vs == vl || vs == vr || vl == vr {
        return Err(MeshError::InvalidSplit(format!(
            "indices ({vs}, {vl}, {vr}) must be distinct"
        )));
    }
    let wedges = wedges_at(mesh, vs);
    if !wedges.contains_key(&vl) && !wedges.values().any(|&(b, _)| b == vl) {
        return Err(MeshError::InvalidSplit(format!("{vl} is not a neighbor of {vs}")));
    }
    if !wedges.contains_key(&vr) && !wedges.values().any(|&(b, _)| b == vr) {
        return Err(MeshError::InvalidSplit(format!("{vr} is not a neighbor of {vs}")));
    }
    let moved = split_arc(&wedges, vr, vl)?;

    let mut out = mesh.clone();
    let vt = out.vertices.len() as u32;
    out.vertices.push(split.vt_position);
    out.vertices[vs as usize] = split.vs_position_after;
    for &fi in &moved {
        for v in out.faces[fi].iter_mut() {
            if *v == vs {
                *v = vt;
            }
        }
    }
    out.faces.push([vs, vt, vl]);
    out.faces.push([vs, vr, vt]);
    Ok(out)
}
