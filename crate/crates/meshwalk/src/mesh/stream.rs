//! A simplified mesh packaged as resolution levels.
//!
//! Level 1 is the base mesh; each level above it owns a contiguous run of
//! vertex splits. Level boundaries put roughly a tenth of the original
//! vertex count at each step, so level k reconstructs to about k/10 of the
//! input. The split indices are arranged so that replaying levels in order
//! is always valid: split j reinserts vertex `base_count + j`.

use std::fs;
use std::path::Path;

use crate::real::Real;

use super::record::{
    decode_base_payload, decode_splits_payload, encode_base_payload, encode_splits_payload,
    ResolutionRecord,
};
use super::{vertex_split, MeshError, TriangleMesh, VertexSplit};

/// Number of resolution levels a full stream spans.
pub const LEVEL_COUNT: usize = 10;

const FILE_MAGIC: &[u8; 4] = b"MWPM";
const FILE_VERSION: u8 = 1;

/// Base mesh plus ordered splits, partitioned into resolution levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PmStream<S> {
    pub object_id: u32,
    pub base: TriangleMesh<S>,
    pub splits: Vec<VertexSplit<S>>,
    /// `level_boundaries[k - 1]` = splits applied once level k is complete.
    /// Monotone, starts at 0 for level 1, ends at `splits.len()`.
    pub level_boundaries: [usize; LEVEL_COUNT],
    pub original_vertices: usize,
    /// True when simplification ran out of legal collapses early, leaving a
    /// larger base than the target.
    pub stalled: bool,
}

impl<S: Real> PmStream<S> {
    /// Package a base and its split sequence, computing level boundaries
    /// against the original vertex count.
    pub fn assemble(
        object_id: u32,
        base: TriangleMesh<S>,
        splits: Vec<VertexSplit<S>>,
        original_vertices: usize,
        stalled: bool,
    ) -> Self {
        let base_count = base.vertex_count();
        debug_assert_eq!(base_count + splits.len(), original_vertices);
        let mut level_boundaries = [0usize; LEVEL_COUNT];
        for (i, b) in level_boundaries.iter_mut().enumerate() {
            let through = (original_vertices * (i + 1)).div_ceil(LEVEL_COUNT);
            *b = through.saturating_sub(base_count).min(splits.len());
        }
        level_boundaries[LEVEL_COUNT - 1] = splits.len();
        Self {
            object_id,
            base,
            splits,
            level_boundaries,
            original_vertices,
            stalled,
        }
    }

    /// Splits that level `level` adds on top of level `level - 1`. Level 1
    /// adds none. Panics outside 1..=[`LEVEL_COUNT`]; wire-facing callers
    /// validate levels at decode time.
    pub fn splits_for_level(&self, level: u8) -> &[VertexSplit<S>] {
        assert!(
            (1..=LEVEL_COUNT as u8).contains(&level),
            "level {level} outside 1..={LEVEL_COUNT}"
        );
        if level == 1 {
            return &[];
        }
        let hi = self.level_boundaries[level as usize - 1];
        let lo = self.level_boundaries[level as usize - 2];
        &self.splits[lo..hi]
    }

    /// Vertex count of the mesh once `level` is fully applied.
    pub fn vertex_count_at_level(&self, level: u8) -> usize {
        assert!((1..=LEVEL_COUNT as u8).contains(&level));
        self.base.vertex_count() + self.level_boundaries[level as usize - 1]
    }

    /// Replay splits through `level` and return the resulting mesh.
    pub fn reconstruct_to_level(&self, level: u8) -> Result<TriangleMesh<S>, MeshError> {
        assert!((1..=LEVEL_COUNT as u8).contains(&level));
        let mut mesh = self.base.clone();
        for s in &self.splits[..self.level_boundaries[level as usize - 1]] {
            mesh = vertex_split(&mesh, s)?;
        }
        Ok(mesh)
    }

    /// The transmissible record for one level of this stream.
    pub fn level_record(&self, level: u8) -> ResolutionRecord<S> {
        if level == 1 {
            ResolutionRecord::base(self.object_id, self.base.clone())
        } else {
            ResolutionRecord::splits(self.object_id, level, self.splits_for_level(level).to_vec())
        }
    }

    /// Serialize to a compact binary file. Level boundaries are derived data
    /// and recomputed on load.
    pub fn save(&self, path: &Path) -> Result<(), MeshError> {
        let mut out = Vec::new();
        out.extend_from_slice(FILE_MAGIC);
        out.push(FILE_VERSION);
        out.extend_from_slice(&self.object_id.to_le_bytes());
        out.extend_from_slice(&(self.original_vertices as u64).to_le_bytes());
        out.push(self.stalled as u8);
        encode_base_payload(&self.base, &mut out);
        encode_splits_payload(&self.splits, &mut out);
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let bytes = fs::read(path)?;
        let bad = |m: String| MeshError::MalformedRecord(m);
        if bytes.len() < 18 {
            return Err(bad(format!("stream file is {} bytes, too short", bytes.len())));
        }
        if &bytes[0..4] != FILE_MAGIC {
            return Err(bad("not a mesh stream file (bad magic)".into()));
        }
        if bytes[4] != FILE_VERSION {
            return Err(bad(format!("unsupported stream file version {}", bytes[4])));
        }
        let object_id = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
        let original_vertices = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
        let stalled = match bytes[17] {
            0 => false,
            1 => true,
            v => return Err(bad(format!("bad stalled flag {v}"))),
        };
        let rest = &bytes[18..];
        if rest.len() < 8 {
            return Err(bad("stream file truncated before base mesh".into()));
        }
        let vcount = u32::from_le_bytes(rest[0..4].try_into().unwrap()) as usize;
        let fcount = u32::from_le_bytes(rest[4..8].try_into().unwrap()) as usize;
        let base_len = 8 + vcount * 24 + fcount * 12;
        if rest.len() < base_len {
            return Err(bad("stream file truncated inside base mesh".into()));
        }
        let base = decode_base_payload(object_id, &rest[..base_len])?;
        let splits = decode_splits_payload(&rest[base_len..])?;
        if base.vertex_count() + splits.len() != original_vertices {
            return Err(bad(format!(
                "vertex accounting broken: base {} + splits {} != original {}",
                base.vertex_count(),
                splits.len(),
                original_vertices
            )));
        }
        Ok(Self::assemble(object_id, base, splits, original_vertices, stalled))
    }
}
