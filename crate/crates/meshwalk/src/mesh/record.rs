//! Wire form of one resolution level.
//!
//! A record is a 9-byte little-endian header (object id, level, payload
//! length) followed by the payload. Level 1 carries a whole base mesh;
//! higher levels carry a run of vertex splits at 60 bytes each. Synthetic
//! records carry no real geometry, only a fixed byte size, so catalog-scale
//! studies can run without mesh assets; they encode as zero padding and are
//! rejected on decode.

use crate::real::Real;
use crate::vec3::Vec3;

use super::stream::LEVEL_COUNT;
use super::{MeshError, TriangleMesh, VertexSplit};

/// Payload bytes of a synthetic base-mesh record.
pub const SYNTHETIC_BASE_BYTES: u32 = 8192;
/// Payload bytes of each synthetic refinement record.
pub const SYNTHETIC_LEVEL_BYTES: u32 = 5325;

pub const RECORD_HEADER_BYTES: u32 = 9;
pub const SPLIT_WIRE_BYTES: usize = 60;

/// What a record carries.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordPayload<S> {
    /// Level 1: the complete lowest-resolution mesh.
    Base(TriangleMesh<S>),
    /// Levels 2 and up: splits to apply on top of the previous level.
    Splits(Vec<VertexSplit<S>>),
    /// Sized placeholder with no geometry.
    Synthetic,
}

/// One transmissible unit of resolution data.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionRecord<S> {
    pub object_id: u32,
    /// 1-based resolution level, 1 ..= [`LEVEL_COUNT`].
    pub level: u8,
    /// Payload length on the wire; this is the size the channel model charges.
    pub byte_size: u32,
    pub payload: RecordPayload<S>,
}

impl<S: Real> ResolutionRecord<S> {
    pub fn base(object_id: u32, mesh: TriangleMesh<S>) -> Self {
        let byte_size = base_payload_len(&mesh);
        Self {
            object_id,
            level: 1,
            byte_size,
            payload: RecordPayload::Base(mesh),
        }
    }

    pub fn splits(object_id: u32, level: u8, splits: Vec<VertexSplit<S>>) -> Self {
        debug_assert!((2..=LEVEL_COUNT as u8).contains(&level));
        let byte_size = splits_payload_len(&splits);
        Self {
            object_id,
            level,
            byte_size,
            payload: RecordPayload::Splits(splits),
        }
    }

    /// Placeholder record with the standard synthetic size for its level.
    pub fn synthetic(object_id: u32, level: u8) -> Self {
        let byte_size = if level == 1 {
            SYNTHETIC_BASE_BYTES
        } else {
            SYNTHETIC_LEVEL_BYTES
        };
        Self {
            object_id,
            level,
            byte_size,
            payload: RecordPayload::Synthetic,
        }
    }

    /// Placeholder record with an explicit payload size, for catalogs that
    /// serve pre-bundled blobs.
    pub fn sized_placeholder(object_id: u32, level: u8, byte_size: u32) -> Self {
        Self {
            object_id,
            level,
            byte_size,
            payload: RecordPayload::Synthetic,
        }
    }

    /// Header plus payload length: the full framed size.
    pub fn wire_len(&self) -> u32 {
        RECORD_HEADER_BYTES + self.byte_size
    }
}

fn base_payload_len<S>(mesh: &TriangleMesh<S>) -> u32 {
    (8 + mesh.vertices.len() * 24 + mesh.faces.len() * 12) as u32
}

fn splits_payload_len<S>(splits: &[VertexSplit<S>]) -> u32 {
    (4 + splits.len() * SPLIT_WIRE_BYTES) as u32
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_vec3<S: Real>(out: &mut Vec<u8>, v: Vec3<S>) {
    put_f64(out, v.x.to_wire());
    put_f64(out, v.y.to_wire());
    put_f64(out, v.z.to_wire());
}

/// Little-endian reader over a byte slice; every under-run is a
/// [`MeshError::MalformedRecord`].
struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, at: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], MeshError> {
        if self.buf.len() - self.at < n {
            return Err(MeshError::MalformedRecord(format!(
                "truncated while reading {what}: need {n} bytes at offset {}, have {}",
                self.at,
                self.buf.len() - self.at
            )));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, MeshError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, MeshError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, MeshError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn vec3<S: Real>(&mut self, what: &str) -> Result<Vec3<S>, MeshError> {
        Ok(Vec3::new(
            S::from_wire(self.f64(what)?),
            S::from_wire(self.f64(what)?),
            S::from_wire(self.f64(what)?),
        ))
    }

    fn done(&self) -> bool {
        self.at == self.buf.len()
    }
}

pub fn encode_base_payload<S: Real>(mesh: &TriangleMesh<S>, out: &mut Vec<u8>) {
    put_u32(out, mesh.vertices.len() as u32);
    put_u32(out, mesh.faces.len() as u32);
    for &v in &mesh.vertices {
        put_vec3(out, v);
    }
    for f in &mesh.faces {
        for &ix in f {
            put_u32(out, ix);
        }
    }
}

pub fn decode_base_payload<S: Real>(
    object_id: u32,
    bytes: &[u8],
) -> Result<TriangleMesh<S>, MeshError> {
    let mut r = Reader::new(bytes);
    let vcount = r.u32("vertex count")? as usize;
    let fcount = r.u32("face count")? as usize;
    let mut vertices = Vec::with_capacity(vcount);
    for _ in 0..vcount {
        vertices.push(r.vec3("vertex")?);
    }
    let mut faces = Vec::with_capacity(fcount);
    for _ in 0..fcount {
        faces.push([r.u32("face")?, r.u32("face")?, r.u32("face")?]);
    }
    if !r.done() {
        return Err(MeshError::MalformedRecord(format!(
            "{} trailing bytes after base mesh",
            bytes.len() - r.at
        )));
    }
    let mesh = TriangleMesh::new(object_id, vertices, faces);
    mesh.validate()?;
    Ok(mesh)
}

pub fn encode_splits_payload<S: Real>(splits: &[VertexSplit<S>], out: &mut Vec<u8>) {
    put_u32(out, splits.len() as u32);
    for s in splits {
        put_u32(out, s.vs);
        put_u32(out, s.vl);
        put_u32(out, s.vr);
        put_vec3(out, s.vt_position);
        put_vec3(out, s.vs_position_after);
    }
}

pub fn decode_splits_payload<S: Real>(bytes: &[u8]) -> Result<Vec<VertexSplit<S>>, MeshError> {
    let mut r = Reader::new(bytes);
    let count = r.u32("split count")? as usize;
    let mut splits = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        splits.push(VertexSplit {
            vs: r.u32("split")?,
            vl: r.u32("split")?,
            vr: r.u32("split")?,
            vt_position: r.vec3("split")?,
            vs_position_after: r.vec3("split")?,
        });
    }
    if !r.done() {
        return Err(MeshError::MalformedRecord(format!(
            "{} trailing bytes after splits",
            bytes.len() - r.at
        )));
    }
    Ok(splits)
}

/// Frame a record for the wire. Synthetic payloads become zero padding of
/// their declared size, so the framed length is honest even without geometry.
pub fn encode_record<S: Real>(record: &ResolutionRecord<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(record.wire_len() as usize);
    put_u32(&mut out, record.object_id);
    out.push(record.level);
    match &record.payload {
        RecordPayload::Base(mesh) => {
            let mut body = Vec::new();
            encode_base_payload(mesh, &mut body);
            put_u32(&mut out, body.len() as u32);
            out.extend_from_slice(&body);
        }
        RecordPayload::Splits(splits) => {
            let mut body = Vec::new();
            encode_splits_payload(splits, &mut body);
            put_u32(&mut out, body.len() as u32);
            out.extend_from_slice(&body);
        }
        RecordPayload::Synthetic => {
            put_u32(&mut out, record.byte_size);
            out.resize(out.len() + record.byte_size as usize, 0);
        }
    }
    debug_assert_eq!(out.len() as u32, record.wire_len());
    out
}

/// Parse one framed record. The buffer must hold exactly one record.
pub fn decode_record<S: Real>(bytes: &[u8]) -> Result<ResolutionRecord<S>, MeshError> {
    let mut r = Reader::new(bytes);
    let object_id = r.u32("header object id")?;
    let level = r.u8("header level")?;
    let payload_length = r.u32("header payload length")?;
    if level == 0 || level as usize > LEVEL_COUNT {
        return Err(MeshError::MalformedRecord(format!(
            "level {level} outside 1..={LEVEL_COUNT}"
        )));
    }
    let body = r.take(payload_length as usize, "payload")?;
    if !r.done() {
        return Err(MeshError::MalformedRecord(format!(
            "{} trailing bytes after record",
            bytes.len() - r.at
        )));
    }
    let payload = if level == 1 {
        RecordPayload::Base(decode_base_payload(object_id, body)?)
    } else {
        RecordPayload::Splits(decode_splits_payload(body)?)
    };
    Ok(ResolutionRecord {
        object_id,
        level,
        byte_size: payload_length,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{simplify, uv_sphere};

    fn sample_stream() -> crate::mesh::PmStream<f64> {
        simplify(&uv_sphere::<f64>(7, 14, 8, 1.0)).unwrap()
    }

    #[test]
    fn base_record_round_trips() {
        let pm = sample_stream();
        let rec = ResolutionRecord::base(7, pm.base.clone());
        assert_eq!(rec.level, 1);
        let bytes = encode_record(&rec);
        assert_eq!(bytes.len() as u32, rec.wire_len());
        let back: ResolutionRecord<f64> = decode_record(&bytes).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn splits_record_round_trips() {
        let pm = sample_stream();
        let rec = ResolutionRecord::splits(7, 4, pm.splits_for_level(4).to_vec());
        let bytes = encode_record(&rec);
        let back: ResolutionRecord<f64> = decode_record(&bytes).unwrap();
        assert_eq!(back, rec);
        assert_eq!(
            rec.byte_size as usize,
            4 + SPLIT_WIRE_BYTES * pm.splits_for_level(4).len()
        );
    }

    #[test]
    fn synthetic_sizes_are_fixed() {
        let base = ResolutionRecord::<f64>::synthetic(1, 1);
        let upper = ResolutionRecord::<f64>::synthetic(1, 6);
        assert_eq!(base.byte_size, 8192);
        assert_eq!(upper.byte_size, 5325);
        let total: u32 = (1..=LEVEL_COUNT as u8)
            .map(|l| ResolutionRecord::<f64>::synthetic(1, l).byte_size)
            .sum();
        assert_eq!(total, 56_117);
    }

    #[test]
    fn synthetic_encodes_as_padding_and_never_decodes() {
        let rec = ResolutionRecord::<f64>::synthetic(3, 1);
        let bytes = encode_record(&rec);
        assert_eq!(bytes.len() as u32, 9 + 8192);
        assert!(matches!(
            decode_record::<f64>(&bytes),
            Err(MeshError::Format { .. } | MeshError::MalformedRecord(_) | MeshError::NotManifold(_))
        ));
    }

    #[test]
    fn truncated_header_is_rejected() {
        let pm = sample_stream();
        let bytes = encode_record(&ResolutionRecord::base(7, pm.base.clone()));
        for cut in [0, 4, 8] {
            let err = decode_record::<f64>(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, MeshError::MalformedRecord(_)), "cut at {cut}");
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let pm = sample_stream();
        let bytes = encode_record(&ResolutionRecord::splits(
            7,
            2,
            pm.splits_for_level(2).to_vec(),
        ));
        let err = decode_record::<f64>(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, MeshError::MalformedRecord(_)));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let pm = sample_stream();
        let mut bytes = encode_record(&ResolutionRecord::base(7, pm.base.clone()));
        bytes.push(0xAB);
        let err = decode_record::<f64>(&bytes).unwrap_err();
        assert!(matches!(err, MeshError::MalformedRecord(_)));
    }

    #[test]
    fn zero_level_is_rejected() {
        let mut bytes = Vec::new();
        put_u32(&mut bytes, 1);
        bytes.push(0);
        put_u32(&mut bytes, 0);
        let err = decode_record::<f64>(&bytes).unwrap_err();
        assert!(matches!(err, MeshError::MalformedRecord(_)));
    }

    #[test]
    fn level_above_range_is_rejected() {
        let mut bytes = Vec::new();
        put_u32(&mut bytes, 1);
        bytes.push(11);
        put_u32(&mut bytes, 0);
        let err = decode_record::<f64>(&bytes).unwrap_err();
        assert!(matches!(err, MeshError::MalformedRecord(_)));
    }

    #[test]
    fn f32_mesh_round_trips_exactly() {
        let m32 = uv_sphere::<f32>(9, 14, 8, 1.0);
        let pm = simplify(&m32).unwrap();
        let rec = ResolutionRecord::base(9, pm.base.clone());
        let back: ResolutionRecord<f32> = decode_record(&encode_record(&rec)).unwrap();
        assert_eq!(back.payload, rec.payload);
    }
}
