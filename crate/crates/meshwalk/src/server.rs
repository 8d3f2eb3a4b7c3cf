//! Record server: table-backed object storage, device capability clamping,
//! and per-client delivery bookkeeping.
//!
//! The store keeps three row tables (base vertices, vertex splits, faces),
//! the shape a relational backend would use; synthetic objects sit beside
//! them as sized placeholders with no geometry. A catalog wraps the store
//! with a streaming mode: progressive serving exposes all ten levels, static
//! serving collapses each object to one cumulative blob.
//!
//! Sessions make delivery idempotent: the server remembers the highest level
//! enqueued per (client, object) and what is still on the wire, and re-sends
//! a level only when the client's own request reports a cached prefix below
//! it (which happens after eviction).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use thiserror::Error;

use crate::mesh::{
    MeshError, PmStream, ResolutionRecord, TriangleMesh, VertexSplit, LEVEL_COUNT,
    SYNTHETIC_BASE_BYTES, SYNTHETIC_LEVEL_BYTES,
};
use crate::scene::Point;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("no device profile registered for client {client_id}")]
    UnknownClient { client_id: u32 },
    #[error("object {object_id} not in store")]
    UnknownObject { object_id: u32 },
    #[error("empty level range {from}..{to}")]
    EmptyRange { from: u8, to: u8 },
    #[error("manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceType {
    TypeI,
    TypeII,
}

/// What a client's hardware can render.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProfile {
    pub client_id: u32,
    pub device_type: DeviceType,
    pub max_level: u8,
}

impl DeviceProfile {
    pub fn type_i(client_id: u32) -> Self {
        Self {
            client_id,
            device_type: DeviceType::TypeI,
            max_level: 8,
        }
    }

    pub fn type_ii(client_id: u32) -> Self {
        Self {
            client_id,
            device_type: DeviceType::TypeII,
            max_level: 1,
        }
    }
}

/// Cap a requested level at what the device can render.
pub fn clamp_resolution(level: u8, profile: &DeviceProfile) -> u8 {
    level.min(profile.max_level)
}

/// One client-to-server ask: "bring object up to `level`; my cached prefix
/// currently ends at `have`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionRequest {
    pub request_id: u64,
    pub client_id: u32,
    pub object_id: u32,
    pub level: u8,
    pub have: u8,
    pub issued_at: f64,
}

#[derive(Debug, Clone, Copy)]
struct BaseRow {
    position: Point,
    object_id: u32,
}

#[derive(Debug, Clone, Copy)]
struct VsplitRow {
    object_id: u32,
    resolution: u8,
    split: VertexSplit<f64>,
}

#[derive(Debug, Clone, Copy)]
#[allow(dead_code)] // face rows mirror the backing-table shape; serving uses split rows
struct FaceRow {
    indices: [u32; 3],
    object_id: u32,
    resolution: u8,
}

#[derive(Debug, Clone)]
enum StoredObject {
    /// Real geometry; the rows live in the shared tables.
    Real,
    /// Sized placeholder: bytes per level, no geometry.
    Synthetic { level_bytes: Vec<u32> },
}

/// Three-table object storage plus synthetic placeholders.
#[derive(Debug, Clone, Default)]
pub struct ObjectStore {
    base_rows: Vec<BaseRow>,
    vsplit_rows: Vec<VsplitRow>,
    face_rows: Vec<FaceRow>,
    objects: BTreeMap<u32, StoredObject>,
}

impl ObjectStore {
    /// Explode a progressive stream into table rows.
    pub fn add_stream(&mut self, stream: &PmStream<f64>) {
        let id = stream.object_id;
        for v in &stream.base.vertices {
            self.base_rows.push(BaseRow {
                position: *v,
                object_id: id,
            });
        }
        for f in &stream.base.faces {
            self.face_rows.push(FaceRow {
                indices: *f,
                object_id: id,
                resolution: 1,
            });
        }
        let mut vt = stream.base.vertices.len() as u32;
        for level in 2..=LEVEL_COUNT as u8 {
            for split in stream.splits_for_level(level) {
                self.vsplit_rows.push(VsplitRow {
                    object_id: id,
                    resolution: level,
                    split: *split,
                });
                // The two faces a split introduces, by the refined mesh's
                // numbering: each split's new vertex goes at the end.
                for tri in [[split.vs, vt, split.vl], [split.vs, split.vr, vt]] {
                    self.face_rows.push(FaceRow {
                        indices: tri,
                        object_id: id,
                        resolution: level,
                    });
                }
                vt += 1;
            }
        }
        self.objects.insert(id, StoredObject::Real);
    }

    /// Register a synthetic object with the standard record sizing: an 8 KiB
    /// base record and a fixed-size refinement record per higher level.
    pub fn add_synthetic(&mut self, object_id: u32) {
        let mut level_bytes = vec![SYNTHETIC_BASE_BYTES];
        level_bytes.resize(LEVEL_COUNT, SYNTHETIC_LEVEL_BYTES);
        self.objects
            .insert(object_id, StoredObject::Synthetic { level_bytes });
    }

    pub fn contains(&self, object_id: u32) -> bool {
        self.objects.contains_key(&object_id)
    }

    pub fn object_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.objects.keys().copied()
    }

    /// Assemble the base-mesh record for one object from table rows.
    fn base_record(&self, object_id: u32) -> Result<ResolutionRecord<f64>, ServerError> {
        match self.objects.get(&object_id) {
            None => Err(ServerError::UnknownObject { object_id }),
            Some(StoredObject::Synthetic { level_bytes }) => Ok(
                ResolutionRecord::sized_placeholder(object_id, 1, level_bytes[0]),
            ),
            Some(StoredObject::Real) => {
                let vertices: Vec<Vec3<f64>> = self
                    .base_rows
                    .iter()
                    .filter(|r| r.object_id == object_id)
                    .map(|r| r.position)
                    .collect();
                let faces: Vec<[u32; 3]> = self
                    .face_rows
                    .iter()
                    .filter(|r| r.object_id == object_id && r.resolution == 1)
                    .map(|r| r.indices)
                    .collect();
                let mesh = TriangleMesh::new(object_id, vertices, faces);
                Ok(ResolutionRecord::base(object_id, mesh))
            }
        }
    }

    /// Assemble one refinement-level record (level ≥ 2) from table rows.
    fn level_record(&self, object_id: u32, level: u8) -> Result<ResolutionRecord<f64>, ServerError> {
        debug_assert!(level >= 2);
        match self.objects.get(&object_id) {
            None => Err(ServerError::UnknownObject { object_id }),
            Some(StoredObject::Synthetic { level_bytes }) => Ok(
                ResolutionRecord::sized_placeholder(object_id, level, level_bytes[level as usize - 1]),
            ),
            Some(StoredObject::Real) => {
                let splits: Vec<VertexSplit<f64>> = self
                    .vsplit_rows
                    .iter()
                    .filter(|r| r.object_id == object_id && r.resolution == level)
                    .map(|r| r.split)
                    .collect();
                Ok(ResolutionRecord::splits(object_id, level, splits))
            }
        }
    }
}

/// How the catalog exposes an object's records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// All ten levels individually.
    Progressive,
    /// One cumulative blob per object, covering levels 1..=top_level,
    /// served as a single level-1 record.
    Static { top_level: u8 },
}

/// Byte sizes the rest of the system plans against: per-level record sizes
/// as served (mode-dependent) and the full-detail total (mode-independent,
/// which is what perceived quality is measured against).
#[derive(Debug, Clone, Default)]
pub struct SizeTable {
    entries: BTreeMap<u32, ObjectSizes>,
}

#[derive(Debug, Clone)]
pub struct ObjectSizes {
    /// Served record size per level; index k-1 is level k.
    pub level_bytes: Vec<u32>,
    /// Bytes of the complete ten-level stream.
    pub optimal_bytes: u64,
}

impl SizeTable {
    pub fn object(&self, object_id: u32) -> Option<&ObjectSizes> {
        self.entries.get(&object_id)
    }

    pub fn record_bytes(&self, object_id: u32, level: u8) -> Option<u32> {
        self.entries
            .get(&object_id)?
            .level_bytes
            .get(level as usize - 1)
            .copied()
    }

    pub fn top_level(&self, object_id: u32) -> Option<u8> {
        self.entries
            .get(&object_id)
            .map(|e| e.level_bytes.len() as u8)
    }

    pub fn object_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }
}

/// Store plus serving mode plus precomputed sizes.
#[derive(Debug, Clone)]
pub struct ObjectCatalog {
    store: ObjectStore,
    mode: StreamMode,
    sizes: SizeTable,
}

impl ObjectCatalog {
    pub fn new(store: ObjectStore, mode: StreamMode) -> Result<Self, ServerError> {
        let mut sizes = SizeTable::default();
        for object_id in store.object_ids().collect::<Vec<_>>() {
            let mut progressive = Vec::with_capacity(LEVEL_COUNT);
            progressive.push(store.base_record(object_id)?.byte_size);
            for level in 2..=LEVEL_COUNT as u8 {
                progressive.push(store.level_record(object_id, level)?.byte_size);
            }
            let optimal_bytes: u64 = progressive.iter().map(|&b| u64::from(b)).sum();
            let level_bytes = match mode {
                StreamMode::Progressive => progressive,
                StreamMode::Static { top_level } => {
                    let blob: u64 = progressive[..top_level as usize]
                        .iter()
                        .map(|&b| u64::from(b))
                        .sum();
                    vec![u32::try_from(blob).expect("blob size fits u32")]
                }
            };
            sizes.entries.insert(
                object_id,
                ObjectSizes {
                    level_bytes,
                    optimal_bytes,
                },
            );
        }
        Ok(Self { store, mode, sizes })
    }

    /// Build a catalog of `count` synthetic objects with ids 0..count.
    pub fn synthetic(count: u32, mode: StreamMode) -> Self {
        let mut store = ObjectStore::default();
        for id in 0..count {
            store.add_synthetic(id);
        }
        Self::new(store, mode).expect("synthetic store cannot fail sizing")
    }

    /// Load a manifest: one object per line, `id x y z synthetic` or
    /// `id x y z pm <path>` (path relative to the manifest). Returns the
    /// catalog and the listed positions.
    pub fn load_manifest(
        path: &Path,
        mode: StreamMode,
    ) -> Result<(Self, Vec<(u32, Point)>), ServerError> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut store = ObjectStore::default();
        let mut positions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let bad = |reason: &str| ServerError::BadManifest {
                line,
                reason: reason.to_string(),
            };
            if fields.len() < 5 {
                return Err(bad("expected: id x y z synthetic|pm <path>"));
            }
            let object_id: u32 = fields[0].parse().map_err(|_| bad("bad object id"))?;
            let mut coord = [0.0; 3];
            for (i, c) in coord.iter_mut().enumerate() {
                *c = fields[1 + i].parse().map_err(|_| bad("bad coordinate"))?;
            }
            if store.contains(object_id) {
                return Err(bad("duplicate object id"));
            }
            match fields[4] {
                "synthetic" => store.add_synthetic(object_id),
                "pm" => {
                    let rel = fields.get(5).ok_or_else(|| bad("pm needs a path"))?;
                    let stream = PmStream::<f64>::load(&dir.join(rel))?;
                    if stream.object_id != object_id {
                        return Err(bad("stream object id differs from manifest id"));
                    }
                    store.add_stream(&stream);
                }
                other => return Err(bad(&format!("unknown kind {other:?}"))),
            }
            positions.push((object_id, Vec3::new(coord[0], coord[1], coord[2])));
        }
        Ok((Self::new(store, mode)?, positions))
    }

    pub fn mode(&self) -> StreamMode {
        self.mode
    }

    pub fn sizes(&self) -> &SizeTable {
        &self.sizes
    }

    pub fn contains(&self, object_id: u32) -> bool {
        self.store.contains(object_id)
    }

    /// Records for levels `from..=to` in ascending order, as served in the
    /// catalog's mode.
    pub fn fetch_records(
        &self,
        object_id: u32,
        from_level: u8,
        to_level: u8,
    ) -> Result<Vec<ResolutionRecord<f64>>, ServerError> {
        if from_level > to_level || from_level < 1 {
            return Err(ServerError::EmptyRange {
                from: from_level,
                to: to_level,
            });
        }
        let sizes = self
            .sizes
            .object(object_id)
            .ok_or(ServerError::UnknownObject { object_id })?;
        let top = sizes.level_bytes.len() as u8;
        if to_level > top {
            return Err(ServerError::EmptyRange {
                from: from_level,
                to: to_level,
            });
        }
        match self.mode {
            StreamMode::Static { .. } => {
                // Single-blob serving: only level 1 exists.
                Ok(vec![ResolutionRecord::sized_placeholder(
                    object_id,
                    1,
                    sizes.level_bytes[0],
                )])
            }
            StreamMode::Progressive => {
                let mut records = Vec::with_capacity((to_level - from_level + 1) as usize);
                for level in from_level..=to_level {
                    records.push(if level == 1 {
                        self.store.base_record(object_id)?
                    } else {
                        self.store.level_record(object_id, level)?
                    });
                }
                Ok(records)
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Session {
    /// Highest level ever enqueued for this (client, object).
    high_water: u8,
    /// Levels enqueued but not yet confirmed delivered.
    in_flight: BTreeSet<u8>,
    last_touch: f64,
}

/// The serving endpoint: catalog, registered devices, delivery sessions.
#[derive(Debug)]
pub struct Server {
    catalog: ObjectCatalog,
    profiles: BTreeMap<u32, DeviceProfile>,
    sessions: HashMap<(u32, u32), Session>,
    /// Seconds of inactivity after which a session forgets its high-water
    /// mark; 0 disables expiry.
    session_ttl: f64,
    /// When false, device capability clamping is bypassed.
    constrained: bool,
}

impl Server {
    pub fn new(catalog: ObjectCatalog, session_ttl: f64, constrained: bool) -> Self {
        Self {
            catalog,
            profiles: BTreeMap::new(),
            sessions: HashMap::new(),
            session_ttl,
            constrained,
        }
    }

    pub fn catalog(&self) -> &ObjectCatalog {
        &self.catalog
    }

    pub fn register_client(&mut self, profile: DeviceProfile) {
        self.profiles.insert(profile.client_id, profile);
    }

    /// Decide what to send for one request. Levels the session shows as
    /// already enqueued are skipped; a level below the high-water mark is
    /// re-sent only when the request's `have` shows the client lost it.
    pub fn handle_request(
        &mut self,
        req: &ResolutionRequest,
        now: f64,
    ) -> Result<Vec<ResolutionRecord<f64>>, ServerError> {
        let profile = self
            .profiles
            .get(&req.client_id)
            .ok_or(ServerError::UnknownClient {
                client_id: req.client_id,
            })?;
        if !self.catalog.contains(req.object_id) {
            return Err(ServerError::UnknownObject {
                object_id: req.object_id,
            });
        }
        let level = if self.constrained {
            clamp_resolution(req.level, profile)
        } else {
            req.level
        };
        let top = self
            .catalog
            .sizes()
            .top_level(req.object_id)
            .unwrap_or(LEVEL_COUNT as u8);
        let level = level.min(top).max(1);

        let session = self
            .sessions
            .entry((req.client_id, req.object_id))
            .or_default();
        if self.session_ttl > 0.0 && now - session.last_touch > self.session_ttl {
            *session = Session::default();
        }
        session.last_touch = now;

        let records = if level > session.high_water {
            let from = session.high_water + 1;
            for l in from..=level {
                session.in_flight.insert(l);
            }
            session.high_water = level;
            self.catalog.fetch_records(req.object_id, from, level)?
        } else if session.in_flight.contains(&level) || req.have >= level {
            Vec::new()
        } else {
            // The client reports a cached prefix below this level, so the
            // earlier delivery is gone from its cache; send it again.
            session.in_flight.insert(level);
            self.catalog.fetch_records(req.object_id, level, level)?
        };
        Ok(records)
    }

    /// Confirm one record finished its downlink transmission.
    pub fn delivery_completed(&mut self, client_id: u32, object_id: u32, level: u8, now: f64) {
        if let Some(session) = self.sessions.get_mut(&(client_id, object_id)) {
            session.in_flight.remove(&level);
            session.last_touch = now;
        }
    }

    pub fn high_water(&self, client_id: u32, object_id: u32) -> u8 {
        self.sessions
            .get(&(client_id, object_id))
            .map_or(0, |s| s.high_water)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::simplify;

    fn synthetic_server(constrained: bool) -> Server {
        let catalog = ObjectCatalog::synthetic(3, StreamMode::Progressive);
        let mut server = Server::new(catalog, 0.0, constrained);
        server.register_client(DeviceProfile::type_i(1));
        server.register_client(DeviceProfile::type_ii(2));
        server
    }

    fn req(client_id: u32, object_id: u32, level: u8, have: u8) -> ResolutionRequest {
        ResolutionRequest {
            request_id: 0,
            client_id,
            object_id,
            level,
            have,
            issued_at: 0.0,
        }
    }

    fn levels(records: &[ResolutionRecord<f64>]) -> Vec<u8> {
        records.iter().map(|r| r.level).collect()
    }

    #[test]
    fn clamp_caps_by_device_and_never_raises() {
        let type_i = DeviceProfile::type_i(1);
        let type_ii = DeviceProfile::type_ii(2);
        assert_eq!(clamp_resolution(10, &type_i), 8);
        assert_eq!(clamp_resolution(6, &type_ii), 1);
        assert_eq!(clamp_resolution(3, &type_i), 3);
        for level in 1..=10u8 {
            let once = clamp_resolution(level, &type_i);
            assert!(once <= level);
            assert_eq!(clamp_resolution(once, &type_i), once);
        }
    }

    #[test]
    fn synthetic_fetch_sizes_and_ranges() {
        let catalog = ObjectCatalog::synthetic(1, StreamMode::Progressive);
        let base = catalog.fetch_records(0, 1, 1).unwrap();
        assert_eq!(levels(&base), vec![1]);
        assert_eq!(base[0].byte_size, 8192);
        let mids = catalog.fetch_records(0, 2, 5).unwrap();
        assert_eq!(levels(&mids), vec![2, 3, 4, 5]);
        assert!(mids.iter().all(|r| r.byte_size == 5325));
        assert!(matches!(
            catalog.fetch_records(0, 5, 2),
            Err(ServerError::EmptyRange { .. })
        ));
        assert!(matches!(
            catalog.fetch_records(9, 1, 1),
            Err(ServerError::UnknownObject { object_id: 9 })
        ));
        let total: u64 = (1..=10)
            .map(|l| u64::from(catalog.sizes().record_bytes(0, l).unwrap()))
            .sum();
        assert_eq!(total, 56_117);
        assert_eq!(catalog.sizes().object(0).unwrap().optimal_bytes, 56_117);
    }

    #[test]
    fn static_catalog_serves_one_cumulative_blob() {
        let half = ObjectCatalog::synthetic(1, StreamMode::Static { top_level: 5 });
        assert_eq!(half.sizes().record_bytes(0, 1), Some(29_492));
        assert_eq!(half.sizes().top_level(0), Some(1));
        // Optimal bytes stay at the full-detail total regardless of mode.
        assert_eq!(half.sizes().object(0).unwrap().optimal_bytes, 56_117);
        let full = ObjectCatalog::synthetic(1, StreamMode::Static { top_level: 10 });
        assert_eq!(full.sizes().record_bytes(0, 1), Some(56_117));
        let records = full.fetch_records(0, 1, 1).unwrap();
        assert_eq!(records[0].byte_size, 56_117);
    }

    #[test]
    fn table_rows_reproduce_codec_reconstruction() {
        let sphere = crate::mesh::uv_sphere::<f64>(5, 14, 8, 1.0);
        let stream = simplify(&sphere).unwrap();
        let mut store = ObjectStore::default();
        store.add_stream(&stream);
        let catalog = ObjectCatalog::new(store, StreamMode::Progressive).unwrap();
        for target in [1u8, 4, 10] {
            let records = catalog.fetch_records(5, 1, target).unwrap();
            let crate::mesh::RecordPayload::Base(mut mesh) = records[0].payload.clone() else {
                panic!("level 1 record is not a base mesh");
            };
            for record in &records[1..] {
                let crate::mesh::RecordPayload::Splits(splits) = &record.payload else {
                    panic!("level {} record is not splits", record.level);
                };
                for split in splits {
                    mesh = crate::mesh::vertex_split(&mesh, split).unwrap();
                }
            }
            let expect = stream.reconstruct_to_level(target).unwrap();
            assert!(
                mesh.canonically_equal(&expect),
                "level {target} differs from codec reconstruction"
            );
        }
    }

    #[test]
    fn fresh_request_enqueues_whole_prefix() {
        let mut server = synthetic_server(true);
        let records = server.handle_request(&req(1, 0, 3, 0), 0.0).unwrap();
        assert_eq!(levels(&records), vec![1, 2, 3]);
        assert_eq!(server.high_water(1, 0), 3);
    }

    #[test]
    fn in_flight_and_delivered_levels_yield_empty_plans() {
        let mut server = synthetic_server(true);
        server.handle_request(&req(1, 0, 3, 0), 0.0).unwrap();
        // Still on the wire: idempotent.
        assert!(server.handle_request(&req(1, 0, 3, 0), 0.1).unwrap().is_empty());
        for level in 1..=3 {
            server.delivery_completed(1, 0, level, 0.2);
        }
        // Delivered and the client confirms it has the prefix.
        assert!(server.handle_request(&req(1, 0, 3, 3), 0.3).unwrap().is_empty());
    }

    #[test]
    fn eviction_report_triggers_single_level_resend() {
        let mut server = synthetic_server(true);
        server.handle_request(&req(1, 0, 3, 0), 0.0).unwrap();
        for level in 1..=3 {
            server.delivery_completed(1, 0, level, 0.1);
        }
        let resent = server.handle_request(&req(1, 0, 2, 0), 5.0).unwrap();
        assert_eq!(levels(&resent), vec![2]);
        assert_eq!(server.high_water(1, 0), 3);
        // Raising past the mark again only sends the missing top.
        let more = server.handle_request(&req(1, 0, 5, 3), 6.0).unwrap();
        assert_eq!(levels(&more), vec![4, 5]);
    }

    #[test]
    fn type_ii_requests_clamp_to_base() {
        let mut server = synthetic_server(true);
        let records = server.handle_request(&req(2, 1, 9, 0), 0.0).unwrap();
        assert_eq!(levels(&records), vec![1]);
        assert!(server.handle_request(&req(2, 1, 9, 1), 1.0).unwrap().is_empty());
    }

    #[test]
    fn unconstrained_server_ignores_device_cap() {
        let mut server = synthetic_server(false);
        let records = server.handle_request(&req(2, 1, 9, 0), 0.0).unwrap();
        assert_eq!(levels(&records), (1..=9).collect::<Vec<u8>>());
    }

    #[test]
    fn session_ttl_forgets_idle_high_water() {
        let catalog = ObjectCatalog::synthetic(1, StreamMode::Progressive);
        let mut server = Server::new(catalog, 10.0, true);
        server.register_client(DeviceProfile::type_i(1));
        server.handle_request(&req(1, 0, 3, 0), 0.0).unwrap();
        for level in 1..=3 {
            server.delivery_completed(1, 0, level, 0.1);
        }
        // Within TTL: nothing new to send.
        assert!(server.handle_request(&req(1, 0, 3, 3), 5.0).unwrap().is_empty());
        // Past TTL the session resets and the full prefix goes out again.
        let records = server.handle_request(&req(1, 0, 3, 0), 30.0).unwrap();
        assert_eq!(levels(&records), vec![1, 2, 3]);
    }

    #[test]
    fn unknown_client_is_rejected() {
        let mut server = synthetic_server(true);
        assert!(matches!(
            server.handle_request(&req(99, 0, 1, 0), 0.0),
            Err(ServerError::UnknownClient { client_id: 99 })
        ));
    }
}
