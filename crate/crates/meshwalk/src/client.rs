//! The simulated mobile client: moves, decides what resolution each visible
//! object needs, asks the server for missing levels, and folds delivered
//! records into its cache.
//!
//! Requests are planned against an effective prefix: the higher of what the
//! cache holds and what this visibility episode has already been delivered.
//! That way a level evicted mid-episode is not re-requested while the object
//! stays in view (it was already rendered), but is requested afresh on the
//! next encounter. Per-request timing is tracked in chains keyed by (object,
//! target level): response time ends when the target level arrives, latency
//! when the base mesh does.

use std::collections::{BTreeSet, HashMap};

use crate::cache::{virtual_perception, ClientCache, VictimScore};
use crate::scene::{aoi_overlap, required_resolution, SceneObject, Viewer, TOP_LEVEL};
use crate::server::{DeviceProfile, ResolutionRequest, SizeTable};

/// One in-progress request chain: everything needed to close the timing
/// metrics when its target level lands.
#[derive(Debug, Clone, Copy)]
struct Chain {
    issued_at: f64,
    base_received_at: Option<f64>,
}

/// Per-object state lasting one visibility episode.
#[derive(Debug, Clone, Copy, Default)]
struct Episode {
    /// Highest level delivered to us since the object entered view.
    delivered_high: u8,
    /// Need watermark for hit/miss accounting. Rises with the needed level
    /// (each newly needed level is looked up once) and falls when the
    /// viewer recedes, so approaching again re-checks those levels.
    checked_high: u8,
}

/// A finished request chain, ready for the metrics pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainDone {
    pub object_id: u32,
    pub target_level: u8,
    /// Request issue to target-level arrival.
    pub response: f64,
    /// Request issue to base-mesh availability (zero when the base was
    /// already on hand).
    pub latency: f64,
}

/// What one movement tick produced.
#[derive(Debug, Default)]
pub struct TickReport {
    pub requests: Vec<ResolutionRequest>,
    /// One quality sample per visible object.
    pub samples: Vec<f64>,
    /// Chains abandoned because their object left the area of interest.
    pub stale_chains: u32,
}

/// What one record arrival produced.
#[derive(Debug, Default)]
pub struct RecordReport {
    pub completed: Vec<ChainDone>,
    /// True when the record matched no pending level (late arrival after
    /// the object left view).
    pub orphan: bool,
}

#[derive(Debug)]
pub struct ClientAgent {
    pub viewer: Viewer,
    pub cache: ClientCache,
    pub profile: DeviceProfile,
    sizes: SizeTable,
    /// When false the device cap is ignored and every object is wanted at
    /// full detail.
    constrained: bool,
    episodes: HashMap<u32, Episode>,
    chains: HashMap<(u32, u8), Chain>,
    /// Levels requested and not yet delivered, per object.
    pending: HashMap<u32, BTreeSet<u8>>,
    next_request_id: u64,
    pub orphan_records: u64,
    pub dropped_requests: u64,
}

impl ClientAgent {
    pub fn new(
        viewer: Viewer,
        cache: ClientCache,
        profile: DeviceProfile,
        sizes: SizeTable,
        constrained: bool,
    ) -> Self {
        Self {
            viewer,
            cache,
            profile,
            sizes,
            constrained,
            episodes: HashMap::new(),
            chains: HashMap::new(),
            pending: HashMap::new(),
            next_request_id: 0,
            orphan_records: 0,
            dropped_requests: 0,
        }
    }

    pub fn client_id(&self) -> u32 {
        self.profile.client_id
    }

    fn device_cap(&self) -> u8 {
        if self.constrained {
            self.profile.max_level
        } else {
            TOP_LEVEL
        }
    }

    /// Advance one movement tick: move, detect entries/exits, sample
    /// perceived quality, and emit requests for missing levels.
    pub fn move_tick(
        &mut self,
        dt: f64,
        now: f64,
        world_size: f64,
        objects: &[SceneObject],
    ) -> TickReport {
        self.viewer.step(dt, world_size);
        let mut report = TickReport::default();

        let visible: Vec<&SceneObject> = objects
            .iter()
            .filter(|o| aoi_overlap(&self.viewer, o))
            .collect();

        // Objects that left the area of interest: forget the episode and
        // abandon any chains still waiting on them. The cache keeps what it
        // has; only the session context dies.
        let visible_ids: BTreeSet<u32> = visible.iter().map(|o| o.object_id).collect();
        let gone: Vec<u32> = self
            .episodes
            .keys()
            .filter(|id| !visible_ids.contains(id))
            .copied()
            .collect();
        for id in gone {
            self.episodes.remove(&id);
            self.pending.remove(&id);
            let before = self.chains.len();
            self.chains.retain(|&(object_id, _), _| object_id != id);
            report.stale_chains += (before - self.chains.len()) as u32;
        }

        for obj in visible {
            let id = obj.object_id;
            let Some(sizes) = self.sizes.object(id) else {
                continue; // not served by this catalog
            };
            let needed = required_resolution(&self.viewer, obj, self.device_cap())
                .expect("visible object")
                .min(sizes.level_bytes.len() as u8);

            let episode = self.episodes.entry(id).or_default();
            let delivered_high = episode.delivered_high;

            // Hit/miss accounting happens at need boundaries, not every
            // tick: each level is looked up when the viewer first needs it,
            // and again only after receding below it and coming back.
            for level in (episode.checked_high + 1)..=needed {
                let nominal = sizes.level_bytes[level as usize - 1];
                self.cache.lookup(id, level, nominal);
            }
            episode.checked_high = needed;

            let effective_have = self.cache.cached_top(id).max(delivered_high);
            if needed > effective_have {
                let pending = self.pending.entry(id).or_default();
                let mut emitted = false;
                for level in (effective_have + 1)..=needed {
                    if pending.insert(level) {
                        report.requests.push(ResolutionRequest {
                            request_id: self.next_request_id,
                            client_id: self.profile.client_id,
                            object_id: id,
                            level,
                            have: effective_have,
                            issued_at: now,
                        });
                        self.next_request_id += 1;
                        emitted = true;
                    }
                }
                if emitted {
                    self.chains.entry((id, needed)).or_insert(Chain {
                        issued_at: now,
                        base_received_at: if effective_have >= 1 {
                            Some(now)
                        } else {
                            None
                        },
                    });
                }
            }

            let sample = virtual_perception(sizes.optimal_bytes, self.cache.cached_bytes(id))
                .expect("cached bytes within optimal");
            report.samples.push(sample);
        }
        report
    }

    /// Fold one delivered record in: cache it, advance the episode, close
    /// any chain whose target this level is.
    pub fn on_record_received(
        &mut self,
        object_id: u32,
        level: u8,
        byte_size: u32,
        now: f64,
        objects: &[SceneObject],
    ) -> RecordReport {
        let mut report = RecordReport::default();

        let matched = self
            .pending
            .get_mut(&object_id)
            .is_some_and(|levels| levels.remove(&level));
        if !matched {
            self.orphan_records += 1;
            report.orphan = true;
        }

        // Cache regardless of matching: the bytes were transmitted either
        // way. Prefix gaps (the tail was evicted mid-flight) and zero-budget
        // caches make the insert fail; the record is then rendered
        // transiently and never cached.
        let scores = self.victim_scores(objects);
        let _ = self.cache.insert(object_id, level, byte_size, &scores);

        if let Some(episode) = self.episodes.get_mut(&object_id) {
            episode.delivered_high = episode.delivered_high.max(level);
        }

        if level == 1 {
            for ((chain_object, _), chain) in self.chains.iter_mut() {
                if *chain_object == object_id && chain.base_received_at.is_none() {
                    chain.base_received_at = Some(now);
                }
            }
        }
        if let Some(chain) = self.chains.remove(&(object_id, level)) {
            let base_at = chain.base_received_at.unwrap_or(now);
            report.completed.push(ChainDone {
                object_id,
                target_level: level,
                response: now - chain.issued_at,
                latency: base_at - chain.issued_at,
            });
        }
        report
    }

    /// The uplink gave up on one request after exhausting its retries. The
    /// level leaves the pending set, so the next tick re-emits it if still
    /// wanted; a chain targeted exactly at it is abandoned.
    pub fn on_request_dropped(&mut self, object_id: u32, level: u8) {
        self.dropped_requests += 1;
        if let Some(levels) = self.pending.get_mut(&object_id) {
            levels.remove(&level);
        }
        self.chains.remove(&(object_id, level));
    }

    /// Chains still waiting (for tests and end-of-run accounting).
    pub fn open_chains(&self) -> usize {
        self.chains.len()
    }

    fn victim_scores(&self, objects: &[SceneObject]) -> Vec<VictimScore> {
        let heading = self.viewer.heading;
        self.cache
            .cached_objects()
            .map(|id| {
                let Some(obj) = objects.iter().find(|o| o.object_id == id) else {
                    return VictimScore {
                        object_id: id,
                        distance: f64::INFINITY,
                        angle: std::f64::consts::PI,
                    };
                };
                let to = obj.position - self.viewer.position;
                let d = to.length();
                let angle = if d > 1e-12 {
                    (heading.dot(to) / d).clamp(-1.0, 1.0).acos()
                } else {
                    0.0
                };
                VictimScore {
                    object_id: id,
                    distance: d,
                    angle,
                }
            })
            .collect()
    }
}
