//! Byte-budgeted client cache with farthest-object-first eviction.
//!
//! Records are useful only cumulatively, so the cache stores each object as
//! a prefix of levels: inserting level k requires levels 1..k-1 to be
//! present already. When space is needed, the victim policy walks cached
//! objects from the outermost inward, stripping one level at a time down to
//! the base mesh; base meshes themselves are evicted, farthest first, only
//! once every cached object is already down to its base.
//!
//! Hit and miss accounting is in bytes, which is what the hit-ratio metric
//! reports.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CacheError {
    #[error("record of {byte_size} bytes cannot fit: {evictable} evictable bytes in a {budget}-byte budget")]
    RecordTooLarge {
        byte_size: u64,
        evictable: u64,
        budget: u64,
    },
    #[error("object {object_id}: inserting level {level} over cached prefix of {top}")]
    PrefixViolation { object_id: u32, level: u8, top: u8 },
    #[error("cache is empty")]
    EmptyCache,
    #[error("no lookups recorded")]
    NoAccesses,
    #[error("perception undefined for cached {b_star} of optimal {b_o} bytes")]
    DomainError { b_o: u64, b_star: u64 },
}

/// Inputs to the eviction ordering for one cached object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VictimScore {
    pub object_id: u32,
    /// Viewer-to-object distance.
    pub distance: f64,
    /// Angle between the viewer's heading and the object direction, [0, pi].
    pub angle: f64,
}

#[derive(Debug, Clone, Default)]
struct CachedObject {
    /// Byte size per cached level; `sizes[k-1]` is level k. Always a prefix.
    sizes: Vec<u32>,
}

impl CachedObject {
    fn bytes(&self) -> u64 {
        self.sizes.iter().map(|&s| u64::from(s)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ClientCache {
    budget_bytes: u64,
    used_bytes: u64,
    objects: HashMap<u32, CachedObject>,
    hit_bytes: u64,
    miss_bytes: u64,
}

impl ClientCache {
    pub fn new(budget_bytes: u64) -> Self {
        Self {
            budget_bytes,
            used_bytes: 0,
            objects: HashMap::new(),
            hit_bytes: 0,
            miss_bytes: 0,
        }
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    /// Highest cached level of an object, 0 when absent.
    pub fn cached_top(&self, object_id: u32) -> u8 {
        self.objects
            .get(&object_id)
            .map_or(0, |o| o.sizes.len() as u8)
    }

    /// Total cached bytes of an object (the B_o* of the perception metric).
    pub fn cached_bytes(&self, object_id: u32) -> u64 {
        self.objects.get(&object_id).map_or(0, |o| o.bytes())
    }

    /// Cached object ids, unordered.
    pub fn cached_objects(&self) -> impl Iterator<Item = u32> + '_ {
        self.objects.keys().copied()
    }

    /// Check for one level of one object, updating byte accounting: a hit
    /// adds the stored record's size to hit bytes, a miss adds the level's
    /// nominal size (what would have to be fetched) to miss bytes.
    pub fn lookup(&mut self, object_id: u32, level: u8, nominal_bytes: u32) -> bool {
        debug_assert!(level >= 1);
        match self.objects.get(&object_id) {
            Some(o) if (level as usize) <= o.sizes.len() => {
                self.hit_bytes += u64::from(o.sizes[level as usize - 1]);
                true
            }
            _ => {
                self.miss_bytes += u64::from(nominal_bytes);
                false
            }
        }
    }

    pub fn hit_bytes(&self) -> u64 {
        self.hit_bytes
    }

    pub fn miss_bytes(&self) -> u64 {
        self.miss_bytes
    }

    /// Percentage of looked-up bytes served from the cache.
    pub fn hit_ratio(&self) -> Result<f64, CacheError> {
        let total = self.hit_bytes + self.miss_bytes;
        if total == 0 {
            return Err(CacheError::NoAccesses);
        }
        Ok(100.0 * self.hit_bytes as f64 / total as f64)
    }

    /// Cached objects in eviction order: distance descending, then angle
    /// descending, then object id ascending. Objects missing from `scores`
    /// sort as if at infinite distance (they are evicted first).
    pub fn select_victims(&self, scores: &[VictimScore]) -> Result<Vec<u32>, CacheError> {
        if self.objects.is_empty() {
            return Err(CacheError::EmptyCache);
        }
        let by_id: HashMap<u32, &VictimScore> =
            scores.iter().map(|s| (s.object_id, s)).collect();
        let mut order: Vec<u32> = self.objects.keys().copied().collect();
        order.sort_unstable_by(|&a, &b| {
            let (da, aa) = by_id
                .get(&a)
                .map_or((f64::INFINITY, f64::INFINITY), |s| (s.distance, s.angle));
            let (db, ab) = by_id
                .get(&b)
                .map_or((f64::INFINITY, f64::INFINITY), |s| (s.distance, s.angle));
            db.total_cmp(&da)
                .then(ab.total_cmp(&aa))
                .then(a.cmp(&b))
        });
        Ok(order)
    }

    /// Store one record, evicting if needed. Returns the exact eviction
    /// sequence as (object, level) pairs in eviction order. The incoming
    /// object is never a victim. On error the cache is unchanged.
    pub fn insert(
        &mut self,
        object_id: u32,
        level: u8,
        byte_size: u32,
        scores: &[VictimScore],
    ) -> Result<Vec<(u32, u8)>, CacheError> {
        let top = self.cached_top(object_id);
        if level <= top {
            return Ok(Vec::new()); // already cached; nothing to do
        }
        if level != top + 1 {
            return Err(CacheError::PrefixViolation {
                object_id,
                level,
                top,
            });
        }
        let need = u64::from(byte_size);
        // Even evicting every other object leaves the incoming object's own
        // prefix in place, so that is the feasibility bound.
        if self.own_bytes(object_id) + need > self.budget_bytes {
            return Err(CacheError::RecordTooLarge {
                byte_size: need,
                evictable: self.used_bytes - self.own_bytes(object_id),
                budget: self.budget_bytes,
            });
        }

        let mut evicted = Vec::new();
        if self.used_bytes + need > self.budget_bytes {
            let order: Vec<u32> = self
                .select_victims(scores)?
                .into_iter()
                .filter(|&id| id != object_id)
                .collect();
            // First pass strips detail levels, outermost object first, one
            // level at a time down to each base.
            'detail: for &victim in &order {
                while self.cached_top(victim) > 1 {
                    if self.used_bytes + need <= self.budget_bytes {
                        break 'detail;
                    }
                    self.pop_level(victim, &mut evicted);
                }
            }
            // Second pass drops base meshes, still outermost first.
            for &victim in &order {
                if self.used_bytes + need <= self.budget_bytes {
                    break;
                }
                while self.cached_top(victim) > 0 {
                    self.pop_level(victim, &mut evicted);
                }
            }
        }
        debug_assert!(self.used_bytes + need <= self.budget_bytes);

        self.objects.entry(object_id).or_default().sizes.push(byte_size);
        self.used_bytes += need;
        Ok(evicted)
    }

    fn own_bytes(&self, object_id: u32) -> u64 {
        self.objects.get(&object_id).map_or(0, |o| o.bytes())
    }

    fn pop_level(&mut self, object_id: u32, evicted: &mut Vec<(u32, u8)>) {
        let Some(o) = self.objects.get_mut(&object_id) else {
            return;
        };
        let level = o.sizes.len() as u8;
        if let Some(size) = o.sizes.pop() {
            self.used_bytes -= u64::from(size);
            evicted.push((object_id, level));
        }
        if o.sizes.is_empty() {
            self.objects.remove(&object_id);
        }
    }
}

/// Quality fraction in [0, 1] for an object with `b_o` optimal bytes of
/// which `b_star` are cached: the cubic 1 - ((b_o - b_star)/b_o)^3.
pub fn virtual_perception(b_o: u64, b_star: u64) -> Result<f64, CacheError> {
    if b_o == 0 || b_star > b_o {
        return Err(CacheError::DomainError { b_o, b_star });
    }
    let missing = (b_o - b_star) as f64 / b_o as f64;
    Ok(1.0 - missing.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn score(object_id: u32, distance: f64) -> VictimScore {
        VictimScore {
            object_id,
            distance,
            angle: 0.0,
        }
    }

    #[test]
    fn empty_cache_misses_and_insert_hits() {
        let mut c = ClientCache::new(1 << 20);
        assert!(!c.lookup(7, 1, 8192));
        assert_eq!(c.miss_bytes(), 8192);
        c.insert(7, 1, 8192, &[]).unwrap();
        assert!(c.lookup(7, 1, 8192));
        assert_eq!(c.hit_bytes(), 8192);
        assert_eq!(c.hit_ratio().unwrap(), 50.0);
    }

    #[test]
    fn zero_budget_rejects_everything() {
        let mut c = ClientCache::new(0);
        assert_eq!(
            c.insert(1, 1, 1, &[]),
            Err(CacheError::RecordTooLarge {
                byte_size: 1,
                evictable: 0,
                budget: 0
            })
        );
    }

    #[test]
    fn prefix_gaps_are_rejected() {
        let mut c = ClientCache::new(1 << 20);
        assert_eq!(
            c.insert(1, 2, 100, &[]),
            Err(CacheError::PrefixViolation {
                object_id: 1,
                level: 2,
                top: 0
            })
        );
        c.insert(1, 1, 100, &[]).unwrap();
        c.insert(1, 2, 100, &[]).unwrap();
        assert_eq!(c.cached_top(1), 2);
    }

    #[test]
    fn outermost_object_loses_detail_first() {
        let mut c = ClientCache::new(1000);
        for level in 1..=5 {
            c.insert(1, level, 100, &[]).unwrap(); // far object
        }
        for level in 1..=5 {
            c.insert(2, level, 100, &[]).unwrap(); // near object
        }
        let scores = [score(1, 80.0), score(2, 50.0)];
        let evicted = c.insert(3, 1, 150, &scores).unwrap();
        assert_eq!(evicted, vec![(1, 5), (1, 4)]);
        assert_eq!(c.cached_top(1), 3);
        assert_eq!(c.cached_top(2), 5);
    }

    #[test]
    fn equal_distance_breaks_ties_by_angle_then_id() {
        let mut c = ClientCache::new(400);
        c.insert(1, 1, 100, &[]).unwrap();
        c.insert(2, 1, 100, &[]).unwrap();
        c.insert(3, 1, 100, &[]).unwrap();
        let scores = [
            VictimScore { object_id: 1, distance: 50.0, angle: 0.3 },
            VictimScore { object_id: 2, distance: 50.0, angle: 2.9 },
            VictimScore { object_id: 3, distance: 50.0, angle: 2.9 },
        ];
        assert_eq!(c.select_victims(&scores).unwrap(), vec![2, 3, 1]);
    }

    #[test]
    fn bases_fall_only_after_everything_is_stripped() {
        let mut c = ClientCache::new(600);
        for level in 1..=3 {
            c.insert(1, level, 100, &[]).unwrap();
        }
        for level in 1..=3 {
            c.insert(2, level, 100, &[]).unwrap();
        }
        let scores = [score(1, 90.0), score(2, 20.0)];
        // Needs 500 of the 600 freed: strips 1 to base, then 2 to base,
        // then drops 1's base entirely.
        let evicted = c.insert(3, 1, 500, &scores).unwrap();
        assert_eq!(
            evicted,
            vec![(1, 3), (1, 2), (2, 3), (2, 2), (1, 1)]
        );
        assert_eq!(c.cached_top(1), 0);
        assert_eq!(c.cached_top(2), 1);
        assert_eq!(c.cached_top(3), 1);
    }

    #[test]
    fn incoming_object_is_never_its_own_victim() {
        let mut c = ClientCache::new(300);
        c.insert(1, 1, 100, &[]).unwrap();
        c.insert(1, 2, 100, &[]).unwrap();
        c.insert(2, 1, 100, &[]).unwrap();
        let scores = [score(1, 10.0), score(2, 99.0)];
        // Object 1 is incoming; even though stripping its own level 2 would
        // make room, the victim must be object 2.
        let evicted = c.insert(1, 3, 100, &scores).unwrap();
        assert_eq!(evicted, vec![(2, 1)]);
        assert_eq!(c.cached_top(1), 3);
    }

    #[test]
    fn infeasible_insert_leaves_cache_untouched() {
        let mut c = ClientCache::new(300);
        c.insert(1, 1, 100, &[]).unwrap();
        c.insert(1, 2, 100, &[]).unwrap();
        let before_used = c.used_bytes();
        // 200 bytes held by the incoming object itself cannot be evicted, so
        // a 250-byte record can never fit.
        let err = c.insert(1, 3, 250, &[score(1, 5.0)]).unwrap_err();
        assert!(matches!(err, CacheError::RecordTooLarge { .. }));
        assert_eq!(c.used_bytes(), before_used);
        assert_eq!(c.cached_top(1), 2);
    }

    #[test]
    fn perception_cubic_endpoints_and_midpoint() {
        assert_eq!(virtual_perception(56_117, 56_117).unwrap(), 1.0);
        assert_eq!(virtual_perception(56_117, 0).unwrap(), 0.0);
        assert!((virtual_perception(100, 50).unwrap() - 0.875).abs() < 1e-15);
        assert!(virtual_perception(0, 0).is_err());
        assert!(virtual_perception(10, 11).is_err());
    }

    proptest! {
        #[test]
        fn budget_and_prefix_hold_under_random_ops(
            ops in prop::collection::vec(
                (0u32..6, 1u32..2000, any::<bool>(), 0.0f64..100.0),
                1..60,
            )
        ) {
            let mut c = ClientCache::new(4000);
            let scores: Vec<VictimScore> =
                (0..6).map(|id| score(id, f64::from(id) * 10.0)).collect();
            for (object_id, size, do_insert, _jitter) in ops {
                if do_insert {
                    let level = c.cached_top(object_id) + 1;
                    let _ = c.insert(object_id, level, size, &scores);
                } else {
                    c.lookup(object_id, 1, size);
                }
                prop_assert!(c.used_bytes() <= c.budget_bytes());
                let total: u64 = c
                    .cached_objects()
                    .map(|id| c.cached_bytes(id))
                    .sum();
                prop_assert_eq!(total, c.used_bytes());
            }
        }

        #[test]
        fn perception_is_monotone_in_cached_bytes(b_o in 1u64..1_000_000) {
            let mut last = -1.0;
            for i in 0..=100u64 {
                let b_star = b_o * i / 100;
                let p = virtual_perception(b_o, b_star).unwrap();
                prop_assert!(p >= last);
                prop_assert!((0.0..=1.0).contains(&p));
                last = p;
            }
        }
    }
}
