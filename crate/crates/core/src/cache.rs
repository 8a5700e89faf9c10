//! Bounded per-oracle cache pools, hit accounting, and the classical
//! eviction baselines.
//!
//! A pool has `C_m` numbered slots (1-based). A miss is resolved by an
//! [`EvictionDecision`]: victim `0` means "insert into a free slot" when one
//! exists and "decline to cache" when the pool is full; victim `j` replaces
//! the content in slot `j`. One decision per missed request is the row form
//! of the evict/retain decision matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ContentId, RequestSequence};
use crate::error::{domain, Error, Result};
use crate::rng::{self, SimRng};

pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub content: ContentId,
    pub inserted_at: u64,
    pub last_access: u64,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachePool {
    capacity: usize,
    num_contents: u32,
    slots: Vec<Option<Entry>>,
    clock: u64,
}

/// Victim choice for the `request_index`-th request of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionDecision {
    pub request_index: usize,
    pub victim: usize,
}

impl EvictionDecision {
    /// Insert into a free slot, or decline when the pool is full.
    pub fn keep(request_index: usize) -> Self {
        Self {
            request_index,
            victim: 0,
        }
    }

    pub fn evict(request_index: usize, slot: usize) -> Self {
        Self {
            request_index,
            victim: slot,
        }
    }
}

impl CachePool {
    pub fn new(capacity: usize, num_contents: u32) -> Result<Self> {
        if capacity == 0 {
            return Err(domain("cache capacity must be positive"));
        }
        Ok(Self {
            capacity,
            num_contents,
            slots: vec![None; capacity],
            clock: 0,
        })
    }

    /// Build a pool holding `contents` in slots `1..`.
    pub fn with_contents(
        capacity: usize,
        num_contents: u32,
        contents: &[ContentId],
    ) -> Result<Self> {
        let mut pool = Self::new(capacity, num_contents)?;
        for (k, &c) in contents.iter().enumerate() {
            pool.check(c)?;
            if pool.contains(c) {
                return Err(Error::InvalidDecision(format!("duplicate content {c}")));
            }
            pool.apply_decision(c, EvictionDecision::keep(k))?;
        }
        Ok(pool)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn num_contents(&self) -> u32 {
        self.num_contents
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn is_full(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    pub fn contains(&self, id: ContentId) -> bool {
        self.slot_of(id).is_some()
    }

    /// 1-based slot holding `id`.
    pub fn slot_of(&self, id: ContentId) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.is_some_and(|e| e.content == id))
            .map(|i| i + 1)
    }

    /// Entry in 1-based slot `j`.
    pub fn slot(&self, j: usize) -> Option<&Entry> {
        j.checked_sub(1)
            .and_then(|i| self.slots.get(i))
            .and_then(Option::as_ref)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &Entry)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|e| (i + 1, e)))
    }

    /// Cached ids in slot order, empty slots skipped.
    pub fn contents(&self) -> Vec<ContentId> {
        self.entries().map(|(_, e)| e.content).collect()
    }

    /// Fixed-width snapshot, `0` marks an empty slot.
    pub fn snapshot(&self) -> Vec<ContentId> {
        self.slots
            .iter()
            .map(|s| s.map_or(0, |e| e.content))
            .collect()
    }

    fn check(&self, id: ContentId) -> Result<()> {
        if (1..=self.num_contents).contains(&id) {
            Ok(())
        } else {
            Err(Error::UnknownContent {
                id,
                num_contents: self.num_contents,
            })
        }
    }

    /// Hit indicator for `id`. A hit refreshes recency and frequency only.
    pub fn probe(&mut self, id: ContentId) -> Result<bool> {
        self.check(id)?;
        self.clock += 1;
        let clock = self.clock;
        match self.slots.iter_mut().flatten().find(|e| e.content == id) {
            Some(e) => {
                e.last_access = clock;
                e.frequency += 1;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Resolve a miss on `id`. Returns the evicted content, if any.
    pub fn apply_decision(
        &mut self,
        id: ContentId,
        decision: EvictionDecision,
    ) -> Result<Option<ContentId>> {
        self.check(id)?;
        if self.contains(id) {
            return Err(Error::InvalidDecision(format!(
                "content {id} is already cached; decisions apply to misses only"
            )));
        }
        let fresh = Entry {
            content: id,
            inserted_at: self.clock,
            last_access: self.clock,
            frequency: 1,
        };
        match decision.victim {
            0 => {
                if let Some(free) = self.slots.iter_mut().find(|s| s.is_none()) {
                    *free = Some(fresh);
                }
                Ok(None)
            }
            j if j > self.capacity => Err(Error::InvalidDecision(format!(
                "victim slot {j} exceeds capacity {}",
                self.capacity
            ))),
            j => match self.slots[j - 1].replace(fresh) {
                Some(old) => Ok(Some(old.content)),
                None => {
                    self.slots[j - 1] = None;
                    Err(Error::InvalidDecision(format!("victim slot {j} is empty")))
                }
            },
        }
    }

    pub fn clear(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionRecord {
    pub request_index: usize,
    pub victim: usize,
    pub evicted: Option<ContentId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleSlotRecord {
    pub indicators: Vec<bool>,
    pub hits: u64,
    pub evictions: Vec<EvictionRecord>,
}

impl OracleSlotRecord {
    pub fn requests(&self) -> u64 {
        self.indicators.len() as u64
    }
}

/// Per-request hit indicators keyed by `(slot, oracle)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitLedger {
    epsilon: f64,
    records: BTreeMap<(u64, u32), OracleSlotRecord>,
}

impl Default for HitLedger {
    fn default() -> Self {
        Self::new(DEFAULT_EPSILON)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub slot: u64,
    pub oracle: u32,
    pub requests: u64,
    pub hits: u64,
    pub hit_rate: f64,
}

impl HitLedger {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            records: BTreeMap::new(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn record(&mut self, slot: u64, oracle: u32, hit: bool) {
        let r = self.records.entry((slot, oracle)).or_default();
        r.indicators.push(hit);
        r.hits += hit as u64;
    }

    pub fn record_eviction(&mut self, slot: u64, oracle: u32, eviction: EvictionRecord) {
        self.records
            .entry((slot, oracle))
            .or_default()
            .evictions
            .push(eviction);
    }

    pub fn get(&self, oracle: u32, slot: u64) -> Option<&OracleSlotRecord> {
        self.records.get(&(slot, oracle))
    }

    pub fn hits(&self, oracle: u32, slot: u64) -> u64 {
        self.get(oracle, slot).map_or(0, |r| r.hits)
    }

    pub fn requests(&self, oracle: u32, slot: u64) -> u64 {
        self.get(oracle, slot).map_or(0, OracleSlotRecord::requests)
    }

    /// `H_m^t = h_m^t / (|G_m^t| + eps)`.
    pub fn hit_rate(&self, oracle: u32, slot: u64) -> f64 {
        self.hits(oracle, slot) as f64 / (self.requests(oracle, slot) as f64 + self.epsilon)
    }

    /// `H_tot^t = sum_m h_m^t / (|G^t| + eps)`.
    pub fn global_hit_rate(&self, slot: u64) -> f64 {
        let (hits, reqs) = self
            .records
            .range((slot, 0)..=(slot, u32::MAX))
            .fold((0u64, 0u64), |(h, n), (_, r)| {
                (h + r.hits, n + r.requests())
            });
        hits as f64 / (reqs as f64 + self.epsilon)
    }

    pub fn slots(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.records.keys().map(|k| k.0).collect();
        s.dedup();
        s
    }

    pub fn oracles(&self) -> Vec<u32> {
        let mut o: Vec<u32> = self.records.keys().map(|k| k.1).collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        self.records
            .iter()
            .map(|(&(slot, oracle), r)| LedgerRow {
                slot,
                oracle,
                requests: r.requests(),
                hits: r.hits,
                hit_rate: r.hits as f64 / (r.requests() as f64 + self.epsilon),
            })
            .collect()
    }

    /// CSV `(slot, oracle, requests, hits, hit_rate)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The classical replacement policies used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Baseline {
    Fifo,
    Lru,
    Lfu,
    Random,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::Lfu,
        Baseline::Lru,
        Baseline::Random,
        Baseline::Fifo,
    ];
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Fifo => "FIFO",
            Baseline::Lru => "LRU",
            Baseline::Lfu => "LFU",
            Baseline::Random => "RANDOM",
        })
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FIFO" => Ok(Baseline::Fifo),
            "LRU" => Ok(Baseline::Lru),
            "LFU" => Ok(Baseline::Lfu),
            "RANDOM" => Ok(Baseline::Random),
            other => Err(domain(format!("unknown baseline policy {other:?}"))),
        }
    }
}

/// Something that resolves misses. `decide` is called for every request after
/// the pool has been probed, so stateful policies can track history; the
/// returned decision is only applied on a miss.
pub trait CachePolicy {
    fn decide(
        &mut self,
        pool: &CachePool,
        requests: &[ContentId],
        index: usize,
        hit: bool,
    ) -> EvictionDecision;
}

pub struct BaselinePolicy {
    kind: Baseline,
    rng: SimRng,
}

impl BaselinePolicy {
    pub fn new(kind: Baseline, seed: u64) -> Self {
        Self {
            kind,
            rng: rng::stream(seed, "baseline-policy", &[]),
        }
    }

    pub fn kind(&self) -> Baseline {
        self.kind
    }
}

impl CachePolicy for BaselinePolicy {
    fn decide(
        &mut self,
        pool: &CachePool,
        _requests: &[ContentId],
        index: usize,
        hit: bool,
    ) -> EvictionDecision {
        if hit || !pool.is_full() {
            return EvictionDecision::keep(index);
        }
        let victim = match self.kind {
            Baseline::Fifo => pool.entries().min_by_key(|(_, e)| e.inserted_at),
            Baseline::Lru => pool.entries().min_by_key(|(_, e)| e.last_access),
            Baseline::Lfu => pool
                .entries()
                .min_by_key(|(_, e)| (e.frequency, e.inserted_at)),
            Baseline::Random => {
                let j = self.rng.random_range(1..=pool.capacity());
                pool.entries().find(|(slot, _)| *slot == j)
            }
        };
        EvictionDecision::evict(index, victim.map_or(0, |(j, _)| j))
    }
}

/// Serve `requests` in order, recording every hit indicator and eviction.
pub fn serve<P: CachePolicy + ?Sized>(
    pool: &mut CachePool,
    requests: &[ContentId],
    policy: &mut P,
    ledger: &mut HitLedger,
    slot: u64,
    oracle: u32,
) -> Result<()> {
    for (k, &id) in requests.iter().enumerate() {
        let hit = pool.probe(id)?;
        let decision = policy.decide(pool, requests, k, hit);
        ledger.record(slot, oracle, hit);
        if !hit {
            let evicted = pool.apply_decision(id, decision)?;
            if decision.victim != 0 {
                ledger.record_eviction(
                    slot,
                    oracle,
                    EvictionRecord {
                        request_index: k,
                        victim: decision.victim,
                        evicted,
                    },
                );
            }
        }
    }
    Ok(())
}

/// Run one baseline over a request sequence from a given starting pool.
pub fn run_policy(
    mut pool: CachePool,
    requests: &RequestSequence,
    kind: Baseline,
    seed: u64,
) -> Result<(CachePool, HitLedger)> {
    let mut ledger = HitLedger::default();
    let mut policy = BaselinePolicy::new(kind, seed);
    serve(
        &mut pool,
        &requests.requests,
        &mut policy,
        &mut ledger,
        requests.slot,
        requests.oracle,
    )?;
    Ok((pool, ledger))
}
