//! Three-level data hierarchy: a per-run working set (memory), a bounded
//! LRU object cache, and a persistent store with one entry per object.
//!
//! Loads search memory, then cache, then store. Every cache hit and store
//! read is counted; `objects_fetched` is their sum. Fast edges have no entry
//! of their own: they are written inside both endpoint node files and are
//! re-created in the working set whenever an endpoint is loaded.

mod backend;
mod cache;

use std::collections::{BTreeSet, HashMap};
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use backend::{Backend, DirBackend, MemBackend};
pub use cache::ObjectCache;

use crate::graph::{EdgeRecord, GraphError, NodeRecord, Object, ObjectId, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub cache_capacity: usize,
    /// Edges whose canonical context is shorter than this many bytes are
    /// fused into their endpoints. Zero disables fusion.
    pub fast_edge_threshold: usize,
    /// Directory of the persistent tier; `None` keeps it in memory.
    pub store_path: Option<PathBuf>,
}

impl Default for TierConfig {
    fn default() -> Self {
        TierConfig {
            cache_capacity: 10_000,
            fast_edge_threshold: 64,
            store_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub store_reads: u64,
    pub store_writes: u64,
    pub objects_fetched: u64,
    pub evictions: u64,
}

impl StoreStats {
    /// Counter deltas between two snapshots.
    pub fn since(&self, earlier: &StoreStats) -> StoreStats {
        StoreStats {
            cache_hits: self.cache_hits - earlier.cache_hits,
            cache_misses: self.cache_misses - earlier.cache_misses,
            store_reads: self.store_reads - earlier.store_reads,
            store_writes: self.store_writes - earlier.store_writes,
            objects_fetched: self.objects_fetched - earlier.objects_fetched,
            evictions: self.evictions - earlier.evictions,
        }
    }
}

/// Monotonic access counters, readable without the store lock.
#[derive(Debug, Default)]
pub struct StoreCounters {
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
    store_reads: AtomicU64,
    store_writes: AtomicU64,
    evictions: AtomicU64,
}

impl StoreCounters {
    pub fn snapshot(&self) -> StoreStats {
        // reads and hits are taken once so the fetched sum is consistent
        let cache_hits = self.cache_hits.load(Ordering::SeqCst);
        let store_reads = self.store_reads.load(Ordering::SeqCst);
        StoreStats {
            cache_hits,
            cache_misses: self.cache_misses.load(Ordering::SeqCst),
            store_reads,
            store_writes: self.store_writes.load(Ordering::SeqCst),
            objects_fetched: cache_hits + store_reads,
            evictions: self.evictions.load(Ordering::SeqCst),
        }
    }

    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::SeqCst);
    }
}

/// The memory tier: objects touched by one unit of work, plus pending
/// writes and deletions that reach the store at the commit point.
#[derive(Debug, Default, Clone)]
pub struct WorkingSet {
    pub(crate) objects: HashMap<ObjectId, Object>,
    pub(crate) dirty: BTreeSet<ObjectId>,
    pub(crate) deleted: BTreeSet<ObjectId>,
    /// Store version of every object at the moment it was fetched.
    pub(crate) read_versions: HashMap<ObjectId, u64>,
    pub(crate) fetches: FetchCounts,
}

/// Fetches made on behalf of one working set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchCounts {
    pub cache_hits: u64,
    pub store_reads: u64,
}

impl FetchCounts {
    pub fn objects_fetched(&self) -> u64 {
        self.cache_hits + self.store_reads
    }
}

impl WorkingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: ObjectId) -> Option<&Object> {
        self.objects.get(&id)
    }

    pub fn is_dirty(&self) -> bool {
        !self.dirty.is_empty() || !self.deleted.is_empty()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn fetches(&self) -> FetchCounts {
        self.fetches
    }

    pub(crate) fn node_mut(&mut self, id: ObjectId) -> Option<&mut NodeRecord> {
        match self.objects.get_mut(&id) {
            Some(Object::Node(n)) => Some(n),
            _ => None,
        }
    }

    pub(crate) fn edge_mut(&mut self, id: ObjectId) -> Option<&mut EdgeRecord> {
        match self.objects.get_mut(&id) {
            Some(Object::Edge(e)) => Some(e),
            _ => None,
        }
    }

    pub(crate) fn mark_dirty(&mut self, id: ObjectId) {
        self.dirty.insert(id);
    }

    pub(crate) fn insert_new(&mut self, object: Object) {
        let id = object.id();
        self.objects.insert(id, object);
        self.dirty.insert(id);
    }

    pub(crate) fn remove(&mut self, id: ObjectId) {
        self.objects.remove(&id);
        self.dirty.remove(&id);
        self.deleted.insert(id);
    }

    fn materialize(&mut self, object: Object) {
        if let Object::Node(node) = &object {
            for edge in &node.fused_edges {
                if !self.objects.contains_key(&edge.id) && !self.deleted.contains(&edge.id) {
                    self.objects.insert(edge.id, Object::Edge(edge.clone()));
                }
            }
        }
        self.objects.insert(object.id(), object);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommitSummary {
    pub writes: u64,
    pub deletes: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    type_name: String,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    next_id: u64,
}

/// Encodes an object as its stored entry: a one-line `{kind, type_name}`
/// header followed by the canonical record.
pub fn encode_object(object: &Object) -> Vec<u8> {
    let header = Header {
        kind: object.kind().to_owned(),
        type_name: object.type_name().to_owned(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    out.push_str(&object.canonical());
    out.push('\n');
    out.into_bytes()
}

pub fn decode_object(id: ObjectId, bytes: &[u8]) -> Result<Object, GraphError> {
    let corrupt = |message: String| GraphError::Corrupt { id, message };
    let text = std::str::from_utf8(bytes).map_err(|e| corrupt(e.to_string()))?;
    let (head, body) = text
        .split_once('\n')
        .ok_or_else(|| corrupt("missing header line".into()))?;
    let header: Header = serde_json::from_str(head).map_err(|e| corrupt(e.to_string()))?;
    let object = match header.kind.as_str() {
        "node" => Object::Node(serde_json::from_str(body.trim_end()).map_err(|e| corrupt(e.to_string()))?),
        "edge" => Object::Edge(serde_json::from_str(body.trim_end()).map_err(|e| corrupt(e.to_string()))?),
        other => return Err(corrupt(format!("unknown kind {other}"))),
    };
    if object.id() != id {
        return Err(corrupt(format!("entry holds object {}", object.id())));
    }
    Ok(object)
}

pub struct GraphStore {
    schema: Arc<Schema>,
    config: TierConfig,
    cache: ObjectCache,
    backend: Box<dyn Backend>,
    counters: Arc<StoreCounters>,
    next_id: u64,
    meta_written: u64,
    /// Bumped on every persist or delete of an object; absent means 0.
    versions: HashMap<ObjectId, u64>,
}

impl GraphStore {
    /// Opens the tier stack described by `config`, reusing any objects
    /// already present at `store_path`.
    pub fn open(schema: Arc<Schema>, config: TierConfig) -> Result<Self, GraphError> {
        let backend: Box<dyn Backend> = match &config.store_path {
            Some(path) => Box::new(DirBackend::open(path).map_err(io_err)?),
            None => Box::new(MemBackend::default()),
        };
        Self::with_backend(schema, config, backend)
    }

    pub fn with_backend(
        schema: Arc<Schema>,
        config: TierConfig,
        backend: Box<dyn Backend>,
    ) -> Result<Self, GraphError> {
        let capacity = NonZeroUsize::new(config.cache_capacity)
            .ok_or_else(|| GraphError::Io("cache capacity must be at least 1".into()))?;
        let next_id = match backend.read_meta().map_err(io_err)? {
            Some(bytes) => {
                let meta: Meta = serde_json::from_slice(&bytes)
                    .map_err(|e| GraphError::Io(format!("bad store metadata: {e}")))?;
                meta.next_id
            }
            None => backend.ids().map_err(io_err)?.last().map_or(1, |id| id.0 + 1),
        };
        Ok(GraphStore {
            schema,
            config,
            cache: ObjectCache::new(capacity),
            backend,
            counters: Arc::new(StoreCounters::default()),
            next_id,
            meta_written: next_id,
            versions: HashMap::new(),
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn config(&self) -> &TierConfig {
        &self.config
    }

    pub fn counters(&self) -> Arc<StoreCounters> {
        self.counters.clone()
    }

    pub fn stats_snapshot(&self) -> StoreStats {
        self.counters.snapshot()
    }

    pub fn cache(&self) -> &ObjectCache {
        &self.cache
    }

    /// Drops every cached object so the next loads are cold.
    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    pub(crate) fn alloc_id(&mut self) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Brings `id` into the working set: memory, then cache, then store.
    pub fn load<'w>(&mut self, ws: &'w mut WorkingSet, id: ObjectId) -> Result<&'w Object, GraphError> {
        if id.is_null() || ws.deleted.contains(&id) {
            return Err(GraphError::NotFound(id));
        }
        if !ws.objects.contains_key(&id) {
            let (object, hit) = self.fetch(id)?;
            if hit {
                ws.fetches.cache_hits += 1;
            } else {
                ws.fetches.store_reads += 1;
            }
            ws.read_versions.insert(id, self.version(id));
            ws.materialize(object);
        }
        Ok(&ws.objects[&id])
    }

    fn fetch(&mut self, id: ObjectId) -> Result<(Object, bool), GraphError> {
        if let Some(object) = self.cache.get(id) {
            StoreCounters::bump(&self.counters.cache_hits);
            return Ok((object.clone(), true));
        }
        StoreCounters::bump(&self.counters.cache_misses);
        let bytes = self
            .backend
            .read(id)
            .map_err(io_err)?
            .ok_or(GraphError::NotFound(id))?;
        StoreCounters::bump(&self.counters.store_reads);
        let object = decode_object(id, &bytes)?;
        self.cache_put(object.clone());
        Ok((object, false))
    }

    fn cache_put(&mut self, object: Object) {
        if self.cache.put(object.id(), object).is_some() {
            StoreCounters::bump(&self.counters.evictions);
        }
        debug_assert!(self.cache.len() <= self.cache.capacity());
    }

    /// Writes one record to the persistent tier. Fast edges have no entry
    /// of their own and cost nothing here; they travel inside node records.
    pub fn persist_object(&mut self, object: &Object) -> Result<(), GraphError> {
        if let Object::Edge(e) = object {
            if e.is_fast {
                return Ok(());
            }
        }
        self.backend
            .write(object.id(), &encode_object(object))
            .map_err(io_err)?;
        StoreCounters::bump(&self.counters.store_writes);
        *self.versions.entry(object.id()).or_default() += 1;
        self.cache_put(object.clone());
        Ok(())
    }

    fn version(&self, id: ObjectId) -> u64 {
        self.versions.get(&id).copied().unwrap_or(0)
    }

    /// True when nothing `ws` fetched has been written or deleted since.
    pub fn is_current(&self, ws: &WorkingSet) -> bool {
        ws.read_versions.iter().all(|(id, v)| self.version(*id) == *v)
    }

    /// Commits `ws` only if it is still current; `None` signals a conflict
    /// and leaves the store untouched.
    pub fn commit_if_current(&mut self, ws: WorkingSet) -> Result<Option<CommitSummary>, GraphError> {
        if !self.is_current(&ws) {
            return Ok(None);
        }
        self.commit(ws).map(Some)
    }

    /// The commit point: flushes dirty objects and deletions of `ws`.
    pub fn commit(&mut self, ws: WorkingSet) -> Result<CommitSummary, GraphError> {
        let mut summary = CommitSummary::default();
        for id in &ws.deleted {
            self.backend.delete(*id).map_err(io_err)?;
            self.cache.remove(*id);
            *self.versions.entry(*id).or_default() += 1;
            summary.deletes += 1;
        }
        for id in &ws.dirty {
            if let Some(object) = ws.objects.get(id) {
                let before = self.counters.store_writes.load(Ordering::SeqCst);
                self.persist_object(object)?;
                summary.writes += self.counters.store_writes.load(Ordering::SeqCst) - before;
            }
        }
        if self.next_id != self.meta_written {
            let meta = serde_json::to_vec(&Meta {
                next_id: self.next_id,
            })
            .expect("meta serializes");
            self.backend.write_meta(&meta).map_err(io_err)?;
            self.meta_written = self.next_id;
        }
        Ok(summary)
    }

    /// Every stored object, read directly from the persistent tier without
    /// touching the cache or the counters.
    pub fn scan(&mut self) -> Result<Vec<Object>, GraphError> {
        let ids = self.backend.ids().map_err(io_err)?;
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            if let Some(bytes) = self.backend.read(id).map_err(io_err)? {
                out.push(decode_object(id, &bytes)?);
            }
        }
        Ok(out)
    }
}

fn io_err(e: std::io::Error) -> GraphError {
    GraphError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{ContextMap, ContextValue};

    fn node(id: u64) -> Object {
        let mut context = ContextMap::new();
        context.insert("v".into(), ContextValue::Int(id as i64));
        Object::Node(NodeRecord {
            id: ObjectId(id),
            type_name: "n".into(),
            context,
            out_edges: vec![],
            in_edges: vec![],
            access_list: None,
            fused_edges: vec![],
        })
    }

    fn store(capacity: usize) -> GraphStore {
        let config = TierConfig {
            cache_capacity: capacity,
            ..TierConfig::default()
        };
        GraphStore::open(Arc::new(Schema::default()), config).unwrap()
    }

    fn seed(store: &mut GraphStore, ids: &[u64]) {
        for id in ids {
            store.persist_object(&node(*id)).unwrap();
        }
        store.clear_cache();
    }

    #[test]
    fn fresh_store_has_zero_counters() {
        assert_eq!(store(4).stats_snapshot(), StoreStats::default());
    }

    #[test]
    fn second_load_hits_cache() {
        let mut s = store(4);
        seed(&mut s, &[1]);
        let before = s.stats_snapshot();
        s.load(&mut WorkingSet::new(), ObjectId(1)).unwrap();
        let mid = s.stats_snapshot();
        assert_eq!(mid.since(&before).store_reads, 1);
        s.load(&mut WorkingSet::new(), ObjectId(1)).unwrap();
        let after = s.stats_snapshot().since(&mid);
        assert_eq!((after.cache_hits, after.store_reads), (1, 0));
    }

    #[test]
    fn lru_evicts_least_recent() {
        let mut s = store(2);
        seed(&mut s, &[1, 2, 3]);
        let before = s.stats_snapshot();
        for id in [1, 2, 3, 1] {
            s.load(&mut WorkingSet::new(), ObjectId(id)).unwrap();
        }
        let st = s.stats_snapshot().since(&before);
        assert_eq!(st.store_reads, 4);
        assert_eq!(st.cache_hits, 0);
        assert_eq!(st.evictions, 2);
        assert_eq!(st.objects_fetched, st.cache_hits + st.store_reads);
    }

    #[test]
    fn working_set_hits_are_free() {
        let mut s = store(2);
        seed(&mut s, &[1]);
        let mut ws = WorkingSet::new();
        s.load(&mut ws, ObjectId(1)).unwrap();
        s.load(&mut ws, ObjectId(1)).unwrap();
        assert_eq!(s.stats_snapshot().objects_fetched, 1);
    }

    #[test]
    fn missing_and_null_ids() {
        let mut s = store(2);
        assert_eq!(
            s.load(&mut WorkingSet::new(), ObjectId(7)).unwrap_err(),
            GraphError::NotFound(ObjectId(7))
        );
        assert!(s.load(&mut WorkingSet::new(), ObjectId::NULL).is_err());
    }

    #[test]
    fn encode_decode() {
        let obj = node(5);
        let bytes = encode_object(&obj);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("{\"kind\":\"node\",\"type_name\":\"n\"}\n{\"id\":5,"));
        assert_eq!(decode_object(ObjectId(5), &bytes).unwrap(), obj);
        assert!(decode_object(ObjectId(6), &bytes).is_err());
    }

    #[test]
    fn reopen_directory_store() {
        let dir = tempfile::tempdir().unwrap();
        let config = TierConfig {
            store_path: Some(dir.path().to_owned()),
            ..TierConfig::default()
        };
        let schema = Arc::new(Schema::default());
        let mut s = GraphStore::open(schema.clone(), config.clone()).unwrap();
        let mut ws = WorkingSet::new();
        let id = s.alloc_id();
        ws.insert_new(node(id.0));
        s.commit(ws).unwrap();
        drop(s);
        let mut s = GraphStore::open(schema, config).unwrap();
        assert_eq!(s.alloc_id(), ObjectId(2));
        let got = s.load(&mut WorkingSet::new(), id).unwrap().clone();
        assert_eq!(got, node(1));
        assert!(dir.path().join("1").exists());
    }

    #[test]
    fn stale_working_set_is_rejected() {
        let mut s = store(4);
        seed(&mut s, &[1]);
        let mut stale = WorkingSet::new();
        s.load(&mut stale, ObjectId(1)).unwrap();
        stale.mark_dirty(ObjectId(1));
        let mut fresh = WorkingSet::new();
        s.load(&mut fresh, ObjectId(1)).unwrap();
        fresh.mark_dirty(ObjectId(1));
        assert!(s.commit_if_current(fresh).unwrap().is_some());
        assert!(!s.is_current(&stale));
        assert!(s.commit_if_current(stale).unwrap().is_none());
    }
}
