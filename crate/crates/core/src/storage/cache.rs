use std::num::NonZeroUsize;

use lru::LruCache;

use crate::graph::{Object, ObjectId};

/// Object-granular LRU cache: one node or one edge occupies one slot.
pub struct ObjectCache {
    inner: LruCache<ObjectId, Object>,
}

impl ObjectCache {
    pub fn new(capacity: NonZeroUsize) -> Self {
        ObjectCache {
            inner: LruCache::new(capacity),
        }
    }

    /// Looks up `id`, refreshing its recency on a hit.
    pub fn get(&mut self, id: ObjectId) -> Option<&Object> {
        self.inner.get(&id)
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.inner.contains(&id)
    }

    /// Inserts or replaces `id` as most recently used. Returns the evicted
    /// id when the insert pushed out the least recently used entry.
    pub fn put(&mut self, id: ObjectId, object: Object) -> Option<ObjectId> {
        match self.inner.push(id, object) {
            Some((old, _)) if old != id => Some(old),
            _ => None,
        }
    }

    pub fn remove(&mut self, id: ObjectId) -> bool {
        self.inner.pop(&id).is_some()
    }

    pub fn clear(&mut self) {
        self.inner.clear();
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.inner.cap().get()
    }

    /// Cached ids from most to least recently used.
    pub fn recency_order(&self) -> Vec<ObjectId> {
        self.inner.iter().map(|(k, _)| *k).collect()
    }
}
