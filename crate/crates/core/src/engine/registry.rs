use std::collections::BTreeMap;
use std::sync::Arc;

use arc_swap::ArcSwap;
use parking_lot::Mutex;

use super::RuntimeError;
use crate::lang::{parse_with_base, Program, WalkerDecl};

#[derive(Debug, Clone, Default)]
pub struct RegistrySnapshot {
    pub version: u64,
    pub walkers: BTreeMap<String, Arc<WalkerDecl>>,
}

/// Live walker definitions. Readers load a snapshot without locking;
/// instances keep the declaration they were spawned with, so injection and
/// removal never affect runs in flight.
pub struct WalkerRegistry {
    /// Node and edge declarations that injected walkers resolve against.
    base: Arc<Program>,
    snapshot: ArcSwap<RegistrySnapshot>,
    writer: Mutex<()>,
}

impl WalkerRegistry {
    pub fn new(program: &Program) -> Self {
        let base = Program {
            node_decls: program.node_decls.clone(),
            edge_decls: program.edge_decls.clone(),
            walker_decls: Vec::new(),
        };
        let walkers = program
            .walker_decls
            .iter()
            .map(|w| (w.name.clone(), Arc::new(w.clone())))
            .collect();
        WalkerRegistry {
            base: Arc::new(base),
            snapshot: ArcSwap::from_pointee(RegistrySnapshot { version: 0, walkers }),
            writer: Mutex::new(()),
        }
    }

    pub fn base(&self) -> &Arc<Program> {
        &self.base
    }

    pub fn snapshot(&self) -> Arc<RegistrySnapshot> {
        self.snapshot.load_full()
    }

    pub fn version(&self) -> u64 {
        self.snapshot.load().version
    }

    pub fn get(&self, name: &str) -> Option<Arc<WalkerDecl>> {
        self.snapshot.load().walkers.get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.snapshot.load().walkers.keys().cloned().collect()
    }

    fn publish(&self, f: impl FnOnce(&mut BTreeMap<String, Arc<WalkerDecl>>) -> Result<(), RuntimeError>) -> Result<(), RuntimeError> {
        let _w = self.writer.lock();
        let cur = self.snapshot.load();
        let mut walkers = cur.walkers.clone();
        f(&mut walkers)?;
        self.snapshot.store(Arc::new(RegistrySnapshot {
            version: cur.version + 1,
            walkers,
        }));
        Ok(())
    }

    /// Parses `source`, which must declare exactly one walker, and adds or
    /// replaces it. Returns the walker's name.
    pub fn inject_walker(&self, source: &str) -> Result<String, RuntimeError> {
        let program = parse_with_base(source, Some(&self.base))?;
        if !program.node_decls.is_empty() || !program.edge_decls.is_empty() || program.walker_decls.len() != 1 {
            return Err(RuntimeError::NotAWalker);
        }
        let decl = program.walker_decls.into_iter().next().expect("one walker");
        let name = decl.name.clone();
        self.publish(|w| {
            w.insert(name.clone(), Arc::new(decl));
            Ok(())
        })?;
        Ok(name)
    }

    pub fn remove_walker(&self, name: &str) -> Result<(), RuntimeError> {
        self.publish(|w| {
            w.remove(name)
                .map(|_| ())
                .ok_or_else(|| RuntimeError::UnknownWalker(name.to_owned()))
        })
    }
}
