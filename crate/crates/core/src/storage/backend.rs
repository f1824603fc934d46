//! Persistent tier. One entry per object keyed by its decimal id.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::graph::ObjectId;

const META_FILE: &str = "_meta.json";

pub trait Backend: Send {
    fn read(&mut self, id: ObjectId) -> io::Result<Option<Vec<u8>>>;
    fn write(&mut self, id: ObjectId, bytes: &[u8]) -> io::Result<()>;
    fn delete(&mut self, id: ObjectId) -> io::Result<()>;
    /// All stored ids in ascending order.
    fn ids(&self) -> io::Result<Vec<ObjectId>>;
    fn read_meta(&self) -> io::Result<Option<Vec<u8>>>;
    fn write_meta(&mut self, bytes: &[u8]) -> io::Result<()>;
}

/// A directory with one file per object.
pub struct DirBackend {
    root: PathBuf,
}

impl DirBackend {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DirBackend { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: ObjectId) -> PathBuf {
        self.root.join(id.0.to_string())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl Backend for DirBackend {
    fn read(&mut self, id: ObjectId) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.path(id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn write(&mut self, id: ObjectId, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.path(id), bytes)
    }

    fn delete(&mut self, id: ObjectId) -> io::Result<()> {
        match fs::remove_file(self.path(id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    fn ids(&self) -> io::Result<Vec<ObjectId>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.parse::<u64>().ok()) {
                ids.push(ObjectId(id));
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn read_meta(&self) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.root.join(META_FILE)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn write_meta(&mut self, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.root.join(META_FILE), bytes)
    }
}

/// Byte-for-byte equivalent of [`DirBackend`] held in memory.
#[derive(Default, Clone)]
pub struct MemBackend {
    files: BTreeMap<ObjectId, Vec<u8>>,
    meta: Option<Vec<u8>>,
}

impl Backend for MemBackend {
    fn read(&mut self, id: ObjectId) -> io::Result<Option<Vec<u8>>> {
        Ok(self.files.get(&id).cloned())
    }

    fn write(&mut self, id: ObjectId, bytes: &[u8]) -> io::Result<()> {
        self.files.insert(id, bytes.to_vec());
        Ok(())
    }

    fn delete(&mut self, id: ObjectId) -> io::Result<()> {
        self.files.remove(&id);
        Ok(())
    }

    fn ids(&self) -> io::Result<Vec<ObjectId>> {
        Ok(self.files.keys().copied().collect())
    }

    fn read_meta(&self) -> io::Result<Option<Vec<u8>>> {
        Ok(self.meta.clone())
    }

    fn write_meta(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.meta = Some(bytes.to_vec());
        Ok(())
    }
}
