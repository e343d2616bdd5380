//! On-disk response cache, content addressed by request hash. Entries are
//! written to a temp file and renamed into place so a crash never leaves a
//! half-written entry behind; an unreadable entry is simply a miss.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Vec<u8>> {
        std::fs::read(self.entry_path(key)).ok()
    }

    /// Best-effort store; a failed write leaves the cache as it was.
    pub fn put(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.entry_path(key);
        let parent = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(parent)?;
        let temp = parent.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&temp, bytes)?;
        match std::fs::rename(&temp, &path) {
            Ok(()) => Ok(()),
            Err(e) => {
                let _ = std::fs::remove_file(&temp);
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("cache")).unwrap();
        let key = crate::hashing::sha256_hex(b"some request");
        assert_eq!(cache.get(&key), None);
        cache.put(&key, b"{\"value\":1.0}").unwrap();
        assert_eq!(cache.get(&key), Some(b"{\"value\":1.0}".to_vec()));
    }

    #[test]
    fn distinct_keys_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let a = crate::hashing::sha256_hex(b"a");
        let b = crate::hashing::sha256_hex(b"b");
        cache.put(&a, b"1").unwrap();
        cache.put(&b, b"2").unwrap();
        assert_eq!(cache.get(&a), Some(b"1".to_vec()));
        assert_eq!(cache.get(&b), Some(b"2".to_vec()));
    }

    #[test]
    fn overwrite_replaces_entry() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = crate::hashing::sha256_hex(b"k");
        cache.put(&key, b"old").unwrap();
        cache.put(&key, b"new").unwrap();
        assert_eq!(cache.get(&key), Some(b"new".to_vec()));
    }
}
