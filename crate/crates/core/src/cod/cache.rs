use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::generator::Opinion;
use super::CodError;
use crate::fsutil::write_atomic;

/// Content-addressed opinion store: one JSON file per
/// (generator, template, news item), named by the SHA-256 of the three.
#[derive(Debug, Clone)]
pub struct OpinionCache {
    dir: PathBuf,
}

impl OpinionCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OpinionCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(generator: &str, template: &str, news_id: &str) -> String {
        let mut h = Sha256::new();
        h.update(generator.as_bytes());
        h.update([0]);
        h.update(template.as_bytes());
        h.update([0]);
        h.update(news_id.as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, generator: &str, template: &str, news_id: &str) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(generator, template, news_id)))
    }

    /// A stored opinion; unreadable entries count as misses.
    pub fn get(&self, generator: &str, template: &str, news_id: &str) -> Option<Opinion> {
        let path = self.path(generator, template, news_id);
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice::<Opinion>(&bytes) {
            Ok(op) if op.news_id == news_id && op.generator_name == generator => Some(op),
            Ok(_) => {
                log::warn!("{}: cache entry does not match its key; ignoring", path.display());
                None
            }
            Err(e) => {
                log::warn!("{}: unreadable cache entry ({e}); ignoring", path.display());
                None
            }
        }
    }

    pub fn put(&self, template: &str, opinion: &Opinion) -> Result<(), CodError> {
        let path = self.path(&opinion.generator_name, template, &opinion.news_id);
        let bytes = serde_json::to_vec(opinion).expect("opinion serializes");
        write_atomic(&path, &bytes).map_err(|source| CodError::Io { path, source })
    }
}
