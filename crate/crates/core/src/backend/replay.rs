//! Record/replay cache: an append-only JSON-lines log of
//! `(digest, request, response)` entries.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, CompletionRequest, CompletionResponse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub digest: String,
    pub request: CompletionRequest,
    pub response: CompletionResponse,
}

/// Responses per digest in recorded order, each with a consumption cursor.
#[derive(Debug, Default)]
pub struct ReplayCache {
    entries: Mutex<HashMap<String, (Vec<CompletionResponse>, usize)>>,
}

impl ReplayCache {
    pub fn from_entries(entries: impl IntoIterator<Item = CacheEntry>) -> Self {
        let mut map: HashMap<String, (Vec<CompletionResponse>, usize)> = HashMap::new();
        for e in entries {
            map.entry(e.digest).or_default().0.push(e.response);
        }
        Self {
            entries: Mutex::new(map),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str::<CacheEntry>(&line)?);
        }
        Ok(Self::from_entries(entries))
    }

    /// Next unconsumed response for `digest`.
    pub fn take(&self, digest: &str) -> Option<CompletionResponse> {
        let mut map = self.entries.lock().expect("cache lock");
        let (responses, cursor) = map.get_mut(digest)?;
        let out = responses.get(*cursor).cloned();
        if out.is_some() {
            *cursor += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries
            .lock()
            .expect("cache lock")
            .values()
            .map(|(r, _)| r.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Strict replay: every request must be in the cache.
pub struct ReplayBackend {
    cache: ReplayCache,
}

impl ReplayBackend {
    pub fn new(cache: ReplayCache) -> Self {
        Self { cache }
    }

    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self::new(ReplayCache::load(path)?))
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let digest = request.digest();
        self.cache.take(&digest).ok_or(Error::ReplayMiss(digest))
    }
}

/// Forwards to an inner backend and appends every exchange to a log.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<File>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, path: &Path) -> Result<Self> {
        let log = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner,
            log: Mutex::new(log),
        })
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse> {
        let response = self.inner.complete(request)?;
        let entry = CacheEntry {
            digest: request.digest(),
            request: request.clone(),
            response: response.clone(),
        };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let mut log = self.log.lock().expect("log lock");
        log.write_all(line.as_bytes())?;
        log.flush()?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{RequestParams, ScriptedBackend};

    #[test]
    fn record_then_replay_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let params = RequestParams::default();
        let same = CompletionRequest::user(&params, "p", None);
        let other = CompletionRequest::user(&params, "q", None);
        {
            let rec = RecordingBackend::new(ScriptedBackend::new(["a", "b", "c"]), &path).unwrap();
            assert_eq!(rec.complete(&same).unwrap().text, "a");
            assert_eq!(rec.complete(&other).unwrap().text, "b");
            assert_eq!(rec.complete(&same).unwrap().text, "c");
        }
        let replay = ReplayBackend::open(&path).unwrap();
        assert_eq!(replay.complete(&same).unwrap().text, "a");
        assert_eq!(replay.complete(&same).unwrap().text, "c");
        assert_eq!(replay.complete(&other).unwrap().text, "b");
        assert!(matches!(replay.complete(&same), Err(Error::ReplayMiss(_))));
        let unseen = CompletionRequest::user(&params, "r", None);
        assert!(matches!(replay.complete(&unseen), Err(Error::ReplayMiss(_))));
    }
}
