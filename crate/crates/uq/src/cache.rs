//! Record/replay cache for provider calls.
//!
//! On disk the cache is an append-only sequence of records
//! `[u32 LE payload length][32-byte SHA-256 of key][payload]`, where the
//! payload is the JSON object `{"key": <canonical request>, "value": ...}`.
//! The key is the compact JSON of `{provider, op, request, sample_index}`
//! with object keys sorted, so its digest is stable across runs.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use uq_core::Generation;

use crate::backend::{ChatProvider, ChatRequest, EmbeddingProvider, EntailmentProvider};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    /// No cache; every call reaches the provider.
    #[default]
    Live,
    /// Hits are served from the cache; misses call the provider and are appended.
    Record,
    /// Hits only; a miss is an error and no provider is called.
    Replay,
}

impl FromStr for CacheMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(Self::Live),
            "record" => Ok(Self::Record),
            "replay" => Ok(Self::Replay),
            other => Err(Error::config(format!("unknown cache mode {other:?}"))),
        }
    }
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Live => "live",
            Self::Record => "record",
            Self::Replay => "replay",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Payload {
    key: String,
    value: Value,
}

pub struct Cache {
    mode: CacheMode,
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Value>>,
    writer: Option<Mutex<File>>,
}

pub fn canonical_key(provider: &str, op: &str, request: Value, sample_index: Option<u32>) -> String {
    // serde_json maps are sorted by key, so this text is canonical
    json!({
        "provider": provider,
        "op": op,
        "request": request,
        "sample_index": sample_index,
    })
    .to_string()
}

fn digest(key: &str) -> [u8; 32] {
    Sha256::digest(key.as_bytes()).into()
}

impl Cache {
    pub fn live() -> Arc<Self> {
        Arc::new(Self {
            mode: CacheMode::Live,
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: None,
        })
    }

    /// Opens the cache file for `mode`. Record mode creates the file if
    /// needed; replay mode requires it to exist.
    pub fn open(mode: CacheMode, path: &Path) -> Result<Arc<Self>> {
        if mode == CacheMode::Live {
            return Ok(Self::live());
        }
        let entries = if path.exists() || mode == CacheMode::Replay {
            load(path)?
        } else {
            HashMap::new()
        };
        let writer = if mode == CacheMode::Record {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            Some(Mutex::new(file))
        } else {
            None
        };
        Ok(Arc::new(Self {
            mode,
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer,
        }))
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &str) -> Option<Value> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    fn put(&self, key: String, value: Value) -> Result<()> {
        let Some(writer) = &self.writer else {
            return Ok(());
        };
        // hold the writer across the check so concurrent misses append once
        let mut file = writer.lock().expect("cache writer lock");
        if self.entries.read().expect("cache lock").contains_key(&key) {
            return Ok(());
        }
        let payload = serde_json::to_vec(&Payload {
            key: key.clone(),
            value: value.clone(),
        })?;
        let len = u32::try_from(payload.len()).map_err(|_| Error::CacheCorruption("record too large".into()))?;
        let mut record = Vec::with_capacity(36 + payload.len());
        record.extend_from_slice(&len.to_le_bytes());
        record.extend_from_slice(&digest(&key));
        record.extend_from_slice(&payload);
        let path = self.path.as_deref().unwrap_or(Path::new(""));
        file.write_all(&record).map_err(|e| Error::io(path, e))?;
        file.flush().map_err(|e| Error::io(path, e))?;
        self.entries.write().expect("cache lock").insert(key, value);
        Ok(())
    }

    /// Serves `key` from the cache or runs `call`, according to the mode.
    pub fn lookup_or_call<T, F>(&self, key: String, call: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        match self.mode {
            CacheMode::Live => call(),
            CacheMode::Replay => match self.get(&key) {
                Some(v) => Ok(serde_json::from_value(v)?),
                None => Err(Error::ReplayMiss(key)),
            },
            CacheMode::Record => {
                if let Some(v) = self.get(&key) {
                    return Ok(serde_json::from_value(v)?);
                }
                let value = call()?;
                self.put(key, serde_json::to_value(&value)?)?;
                Ok(value)
            }
        }
    }

    /// Like [`Self::lookup_or_call`] for a batch of keys answered by one call.
    /// The call runs only if some key misses, and must return one value per key.
    fn lookup_many<T, F>(&self, keys: Vec<String>, call: F) -> Result<Vec<T>>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<Vec<T>>,
    {
        if self.mode == CacheMode::Live {
            return call();
        }
        let hits: Option<Vec<Value>> = keys.iter().map(|k| self.get(k)).collect();
        if let Some(values) = hits {
            return values.into_iter().map(|v| Ok(serde_json::from_value(v)?)).collect();
        }
        if self.mode == CacheMode::Replay {
            let missing = keys.into_iter().find(|k| self.get(k).is_none()).unwrap_or_default();
            return Err(Error::ReplayMiss(missing));
        }
        let values = call()?;
        if values.len() == keys.len() {
            for (k, v) in keys.into_iter().zip(&values) {
                self.put(k, serde_json::to_value(v)?)?;
            }
        }
        Ok(values)
    }
}

fn load(path: &Path) -> Result<HashMap<String, Value>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut entries = HashMap::new();
    let mut at = 0usize;
    let corrupt = |at: usize, what: &str| Error::CacheCorruption(format!("{}: {what} at byte {at}", path.display()));
    while at < bytes.len() {
        if bytes.len() - at < 36 {
            return Err(corrupt(at, "truncated record header"));
        }
        let len = u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let stored: [u8; 32] = bytes[at + 4..at + 36].try_into().expect("32 bytes");
        let start = at + 36;
        if bytes.len() - start < len {
            return Err(corrupt(at, "truncated payload"));
        }
        let payload: Payload =
            serde_json::from_slice(&bytes[start..start + len]).map_err(|_| corrupt(at, "unreadable payload"))?;
        if digest(&payload.key) != stored {
            return Err(corrupt(at, "digest mismatch"));
        }
        entries.insert(payload.key, payload.value);
        at = start + len;
    }
    Ok(entries)
}

/// Caches each sampled generation under its own key (the full request plus
/// the sample index). A request is served from the cache only when every
/// sample hits.
pub struct CachedChat<P> {
    inner: P,
    cache: Arc<Cache>,
}

impl<P> CachedChat<P> {
    pub fn new(inner: P, cache: Arc<Cache>) -> Self {
        Self { inner, cache }
    }
}

impl<P: ChatProvider> ChatProvider for CachedChat<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn supports_logprobs(&self) -> bool {
        self.inner.supports_logprobs()
    }

    fn generate(&self, request: &ChatRequest) -> Result<Vec<Generation>> {
        let id = self.inner.id();
        let payload = serde_json::to_value(request)?;
        let keys = (0..request.sample_count)
            .map(|i| canonical_key(&id, "chat", payload.clone(), Some(i)))
            .collect();
        self.cache.lookup_many(keys, || self.inner.generate(request))
    }
}

/// Caches each text's embedding separately.
pub struct CachedEmbedder<P> {
    inner: P,
    cache: Arc<Cache>,
}

impl<P> CachedEmbedder<P> {
    pub fn new(inner: P, cache: Arc<Cache>) -> Self {
        Self { inner, cache }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let id = self.inner.id();
        let keys = texts
            .iter()
            .map(|t| canonical_key(&id, "embed", json!(t), None))
            .collect();
        self.cache.lookup_many(keys, || self.inner.embed_raw(texts))
    }
}

pub struct CachedEntailer<P> {
    inner: P,
    cache: Arc<Cache>,
}

impl<P> CachedEntailer<P> {
    pub fn new(inner: P, cache: Arc<Cache>) -> Self {
        Self { inner, cache }
    }
}

impl<P: EntailmentProvider> EntailmentProvider for CachedEntailer<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]> {
        let key = canonical_key(
            &self.inner.id(),
            "entail",
            json!({"premise": premise, "hypothesis": hypothesis}),
            None,
        );
        self.cache
            .lookup_or_call(key, || self.inner.entail_raw(premise, hypothesis))
    }
}
