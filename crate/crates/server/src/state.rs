use std::fs;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use f1_core::{
    Actor, Error, FileStore, MemoryStore, Platform, PlatformConfig, RadiusMeters, SnapshotStore,
    StoreError, Wordlist,
};
use parking_lot::RwLock;

use crate::clock::{Clock, SystemClock};
use crate::config::ServerConfig;
use crate::error::ApiError;

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("wordlist {path}: {reason}")]
    Wordlist { path: String, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

struct Shared {
    platform: RwLock<Platform>,
    store: Box<dyn SnapshotStore>,
    clock: Arc<dyn Clock>,
    wordlist: Arc<Wordlist>,
    platform_config: PlatformConfig,
    default_radius: RadiusMeters,
    admin_token: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState").finish_non_exhaustive()
    }
}

fn load_wordlist(config: &ServerConfig) -> Result<Wordlist, StartError> {
    let Some(path) = &config.wordlist_path else {
        return Ok(Wordlist::sample());
    };
    let shown = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| StartError::Wordlist { path: shown.clone(), reason: e.to_string() })?;
    Wordlist::load(&text, shown.clone())
        .map_err(|e| StartError::Wordlist { path: shown, reason: e.to_string() })
}

impl AppState {
    /// Loads the store named by `config` (refusing corrupt data) and
    /// rebuilds the platform from it.
    pub fn open(config: &ServerConfig) -> Result<Self, StartError> {
        let store: Box<dyn SnapshotStore> = match &config.data_dir {
            Some(dir) => Box::new(FileStore::open(dir)?),
            None => Box::new(MemoryStore::new()),
        };
        Self::with_store(config, store, Arc::new(SystemClock))
    }

    pub fn with_store(
        config: &ServerConfig,
        store: Box<dyn SnapshotStore>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StartError> {
        let platform_config = config.platform_config().map_err(StartError::Config)?;
        let default_radius = config.default_radius().map_err(StartError::Config)?;
        let wordlist = Arc::new(load_wordlist(config)?);
        let snapshot = store.load()?;
        let platform = Platform::from_snapshot(snapshot, wordlist.clone(), platform_config.clone())?;
        Ok(AppState {
            shared: Arc::new(Shared {
                platform: RwLock::new(platform),
                store,
                clock,
                wordlist,
                platform_config,
                default_radius,
                admin_token: config.admin_token.clone(),
            }),
        })
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.shared.clock.now()
    }

    pub fn default_radius(&self) -> RadiusMeters {
        self.shared.default_radius
    }

    pub fn admin_token(&self) -> Option<&str> {
        self.shared.admin_token.as_deref()
    }

    pub fn read<T>(&self, f: impl FnOnce(&Platform, DateTime<Utc>) -> T) -> T {
        let now = self.now();
        f(&self.shared.platform.read(), now)
    }

    /// Runs a mutation under the write lock and persists whatever it touched
    /// before returning, so an Ok response means the write is on disk.
    pub async fn write<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Platform, DateTime<Utc>) -> Result<T, Error> + Send + 'static,
    {
        let shared = self.shared.clone();
        tokio::task::spawn_blocking(move || shared.apply(f))
            .await
            .map_err(|e| ApiError::Internal(format!("write task failed: {e}")))?
    }

    /// Maps a bearer token to an actor.
    pub fn authenticate(&self, token: &str) -> Option<Actor> {
        if self.admin_token().is_some_and(|t| t == token) {
            return Some(Actor::Admin);
        }
        self.read(|p, now| p.authenticate(token, now).map(|u| Actor::User(u.id.clone())))
    }

    /// Writes out anything still pending; used at shutdown.
    pub fn flush(&self) -> Result<(), StoreError> {
        let mut p = self.shared.platform.write();
        let changes = p.take_changes();
        if changes.is_empty() {
            return Ok(());
        }
        self.shared.store.save(p.snapshot(), &changes).inspect_err(|_| p.restore_changes(changes))
    }
}

impl Shared {
    fn apply<T>(
        &self,
        f: impl FnOnce(&mut Platform, DateTime<Utc>) -> Result<T, Error>,
    ) -> Result<T, ApiError> {
        let mut p = self.platform.write();
        let now = self.clock.now();
        let out = f(&mut p, now);
        let changes = p.take_changes();
        if !changes.is_empty() {
            if let Err(e) = self.store.save(p.snapshot(), &changes) {
                // fall back to the last committed state so memory never runs
                // ahead of disk
                let reloaded = self.store.load().map_err(|e| e.to_string()).and_then(|s| {
                    Platform::from_snapshot(s, self.wordlist.clone(), self.platform_config.clone())
                        .map_err(|e| e.to_string())
                });
                match reloaded {
                    Ok(fresh) => *p = fresh,
                    Err(reason) => {
                        tracing::error!(%reason, "could not reload store after failed save");
                        p.restore_changes(changes);
                    }
                }
                return Err(ApiError::Store(e));
            }
        }
        Ok(out?)
    }
}
