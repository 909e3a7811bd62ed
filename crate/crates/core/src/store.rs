//! Snapshot persistence.
//!
//! Layout of a data directory:
//!
//! ```text
//! MANIFEST                      {"format":1,"generation":7,"files":{"users":"users.000007.jsonl",...}}
//! users.000007.jsonl            header line, then one UserAccount per line
//! requests.000005.jsonl
//! ...
//! ```
//!
//! Every collection file starts with a header
//! `{"collection":"users","format":1,"count":N}` followed by exactly `N`
//! records and a trailing newline. A save writes the changed collections
//! under the next generation number (temp file, fsync, rename) and then
//! replaces `MANIFEST` the same way; the manifest rename is the commit
//! point, so a crash mid-save leaves the previous generation intact.
//!
//! Loading refuses anything it cannot fully account for: a bad header, a
//! count mismatch, a missing trailing newline, an unparsable line or a
//! broken reference all yield an error.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emergency::{EmergencyEvent, Notification};
use crate::model::{Engagement, EngagementState, FavorRequest, Id, Session, UserAccount};
use crate::trust::{ReputationRecord, VerificationBadge};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "MANIFEST";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collection {
    Users,
    Requests,
    Engagements,
    Badges,
    Ratings,
    Emergencies,
    Outbox,
    Sessions,
}

impl Collection {
    pub const ALL: [Collection; 8] = [
        Collection::Users,
        Collection::Requests,
        Collection::Engagements,
        Collection::Badges,
        Collection::Ratings,
        Collection::Emergencies,
        Collection::Outbox,
        Collection::Sessions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Collection::Users => "users",
            Collection::Requests => "requests",
            Collection::Engagements => "engagements",
            Collection::Badges => "badges",
            Collection::Ratings => "ratings",
            Collection::Emergencies => "emergencies",
            Collection::Outbox => "outbox",
            Collection::Sessions => "sessions",
        }
    }
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt store file {file} at line {line}: {reason}")]
    CorruptStore { file: String, line: usize, reason: String },
    #[error("store integrity violation: {0}")]
    Integrity(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Everything the platform persists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub users: BTreeMap<Id, UserAccount>,
    pub requests: BTreeMap<Id, FavorRequest>,
    pub engagements: BTreeMap<Id, Engagement>,
    /// Keyed by (user_id, org_id).
    pub badges: BTreeMap<(Id, Id), VerificationBadge>,
    pub ratings: BTreeMap<Id, ReputationRecord>,
    pub emergencies: BTreeMap<Id, EmergencyEvent>,
    pub outbox: BTreeMap<Id, Notification>,
    pub sessions: BTreeMap<String, Session>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    collection: Collection,
    format: u32,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    generation: u64,
    files: BTreeMap<Collection, String>,
}

fn encode_records<'a, T: Serialize + 'a>(
    collection: Collection,
    records: impl ExactSizeIterator<Item = &'a T>,
) -> Vec<u8> {
    let header = Header { collection, format: FORMAT_VERSION, count: records.len() };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut out, r).expect("domain records serialize");
        out.push(b'\n');
    }
    out
}

fn decode_records<T: DeserializeOwned>(
    bytes: &[u8],
    collection: Collection,
    file: &str,
) -> Result<Vec<T>, StoreError> {
    let corrupt = |line: usize, reason: String| StoreError::CorruptStore {
        file: file.to_owned(),
        line,
        reason,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| corrupt(0, format!("not UTF-8: {e}")))?;
    let mut lines: Vec<&str> = text.split('\n').collect();
    // a complete file ends with '\n', leaving one empty tail element
    match lines.pop() {
        Some("") if !lines.is_empty() => {}
        _ => return Err(corrupt(lines.len().max(1), "truncated: missing final newline".into())),
    }
    let header: Header = serde_json::from_str(lines[0])
        .map_err(|e| corrupt(1, format!("bad header: {e}")))?;
    if header.collection != collection {
        return Err(corrupt(1, format!("header names collection {}", header.collection)));
    }
    if header.format != FORMAT_VERSION {
        return Err(corrupt(1, format!("unsupported format {}", header.format)));
    }
    let body = &lines[1..];
    if body.len() != header.count {
        return Err(corrupt(
            body.len() + 1,
            format!("header declares {} records, found {}", header.count, body.len()),
        ));
    }
    body.iter()
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| corrupt(i + 2, e.to_string())))
        .collect()
}

impl Snapshot {
    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
            && self.requests.is_empty()
            && self.engagements.is_empty()
            && self.badges.is_empty()
            && self.ratings.is_empty()
            && self.emergencies.is_empty()
            && self.outbox.is_empty()
            && self.sessions.is_empty()
    }

    pub fn encode(&self, collection: Collection) -> Vec<u8> {
        match collection {
            Collection::Users => encode_records(collection, self.users.values()),
            Collection::Requests => encode_records(collection, self.requests.values()),
            Collection::Engagements => encode_records(collection, self.engagements.values()),
            Collection::Badges => encode_records(collection, self.badges.values()),
            Collection::Ratings => encode_records(collection, self.ratings.values()),
            Collection::Emergencies => encode_records(collection, self.emergencies.values()),
            Collection::Outbox => encode_records(collection, self.outbox.values()),
            Collection::Sessions => encode_records(collection, self.sessions.values()),
        }
    }

    /// Replaces `collection` with the decoded contents of `bytes`.
    pub fn decode_into(
        &mut self,
        collection: Collection,
        bytes: &[u8],
        file: &str,
    ) -> Result<(), StoreError> {
        fn keyed<T: DeserializeOwned, K: Ord>(
            bytes: &[u8],
            c: Collection,
            file: &str,
            key: impl Fn(&T) -> K,
        ) -> Result<BTreeMap<K, T>, StoreError> {
            let records: Vec<T> = decode_records(bytes, c, file)?;
            let n = records.len();
            let map: BTreeMap<K, T> = records.into_iter().map(|r| (key(&r), r)).collect();
            if map.len() != n {
                return Err(StoreError::CorruptStore {
                    file: file.to_owned(),
                    line: 0,
                    reason: "duplicate keys".into(),
                });
            }
            Ok(map)
        }
        let c = collection;
        match c {
            Collection::Users => self.users = keyed(bytes, c, file, |u: &UserAccount| u.id.clone())?,
            Collection::Requests => {
                self.requests = keyed(bytes, c, file, |r: &FavorRequest| r.id.clone())?
            }
            Collection::Engagements => {
                self.engagements = keyed(bytes, c, file, |e: &Engagement| e.id.clone())?
            }
            Collection::Badges => {
                self.badges = keyed(bytes, c, file, |b: &VerificationBadge| {
                    (b.user_id.clone(), b.org_id.clone())
                })?
            }
            Collection::Ratings => {
                self.ratings = keyed(bytes, c, file, |r: &ReputationRecord| r.id.clone())?
            }
            Collection::Emergencies => {
                self.emergencies = keyed(bytes, c, file, |e: &EmergencyEvent| e.id.clone())?
            }
            Collection::Outbox => {
                self.outbox = keyed(bytes, c, file, |n: &Notification| n.id.clone())?
            }
            Collection::Sessions => {
                self.sessions = keyed(bytes, c, file, |s: &Session| s.token.clone())?
            }
        }
        Ok(())
    }

    /// Largest id sequence in use, so new ids never collide after a load.
    pub fn max_sequence(&self) -> u64 {
        let ids = self
            .users
            .keys()
            .chain(self.requests.keys())
            .chain(self.engagements.keys())
            .chain(self.ratings.keys())
            .chain(self.emergencies.keys())
            .chain(self.outbox.keys());
        ids.filter_map(Id::sequence).max().unwrap_or(0)
    }

    /// Referential integrity and cross-aggregate invariants.
    pub fn check_integrity(&self) -> Result<(), StoreError> {
        let fail = |msg: String| Err(StoreError::Integrity(msg));

        let mut emails = HashSet::new();
        for (id, u) in &self.users {
            if id != &u.id {
                return fail(format!("user keyed {id} has id {}", u.id));
            }
            if !emails.insert(u.email.as_str()) {
                return fail(format!("duplicate email {}", u.email));
            }
        }
        let user = |id: &Id| self.users.get(id);

        for r in self.requests.values() {
            match user(&r.requester_id) {
                None => return fail(format!("request {} has unknown requester", r.id)),
                Some(u) if u.is_organization => {
                    return fail(format!("request {} posted by organization", r.id))
                }
                _ => {}
            }
            if r.expires_at <= r.created_at {
                return fail(format!("request {} expires before creation", r.id));
            }
        }

        let mut live_per_request: HashMap<&Id, usize> = HashMap::new();
        for e in self.engagements.values() {
            let Some(req) = self.requests.get(&e.request_id) else {
                return fail(format!("engagement {} has unknown request", e.id));
            };
            if user(&e.volunteer_id).is_none() {
                return fail(format!("engagement {} has unknown volunteer", e.id));
            }
            if e.volunteer_id == req.requester_id {
                return fail(format!("engagement {} volunteer is the requester", e.id));
            }
            let needs_keys = matches!(
                e.state,
                EngagementState::KeysIssued
                    | EngagementState::Authenticated
                    | EngagementState::Completed
                    | EngagementState::Closed
            );
            if e.state != EngagementState::Cancelled && needs_keys != e.key_pair.is_some() {
                return fail(format!("engagement {} key pair does not match {}", e.id, e.state));
            }
            if e.ratings.len() > 2 || e.ratings.iter().any(|r| !self.ratings.contains_key(r)) {
                return fail(format!("engagement {} has bad rating references", e.id));
            }
            if !e.state.is_terminal() {
                let n = live_per_request.entry(&e.request_id).or_default();
                *n += 1;
                if *n > 1 {
                    return fail(format!("request {} has two live engagements", e.request_id));
                }
            }
        }

        for b in self.badges.values() {
            if user(&b.user_id).is_none_or(|u| u.is_organization) {
                return fail(format!("badge for unknown or organization user {}", b.user_id));
            }
            if !user(&b.org_id).is_some_and(|o| o.is_organization) {
                return fail(format!("badge issued by non-organization {}", b.org_id));
            }
        }

        let mut raters = HashSet::new();
        for r in self.ratings.values() {
            let Some(e) = self.engagements.get(&r.engagement_id) else {
                return fail(format!("rating {} has unknown engagement", r.id));
            };
            let requester = &self.requests[&e.request_id].requester_id;
            let parties = [&e.volunteer_id, requester];
            if r.rater_id == r.ratee_id
                || !parties.contains(&&r.rater_id)
                || !parties.contains(&&r.ratee_id)
            {
                return fail(format!("rating {} is not between the engagement parties", r.id));
            }
            if !raters.insert((&r.engagement_id, &r.rater_id)) {
                return fail(format!("rating {} duplicates a rater", r.id));
            }
        }

        for ev in self.emergencies.values() {
            if user(&ev.user_id).is_none() {
                return fail(format!("emergency {} has unknown user", ev.id));
            }
        }
        for n in self.outbox.values() {
            if !self.emergencies.contains_key(&n.event_id) || user(&n.target_user_id).is_none() {
                return fail(format!("notification {} has dangling references", n.id));
            }
        }
        for s in self.sessions.values() {
            if user(&s.user_id).is_none() {
                return fail("session for unknown user".into());
            }
        }
        Ok(())
    }
}

/// Durable home of a [`Snapshot`].
pub trait SnapshotStore: Send + Sync {
    /// Persists the given collections of `snapshot`. Collections not listed
    /// keep their previously saved contents.
    fn save(&self, snapshot: &Snapshot, changed: &BTreeSet<Collection>) -> Result<(), StoreError>;

    fn load(&self) -> Result<Snapshot, StoreError>;
}

/// Directory-backed store; see the module docs for the layout.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
    state: Mutex<Option<Manifest>>,
}

impl FileStore {
    /// Opens (creating if needed) a data directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let probe = dir.join(".write-probe");
        File::create(&probe).map_err(io_err(&probe))?;
        fs::remove_file(&probe).map_err(io_err(&probe))?;
        Ok(FileStore { dir, state: Mutex::new(None) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn read_manifest(&self) -> Result<Option<Manifest>, StoreError> {
        let path = self.dir.join(MANIFEST);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptStore {
                file: MANIFEST.into(),
                line: 1,
                reason: e.to_string(),
            })?;
        if manifest.format != FORMAT_VERSION {
            return Err(StoreError::CorruptStore {
                file: MANIFEST.into(),
                line: 1,
                reason: format!("unsupported format {}", manifest.format),
            });
        }
        Ok(Some(manifest))
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let tmp = self.dir.join(format!("{name}.tmp"));
        let dest = self.dir.join(name);
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        drop(f);
        fs::rename(&tmp, &dest).map_err(io_err(&dest))?;
        Ok(())
    }

    fn sync_dir(&self) -> Result<(), StoreError> {
        File::open(&self.dir).and_then(|d| d.sync_all()).map_err(io_err(&self.dir))
    }
}

impl SnapshotStore for FileStore {
    fn save(&self, snapshot: &Snapshot, changed: &BTreeSet<Collection>) -> Result<(), StoreError> {
        let mut guard = self.state.lock().expect("store lock poisoned");
        if guard.is_none() {
            *guard = self.read_manifest()?;
        }
        let previous = guard.take();
        let generation = previous.as_ref().map_or(1, |m| m.generation + 1);
        let mut files = previous.as_ref().map(|m| m.files.clone()).unwrap_or_default();

        let mut obsolete = Vec::new();
        for &c in Collection::ALL.iter() {
            if !changed.contains(&c) && files.contains_key(&c) {
                continue;
            }
            let name = format!("{}.{generation:06}.jsonl", c.name());
            if let Err(e) = self.write_atomic(&name, &snapshot.encode(c)) {
                *guard = previous;
                return Err(e);
            }
            if let Some(old) = files.insert(c, name) {
                obsolete.push(old);
            }
        }
        let manifest = Manifest { format: FORMAT_VERSION, generation, files };
        let bytes = serde_json::to_vec(&manifest).expect("manifest serializes");
        if let Err(e) = self.sync_dir().and_then(|_| self.write_atomic(MANIFEST, &bytes)) {
            *guard = previous;
            return Err(e);
        }
        self.sync_dir()?;
        for old in obsolete {
            // leftovers are harmless; the manifest no longer names them
            let _ = fs::remove_file(self.dir.join(old));
        }
        *guard = Some(manifest);
        Ok(())
    }

    fn load(&self) -> Result<Snapshot, StoreError> {
        let mut guard = self.state.lock().expect("store lock poisoned");
        let manifest = self.read_manifest()?;
        let mut snapshot = Snapshot::default();
        if let Some(m) = &manifest {
            for (&c, name) in &m.files {
                let path = self.dir.join(name);
                let bytes = fs::read(&path).map_err(|e| match e.kind() {
                    io::ErrorKind::NotFound => StoreError::CorruptStore {
                        file: name.clone(),
                        line: 0,
                        reason: "listed in MANIFEST but missing".into(),
                    },
                    _ => io_err(&path)(e),
                })?;
                snapshot.decode_into(c, &bytes, name)?;
            }
        }
        snapshot.check_integrity()?;
        *guard = manifest;
        Ok(snapshot)
    }
}

/// In-memory store with the same contract as [`FileStore`]; snapshots go
/// through the same encoding so round-trip behavior matches.
#[derive(Debug, Default)]
pub struct MemoryStore {
    files: Mutex<BTreeMap<Collection, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrites the stored bytes of one collection; for corruption tests.
    pub fn put_raw(&self, collection: Collection, bytes: Vec<u8>) {
        self.files.lock().expect("store lock poisoned").insert(collection, bytes);
    }

    pub fn raw(&self, collection: Collection) -> Option<Vec<u8>> {
        self.files.lock().expect("store lock poisoned").get(&collection).cloned()
    }
}

impl SnapshotStore for MemoryStore {
    fn save(&self, snapshot: &Snapshot, changed: &BTreeSet<Collection>) -> Result<(), StoreError> {
        let mut files = self.files.lock().expect("store lock poisoned");
        for &c in Collection::ALL.iter() {
            if changed.contains(&c) || !files.contains_key(&c) {
                files.insert(c, snapshot.encode(c));
            }
        }
        Ok(())
    }

    fn load(&self) -> Result<Snapshot, StoreError> {
        let files = self.files.lock().expect("store lock poisoned");
        let mut snapshot = Snapshot::default();
        for (&c, bytes) in files.iter() {
            snapshot.decode_into(c, bytes, c.name())?;
        }
        snapshot.check_integrity()?;
        Ok(snapshot)
    }
}
