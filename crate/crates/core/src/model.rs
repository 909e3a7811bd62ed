use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::challenge::ChallengeKeyPair;
use crate::geo::GeoPoint;

/// Opaque identifier of a stored aggregate.
///
/// Ids are `<prefix>-<sequence>` with a zero-padded sequence, so the
/// lexicographic order of ids of one kind is their creation order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdKind {
    User,
    Request,
    Engagement,
    Rating,
    Emergency,
    Notification,
}

impl IdKind {
    pub fn prefix(self) -> &'static str {
        match self {
            IdKind::User => "usr",
            IdKind::Request => "req",
            IdKind::Engagement => "eng",
            IdKind::Rating => "rat",
            IdKind::Emergency => "sos",
            IdKind::Notification => "ntf",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IdKind::User => "user",
            IdKind::Request => "request",
            IdKind::Engagement => "engagement",
            IdKind::Rating => "rating",
            IdKind::Emergency => "emergency",
            IdKind::Notification => "notification",
        }
    }
}

impl Id {
    pub fn new(kind: IdKind, seq: u64) -> Self {
        Id(format!("{}-{:010}", kind.prefix(), seq))
    }

    /// Wraps an id received from a client. No format check: unknown ids
    /// simply fail lookup.
    pub fn from_raw(raw: impl Into<String>) -> Self {
        Id(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Sequence number, if the id was minted by this platform.
    pub fn sequence(&self) -> Option<u64> {
        let (_, seq) = self.0.split_once('-')?;
        seq.parse().ok()
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAccount {
    pub id: Id,
    pub email: String,
    pub display_name: String,
    pub home_location: Option<GeoPoint>,
    pub created_at: DateTime<Utc>,
    pub is_organization: bool,
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestStatus {
    Open,
    Engaged,
    Closed,
    Cancelled,
    Expired,
}

impl RequestStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            RequestStatus::Closed | RequestStatus::Cancelled | RequestStatus::Expired
        )
    }
}

pub const MAX_TITLE_CHARS: usize = 120;
pub const MAX_DESCRIPTION_CHARS: usize = 2000;
pub const MAX_DISPLAY_NAME_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FavorRequest {
    pub id: Id,
    pub requester_id: Id,
    pub title: String,
    pub description: String,
    pub location: GeoPoint,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    pub status: RequestStatus,
    #[serde(default)]
    pub version: u64,
}

/// Engagement lifecycle, in lifecycle order. `Cancelled` sits outside the
/// main chain and is reachable only from `Accepted` and `KeysIssued`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum EngagementState {
    Accepted,
    KeysIssued,
    Authenticated,
    Completed,
    Closed,
    Cancelled,
}

impl EngagementState {
    pub const ALL: [EngagementState; 6] = [
        EngagementState::Accepted,
        EngagementState::KeysIssued,
        EngagementState::Authenticated,
        EngagementState::Completed,
        EngagementState::Closed,
        EngagementState::Cancelled,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, EngagementState::Closed | EngagementState::Cancelled)
    }

    pub fn name(self) -> &'static str {
        match self {
            EngagementState::Accepted => "Accepted",
            EngagementState::KeysIssued => "KeysIssued",
            EngagementState::Authenticated => "Authenticated",
            EngagementState::Completed => "Completed",
            EngagementState::Closed => "Closed",
            EngagementState::Cancelled => "Cancelled",
        }
    }
}

impl fmt::Display for EngagementState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engagement {
    pub id: Id,
    pub request_id: Id,
    pub volunteer_id: Id,
    pub state: EngagementState,
    pub key_pair: Option<ChallengeKeyPair>,
    /// Rating record ids, one per party at most.
    pub ratings: Vec<Id>,
    /// When each state was entered.
    pub timestamps: BTreeMap<EngagementState, DateTime<Utc>>,
    /// Consecutive failed keyword checks.
    #[serde(default)]
    pub failed_attempts: u32,
    /// Set once the keyword check locked out; the engagement needs review.
    #[serde(default)]
    pub flagged_for_review: bool,
    #[serde(default)]
    pub requester_verified: bool,
    #[serde(default)]
    pub version: u64,
}

impl Engagement {
    pub fn new(id: Id, request_id: Id, volunteer_id: Id, at: DateTime<Utc>) -> Self {
        let mut timestamps = BTreeMap::new();
        timestamps.insert(EngagementState::Accepted, at);
        Engagement {
            id,
            request_id,
            volunteer_id,
            state: EngagementState::Accepted,
            key_pair: None,
            ratings: Vec::new(),
            timestamps,
            failed_attempts: 0,
            flagged_for_review: false,
            requester_verified: false,
            version: 0,
        }
    }

    pub fn entered_at(&self, state: EngagementState) -> Option<DateTime<Utc>> {
        self.timestamps.get(&state).copied()
    }
}

/// Who performs an operation that admins may also perform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Actor {
    User(Id),
    Admin,
}

/// Bearer session minted by email-identity login.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub user_id: Id,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

impl Session {
    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        now < self.expires_at
    }
}
