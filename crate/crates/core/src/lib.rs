//! Core of the F1 favor-exchange platform.
//!
//! Users post geo-tagged favor requests, volunteers accept them and the
//! platform protects both sides with organization-issued profile badges,
//! spoken keyword pairs checked at the door, Likert reputation and an S.O.S
//! button dispatched to nearby verified volunteers.
//!
//! The pure building blocks live in their own modules ([`geo`], [`trust`],
//! [`challenge`], [`emergency`], [`lifecycle`]); [`platform::Platform`] ties
//! them together over one [`store::Snapshot`] and is what the HTTP service
//! drives.

pub mod api;
pub mod challenge;
pub mod email;
pub mod emergency;
pub mod error;
pub mod geo;
pub mod lifecycle;
pub mod model;
pub mod platform;
pub mod store;
pub mod trust;

pub use challenge::{ChallengeKeyPair, SpeakerRole, Wordlist, WordlistError};
pub use emergency::{EmergencyEvent, EmergencyStatus, Notification};
pub use error::{Error, Result};
pub use geo::{GeoPoint, NearbyResult, RadiusMeters};
pub use lifecycle::{EngagementEvent, EventKind, TransitionError};
pub use model::{
    Actor, Engagement, EngagementState, FavorRequest, Id, IdKind, RequestStatus, Session, UserAccount,
};
pub use platform::{Platform, PlatformConfig};
pub use store::{Collection, FileStore, MemoryStore, Snapshot, SnapshotStore, StoreError};
pub use trust::{GradeColor, LikertGrade, ReputationRecord, ReputationSummary, VerificationBadge};
