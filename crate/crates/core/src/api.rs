//! JSON bodies exchanged over HTTP, shared by the service and its clients.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::challenge::{ChallengeKeyPair, SpeakerRole};
use crate::emergency::{EmergencyEvent, Notification};
use crate::geo::GeoPoint;
use crate::model::{Engagement, EngagementState, FavorRequest, Id, UserAccount};
use crate::trust::{GradeCount, LikertGrade, ReputationRecord, VerificationBadge};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewUser {
    pub email: String,
    pub display_name: String,
    #[serde(default)]
    pub home_location: Option<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewOrganization {
    pub email: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserBody {
    pub user: UserAccount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginBody {
    pub email: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionBody {
    pub token: String,
    pub user_id: Id,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfirmProfileBody {
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadgeBody {
    pub badge: VerificationBadge,
}

/// Everything the profile popup shows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub user_id: Id,
    pub display_name: String,
    pub is_organization: bool,
    pub verified: bool,
    /// Newest first.
    pub badges: Vec<VerificationBadge>,
    pub reputation_sum: i64,
    pub grade_counts: Vec<GradeCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewRequest {
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub location: GeoPoint,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestBody {
    pub request: FavorRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementBody {
    pub engagement: Engagement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordsBody {
    pub volunteer_word: String,
    pub requester_word: String,
}

impl From<&ChallengeKeyPair> for KeywordsBody {
    fn from(p: &ChallengeKeyPair) -> Self {
        KeywordsBody {
            volunteer_word: p.volunteer_word.clone(),
            requester_word: p.requester_word.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyKeywordBody {
    pub speaker_role: SpeakerRole,
    pub spoken: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub ok: bool,
    pub state: EngagementState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateBody {
    pub grade: LikertGrade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordBody {
    pub record: ReputationRecord,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SosRequest {
    #[serde(default)]
    pub location: Option<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosBody {
    pub event: EmergencyEvent,
    /// False when the press folded into a recent open event.
    pub created: bool,
    /// Volunteers alerted for this event.
    pub notified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBody {
    pub event: EmergencyEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainRequest {
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrainBody {
    pub delivered: Vec<Notification>,
}

/// Uniform error body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
