//! S.O.S events and their dispatch to nearby verified volunteers.
//!
//! Alerts are not pushed directly; each target gets a [`Notification`] row
//! in the outbox which the service drains.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geo::{haversine_distance, GeoPoint, RadiusMeters};
use crate::model::{Actor, Id, UserAccount};

pub const DEFAULT_SOS_RADIUS_M: f64 = 2_000.0;
pub const DEDUP_WINDOW_SECS: i64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmergencyStatus {
    Open,
    Acknowledged,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub volunteer_id: Id,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergencyEvent {
    pub id: Id,
    pub user_id: Id,
    pub location: GeoPoint,
    pub raised_at: DateTime<Utc>,
    pub status: EmergencyStatus,
    pub acknowledgments: Vec<Acknowledgment>,
    #[serde(default)]
    pub resolved_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub id: Id,
    pub event_id: Id,
    pub target_user_id: Id,
    pub created_at: DateTime<Utc>,
    pub delivered_at: Option<DateTime<Utc>>,
}

impl EmergencyEvent {
    pub fn new(id: Id, user_id: Id, location: GeoPoint, raised_at: DateTime<Utc>) -> Self {
        EmergencyEvent {
            id,
            user_id,
            location,
            raised_at,
            status: EmergencyStatus::Open,
            acknowledgments: Vec::new(),
            resolved_at: None,
            version: 0,
        }
    }

    /// Whether a new press by the same user at `now` should fold into this
    /// event instead of raising another.
    pub fn absorbs_press_at(&self, now: DateTime<Utc>) -> bool {
        self.status != EmergencyStatus::Resolved
            && now >= self.raised_at
            && now - self.raised_at < Duration::seconds(DEDUP_WINDOW_SECS)
    }

    /// `targets` are the volunteers the event was dispatched to.
    pub fn acknowledge(
        &self,
        volunteer: &Id,
        targets: &[Id],
        now: DateTime<Utc>,
    ) -> Result<EmergencyEvent, Error> {
        if self.status == EmergencyStatus::Resolved {
            return Err(Error::AlreadyResolved);
        }
        if !targets.contains(volunteer) {
            return Err(Error::NotATarget);
        }
        let mut next = self.clone();
        if !next.acknowledgments.iter().any(|a| &a.volunteer_id == volunteer) {
            next.acknowledgments.push(Acknowledgment { volunteer_id: volunteer.clone(), at: now });
            next.status = EmergencyStatus::Acknowledged;
            next.version += 1;
        }
        Ok(next)
    }

    pub fn resolve(&self, actor: &Actor, now: DateTime<Utc>) -> Result<EmergencyEvent, Error> {
        if self.status == EmergencyStatus::Resolved {
            return Err(Error::AlreadyResolved);
        }
        let authorized = match actor {
            Actor::Admin => true,
            Actor::User(id) => id == &self.user_id,
        };
        if !authorized {
            return Err(Error::NotAuthorized);
        }
        let mut next = self.clone();
        next.status = EmergencyStatus::Resolved;
        next.resolved_at = Some(now);
        next.version += 1;
        Ok(next)
    }
}

/// Verified, non-organization users with a home location inside `radius`,
/// nearest first (ties by id). The raiser is never a target.
pub fn dispatch_targets<'a, I, F>(
    event: &EmergencyEvent,
    users: I,
    is_verified: F,
    radius: RadiusMeters,
) -> Vec<(&'a UserAccount, f64)>
where
    I: IntoIterator<Item = &'a UserAccount>,
    F: Fn(&Id) -> bool,
{
    let mut out: Vec<(&UserAccount, f64)> = users
        .into_iter()
        .filter(|u| u.id != event.user_id && !u.is_organization && is_verified(&u.id))
        .filter_map(|u| u.home_location.map(|loc| (u, haversine_distance(event.location, loc))))
        .filter(|(_, d)| *d <= radius.meters())
        .collect();
    out.sort_by(|(ua, da), (ub, db)| da.total_cmp(db).then_with(|| ua.id.cmp(&ub.id)));
    out
}
