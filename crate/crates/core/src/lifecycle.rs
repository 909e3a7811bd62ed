//! Engagement state machine.
//!
//! ```text
//! Accepted --IssueKeys--> KeysIssued --VerifyArrival--> Authenticated
//!     |                       |                               |
//!   Cancel                  Cancel                         Complete
//!     v                       v                               v
//! Cancelled <-----------------+                          Completed
//!                                                             |
//!                           second RateSubmitted | RatingWindowClosed
//!                                                             v
//!                                                          Closed
//! ```
//!
//! The first `RateSubmitted` keeps the engagement in `Completed`.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::ChallengeKeyPair;
use crate::model::{Engagement, EngagementState, Id};

/// Both parties rate at most once; the second rating closes the engagement.
pub const RATINGS_TO_CLOSE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum EngagementEvent {
    IssueKeys(ChallengeKeyPair),
    /// Fired only on a successful volunteer keyword check.
    VerifyArrival,
    Complete,
    RateSubmitted { record_id: Id },
    RatingWindowClosed,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    IssueKeys,
    VerifyArrival,
    Complete,
    RateSubmitted,
    RatingWindowClosed,
    Cancel,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::IssueKeys,
        EventKind::VerifyArrival,
        EventKind::Complete,
        EventKind::RateSubmitted,
        EventKind::RatingWindowClosed,
        EventKind::Cancel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::IssueKeys => "IssueKeys",
            EventKind::VerifyArrival => "VerifyArrival",
            EventKind::Complete => "Complete",
            EventKind::RateSubmitted => "RateSubmitted",
            EventKind::RatingWindowClosed => "RatingWindowClosed",
            EventKind::Cancel => "Cancel",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl EngagementEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            EngagementEvent::IssueKeys(_) => EventKind::IssueKeys,
            EngagementEvent::VerifyArrival => EventKind::VerifyArrival,
            EngagementEvent::Complete => EventKind::Complete,
            EngagementEvent::RateSubmitted { .. } => EventKind::RateSubmitted,
            EngagementEvent::RatingWindowClosed => EventKind::RatingWindowClosed,
            EngagementEvent::Cancel => EventKind::Cancel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("event {event} is not allowed in state {state}")]
    IllegalTransition { state: EngagementState, event: EventKind },
    #[error("engagement is in terminal state {state}; event {event} rejected")]
    TerminalState { state: EngagementState, event: EventKind },
}

/// Table lookup: successor for `event` in `state`, given how many ratings
/// the engagement holds before the event.
pub fn successor(
    state: EngagementState,
    event: EventKind,
    ratings_before: usize,
) -> Result<EngagementState, TransitionError> {
    use EngagementState as S;
    use EventKind as E;

    if state.is_terminal() {
        return Err(TransitionError::TerminalState { state, event });
    }
    let next = match (state, event) {
        (S::Accepted, E::IssueKeys) => S::KeysIssued,
        (S::KeysIssued, E::VerifyArrival) => S::Authenticated,
        (S::Authenticated, E::Complete) => S::Completed,
        (S::Completed, E::RateSubmitted) if ratings_before + 1 >= RATINGS_TO_CLOSE => S::Closed,
        (S::Completed, E::RateSubmitted) => S::Completed,
        (S::Completed, E::RatingWindowClosed) => S::Closed,
        (S::Accepted | S::KeysIssued, E::Cancel) => S::Cancelled,
        _ => return Err(TransitionError::IllegalTransition { state, event }),
    };
    Ok(next)
}

/// Applies `event`, returning the updated engagement. The input is left
/// untouched.
pub fn transition(
    engagement: &Engagement,
    event: EngagementEvent,
    at: DateTime<Utc>,
) -> Result<Engagement, TransitionError> {
    let next = successor(engagement.state, event.kind(), engagement.ratings.len())?;
    let mut out = engagement.clone();
    match event {
        EngagementEvent::IssueKeys(pair) => out.key_pair = Some(pair),
        EngagementEvent::RateSubmitted { record_id } => out.ratings.push(record_id),
        _ => {}
    }
    if next != out.state {
        out.timestamps.insert(next, at);
    }
    out.state = next;
    out.version += 1;
    Ok(out)
}
