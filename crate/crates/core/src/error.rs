use thiserror::Error;

use crate::lifecycle::TransitionError;
use crate::model::{EngagementState, Id, IdKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of platform operations. The HTTP layer maps each variant to a
/// status code and a stable `code` string.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid email address")]
    InvalidEmail,
    #[error("email address already registered")]
    DuplicateEmail,
    #[error("{0}")]
    Validation(String),
    #[error("{} {id} not found", kind.label())]
    NotFound { kind: IdKind, id: Id },
    #[error(transparent)]
    Transition(#[from] TransitionError),

    #[error("only the requester may do this")]
    NotOwner,
    #[error("request is already closed, cancelled or expired")]
    AlreadyTerminal,
    #[error("request is not open")]
    RequestNotOpen,
    #[error("request already has an active engagement")]
    AlreadyEngaged,
    #[error("cannot accept your own request")]
    OwnRequest,
    #[error("organization accounts cannot post or accept favor requests")]
    OrganizationForbidden,

    #[error("account is not an organization")]
    NotAnOrganization,
    #[error("organizations cannot be confirmed")]
    TargetIsOrganization,
    #[error("engagement is not completed")]
    NotCompleted,
    #[error("not a party of this engagement")]
    NotAParty,
    #[error("already rated this engagement")]
    AlreadyRated,

    #[error("engagement is {0}")]
    WrongState(EngagementState),
    #[error("keywords already issued")]
    AlreadyIssued,
    #[error("too many failed keyword checks; engagement flagged for review")]
    LockedOut,

    #[error("no location given and none on the profile")]
    NoLocation,
    #[error("emergency already resolved")]
    AlreadyResolved,
    #[error("volunteer was not alerted for this emergency")]
    NotATarget,
    #[error("not authorized")]
    NotAuthorized,
}

impl Error {
    pub fn not_found(kind: IdKind, id: &Id) -> Self {
        Error::NotFound { kind, id: id.clone() }
    }

    /// Stable machine-readable code for API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidEmail => "invalid_email",
            Error::DuplicateEmail => "duplicate_email",
            Error::Validation(_) => "validation",
            Error::NotFound { .. } => "not_found",
            Error::Transition(TransitionError::IllegalTransition { .. }) => "illegal_transition",
            Error::Transition(TransitionError::TerminalState { .. }) => "terminal_state",
            Error::NotOwner => "not_owner",
            Error::AlreadyTerminal => "already_terminal",
            Error::RequestNotOpen => "request_not_open",
            Error::AlreadyEngaged => "already_engaged",
            Error::OwnRequest => "own_request",
            Error::OrganizationForbidden => "organization_forbidden",
            Error::NotAnOrganization => "not_an_organization",
            Error::TargetIsOrganization => "target_is_organization",
            Error::NotCompleted => "not_completed",
            Error::NotAParty => "not_a_party",
            Error::AlreadyRated => "already_rated",
            Error::WrongState(_) => "wrong_state",
            Error::AlreadyIssued => "already_issued",
            Error::LockedOut => "locked_out",
            Error::NoLocation => "no_location",
            Error::AlreadyResolved => "already_resolved",
            Error::NotATarget => "not_a_target",
            Error::NotAuthorized => "not_authorized",
        }
    }
}
