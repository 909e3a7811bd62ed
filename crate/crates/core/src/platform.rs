//! The platform aggregate: every operation of the service over one
//! [`Snapshot`].
//!
//! `Platform` is a plain value with `&mut self` mutators, so callers decide
//! how writes are serialized (the HTTP service holds it behind one lock).
//! Every mutator records which collections it touched; callers persist
//! those via [`Platform::take_changes`].

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::api::{NewRequest, NewUser, Profile, VerifyOutcome};
use crate::challenge::{self, ChallengeKeyPair, SpeakerRole, Wordlist};
use crate::email::parse_email;
use crate::emergency::{self, EmergencyEvent, Notification, DEFAULT_SOS_RADIUS_M};
use crate::error::{Error, Result};
use crate::geo::{self, GeoPoint, NearbyResult, RadiusMeters, RequesterSummary};
use crate::lifecycle::{transition, EngagementEvent};
use crate::model::{
    Actor, Engagement, EngagementState, FavorRequest, Id, IdKind, RequestStatus, Session,
    UserAccount, MAX_DESCRIPTION_CHARS, MAX_DISPLAY_NAME_CHARS, MAX_TITLE_CHARS,
};
use crate::store::{Collection, Snapshot, StoreError};
use crate::trust::{self, LikertGrade, ReputationRecord, ReputationSummary, VerificationBadge};

pub const DEFAULT_RATING_WINDOW_DAYS: i64 = 14;
pub const SESSION_TTL_HOURS: i64 = 24;

#[derive(Debug, Clone)]
pub struct PlatformConfig {
    pub rating_window: Duration,
    pub session_ttl: Duration,
    pub sos_radius: RadiusMeters,
    /// Seed for keyword draws; `None` seeds from OS entropy.
    pub keyword_seed: Option<u64>,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig {
            rating_window: Duration::days(DEFAULT_RATING_WINDOW_DAYS),
            session_ttl: Duration::hours(SESSION_TTL_HOURS),
            sos_radius: RadiusMeters::new(DEFAULT_SOS_RADIUS_M).expect("default radius valid"),
            keyword_seed: None,
        }
    }
}

/// Result of an S.O.S press.
#[derive(Debug, Clone, PartialEq)]
pub struct SosOutcome {
    pub event: EmergencyEvent,
    pub created: bool,
    pub notified: usize,
}

/// What one maintenance pass changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub requests_expired: usize,
    pub rating_windows_closed: usize,
    pub sessions_pruned: usize,
}

#[derive(Debug)]
pub struct Platform {
    data: Snapshot,
    wordlist: Arc<Wordlist>,
    config: PlatformConfig,
    rng: ChaCha20Rng,
    next_seq: u64,
    emails: HashMap<String, Id>,
    changed: BTreeSet<Collection>,
}

impl Platform {
    pub fn new(wordlist: Arc<Wordlist>, config: PlatformConfig) -> Self {
        Self::from_snapshot(Snapshot::default(), wordlist, config)
            .expect("empty snapshot is consistent")
    }

    /// Rebuilds a platform from persisted state, refusing inconsistent data.
    pub fn from_snapshot(
        data: Snapshot,
        wordlist: Arc<Wordlist>,
        config: PlatformConfig,
    ) -> Result<Self, StoreError> {
        data.check_integrity()?;
        let rng = match config.keyword_seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_rng(&mut rand::rng()),
        };
        let emails = data.users.values().map(|u| (u.email.clone(), u.id.clone())).collect();
        Ok(Platform {
            next_seq: data.max_sequence() + 1,
            data,
            wordlist,
            config,
            rng,
            emails,
            changed: BTreeSet::new(),
        })
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.data
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn wordlist(&self) -> &Wordlist {
        &self.wordlist
    }

    /// Collections modified since the last call.
    pub fn take_changes(&mut self) -> BTreeSet<Collection> {
        std::mem::take(&mut self.changed)
    }

    /// Puts back changes that could not be persisted so the next save
    /// retries them.
    pub fn restore_changes(&mut self, changes: BTreeSet<Collection>) {
        self.changed.extend(changes);
    }

    fn mint(&mut self, kind: IdKind) -> Id {
        let id = Id::new(kind, self.next_seq);
        self.next_seq += 1;
        id
    }

    fn touch(&mut self, c: Collection) {
        self.changed.insert(c);
    }

    // ---- lookups ----------------------------------------------------------

    pub fn user(&self, id: &Id) -> Result<&UserAccount> {
        self.data.users.get(id).ok_or_else(|| Error::not_found(IdKind::User, id))
    }

    pub fn user_by_email(&self, raw: &str) -> Option<&UserAccount> {
        let email = parse_email(raw)?;
        self.emails.get(&email).and_then(|id| self.data.users.get(id))
    }

    pub fn request(&self, id: &Id) -> Result<&FavorRequest> {
        self.data.requests.get(id).ok_or_else(|| Error::not_found(IdKind::Request, id))
    }

    pub fn engagement(&self, id: &Id) -> Result<&Engagement> {
        self.data.engagements.get(id).ok_or_else(|| Error::not_found(IdKind::Engagement, id))
    }

    pub fn emergency(&self, id: &Id) -> Result<&EmergencyEvent> {
        self.data.emergencies.get(id).ok_or_else(|| Error::not_found(IdKind::Emergency, id))
    }

    /// The engagement of `request` that is not yet Closed or Cancelled.
    pub fn live_engagement(&self, request: &Id) -> Option<&Engagement> {
        self.data
            .engagements
            .values()
            .find(|e| &e.request_id == request && !e.state.is_terminal())
    }

    /// (volunteer, requester) of an engagement.
    pub fn parties(&self, engagement: &Engagement) -> (Id, Id) {
        let requester = self.data.requests[&engagement.request_id].requester_id.clone();
        (engagement.volunteer_id.clone(), requester)
    }

    fn party_engagement(&self, id: &Id, actor: &Id) -> Result<Engagement> {
        let e = self.engagement(id)?;
        let (volunteer, requester) = self.parties(e);
        if actor != &volunteer && actor != &requester {
            return Err(Error::NotAParty);
        }
        Ok(e.clone())
    }

    // ---- accounts and sessions -------------------------------------------

    fn register(
        &mut self,
        email: &str,
        display_name: &str,
        home_location: Option<GeoPoint>,
        is_organization: bool,
        now: DateTime<Utc>,
    ) -> Result<UserAccount> {
        let email = parse_email(email).ok_or(Error::InvalidEmail)?;
        let display_name = display_name.trim();
        let n = display_name.chars().count();
        if n == 0 || n > MAX_DISPLAY_NAME_CHARS {
            return Err(Error::Validation(format!(
                "display name must have 1-{MAX_DISPLAY_NAME_CHARS} characters"
            )));
        }
        if self.emails.contains_key(&email) {
            return Err(Error::DuplicateEmail);
        }
        let user = UserAccount {
            id: self.mint(IdKind::User),
            email: email.clone(),
            display_name: display_name.to_owned(),
            home_location,
            created_at: now,
            is_organization,
            version: 0,
        };
        self.emails.insert(email, user.id.clone());
        self.data.users.insert(user.id.clone(), user.clone());
        self.touch(Collection::Users);
        Ok(user)
    }

    pub fn register_user(&mut self, new: &NewUser, now: DateTime<Utc>) -> Result<UserAccount> {
        self.register(&new.email, &new.display_name, new.home_location, false, now)
    }

    pub fn register_organization(
        &mut self,
        email: &str,
        display_name: &str,
        now: DateTime<Utc>,
    ) -> Result<UserAccount> {
        self.register(email, display_name, None, true, now)
    }

    /// Email-identity login; `token` is minted by the caller.
    pub fn open_session(&mut self, email: &str, token: String, now: DateTime<Utc>) -> Result<Session> {
        if parse_email(email).is_none() {
            return Err(Error::InvalidEmail);
        }
        let user = self
            .user_by_email(email)
            .ok_or_else(|| Error::not_found(IdKind::User, &Id::from_raw(email.trim())))?;
        let session = Session {
            token: token.clone(),
            user_id: user.id.clone(),
            issued_at: now,
            expires_at: now + self.config.session_ttl,
        };
        self.data.sessions.insert(token, session.clone());
        self.touch(Collection::Sessions);
        Ok(session)
    }

    /// User behind a live session token.
    pub fn authenticate(&self, token: &str, now: DateTime<Utc>) -> Option<&UserAccount> {
        let s = self.data.sessions.get(token).filter(|s| s.is_live(now))?;
        self.data.users.get(&s.user_id)
    }

    // ---- favor requests ----------------------------------------------------

    pub fn post_request(
        &mut self,
        requester: &Id,
        new: &NewRequest,
        now: DateTime<Utc>,
    ) -> Result<FavorRequest> {
        if self.user(requester)?.is_organization {
            return Err(Error::OrganizationForbidden);
        }
        let title = new.title.trim();
        let n = title.chars().count();
        if n == 0 || n > MAX_TITLE_CHARS {
            return Err(Error::Validation(format!("title must have 1-{MAX_TITLE_CHARS} characters")));
        }
        if new.description.chars().count() > MAX_DESCRIPTION_CHARS {
            return Err(Error::Validation(format!(
                "description exceeds {MAX_DESCRIPTION_CHARS} characters"
            )));
        }
        if new.expires_at <= now {
            return Err(Error::Validation("expires_at must be in the future".into()));
        }
        let request = FavorRequest {
            id: self.mint(IdKind::Request),
            requester_id: requester.clone(),
            title: title.to_owned(),
            description: new.description.clone(),
            location: new.location,
            created_at: now,
            expires_at: new.expires_at,
            status: RequestStatus::Open,
            version: 0,
        };
        self.data.requests.insert(request.id.clone(), request.clone());
        self.touch(Collection::Requests);
        Ok(request)
    }

    /// The user's own requests, newest first.
    pub fn requests_of(&self, user: &Id) -> Result<Vec<FavorRequest>> {
        self.user(user)?;
        let mut out: Vec<FavorRequest> =
            self.data.requests.values().filter(|r| &r.requester_id == user).cloned().collect();
        out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| b.id.cmp(&a.id)));
        Ok(out)
    }

    fn set_request_status(&mut self, id: &Id, status: RequestStatus) {
        let r = self.data.requests.get_mut(id).expect("engagement references a stored request");
        if r.status != status {
            r.status = status;
            r.version += 1;
            self.changed.insert(Collection::Requests);
        }
    }

    fn store_engagement(&mut self, e: Engagement) {
        self.data.engagements.insert(e.id.clone(), e);
        self.touch(Collection::Engagements);
    }

    pub fn cancel_request(
        &mut self,
        request_id: &Id,
        actor: &Id,
        now: DateTime<Utc>,
    ) -> Result<FavorRequest> {
        let request = self.request(request_id)?;
        if &request.requester_id != actor {
            return Err(Error::NotOwner);
        }
        if request.status.is_terminal() {
            return Err(Error::AlreadyTerminal);
        }
        if let Some(e) = self.live_engagement(request_id) {
            let cancelled = transition(e, EngagementEvent::Cancel, now)?;
            self.store_engagement(cancelled);
        }
        self.set_request_status(request_id, RequestStatus::Cancelled);
        Ok(self.data.requests[request_id].clone())
    }

    /// Open requests with `expires_at <= now` become Expired. Engaged ones
    /// are left alone.
    pub fn expire_requests(&mut self, now: DateTime<Utc>) -> usize {
        let due: Vec<Id> = self
            .data
            .requests
            .values()
            .filter(|r| r.status == RequestStatus::Open && r.expires_at <= now)
            .map(|r| r.id.clone())
            .collect();
        for id in &due {
            self.set_request_status(id, RequestStatus::Expired);
        }
        due.len()
    }

    pub fn nearby_requests(
        &self,
        center: GeoPoint,
        radius: RadiusMeters,
        now: DateTime<Utc>,
    ) -> Vec<NearbyResult> {
        geo::rank_nearby(self.data.requests.values(), center, radius, now)
            .into_iter()
            .map(|(r, distance)| {
                let requester = &self.data.users[&r.requester_id];
                NearbyResult {
                    request_id: r.id.clone(),
                    distance,
                    title: r.title.clone(),
                    description: r.description.clone(),
                    location: r.location,
                    created_at: r.created_at,
                    requester: RequesterSummary {
                        id: requester.id.clone(),
                        display_name: requester.display_name.clone(),
                        verified: self.is_verified(&requester.id),
                    },
                }
            })
            .collect()
    }

    // ---- engagements -------------------------------------------------------

    pub fn accept(
        &mut self,
        request_id: &Id,
        volunteer: &Id,
        now: DateTime<Utc>,
    ) -> Result<Engagement> {
        if self.user(volunteer)?.is_organization {
            return Err(Error::OrganizationForbidden);
        }
        let request = self.request(request_id)?;
        if &request.requester_id == volunteer {
            return Err(Error::OwnRequest);
        }
        match request.status {
            RequestStatus::Open if request.expires_at > now => {}
            RequestStatus::Engaged => return Err(Error::AlreadyEngaged),
            _ => return Err(Error::RequestNotOpen),
        }
        if self.live_engagement(request_id).is_some() {
            return Err(Error::AlreadyEngaged);
        }
        let id = self.mint(IdKind::Engagement);
        let engagement = Engagement::new(id, request_id.clone(), volunteer.clone(), now);
        self.store_engagement(engagement.clone());
        self.set_request_status(request_id, RequestStatus::Engaged);
        Ok(engagement)
    }

    /// Either party withdraws before the visit; the request reopens.
    pub fn cancel_engagement(
        &mut self,
        engagement_id: &Id,
        actor: &Id,
        now: DateTime<Utc>,
    ) -> Result<Engagement> {
        let e = self.party_engagement(engagement_id, actor)?;
        let cancelled = transition(&e, EngagementEvent::Cancel, now)?;
        self.store_engagement(cancelled.clone());
        self.set_request_status(&e.request_id, RequestStatus::Open);
        Ok(cancelled)
    }

    pub fn issue_keywords(
        &mut self,
        engagement_id: &Id,
        actor: &Id,
        now: DateTime<Utc>,
    ) -> Result<ChallengeKeyPair> {
        let e = self.party_engagement(engagement_id, actor)?;
        let (next, pair) = challenge::issue_keywords(&e, &self.wordlist, &mut self.rng, now)?;
        self.store_engagement(next);
        Ok(pair)
    }

    /// Issued pair, readable by both parties.
    pub fn keywords(&self, engagement_id: &Id, actor: &Id) -> Result<Option<ChallengeKeyPair>> {
        Ok(self.party_engagement(engagement_id, actor)?.key_pair)
    }

    pub fn verify_keyword(
        &mut self,
        engagement_id: &Id,
        actor: &Id,
        speaker: SpeakerRole,
        spoken: &str,
        now: DateTime<Utc>,
    ) -> Result<VerifyOutcome> {
        let e = self.party_engagement(engagement_id, actor)?;
        let (next, ok) = challenge::verify_keyword(&e, speaker, spoken, now)?;
        let state = next.state;
        self.store_engagement(next);
        Ok(VerifyOutcome { ok, state })
    }

    pub fn complete(
        &mut self,
        engagement_id: &Id,
        actor: &Id,
        now: DateTime<Utc>,
    ) -> Result<Engagement> {
        let e = self.party_engagement(engagement_id, actor)?;
        let done = transition(&e, EngagementEvent::Complete, now)?;
        self.store_engagement(done.clone());
        self.set_request_status(&e.request_id, RequestStatus::Closed);
        Ok(done)
    }

    fn rating_window_over(&self, e: &Engagement, now: DateTime<Utc>) -> bool {
        e.state == EngagementState::Completed
            && e.entered_at(EngagementState::Completed)
                .is_some_and(|at| now >= at + self.config.rating_window)
    }

    pub fn submit_rating(
        &mut self,
        engagement_id: &Id,
        rater: &Id,
        grade: LikertGrade,
        now: DateTime<Utc>,
    ) -> Result<ReputationRecord> {
        let e = self.party_engagement(engagement_id, rater)?;
        let already = self
            .data
            .ratings
            .values()
            .any(|r| &r.engagement_id == engagement_id && &r.rater_id == rater);
        if already {
            return Err(Error::AlreadyRated);
        }
        if self.rating_window_over(&e, now) {
            let closed = transition(&e, EngagementEvent::RatingWindowClosed, now)?;
            self.store_engagement(closed);
            return Err(Error::NotCompleted);
        }
        if e.state != EngagementState::Completed {
            return Err(Error::NotCompleted);
        }
        let (volunteer, requester) = self.parties(&e);
        let ratee = if rater == &volunteer { requester } else { volunteer };
        let record = ReputationRecord {
            id: self.mint(IdKind::Rating),
            engagement_id: engagement_id.clone(),
            rater_id: rater.clone(),
            ratee_id: ratee,
            grade,
            created_at: now,
        };
        let next =
            transition(&e, EngagementEvent::RateSubmitted { record_id: record.id.clone() }, now)?;
        self.data.ratings.insert(record.id.clone(), record.clone());
        self.touch(Collection::Ratings);
        self.store_engagement(next);
        Ok(record)
    }

    /// Completed engagements whose rating window has passed become Closed.
    pub fn close_rating_windows(&mut self, now: DateTime<Utc>) -> usize {
        let due: Vec<Engagement> = self
            .data
            .engagements
            .values()
            .filter(|e| self.rating_window_over(e, now))
            .cloned()
            .collect();
        for e in &due {
            let closed = transition(e, EngagementEvent::RatingWindowClosed, now)
                .expect("Completed accepts RatingWindowClosed");
            self.store_engagement(closed);
        }
        due.len()
    }

    // ---- trust -------------------------------------------------------------

    pub fn confirm_profile(
        &mut self,
        org_id: &Id,
        target_id: &Id,
        note: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<VerificationBadge> {
        let org = self.user(org_id)?;
        if !org.is_organization {
            return Err(Error::NotAnOrganization);
        }
        let org_name = org.display_name.clone();
        if self.user(target_id)?.is_organization {
            return Err(Error::TargetIsOrganization);
        }
        let key = (target_id.clone(), org_id.clone());
        if let Some(existing) = self.data.badges.get(&key) {
            return Ok(existing.clone());
        }
        let note = note.map(str::trim).filter(|n| !n.is_empty()).map(str::to_owned);
        if note.as_ref().is_some_and(|n| n.chars().count() > trust::MAX_BADGE_NOTE_CHARS) {
            return Err(Error::Validation(format!(
                "note exceeds {} characters",
                trust::MAX_BADGE_NOTE_CHARS
            )));
        }
        let badge = VerificationBadge {
            user_id: target_id.clone(),
            org_id: org_id.clone(),
            org_name,
            confirmed_at: now,
            note,
        };
        self.data.badges.insert(key, badge.clone());
        self.touch(Collection::Badges);
        Ok(badge)
    }

    pub fn is_verified(&self, user: &Id) -> bool {
        self.data.badges.keys().any(|(u, _)| u == user)
    }

    /// Badges of `user`, newest first.
    pub fn badge_details(&self, user: &Id) -> Result<Vec<VerificationBadge>> {
        self.user(user)?;
        let mut out: Vec<VerificationBadge> =
            self.data.badges.values().filter(|b| &b.user_id == user).cloned().collect();
        out.sort_by(|a, b| b.confirmed_at.cmp(&a.confirmed_at).then_with(|| a.org_id.cmp(&b.org_id)));
        Ok(out)
    }

    pub fn reputation(&self, user: &Id) -> Result<ReputationSummary> {
        self.user(user)?;
        Ok(trust::reputation_of(self.data.ratings.values(), user))
    }

    pub fn profile(&self, user: &Id) -> Result<Profile> {
        let account = self.user(user)?;
        let badges = self.badge_details(user)?;
        let rep = self.reputation(user)?;
        Ok(Profile {
            user_id: account.id.clone(),
            display_name: account.display_name.clone(),
            is_organization: account.is_organization,
            verified: !badges.is_empty(),
            badges,
            reputation_sum: rep.sum,
            grade_counts: rep.grade_counts,
        })
    }

    // ---- emergencies -------------------------------------------------------

    pub fn raise_sos(
        &mut self,
        user_id: &Id,
        location: Option<GeoPoint>,
        now: DateTime<Utc>,
    ) -> Result<SosOutcome> {
        let user = self.user(user_id)?;
        let home = user.home_location;
        let recent = self
            .data
            .emergencies
            .values()
            .filter(|e| &e.user_id == user_id && e.absorbs_press_at(now))
            .max_by_key(|e| e.raised_at);
        if let Some(event) = recent {
            return Ok(SosOutcome {
                event: event.clone(),
                created: false,
                notified: self.notified_for(&event.id).len(),
            });
        }
        let location = location.or(home).ok_or(Error::NoLocation)?;
        let id = self.mint(IdKind::Emergency);
        let event = EmergencyEvent::new(id, user_id.clone(), location, now);
        let targets: Vec<Id> = self.targets_for(&event, self.config.sos_radius);
        for target in &targets {
            let note = Notification {
                id: self.mint(IdKind::Notification),
                event_id: event.id.clone(),
                target_user_id: target.clone(),
                created_at: now,
                delivered_at: None,
            };
            self.data.outbox.insert(note.id.clone(), note);
        }
        self.data.emergencies.insert(event.id.clone(), event.clone());
        self.touch(Collection::Emergencies);
        self.touch(Collection::Outbox);
        Ok(SosOutcome { event, created: true, notified: targets.len() })
    }

    fn targets_for(&self, event: &EmergencyEvent, radius: RadiusMeters) -> Vec<Id> {
        emergency::dispatch_targets(event, self.data.users.values(), |id| self.is_verified(id), radius)
            .into_iter()
            .map(|(u, _)| u.id.clone())
            .collect()
    }

    /// Users an event would be dispatched to at `radius`, nearest first.
    pub fn dispatch_targets(&self, event_id: &Id, radius: RadiusMeters) -> Result<Vec<UserAccount>> {
        let event = self.emergency(event_id)?;
        if event.status == emergency::EmergencyStatus::Resolved {
            return Err(Error::AlreadyResolved);
        }
        Ok(self
            .targets_for(event, radius)
            .iter()
            .map(|id| self.data.users[id].clone())
            .collect())
    }

    /// Volunteers alerted for `event_id`.
    pub fn notified_for(&self, event_id: &Id) -> Vec<Id> {
        self.data
            .outbox
            .values()
            .filter(|n| &n.event_id == event_id)
            .map(|n| n.target_user_id.clone())
            .collect()
    }

    pub fn acknowledge_sos(
        &mut self,
        event_id: &Id,
        volunteer: &Id,
        now: DateTime<Utc>,
    ) -> Result<EmergencyEvent> {
        let targets = self.notified_for(event_id);
        let next = self.emergency(event_id)?.acknowledge(volunteer, &targets, now)?;
        if next != self.data.emergencies[event_id] {
            self.data.emergencies.insert(event_id.clone(), next.clone());
            self.touch(Collection::Emergencies);
        }
        Ok(next)
    }

    pub fn resolve_sos(
        &mut self,
        event_id: &Id,
        actor: &Actor,
        now: DateTime<Utc>,
    ) -> Result<EmergencyEvent> {
        let next = self.emergency(event_id)?.resolve(actor, now)?;
        self.data.emergencies.insert(event_id.clone(), next.clone());
        self.touch(Collection::Emergencies);
        Ok(next)
    }

    /// Marks up to `max` pending notifications delivered, oldest first, and
    /// returns them. Each row is returned by exactly one drain.
    pub fn drain_outbox(&mut self, max: usize, now: DateTime<Utc>) -> Vec<Notification> {
        let mut pending: Vec<&Notification> =
            self.data.outbox.values().filter(|n| n.delivered_at.is_none()).collect();
        pending.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        let ids: Vec<Id> = pending.into_iter().take(max).map(|n| n.id.clone()).collect();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let n = self.data.outbox.get_mut(&id).expect("id taken from outbox");
            n.delivered_at = Some(now);
            out.push(n.clone());
        }
        if !out.is_empty() {
            self.touch(Collection::Outbox);
        }
        out
    }

    // ---- maintenance -------------------------------------------------------

    pub fn prune_sessions(&mut self, now: DateTime<Utc>) -> usize {
        let before = self.data.sessions.len();
        self.data.sessions.retain(|_, s| s.is_live(now));
        let pruned = before - self.data.sessions.len();
        if pruned > 0 {
            self.touch(Collection::Sessions);
        }
        pruned
    }

    pub fn sweep(&mut self, now: DateTime<Utc>) -> SweepReport {
        SweepReport {
            requests_expired: self.expire_requests(now),
            rating_windows_closed: self.close_rating_windows(now),
            sessions_pruned: self.prune_sessions(now),
        }
    }
}
