//! Spoken keyword pairs for door-step identity checks.
//!
//! When an engagement is accepted the platform draws two distinct words
//! from a wordlist: one the volunteer says at the door, one the requester
//! says back. Both parties see both words. Only the volunteer-side check
//! advances the engagement; five consecutive failed checks lock it.

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::error::Error;
use crate::lifecycle::{transition, EngagementEvent};
use crate::model::{Engagement, EngagementState, Id};

pub const MIN_WORDS: usize = 100;
pub const MIN_WORD_CHARS: usize = 3;
pub const MAX_WORD_CHARS: usize = 12;
pub const MAX_FAILED_ATTEMPTS: u32 = 5;

/// 150 common Polish nouns, shipped as a sample deployment list.
pub const SAMPLE_WORDLIST: &str = include_str!("../fixtures/wordlist_pl.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordlistError {
    #[error("wordlist has {count} usable words, at least {MIN_WORDS} required")]
    TooFewWords { count: usize },
    #[error("line {line}: malformed word {word:?} ({reason})")]
    MalformedWord { line: usize, word: String, reason: String },
}

/// Trimmed, lowercased, NFC-composed form used for storage and comparison.
pub fn normalize_word(raw: &str) -> String {
    raw.trim().to_lowercase().nfc().collect()
}

fn word_problem(word: &str) -> Option<String> {
    if let Some(c) = word.chars().find(|c| !c.is_alphabetic()) {
        return Some(format!("contains non-letter {c:?}"));
    }
    let n = word.chars().count();
    if !(MIN_WORD_CHARS..=MAX_WORD_CHARS).contains(&n) {
        return Some(format!("{n} letters, need {MIN_WORD_CHARS}-{MAX_WORD_CHARS}"));
    }
    None
}

/// Immutable after load; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wordlist {
    words: Vec<String>,
    source_name: String,
}

/// Everything found while cleaning a wordlist file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordlistReport {
    pub words: Vec<String>,
    pub rejects: Vec<WordlistError>,
    pub duplicates: usize,
}

impl WordlistReport {
    pub fn is_valid(&self) -> bool {
        self.rejects.is_empty() && self.words.len() >= MIN_WORDS
    }

    pub fn first_error(&self) -> Option<WordlistError> {
        self.rejects.first().cloned().or_else(|| {
            (self.words.len() < MIN_WORDS)
                .then_some(WordlistError::TooFewWords { count: self.words.len() })
        })
    }
}

/// Cleans `text` line by line without stopping at the first problem.
/// Blank lines and lines starting with `#` are skipped.
pub fn check_wordlist(text: &str) -> WordlistReport {
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    let mut rejects = Vec::new();
    let mut duplicates = 0;
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let word = normalize_word(trimmed);
        if let Some(reason) = word_problem(&word) {
            rejects.push(WordlistError::MalformedWord { line: idx + 1, word, reason });
        } else if seen.insert(word.clone()) {
            words.push(word);
        } else {
            duplicates += 1;
        }
    }
    WordlistReport { words, rejects, duplicates }
}

impl Wordlist {
    pub fn load(text: &str, source_name: impl Into<String>) -> Result<Self, WordlistError> {
        let report = check_wordlist(text);
        match report.first_error() {
            Some(err) => Err(err),
            None => Ok(Wordlist { words: report.words, source_name: source_name.into() }),
        }
    }

    pub fn sample() -> Self {
        Wordlist::load(SAMPLE_WORDLIST, "wordlist_pl.txt").expect("bundled wordlist is valid")
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }

    /// Two distinct words, uniformly over ordered pairs.
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (&str, &str) {
        let n = self.words.len();
        let first = rng.random_range(0..n);
        let mut second = rng.random_range(0..n - 1);
        if second >= first {
            second += 1;
        }
        (&self.words[first], &self.words[second])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeKeyPair {
    pub engagement_id: Id,
    /// Word the volunteer says at the door.
    pub volunteer_word: String,
    /// Word the requester says back.
    pub requester_word: String,
    pub issued_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeakerRole {
    Volunteer,
    Requester,
}

/// Draws a pair for an `Accepted` engagement and moves it to `KeysIssued`.
pub fn issue_keywords<R: Rng + ?Sized>(
    engagement: &Engagement,
    wordlist: &Wordlist,
    rng: &mut R,
    at: DateTime<Utc>,
) -> Result<(Engagement, ChallengeKeyPair), Error> {
    if engagement.key_pair.is_some() {
        return Err(Error::AlreadyIssued);
    }
    if engagement.state != EngagementState::Accepted {
        return Err(Error::WrongState(engagement.state));
    }
    let (volunteer_word, requester_word) = wordlist.draw_pair(rng);
    let pair = ChallengeKeyPair {
        engagement_id: engagement.id.clone(),
        volunteer_word: volunteer_word.to_owned(),
        requester_word: requester_word.to_owned(),
        issued_at: at,
    };
    let next = transition(engagement, EngagementEvent::IssueKeys(pair.clone()), at)?;
    Ok((next, pair))
}

/// Checks a spoken word. Returns the updated engagement and whether the word
/// matched. Only a successful volunteer-side check fires `VerifyArrival`.
pub fn verify_keyword(
    engagement: &Engagement,
    speaker: SpeakerRole,
    spoken: &str,
    at: DateTime<Utc>,
) -> Result<(Engagement, bool), Error> {
    if engagement.state != EngagementState::KeysIssued {
        return Err(Error::WrongState(engagement.state));
    }
    if engagement.flagged_for_review || engagement.failed_attempts >= MAX_FAILED_ATTEMPTS {
        return Err(Error::LockedOut);
    }
    let pair = engagement
        .key_pair
        .as_ref()
        .expect("KeysIssued engagement always carries its key pair");
    let expected = match speaker {
        SpeakerRole::Volunteer => &pair.volunteer_word,
        SpeakerRole::Requester => &pair.requester_word,
    };
    let ok = normalize_word(spoken) == *expected;

    let mut next = if ok && speaker == SpeakerRole::Volunteer {
        transition(engagement, EngagementEvent::VerifyArrival, at)?
    } else {
        let mut e = engagement.clone();
        e.version += 1;
        e
    };
    if ok {
        next.failed_attempts = 0;
        if speaker == SpeakerRole::Requester {
            next.requester_verified = true;
        }
    } else {
        next.failed_attempts += 1;
        if next.failed_attempts >= MAX_FAILED_ATTEMPTS {
            next.flagged_for_review = true;
        }
    }
    Ok((next, ok))
}
