//! Organization-issued profile badges and Likert reputation.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::Id;

pub const MAX_BADGE_NOTE_CHARS: usize = 280;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationBadge {
    pub user_id: Id,
    pub org_id: Id,
    pub org_name: String,
    pub confirmed_at: DateTime<Utc>,
    pub note: Option<String>,
}

/// Five-level evaluation, 1 (worst) to 5 (best).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertGrade(u8);

impl LikertGrade {
    pub const ALL: [LikertGrade; 5] =
        [LikertGrade(1), LikertGrade(2), LikertGrade(3), LikertGrade(4), LikertGrade(5)];

    pub fn new(value: u8) -> Result<Self, Error> {
        if (1..=5).contains(&value) {
            Ok(LikertGrade(value))
        } else {
            Err(Error::Validation(format!("grade {value} outside 1..=5")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Signed contribution to the reputation sum: 1..=5 maps to -2..=+2.
    pub fn score(self) -> i64 {
        i64::from(self.0) - 3
    }
}

impl TryFrom<u8> for LikertGrade {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self, Error> {
        LikertGrade::new(v)
    }
}

impl From<LikertGrade> for u8 {
    fn from(g: LikertGrade) -> u8 {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GradeColor {
    Red,
    Gray,
    Green,
}

/// Two negative levels are red, the neutral one gray, the two positive green.
pub fn grade_color(grade: LikertGrade) -> GradeColor {
    match grade.value() {
        1 | 2 => GradeColor::Red,
        3 => GradeColor::Gray,
        _ => GradeColor::Green,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReputationRecord {
    pub id: Id,
    pub engagement_id: Id,
    pub rater_id: Id,
    pub ratee_id: Id,
    pub grade: LikertGrade,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeCount {
    pub grade: LikertGrade,
    pub color: GradeColor,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReputationSummary {
    pub sum: i64,
    /// Counts for grades 1..=5, in grade order.
    pub grade_counts: Vec<GradeCount>,
}

impl Default for ReputationSummary {
    fn default() -> Self {
        ReputationSummary {
            sum: 0,
            grade_counts: LikertGrade::ALL
                .iter()
                .map(|&grade| GradeCount { grade, color: grade_color(grade), count: 0 })
                .collect(),
        }
    }
}

impl ReputationSummary {
    pub fn add(&mut self, grade: LikertGrade) {
        self.sum += grade.score();
        self.grade_counts[usize::from(grade.value() - 1)].count += 1;
    }

    pub fn count(&self, grade: LikertGrade) -> u64 {
        self.grade_counts[usize::from(grade.value() - 1)].count
    }
}

/// Reputation of `user` over all records where they are the ratee.
pub fn reputation_of<'a>(
    records: impl IntoIterator<Item = &'a ReputationRecord>,
    user: &Id,
) -> ReputationSummary {
    let mut summary = ReputationSummary::default();
    for r in records.into_iter().filter(|r| &r.ratee_id == user) {
        summary.add(r.grade);
    }
    summary
}
