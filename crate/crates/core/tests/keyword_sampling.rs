use chrono::{TimeZone, Utc};
use f1_core::challenge::{issue_keywords, normalize_word, verify_keyword, MAX_FAILED_ATTEMPTS};
use f1_core::{Engagement, EngagementState, Error, Id, IdKind, SpeakerRole, Wordlist};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: &str = include_str!("../fixtures/keyword_golden.txt");
const DRAWS: usize = 10_000;
// 99.9th percentile of chi-square with 149 degrees of freedom
const CHI2_149_999: f64 = 208.086;

fn golden() -> (u64, String, String) {
    let line = GOLDEN.lines().find(|l| !l.starts_with('#') && !l.trim().is_empty()).unwrap();
    let cols: Vec<&str> = line.split_whitespace().collect();
    (cols[0].parse().unwrap(), cols[1].to_owned(), cols[2].to_owned())
}

fn fresh(n: u64) -> Engagement {
    Engagement::new(
        Id::new(IdKind::Engagement, n),
        Id::new(IdKind::Request, n),
        Id::new(IdKind::User, 2),
        Utc.timestamp_opt(1_700_000_000, 0).unwrap(),
    )
}

#[test]
fn sample_list_has_150_words() {
    assert_eq!(Wordlist::sample().len(), 150);
}

#[test]
fn seeded_issue_reproduces_golden_pair() {
    let (seed, vol, req) = golden();
    let wl = Wordlist::sample();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (e, pair) = issue_keywords(&fresh(1), &wl, &mut rng, Utc::now()).unwrap();
    assert_eq!((pair.volunteer_word.as_str(), pair.requester_word.as_str()), (&*vol, &*req));
    assert_eq!(e.state, EngagementState::KeysIssued);
    assert_eq!(e.key_pair, Some(pair));
}

#[test]
fn draws_are_distinct_and_uniform() {
    let (seed, _, _) = golden();
    let wl = Wordlist::sample();
    let n = wl.len();
    let index = |w: &str| wl.words().iter().position(|x| x == w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_role = [vec![0u64; n], vec![0u64; n]];
    let mut either = vec![0u64; n];
    for i in 0..DRAWS {
        let (_, pair) = issue_keywords(&fresh(i as u64), &wl, &mut rng, Utc::now()).unwrap();
        assert_ne!(pair.volunteer_word, pair.requester_word);
        let (a, b) = (index(&pair.volunteer_word), index(&pair.requester_word));
        by_role[0][a] += 1;
        by_role[1][b] += 1;
        either[a] += 1;
        either[b] += 1;
    }

    // each position is a multinomial over n words
    let expected = DRAWS as f64 / n as f64;
    for counts in &by_role {
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CHI2_149_999, "chi2 {chi2}");
    }

    // per-word appearance count is Binomial(DRAWS, 2/n)
    let p = 2.0 / n as f64;
    let mean = DRAWS as f64 * p;
    let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
    let outside = either.iter().filter(|c| (**c as f64 - mean).abs() > 3.0 * sigma).count();
    // a uniform sampler leaves about n * 0.00276 = 0.41 words past 3 sigma
    assert!(outside <= 2, "{outside} words outside 3 sigma");
    assert!(either.iter().all(|c| (*c as f64 - mean).abs() <= 4.0 * sigma));
}

#[test]
fn random_guess_adversary() {
    let wl = Wordlist::sample();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut adversary = ChaCha8Rng::seed_from_u64(100);
    let mut wins = 0;
    for i in 0..DRAWS {
        let (e, _) = issue_keywords(&fresh(i as u64), &wl, &mut rng, Utc::now()).unwrap();
        let guess = &wl.words()[adversary.random_range(0..wl.len())];
        let (_, ok) = verify_keyword(&e, SpeakerRole::Volunteer, guess, Utc::now()).unwrap();
        wins += usize::from(ok);
    }
    let p = 0.01;
    let bound = p + 3.0 * (p * (1.0 - p) / DRAWS as f64).sqrt();
    let rate = wins as f64 / DRAWS as f64;
    assert!(rate <= bound, "{rate} > {bound}");
}

#[test]
fn lockout_at_exactly_five_failures() {
    let wl = Wordlist::sample();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut e, pair) = issue_keywords(&fresh(1), &wl, &mut rng, Utc::now()).unwrap();
    let wrong = wl.words().iter().find(|w| **w != pair.volunteer_word).unwrap();
    for attempt in 1..=MAX_FAILED_ATTEMPTS {
        let (next, ok) = verify_keyword(&e, SpeakerRole::Volunteer, wrong, Utc::now()).unwrap();
        assert!(!ok);
        assert_eq!(next.flagged_for_review, attempt == MAX_FAILED_ATTEMPTS);
        assert_eq!(next.key_pair.as_ref(), Some(&pair));
        e = next;
    }
    let err = verify_keyword(&e, SpeakerRole::Volunteer, &pair.volunteer_word, Utc::now());
    assert_eq!(err.unwrap_err(), Error::LockedOut);
}

#[test]
fn success_resets_the_failure_streak() {
    let wl = Wordlist::sample();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut e, pair) = issue_keywords(&fresh(1), &wl, &mut rng, Utc::now()).unwrap();
    for _ in 0..4 {
        e = verify_keyword(&e, SpeakerRole::Requester, "zzz", Utc::now()).unwrap().0;
    }
    e = verify_keyword(&e, SpeakerRole::Requester, &pair.requester_word, Utc::now()).unwrap().0;
    assert_eq!(e.failed_attempts, 0);
    assert!(e.requester_verified);
    assert_eq!(e.state, EngagementState::KeysIssued);
    e = verify_keyword(&e, SpeakerRole::Volunteer, "zzz", Utc::now()).unwrap().0;
    assert!(!e.flagged_for_review);
}

proptest! {
    #[test]
    fn normalization_is_idempotent(s in "\\PC{0,24}") {
        let once = normalize_word(&s);
        prop_assert_eq!(normalize_word(&once), once);
    }

    #[test]
    fn verify_never_touches_the_pair(spoken in "\\PC{0,12}", volunteer in any::<bool>()) {
        let wl = Wordlist::sample();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (e, pair) = issue_keywords(&fresh(1), &wl, &mut rng, Utc::now()).unwrap();
        let role = if volunteer { SpeakerRole::Volunteer } else { SpeakerRole::Requester };
        let (next, _) = verify_keyword(&e, role, &spoken, Utc::now()).unwrap();
        prop_assert_eq!(next.key_pair, Some(pair));
    }
}
