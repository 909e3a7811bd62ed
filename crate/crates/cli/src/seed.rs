use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use f1_core::api::{NewRequest, NewUser};
use f1_core::{GeoPoint, Platform, PlatformConfig, Snapshot, Wordlist};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct SeedSpec {
    pub users: usize,
    pub requests: usize,
    pub seed: u64,
    pub center: GeoPoint,
    /// Users and requests fall within this many meters of `center`.
    pub spread_m: f64,
    pub epoch: DateTime<Utc>,
}

const FIRST: &[&str] = &[
    "Anna", "Maria", "Katarzyna", "Agnieszka", "Barbara", "Ewa", "Krystyna", "Zofia", "Jan",
    "Piotr", "Krzysztof", "Andrzej", "Tomasz", "Jakub", "Stanislaw", "Kuba", "Ola", "Zuzanna",
];
const LAST: &[&str] = &[
    "Nowak", "Kowalski", "Wisniewski", "Wojcik", "Kaminski", "Lewandowski", "Zielinski",
    "Szymanski", "Dabrowski", "Kozlowski", "Mazur", "Krawczyk",
];
const FAVORS: &[(&str, &str)] = &[
    ("Carry groceries", "Two bags from the corner shop, third floor."),
    ("Pharmacy pickup", "Prescription is ready at the pharmacy on the square."),
    ("Help with a phone", "Set up video calls with my grandchildren."),
    ("Walk the dog", "Small and friendly, about thirty minutes."),
    ("Change a light bulb", "Kitchen ceiling, I have the bulb."),
    ("Post office", "Send a registered letter."),
    ("Company for a walk", "Park nearby, afternoon."),
    ("Read the mail", "Small print on official letters."),
];

const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A point uniformly distributed over the disc of radius `spread_m`.
fn scatter(rng: &mut ChaCha8Rng, center: GeoPoint, spread_m: f64) -> GeoPoint {
    let r = spread_m * rng.random::<f64>().sqrt();
    let bearing = rng.random::<f64>() * std::f64::consts::TAU;
    let dlat = (r * bearing.cos() / EARTH_RADIUS_M).to_degrees();
    let dlon = (r * bearing.sin() / (EARTH_RADIUS_M * center.latitude().to_radians().cos())).to_degrees();
    let round = |v: f64| (v * 1e6).round() / 1e6;
    let lat = round((center.latitude() + dlat).clamp(-90.0, 90.0));
    let mut lon = center.longitude() + dlon;
    if lon >= 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint::new(lat, round(lon)).expect("scattered point is in range")
}

/// Builds the population. Pure in its arguments.
pub fn populate(spec: &SeedSpec) -> Result<Snapshot, String> {
    if spec.requests > 0 && spec.users == 0 {
        return Err("requests need at least one user to own them".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut p = Platform::new(Arc::new(Wordlist::sample()), PlatformConfig::default());
    let mut ids = Vec::with_capacity(spec.users);
    for i in 0..spec.users {
        let first = FIRST[rng.random_range(0..FIRST.len())];
        let last = LAST[rng.random_range(0..LAST.len())];
        let new = NewUser {
            email: format!("{}.{}.{i}@seed.example", first.to_lowercase(), last.to_lowercase()),
            display_name: format!("{first} {last}"),
            home_location: Some(scatter(&mut rng, spec.center, spec.spread_m)),
        };
        let at = spec.epoch + Duration::minutes(i as i64);
        ids.push(p.register_user(&new, at).map_err(|e| e.to_string())?.id);
    }
    for j in 0..spec.requests {
        let owner = &ids[rng.random_range(0..ids.len())];
        let (title, description) = FAVORS[rng.random_range(0..FAVORS.len())];
        let posted = spec.epoch + Duration::hours(1) + Duration::minutes(j as i64);
        let new = NewRequest {
            title: title.into(),
            description: description.into(),
            location: scatter(&mut rng, spec.center, spec.spread_m),
            expires_at: posted + Duration::hours(rng.random_range(24..=14 * 24)),
        };
        p.post_request(owner, &new, posted).map_err(|e| e.to_string())?;
    }
    Ok(p.snapshot().clone())
}
