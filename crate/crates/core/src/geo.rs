//! Great-circle distance and nearby-request search.
//!
//! Spherical Earth, radius [`EARTH_RADIUS_M`]. Search is a linear scan with
//! a bounding-box prefilter; at neighborhood scale that is plenty. A spatial
//! index would slot in behind [`rank_nearby`] if deployments grow.

use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{FavorRequest, Id, RequestStatus};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const MAX_RADIUS_M: f64 = 100_000.0;
pub const DEFAULT_NEARBY_RADIUS_M: f64 = 5_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    latitude: f64,
    longitude: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self, Error> {
        GeoPoint::new(raw.latitude, raw.longitude)
    }
}

impl GeoPoint {
    /// Latitude in [-90, 90], longitude in [-180, 180).
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, Error> {
        if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::Validation(format!("latitude {latitude} out of range [-90, 90]")));
        }
        if !longitude.is_finite() || !(-180.0..180.0).contains(&longitude) {
            return Err(Error::Validation(format!(
                "longitude {longitude} out of range [-180, 180)"
            )));
        }
        Ok(GeoPoint { latitude, longitude })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }
}

/// Search radius, 0 < r <= 100 km.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RadiusMeters(f64);

impl RadiusMeters {
    pub fn new(meters: f64) -> Result<Self, Error> {
        if meters.is_finite() && meters > 0.0 && meters <= MAX_RADIUS_M {
            Ok(RadiusMeters(meters))
        } else {
            Err(Error::Validation(format!(
                "radius {meters} m outside (0, {MAX_RADIUS_M}]"
            )))
        }
    }

    pub fn meters(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RadiusMeters {
    type Error = Error;

    fn try_from(m: f64) -> Result<Self, Error> {
        RadiusMeters::new(m)
    }
}

impl From<RadiusMeters> for f64 {
    fn from(r: RadiusMeters) -> f64 {
        r.0
    }
}

pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    // rounding can push h a hair past 1 for antipodal points
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Latitude/longitude window. When `min_longitude > max_longitude` the
/// window wraps across the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_latitude: f64,
    pub max_latitude: f64,
    pub min_longitude: f64,
    pub max_longitude: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        let lat_ok = p.latitude >= self.min_latitude && p.latitude <= self.max_latitude;
        let lon_ok = if self.min_longitude <= self.max_longitude {
            p.longitude >= self.min_longitude && p.longitude <= self.max_longitude
        } else {
            p.longitude >= self.min_longitude || p.longitude <= self.max_longitude
        };
        lat_ok && lon_ok
    }

    pub fn covers_all_longitudes(&self) -> bool {
        self.min_longitude == -180.0 && self.max_longitude == 180.0
    }
}

// Slack for float noise at the box edges, in degrees (~1 mm).
const BOX_SLACK_DEG: f64 = 1e-8;

/// Candidate window that contains every point within `radius` of `center`.
///
/// Latitude pad is the angular radius. Longitude pad is the exact half-width
/// of the spherical cap at its widest parallel, `asin(sin d / cos lat)`; if
/// the cap reaches a pole every longitude is admitted.
pub fn prefilter_bbox(center: GeoPoint, radius: RadiusMeters) -> BoundingBox {
    let angular = radius.meters() / EARTH_RADIUS_M;
    let lat = center.latitude.to_radians();
    let lat_pad = angular.to_degrees() + BOX_SLACK_DEG;
    let min_latitude = (center.latitude - lat_pad).max(-90.0);
    let max_latitude = (center.latitude + lat_pad).min(90.0);

    let reaches_pole = lat.abs() + angular >= std::f64::consts::FRAC_PI_2;
    let lon_pad = if reaches_pole {
        None
    } else {
        let ratio = angular.sin() / lat.cos();
        (ratio < 1.0).then(|| ratio.asin().to_degrees() + BOX_SLACK_DEG)
    };
    let (min_longitude, max_longitude) = match lon_pad {
        Some(pad) if pad < 180.0 => (
            wrap_longitude(center.longitude - pad),
            wrap_longitude(center.longitude + pad),
        ),
        _ => (-180.0, 180.0),
    };
    BoundingBox { min_latitude, max_latitude, min_longitude, max_longitude }
}

fn wrap_longitude(lon: f64) -> f64 {
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped >= 180.0 {
        -180.0
    } else {
        wrapped
    }
}

/// Display data about the requester shown with each map marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequesterSummary {
    pub id: Id,
    pub display_name: String,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearbyResult {
    pub request_id: Id,
    pub distance: f64,
    pub title: String,
    pub description: String,
    pub location: GeoPoint,
    pub created_at: DateTime<Utc>,
    pub requester: RequesterSummary,
}

/// Open, unexpired requests within `radius`, nearest first; ties go to the
/// older request, then the smaller id.
pub fn rank_nearby<'a, I>(
    requests: I,
    center: GeoPoint,
    radius: RadiusMeters,
    now: DateTime<Utc>,
) -> Vec<(&'a FavorRequest, f64)>
where
    I: IntoIterator<Item = &'a FavorRequest>,
{
    let bbox = prefilter_bbox(center, radius);
    let mut hits: Vec<(&FavorRequest, f64)> = requests
        .into_iter()
        .filter(|r| r.status == RequestStatus::Open && r.expires_at > now)
        .filter(|r| bbox.contains(r.location))
        .map(|r| (r, haversine_distance(center, r.location)))
        .filter(|(_, d)| *d <= radius.meters())
        .collect();
    hits.sort_by(|(ra, da), (rb, db)| compare_hits(ra, *da, rb, *db));
    hits
}

pub(crate) fn compare_hits(a: &FavorRequest, da: f64, b: &FavorRequest, db: f64) -> Ordering {
    da.total_cmp(&db)
        .then_with(|| a.created_at.cmp(&b.created_at))
        .then_with(|| a.id.cmp(&b.id))
}
