use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use chrono::Duration as Span;
use f1_core::geo::DEFAULT_NEARBY_RADIUS_M;
use f1_core::emergency::DEFAULT_SOS_RADIUS_M;
use f1_core::platform::DEFAULT_RATING_WINDOW_DAYS;
use f1_core::{PlatformConfig, RadiusMeters};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    /// `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// `None` uses the bundled sample list.
    pub wordlist_path: Option<PathBuf>,
    pub default_radius_m: f64,
    pub sos_radius_m: f64,
    pub rating_window_days: i64,
    /// Bearer token that acts as the admin. Also gates organization signup.
    pub admin_token: Option<String>,
    pub keyword_seed: Option<u64>,
    pub sweep_interval: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: DEFAULT_LISTEN.parse().expect("default address parses"),
            data_dir: None,
            wordlist_path: None,
            default_radius_m: DEFAULT_NEARBY_RADIUS_M,
            sos_radius_m: DEFAULT_SOS_RADIUS_M,
            rating_window_days: DEFAULT_RATING_WINDOW_DAYS,
            admin_token: None,
            keyword_seed: None,
            sweep_interval: Duration::from_secs(30),
        }
    }
}

impl ServerConfig {
    pub fn default_radius(&self) -> Result<RadiusMeters, String> {
        RadiusMeters::new(self.default_radius_m).map_err(|e| format!("default radius: {e}"))
    }

    pub fn platform_config(&self) -> Result<PlatformConfig, String> {
        if self.rating_window_days <= 0 {
            return Err("rating window must be at least one day".into());
        }
        let sos_radius =
            RadiusMeters::new(self.sos_radius_m).map_err(|e| format!("sos radius: {e}"))?;
        self.default_radius()?;
        if self.admin_token.as_deref().is_some_and(|t| t.trim().is_empty()) {
            return Err("admin token must not be blank".into());
        }
        Ok(PlatformConfig {
            rating_window: Span::days(self.rating_window_days),
            sos_radius,
            keyword_seed: self.keyword_seed,
            ..PlatformConfig::default()
        })
    }
}
