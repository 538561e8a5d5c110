//! The SMTP receiving server: sessions wired to the blacklist and the
//! classifier, an admin line protocol and periodic snapshots.

pub mod admin;
pub mod clock;
pub mod config;
mod connection;
pub mod metrics;
mod server;

pub use admin::{AdminClient, AdminClientError, AdminCommand, AdminParseError, AdminResponse};
pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{parse_bool, parse_flat, ConfigError, FlatItem, ServerConfig};
pub use metrics::{Metrics, MetricsSnapshot};
pub use server::{serve, start, start_with, ServeError, ServerHandle, ServerOptions, SHUTDOWN_GRACE};
