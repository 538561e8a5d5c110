//! Drives simulated spammer and legitimate sender populations against the
//! server over loopback, once with the blacklist and once without, and
//! compares the octets received.
//!
//! Runs are sequential and seeded: senders take turns round-robin, one
//! message per connection, each from its own `127.1.x.y` address. Time on
//! the server's blacklist clock only moves by the configured inter-message
//! delays, so a scenario always produces the same report.

pub mod client;
pub mod payload;
pub mod report;
pub mod run;
pub mod scenario;

pub use client::{Direction, SmtpClient, Transcript};
pub use report::{write_report, RunReport, SimReport, CSV_HEADER};
pub use run::{run_scenario, Attempt, Outcome, SenderLog, SimError, SIM_EPOCH};
pub use scenario::{AddressRotation, Runs, ScenarioConfig, ScenarioError, SenderKind, SenderProfile};
