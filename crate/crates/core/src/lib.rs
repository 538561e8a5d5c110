//! An SMTP receiver whose dialogue consults an active blacklist.
//!
//! * [`smtp`]: command parsing, reply rendering, DATA decoding and the
//!   session state machine with its blacklist checkpoints.
//! * [`store`]: the blacklist itself, with hit-driven growing lifetimes and
//!   a text snapshot format.
//! * [`classifier`]: the spam detector whose verdicts populate the list.

pub mod classifier;
pub mod smtp;
pub mod store;
