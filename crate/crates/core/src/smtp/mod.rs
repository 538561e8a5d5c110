//! SMTP wire protocol and the session state machine.

mod command;
mod data;
mod reply;
mod session;

pub use command::{Command, Mailbox, ParseError, ReversePath, MAX_COMMAND_LINE};
pub use data::encode_data;
pub use reply::{EnhancedStatus, Reply, ReplyError};
pub use session::{
    Checkpoint, DataError, DataOutcome, Disposition, Envelope, Message, Phase, RejectPolicy, Response,
    SessionLimits, SessionState, DEFAULT_MAX_MESSAGE_OCTETS, DEFAULT_TARPIT_DELAY, MAX_RECIPIENTS, REJECT_LINGER,
};
