//! The SMTP dialogue with its blacklist checkpoints.
//!
//! The blacklist verdict is an input to the state machine. It is consulted
//! when the connection opens (IP only) and at MAIL FROM (IP plus envelope
//! sender), so a listed sender is turned away before any message body is
//! transferred.

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;
use std::time::Duration;

use super::command::{Command, Mailbox, ReversePath};
use super::data::{DataReceiver, Fed};
use super::reply::Reply;
use crate::store::{AblVerdict, SenderIdentity};

pub const DEFAULT_MAX_MESSAGE_OCTETS: u64 = 10 * 1024 * 1024;
pub const DEFAULT_TARPIT_DELAY: Duration = Duration::from_millis(10_000);
/// How long a session rejected with 554 waits for one more command.
pub const REJECT_LINGER: Duration = Duration::from_secs(5);
pub const MAX_RECIPIENTS: usize = 100;

/// What the dialogue does with a blacklisted sender.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RejectPolicy {
    /// `554 5.7.1`, then the server closes after the client's next command.
    #[default]
    RejectEarly554,
    /// `451 4.7.1`; the connection stays open but the session is over.
    TempFail451,
    /// `451 4.7.1` after an artificial delay; the dialogue may continue.
    Tarpit(Duration),
}

impl RejectPolicy {
    pub fn is_reject(&self) -> bool {
        !matches!(self, RejectPolicy::Tarpit(_))
    }

    fn block_reply(&self) -> Reply {
        match self {
            RejectPolicy::RejectEarly554 => Reply::blocked(),
            RejectPolicy::TempFail451 | RejectPolicy::Tarpit(_) => Reply::temporarily_blocked(),
        }
    }
}

impl fmt::Display for RejectPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectPolicy::RejectEarly554 => f.write_str("reject554"),
            RejectPolicy::TempFail451 => f.write_str("tempfail451"),
            RejectPolicy::Tarpit(d) => write!(f, "tarpit:{}", d.as_millis()),
        }
    }
}

impl FromStr for RejectPolicy {
    type Err = String;

    /// Accepts `reject554`, `tempfail451`, `tarpit` and `tarpit:<ms>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "reject554" | "reject-early-554" => Ok(RejectPolicy::RejectEarly554),
            "tempfail451" | "tempfail-451" => Ok(RejectPolicy::TempFail451),
            "tarpit" => Ok(RejectPolicy::Tarpit(DEFAULT_TARPIT_DELAY)),
            other => match other.strip_prefix("tarpit:") {
                Some(ms) => ms
                    .parse::<u64>()
                    .map(|ms| RejectPolicy::Tarpit(Duration::from_millis(ms)))
                    .map_err(|_| format!("invalid tarpit delay {ms:?}")),
                None => Err(format!("unknown reject policy {s:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Checkpoint {
    Connect,
    MailFrom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Connected,
    Greeted,
    MailAccepted,
    RcptAccepted,
    ReceivingData,
    Closed,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Connected,
        Phase::Greeted,
        Phase::MailAccepted,
        Phase::RcptAccepted,
        Phase::ReceivingData,
        Phase::Closed,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub client_ip: IpAddr,
    pub helo_domain: Option<String>,
    pub reverse_path: Option<ReversePath>,
    pub forward_paths: Vec<Mailbox>,
    pub data_octets: u64,
}

impl Envelope {
    pub fn new(client_ip: IpAddr) -> Self {
        Envelope {
            client_ip,
            helo_domain: None,
            reverse_path: None,
            forward_paths: Vec::new(),
            data_octets: 0,
        }
    }

    /// Drops the transaction, keeping the connection facts.
    fn reset(&mut self) {
        self.reverse_path = None;
        self.forward_paths.clear();
        self.data_octets = 0;
    }
}

/// Server-side parameters a session needs to build replies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLimits {
    pub server_domain: String,
    pub max_message_octets: u64,
}

impl Default for SessionLimits {
    fn default() -> Self {
        SessionLimits {
            server_domain: "localhost".to_string(),
            max_message_octets: DEFAULT_MAX_MESSAGE_OCTETS,
        }
    }
}

/// What the connection should do after sending a reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Continue,
    Close,
    /// Read one more command (or wait [`REJECT_LINGER`]), then close
    /// without replying.
    LingerThenClose,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub reply: Reply,
    /// Delay before the reply is sent (tarpit).
    pub delay: Option<Duration>,
    pub disposition: Disposition,
}

impl Response {
    fn reply(reply: Reply) -> Self {
        Response {
            reply,
            delay: None,
            disposition: Disposition::Continue,
        }
    }
}

/// A message received in full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub envelope: Envelope,
    pub body: Vec<u8>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum DataOutcome {
    Pending,
    Complete { consumed: usize, message: Message },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("message of {data_octets} octets exceeds the size limit")]
    MessageTooLarge { consumed: usize, data_octets: u64 },
    #[error("session is not receiving data")]
    NotReceiving,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    phase: Phase,
    envelope: Envelope,
    blocked_at: Option<Checkpoint>,
    limits: SessionLimits,
    data: Option<DataReceiver>,
}

impl SessionState {
    /// Starts a session. `verdict` is the IP-only lookup for the peer; a
    /// listed peer gets the policy reply instead of the banner.
    pub fn open(client_ip: IpAddr, limits: SessionLimits, verdict: &AblVerdict, policy: &RejectPolicy) -> (Self, Response) {
        let state = SessionState {
            phase: Phase::Connected,
            envelope: Envelope::new(client_ip),
            blocked_at: None,
            limits,
            data: None,
        };
        if verdict.is_blacklisted() {
            return state.block(Checkpoint::Connect, policy);
        }
        let greeting = Reply::greeting(&state.limits.server_domain);
        (state, Response::reply(greeting))
    }

    /// A session in an arbitrary phase; for tests and tooling that need to
    /// start mid-dialogue.
    pub fn at_phase(phase: Phase, client_ip: IpAddr, limits: SessionLimits) -> Self {
        let mut envelope = Envelope::new(client_ip);
        if phase != Phase::Connected {
            envelope.helo_domain = Some("client.example".into());
        }
        if matches!(phase, Phase::MailAccepted | Phase::RcptAccepted | Phase::ReceivingData) {
            envelope.reverse_path = Some(ReversePath::Null);
        }
        if matches!(phase, Phase::RcptAccepted | Phase::ReceivingData) {
            envelope.forward_paths.push(Mailbox::parse("postmaster").expect("valid"));
        }
        let data = (phase == Phase::ReceivingData).then(|| DataReceiver::new(limits.max_message_octets));
        SessionState {
            phase,
            envelope,
            blocked_at: None,
            limits,
            data,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn blocked(&self) -> bool {
        self.blocked_at.is_some()
    }

    pub fn blocked_at(&self) -> Option<Checkpoint> {
        self.blocked_at
    }

    pub fn limits(&self) -> &SessionLimits {
        &self.limits
    }

    /// The identity to screen if `cmd` would reach the MAIL FROM checkpoint
    /// in the current phase, `None` otherwise.
    pub fn mail_checkpoint(&self, cmd: &Command) -> Option<SenderIdentity> {
        match cmd {
            Command::MailFrom { reverse_path, size, .. }
                if self.phase == Phase::Greeted && !size.is_some_and(|s| s > self.limits.max_message_octets) =>
            {
                Some(SenderIdentity::with_reverse_path(self.envelope.client_ip, reverse_path))
            }
            _ => None,
        }
    }

    fn block(mut self, checkpoint: Checkpoint, policy: &RejectPolicy) -> (Self, Response) {
        self.blocked_at = Some(checkpoint);
        let reply = policy.block_reply();
        let response = match policy {
            RejectPolicy::RejectEarly554 => {
                self.phase = Phase::Closed;
                Response {
                    reply,
                    delay: None,
                    disposition: Disposition::LingerThenClose,
                }
            }
            RejectPolicy::TempFail451 => {
                self.phase = Phase::Closed;
                Response::reply(reply)
            }
            RejectPolicy::Tarpit(delay) => Response {
                reply,
                delay: Some(*delay),
                disposition: Disposition::Continue,
            },
        };
        (self, response)
    }

    /// Advances the dialogue by one command. `verdict` matters only for
    /// MAIL FROM, where it must be the lookup for the full identity.
    pub fn step(mut self, cmd: &Command, verdict: &AblVerdict, policy: &RejectPolicy) -> (Self, Response) {
        use Phase::*;

        if self.phase == Closed {
            let response = match (cmd, self.blocked()) {
                (Command::Quit, _) => Response {
                    reply: Reply::closing(&self.limits.server_domain),
                    delay: None,
                    disposition: Disposition::Close,
                },
                (_, true) => Response::reply(policy.block_reply()),
                (_, false) => Response::reply(Reply::bad_sequence()),
            };
            return (self, response);
        }
        if self.phase == ReceivingData {
            return (self, Response::reply(Reply::bad_sequence()));
        }

        let reply = match cmd {
            Command::Quit => {
                self.phase = Closed;
                let reply = Reply::closing(&self.limits.server_domain);
                return (
                    self,
                    Response {
                        reply,
                        delay: None,
                        disposition: Disposition::Close,
                    },
                );
            }
            Command::Noop => Reply::ok(),
            Command::Rset => {
                self.envelope.reset();
                if self.phase != Connected {
                    self.phase = Greeted;
                }
                Reply::ok()
            }
            Command::Helo(domain) | Command::Ehlo(domain) => {
                self.envelope.reset();
                self.envelope.helo_domain = Some(domain.clone());
                self.phase = Greeted;
                if matches!(cmd, Command::Ehlo(_)) {
                    Reply::ehlo(&self.limits.server_domain, domain, self.limits.max_message_octets)
                } else {
                    Reply::helo(&self.limits.server_domain)
                }
            }
            Command::MailFrom { reverse_path, size, .. } => {
                if self.phase != Greeted {
                    Reply::bad_sequence()
                } else if size.is_some_and(|s| s > self.limits.max_message_octets) {
                    Reply::message_too_large()
                } else if verdict.is_blacklisted() {
                    return self.block(Checkpoint::MailFrom, policy);
                } else {
                    self.envelope.reverse_path = Some(reverse_path.clone());
                    self.phase = MailAccepted;
                    Reply::ok()
                }
            }
            Command::RcptTo(mailbox) => match self.phase {
                MailAccepted | RcptAccepted if self.envelope.forward_paths.len() >= MAX_RECIPIENTS => {
                    Reply::too_many_recipients()
                }
                MailAccepted | RcptAccepted => {
                    self.envelope.forward_paths.push(mailbox.clone());
                    self.phase = RcptAccepted;
                    Reply::ok()
                }
                _ => Reply::bad_sequence(),
            },
            Command::Data => {
                if self.phase == RcptAccepted {
                    self.phase = ReceivingData;
                    self.envelope.data_octets = 0;
                    self.data = Some(DataReceiver::new(self.limits.max_message_octets));
                    Reply::start_data()
                } else {
                    Reply::bad_sequence()
                }
            }
            Command::Unknown(_) if cmd.is_unimplemented() => Reply::not_implemented(),
            Command::Unknown(_) => Reply::unrecognized(),
        };
        (self, Response::reply(reply))
    }

    /// Feeds DATA-phase octets. On the terminator the session returns to
    /// `Greeted` and the message is handed back; the caller decides the
    /// final reply. Octets after the terminator are not consumed.
    pub fn receive_data(mut self, chunk: &[u8]) -> (Self, Result<DataOutcome, DataError>) {
        let Some(receiver) = self.data.as_mut().filter(|_| self.phase == Phase::ReceivingData) else {
            return (self, Err(DataError::NotReceiving));
        };
        let fed = receiver.feed(chunk);
        self.envelope.data_octets = receiver.octets();
        match fed {
            Fed::Pending => (self, Ok(DataOutcome::Pending)),
            Fed::Terminated { consumed } => {
                let receiver = self.data.take().expect("present");
                let data_octets = receiver.octets();
                let overflowed = receiver.overflowed();
                let envelope = self.envelope.clone();
                self.envelope.reset();
                self.phase = Phase::Greeted;
                if overflowed {
                    return (self, Err(DataError::MessageTooLarge { consumed, data_octets }));
                }
                let message = Message {
                    envelope,
                    body: receiver.into_body(),
                };
                (self, Ok(DataOutcome::Complete { consumed, message }))
            }
        }
    }
}
