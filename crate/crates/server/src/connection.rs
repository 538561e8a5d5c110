//! One SMTP connection, from banner to close.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use abl_core::smtp::{
    Command, DataError, DataOutcome, Disposition, Message, ParseError, Phase, Reply, Response, SessionState,
    MAX_COMMAND_LINE, REJECT_LINGER,
};
use abl_core::store::{AblVerdict, SenderIdentity};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use crate::metrics::bump;
use crate::server::Shared;

const READ_CHUNK: usize = 16 * 1024;

enum Filled {
    Data,
    Eof,
    TimedOut,
}

enum Line {
    Complete(Vec<u8>),
    TooLong,
    Eof,
    TimedOut,
}

struct Conn<'a> {
    stream: TcpStream,
    buf: Vec<u8>,
    bytes_in: u64,
    bytes_out: u64,
    shared: &'a Shared,
}

impl Conn<'_> {
    async fn fill(&mut self, timeout: Duration) -> io::Result<Filled> {
        let mut chunk = [0u8; READ_CHUNK];
        match tokio::time::timeout(timeout, self.stream.read(&mut chunk)).await {
            Err(_) => Ok(Filled::TimedOut),
            Ok(Ok(0)) => Ok(Filled::Eof),
            Ok(Ok(n)) => {
                self.buf.extend_from_slice(&chunk[..n]);
                self.bytes_in += n as u64;
                bump(&self.shared.metrics.bytes_in, n as u64);
                Ok(Filled::Data)
            }
            Ok(Err(e)) => Err(e),
        }
    }

    /// Next LF-terminated line. Over-long lines are discarded through their
    /// LF without being buffered whole.
    async fn next_line(&mut self, timeout: Duration) -> io::Result<Line> {
        let mut discarding = false;
        loop {
            if let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
                let line: Vec<u8> = self.buf.drain(..=pos).collect();
                if discarding || line.len() > MAX_COMMAND_LINE {
                    return Ok(Line::TooLong);
                }
                return Ok(Line::Complete(line));
            }
            if self.buf.len() > MAX_COMMAND_LINE {
                self.buf.clear();
                discarding = true;
            }
            match self.fill(timeout).await? {
                Filled::Data => {}
                Filled::Eof => return Ok(Line::Eof),
                Filled::TimedOut => return Ok(Line::TimedOut),
            }
        }
    }

    async fn send(&mut self, reply: &Reply) -> io::Result<()> {
        let bytes = reply.render();
        // Counted before the write so a client that has seen the reply
        // also sees it in the metrics.
        self.bytes_out += bytes.len() as u64;
        bump(&self.shared.metrics.bytes_out, bytes.len() as u64);
        self.stream.write_all(&bytes).await
    }
}

fn plain(reply: Reply) -> Response {
    Response {
        reply,
        delay: None,
        disposition: Disposition::Continue,
    }
}

enum End {
    Normal,
    TimedOut,
}

/// Runs a session to completion and logs its outcome.
pub(crate) async fn handle(shared: Arc<Shared>, stream: TcpStream, peer: SocketAddr) {
    let mut conn = Conn {
        stream,
        buf: Vec::new(),
        bytes_in: 0,
        bytes_out: 0,
        shared: &shared,
    };
    let mut state = None;
    let result = drive(&mut conn, &mut state, peer).await;
    let outcome = match (&result, state.as_ref().and_then(SessionState::blocked_at)) {
        (Err(_) | Ok(End::TimedOut), _) => "error",
        (_, Some(abl_core::smtp::Checkpoint::Connect)) => "blocked_connect",
        (_, Some(abl_core::smtp::Checkpoint::MailFrom)) => "blocked_mail",
        _ => "accepted",
    };
    if let Err(err) = &result {
        tracing::debug!(%peer, %err, "session I/O error");
    }
    tracing::info!(
        %peer,
        outcome,
        bytes_in = conn.bytes_in,
        bytes_out = conn.bytes_out,
        "session closed"
    );
    let _ = conn.stream.shutdown().await;
}

async fn drive(conn: &mut Conn<'_>, slot: &mut Option<SessionState>, peer: SocketAddr) -> io::Result<End> {
    let shared = conn.shared;
    let config = &shared.config;
    let metrics = &shared.metrics;
    let policy = config.policy;
    let command_timeout = Duration::from_secs(config.command_timeout_s);
    let ip = peer.ip();

    let verdict = screen(shared, &SenderIdentity::ip_only(ip));
    if verdict.is_blacklisted() {
        bump(&metrics.sessions_blocked_at_connect, 1);
    }
    let (state, mut response) = SessionState::open(ip, shared.limits.clone(), &verdict, &policy);
    *slot = Some(state);

    loop {
        if let Some(delay) = response.delay {
            tokio::time::sleep(delay).await;
        }
        conn.send(&response.reply).await?;
        match response.disposition {
            Disposition::Continue => {}
            Disposition::Close => return Ok(End::Normal),
            Disposition::LingerThenClose => {
                conn.next_line(REJECT_LINGER).await?;
                return Ok(End::Normal);
            }
        }

        let state = slot.take().expect("session present");
        if state.phase() == Phase::ReceivingData {
            let (state, next) = receive(conn, state, command_timeout).await?;
            *slot = Some(state);
            match next {
                Some(r) => {
                    response = r;
                    continue;
                }
                None => return Ok(End::Normal),
            }
        }

        let line = match conn.next_line(command_timeout).await? {
            Line::Complete(line) => line,
            Line::TooLong => {
                *slot = Some(state);
                response = plain(Reply::line_too_long());
                continue;
            }
            Line::Eof => {
                *slot = Some(state);
                return Ok(End::Normal);
            }
            Line::TimedOut => {
                conn.send(&Reply::service_unavailable(&config.greeting_domain, "timeout")).await?;
                *slot = Some(state);
                return Ok(End::TimedOut);
            }
        };

        let cmd = match Command::parse(&line) {
            Ok(cmd) => cmd,
            // A finished session answers everything the same way.
            Err(_) if state.phase() == Phase::Closed => Command::Unknown(String::new()),
            Err(e) => {
                *slot = Some(state);
                response = plain(match e {
                    ParseError::LineTooLong => Reply::line_too_long(),
                    ParseError::MissingCrlf => Reply::missing_crlf(),
                    ParseError::BadSyntax(_) => Reply::syntax_error(),
                });
                continue;
            }
        };

        let verdict = match state.mail_checkpoint(&cmd) {
            Some(identity) => screen(shared, &identity),
            None => AblVerdict::Clean,
        };
        if verdict.is_blacklisted() && !state.blocked() {
            bump(&metrics.sessions_blocked_at_mail, 1);
        }
        let (state, r) = state.step(&cmd, &verdict, &policy);
        *slot = Some(state);
        response = r;
    }
}

/// Checkpoint lookup; a hit counts as a refreshed blocked attempt.
fn screen(shared: &Shared, identity: &SenderIdentity) -> AblVerdict {
    if !shared.config.abl_enabled {
        return AblVerdict::Clean;
    }
    let verdict = shared.store.screen(identity, shared.clock.now());
    if verdict.is_blacklisted() {
        bump(&shared.metrics.blocked_attempts_refreshed, 1);
    }
    verdict
}

/// Reads the message body. Returns the reply to send, or `None` when the
/// client went away.
async fn receive(
    conn: &mut Conn<'_>,
    mut state: SessionState,
    timeout: Duration,
) -> io::Result<(SessionState, Option<Response>)> {
    let metrics = &conn.shared.metrics;
    loop {
        if conn.buf.is_empty() {
            match conn.fill(timeout).await? {
                Filled::Data => {}
                Filled::Eof => return Ok((state, None)),
                Filled::TimedOut => {
                    let reply = Reply::service_unavailable(&conn.shared.config.greeting_domain, "timeout");
                    conn.send(&reply).await?;
                    return Ok((state, None));
                }
            }
        }
        let before = state.envelope().data_octets;
        let (next, outcome) = state.receive_data(&conn.buf);
        state = next;
        match outcome {
            Ok(DataOutcome::Pending) => {
                bump(&metrics.data_octets_received, state.envelope().data_octets - before);
                conn.buf.clear();
            }
            Ok(DataOutcome::Complete { consumed, message }) => {
                bump(&metrics.data_octets_received, message.envelope.data_octets - before);
                conn.buf.drain(..consumed);
                let reply = finish(conn.shared, message).await;
                return Ok((state, Some(plain(reply))));
            }
            Err(DataError::MessageTooLarge { consumed, data_octets }) => {
                bump(&metrics.data_octets_received, data_octets - before);
                conn.buf.drain(..consumed);
                return Ok((state, Some(plain(Reply::message_too_large()))));
            }
            Err(DataError::NotReceiving) => unreachable!("receive is only called in the DATA phase"),
        }
    }
}

/// Classifies a received message and learns from spam.
async fn finish(shared: &Shared, message: Message) -> Reply {
    let metrics = &shared.metrics;
    let verdict = shared.classifier.classify(&message.envelope, &message.body).await;
    if verdict.is_spam {
        bump(&metrics.messages_classified_spam, 1);
        if shared.config.abl_enabled {
            let now = shared.clock.now();
            let ip = message.envelope.client_ip;
            if let Some(path) = &message.envelope.reverse_path {
                shared
                    .store
                    .record_spam(SenderIdentity::with_reverse_path(ip, path), &verdict.reason, now);
            }
            shared.store.record_spam(SenderIdentity::ip_only(ip), &verdict.reason, now);
            tracing::info!(client = %ip, score = verdict.score, reason = %verdict.reason, "sender blacklisted");
            if shared.config.reject_triggering_message {
                return Reply::message_rejected_as_spam();
            }
        }
    }
    bump(&metrics.messages_accepted, 1);
    Reply::message_accepted()
}

/// Turns away a connection beyond the session cap.
pub(crate) async fn refuse(shared: Arc<Shared>, mut stream: TcpStream, peer: SocketAddr) {
    let reply = Reply::service_unavailable(&shared.config.greeting_domain, "too many sessions").render();
    bump(&shared.metrics.bytes_out, reply.len() as u64);
    let _ = stream.write_all(&reply).await;
    let _ = stream.shutdown().await;
    tracing::info!(%peer, outcome = "error", bytes_in = 0u64, bytes_out = reply.len() as u64, "session refused, server busy");
}
