//! LF-terminated admin line protocol.
//!
//! Each request is one line; each response is zero or more data lines
//! followed by `OK` or `ERR <message>`.

use std::fmt;
use std::net::SocketAddr;
use std::time::Duration;

use abl_core::store::{AblEntry, SenderIdentity};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;

/// Longest request line the admin service will buffer.
pub const MAX_ADMIN_LINE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdminCommand {
    Stats,
    BlList,
    BlAdd { identity: SenderIdentity, reason: String },
    BlDel { identity: SenderIdentity },
    Expire,
    Snapshot,
    Quit,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdminParseError {
    #[error("empty command")]
    Empty,
    #[error("unknown command {0:?}")]
    Unknown(String),
    #[error("usage: {0}")]
    Usage(&'static str),
    #[error("{0}")]
    BadIdentity(String),
    #[error("command is not valid UTF-8")]
    NotUtf8,
}

impl AdminCommand {
    /// Parses one request line, with or without its line ending.
    pub fn parse(line: &[u8]) -> Result<AdminCommand, AdminParseError> {
        let line = line.strip_suffix(b"\n").unwrap_or(line);
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        let line = std::str::from_utf8(line).map_err(|_| AdminParseError::NotUtf8)?;
        let mut words = line.split_whitespace();
        let verb = words.next().ok_or(AdminParseError::Empty)?.to_ascii_uppercase();
        let rest: Vec<&str> = words.collect();
        let no_args = |cmd: AdminCommand, usage| if rest.is_empty() { Ok(cmd) } else { Err(AdminParseError::Usage(usage)) };
        match verb.as_str() {
            "STATS" => no_args(AdminCommand::Stats, "STATS"),
            "EXPIRE" => no_args(AdminCommand::Expire, "EXPIRE"),
            "SNAPSHOT" => no_args(AdminCommand::Snapshot, "SNAPSHOT"),
            "QUIT" => no_args(AdminCommand::Quit, "QUIT"),
            "BL" => {
                let sub = rest.first().map(|s| s.to_ascii_uppercase());
                match (sub.as_deref(), &rest[1.min(rest.len())..]) {
                    (Some("LIST"), []) => Ok(AdminCommand::BlList),
                    (Some("ADD"), [ip, sender, reason @ ..]) if !reason.is_empty() => Ok(AdminCommand::BlAdd {
                        identity: identity(ip, sender)?,
                        reason: reason.join(" "),
                    }),
                    (Some("ADD"), _) => Err(AdminParseError::Usage("BL ADD <ip> <sender-or--> <reason...>")),
                    (Some("DEL"), [ip, sender]) => Ok(AdminCommand::BlDel {
                        identity: identity(ip, sender)?,
                    }),
                    (Some("DEL"), _) => Err(AdminParseError::Usage("BL DEL <ip> <sender-or-->")),
                    _ => Err(AdminParseError::Usage("BL LIST | BL ADD ... | BL DEL ...")),
                }
            }
            _ => Err(AdminParseError::Unknown(verb)),
        }
    }

    /// The request line, without LF.
    pub fn render(&self) -> String {
        match self {
            AdminCommand::Stats => "STATS".into(),
            AdminCommand::BlList => "BL LIST".into(),
            AdminCommand::BlAdd { identity, reason } => {
                format!("BL ADD {} {} {}", identity.ip(), identity.sender_field(), reason)
            }
            AdminCommand::BlDel { identity } => format!("BL DEL {} {}", identity.ip(), identity.sender_field()),
            AdminCommand::Expire => "EXPIRE".into(),
            AdminCommand::Snapshot => "SNAPSHOT".into(),
            AdminCommand::Quit => "QUIT".into(),
        }
    }
}

fn identity(ip: &str, sender: &str) -> Result<SenderIdentity, AdminParseError> {
    let sender = (sender != "-").then_some(sender);
    SenderIdentity::parse(ip, sender).map_err(|e| AdminParseError::BadIdentity(e.to_string()))
}

/// One `BL LIST` line.
pub fn format_entry(entry: &AblEntry) -> String {
    format!(
        "{} {} hits={} first_seen={} last_hit={} expiry={} reason={}",
        entry.identity.ip(),
        entry.identity.sender_field(),
        entry.hit_count,
        entry.first_seen,
        entry.last_hit,
        entry.expiry,
        entry.reason
    )
}

/// A complete admin response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdminResponse {
    pub lines: Vec<String>,
    /// `None` for `OK`, the message for `ERR`.
    pub error: Option<String>,
}

impl AdminResponse {
    pub fn ok(lines: Vec<String>) -> Self {
        AdminResponse { lines, error: None }
    }

    pub fn err(message: impl Into<String>) -> Self {
        AdminResponse {
            lines: Vec::new(),
            error: Some(message.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        match &self.error {
            None => out.push_str("OK\n"),
            Some(message) => {
                out.push_str("ERR ");
                out.push_str(&message.replace(['\r', '\n'], " "));
                out.push('\n');
            }
        }
        out
    }
}

impl fmt::Display for AdminResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdminClientError {
    #[error("cannot connect to admin service at {addr}: {source}")]
    Connect { addr: SocketAddr, source: std::io::Error },
    #[error("admin connection failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("admin service closed the connection mid-response")]
    Closed,
    #[error("admin service did not answer within {0:?}")]
    Timeout(Duration),
}

/// Client side of the admin protocol.
pub struct AdminClient {
    reader: BufReader<OwnedReadHalf>,
    writer: OwnedWriteHalf,
    timeout: Duration,
}

impl AdminClient {
    pub async fn connect(addr: SocketAddr) -> Result<AdminClient, AdminClientError> {
        let stream = TcpStream::connect(addr)
            .await
            .map_err(|source| AdminClientError::Connect { addr, source })?;
        let (r, w) = stream.into_split();
        Ok(AdminClient {
            reader: BufReader::new(r),
            writer: w,
            timeout: Duration::from_secs(30),
        })
    }

    pub async fn request(&mut self, command: &AdminCommand) -> Result<AdminResponse, AdminClientError> {
        self.request_line(&command.render()).await
    }

    /// Sends a raw request line and reads the response.
    pub async fn request_line(&mut self, line: &str) -> Result<AdminResponse, AdminClientError> {
        self.writer.write_all(format!("{line}\n").as_bytes()).await?;
        let timeout = self.timeout;
        tokio::time::timeout(timeout, self.read_response())
            .await
            .map_err(|_| AdminClientError::Timeout(timeout))?
    }

    async fn read_response(&mut self) -> Result<AdminResponse, AdminClientError> {
        let mut lines = Vec::new();
        loop {
            let mut line = String::new();
            if self.reader.read_line(&mut line).await? == 0 {
                return Err(AdminClientError::Closed);
            }
            let line = line.trim_end_matches(['\r', '\n']);
            if line == "OK" {
                return Ok(AdminResponse::ok(lines));
            }
            if let Some(message) = line.strip_prefix("ERR") {
                return Ok(AdminResponse {
                    lines,
                    error: Some(message.trim_start().to_string()),
                });
            }
            lines.push(line.to_string());
        }
    }
}
