//! SMTP client used by simulated senders. Every octet exchanged is kept in
//! a transcript.

use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::time::Duration;

use abl_core::smtp::{encode_data, Reply, ReplyError};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpSocket, TcpStream};

/// Distinct loopback source addresses available to senders.
pub const MAX_SENDERS: u64 = 250 * 256;

/// Source address of the `index`-th sender: `127.1.x.y`, never `.0`.
pub fn source_ip(index: u64) -> IpAddr {
    assert!(index < MAX_SENDERS, "sender index out of range");
    IpAddr::V4(Ipv4Addr::new(127, 1, (index / 250) as u8, (index % 250 + 1) as u8))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Octets in the order they crossed the connection, split by direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<(Direction, Vec<u8>)>,
}

impl Transcript {
    fn push(&mut self, dir: Direction, bytes: &[u8]) {
        match self.events.last_mut() {
            Some((d, buf)) if *d == dir => buf.extend_from_slice(bytes),
            _ => self.events.push((dir, bytes.to_vec())),
        }
    }

    pub fn octets(&self, dir: Direction) -> u64 {
        self.events.iter().filter(|(d, _)| *d == dir).map(|(_, b)| b.len() as u64).sum()
    }

    /// Printable rendering with `C:`/`S:` prefixes, for diagnostics.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (dir, bytes) in &self.events {
            let tag = match dir {
                Direction::ClientToServer => "C: ",
                Direction::ServerToClient => "S: ",
            };
            for line in String::from_utf8_lossy(bytes).split_inclusive('\n') {
                out.push_str(tag);
                out.push_str(line.trim_end_matches(['\r', '\n']));
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("connection failed: {0}")]
    Io(#[from] io::Error),
    #[error("malformed server reply: {0}")]
    BadReply(ReplyError),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
}

pub struct SmtpClient {
    stream: TcpStream,
    buf: Vec<u8>,
    transcript: Transcript,
    timeout: Duration,
}

impl SmtpClient {
    /// Connects to `server` from the loopback address `source`.
    pub async fn connect(source: IpAddr, server: SocketAddr, timeout: Duration) -> Result<SmtpClient, ClientError> {
        let socket = match source {
            IpAddr::V4(_) => TcpSocket::new_v4()?,
            IpAddr::V6(_) => TcpSocket::new_v6()?,
        };
        socket.bind(SocketAddr::new(source, 0))?;
        let stream = socket.connect(server).await?;
        stream.set_nodelay(true)?;
        Ok(SmtpClient {
            stream,
            buf: Vec::new(),
            transcript: Transcript::default(),
            timeout,
        })
    }

    /// Next reply, or `None` when the server closed the connection.
    pub async fn reply(&mut self) -> Result<Option<Reply>, ClientError> {
        loop {
            match Reply::parse(&self.buf) {
                Ok((reply, used)) => {
                    self.buf.drain(..used);
                    return Ok(Some(reply));
                }
                Err(ReplyError::Incomplete) => {}
                Err(e) => return Err(ClientError::BadReply(e)),
            }
            let mut chunk = [0u8; 4096];
            let n = match tokio::time::timeout(self.timeout, self.stream.read(&mut chunk)).await {
                Err(_) => return Err(ClientError::Timeout(self.timeout)),
                Ok(Ok(n)) => n,
                // A reset after the server's final reply counts as a close.
                Ok(Err(e)) if e.kind() == io::ErrorKind::ConnectionReset => 0,
                Ok(Err(e)) => return Err(e.into()),
            };
            if n == 0 {
                if self.buf.is_empty() {
                    return Ok(None);
                }
                return Err(ClientError::BadReply(ReplyError::Incomplete));
            }
            self.transcript.push(Direction::ServerToClient, &chunk[..n]);
            self.buf.extend_from_slice(&chunk[..n]);
        }
    }

    pub async fn send(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.transcript.push(Direction::ClientToServer, bytes);
        self.stream.write_all(bytes).await?;
        Ok(())
    }

    pub async fn command(&mut self, line: &str) -> Result<Option<Reply>, ClientError> {
        self.send(format!("{line}\r\n").as_bytes()).await?;
        self.reply().await
    }

    /// Sends a body with dot-stuffing and the terminator.
    pub async fn data(&mut self, body: &[u8]) -> Result<Option<Reply>, ClientError> {
        self.send(&encode_data(body)).await?;
        self.reply().await
    }

    /// Ends the dialogue: sends QUIT (if the server is still there) and
    /// waits for the reply or the close.
    pub async fn quit(mut self) -> Result<Transcript, ClientError> {
        // The server may already have hung up; a failed write is not an error.
        if self.send(b"QUIT\r\n").await.is_ok() {
            self.reply().await?;
        }
        Ok(self.transcript)
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
