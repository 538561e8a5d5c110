#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use abl_core::smtp::Reply;
use abl_server::{ManualClock, ServerConfig, ServerHandle, ServerOptions};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

pub fn config() -> ServerConfig {
    let mut c = ServerConfig::default();
    c.listen_address = "127.0.0.1:0".parse().unwrap();
    c.admin_listen_address = "127.0.0.1:0".parse().unwrap();
    c.greeting_domain = "mx.test".into();
    c
}

pub async fn start(config: ServerConfig) -> (ServerHandle, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(1_000_000));
    let handle = abl_server::start_with(
        config,
        ServerOptions {
            clock: clock.clone(),
            journal: true,
            shutdown_grace: Duration::from_secs(2),
        },
    )
    .await
    .expect("server starts");
    (handle, clock)
}

/// Minimal SMTP client that returns replies as raw text.
pub struct Client {
    stream: TcpStream,
    buf: Vec<u8>,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> Client {
        Client {
            stream: TcpStream::connect(addr).await.expect("connect"),
            buf: Vec::new(),
        }
    }

    /// Next complete reply, or `None` on EOF.
    pub async fn reply(&mut self) -> Option<String> {
        loop {
            match Reply::parse(&self.buf) {
                Ok((_, used)) => {
                    let text = String::from_utf8(self.buf.drain(..used).collect()).unwrap();
                    return Some(text);
                }
                Err(abl_core::smtp::ReplyError::Incomplete) => {}
                Err(e) => panic!("bad reply {e}: {:?}", String::from_utf8_lossy(&self.buf)),
            }
            let mut chunk = [0u8; 4096];
            let n = tokio::time::timeout(Duration::from_secs(20), self.stream.read(&mut chunk))
                .await
                .expect("reply within 20 s")
                .unwrap_or(0);
            if n == 0 {
                assert!(self.buf.is_empty(), "partial reply before EOF");
                return None;
            }
            self.buf.extend_from_slice(&chunk[..n]);
        }
    }

    pub async fn send(&mut self, bytes: &[u8]) {
        self.stream.write_all(bytes).await.unwrap();
    }

    pub async fn cmd(&mut self, line: &str) -> String {
        self.send(format!("{line}\r\n").as_bytes()).await;
        self.reply().await.expect("reply")
    }

    /// Sends a whole message through DATA and returns the final reply.
    pub async fn message(&mut self, from: &str, body: &[u8]) -> String {
        assert!(self.cmd(&format!("MAIL FROM:<{from}>")).await.starts_with("250"));
        assert!(self.cmd("RCPT TO:<postmaster>").await.starts_with("250"));
        assert!(self.cmd("DATA").await.starts_with("354"));
        self.send(&abl_core::smtp::encode_data(body)).await;
        self.reply().await.expect("final reply")
    }
}

/// A body of exactly `n` octets without keywords, ending in CRLF.
pub fn clean_body(n: usize) -> Vec<u8> {
    assert!(n >= 2);
    let mut body = vec![b'x'; n - 2];
    body.extend_from_slice(b"\r\n");
    body
}

/// Like `clean_body` but with the word "lottery" at the front.
pub fn spam_body(n: usize) -> Vec<u8> {
    let mut body = clean_body(n);
    body[..7].copy_from_slice(b"lottery");
    body
}

pub trait NowForTest {
    fn now_for_test(&self) -> u64;
}

impl NowForTest for ManualClock {
    fn now_for_test(&self) -> u64 {
        abl_server::Clock::now(self)
    }
}
