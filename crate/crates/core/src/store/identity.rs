use std::fmt;
use std::net::IpAddr;

use crate::smtp::{Mailbox, ReversePath};

/// Blacklist key: the client address plus, optionally, the envelope sender.
///
/// An identity without a sender is the IP-only projection. The null sender
/// `<>` is a real sender and is kept as the empty string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SenderIdentity {
    ip: IpAddr,
    sender: Option<String>,
}

impl SenderIdentity {
    pub fn ip_only(ip: IpAddr) -> Self {
        SenderIdentity {
            ip: ip.to_canonical(),
            sender: None,
        }
    }

    pub fn with_reverse_path(ip: IpAddr, path: &ReversePath) -> Self {
        SenderIdentity {
            ip: ip.to_canonical(),
            sender: Some(path.as_str().to_string()),
        }
    }

    /// Builds an identity from free text, as typed by an operator or read
    /// from a snapshot. `sender` of `None` means IP-only; `"<>"` and `""`
    /// both denote the null sender.
    pub fn parse(ip: &str, sender: Option<&str>) -> Result<Self, IdentityError> {
        let ip: IpAddr = ip.parse().map_err(|_| IdentityError::BadIp(ip.to_string()))?;
        let sender = match sender {
            None => None,
            Some(s) if s.is_empty() || s == "<>" => Some(String::new()),
            Some(s) => Some(
                Mailbox::parse(s)
                    .map_err(|_| IdentityError::BadSender(s.to_string()))?
                    .as_str()
                    .to_string(),
            ),
        };
        Ok(SenderIdentity {
            ip: ip.to_canonical(),
            sender,
        })
    }

    pub fn ip(&self) -> IpAddr {
        self.ip
    }

    pub fn sender(&self) -> Option<&str> {
        self.sender.as_deref()
    }

    pub fn is_ip_only(&self) -> bool {
        self.sender.is_none()
    }

    pub fn projection(&self) -> SenderIdentity {
        SenderIdentity::ip_only(self.ip)
    }

    /// Sender column as written in snapshots and admin listings.
    pub fn sender_field(&self) -> &str {
        match self.sender.as_deref() {
            None => "-",
            Some("") => "<>",
            Some(s) => s,
        }
    }
}

impl fmt::Display for SenderIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.ip, self.sender_field())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("invalid IP address {0:?}")]
    BadIp(String),
    #[error("invalid sender address {0:?}")]
    BadSender(String),
}
