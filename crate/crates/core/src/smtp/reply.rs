use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplyError {
    #[error("reply code {0} outside 200..=599")]
    BadCode(u16),
    #[error("reply has no lines")]
    NoLines,
    #[error("reply line contains CR or LF")]
    LineBreak,
    #[error("enhanced status class does not match reply code")]
    StatusMismatch,
    #[error("text of a reply without enhanced status starts like one")]
    AmbiguousText,
    #[error("incomplete reply")]
    Incomplete,
    #[error("malformed reply line: {0}")]
    Malformed(&'static str),
}

/// RFC 3463 enhanced status code, e.g. `5.7.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnhancedStatus {
    pub class: u8,
    pub subject: u16,
    pub detail: u16,
}

impl EnhancedStatus {
    pub const fn new(class: u8, subject: u16, detail: u16) -> Self {
        EnhancedStatus { class, subject, detail }
    }
}

impl fmt::Display for EnhancedStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.class, self.subject, self.detail)
    }
}

impl FromStr for EnhancedStatus {
    type Err = ReplyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('.');
        let bad = ReplyError::Malformed("enhanced status");
        let mut next = |max_len: usize| -> Result<u16, ReplyError> {
            let p = parts.next().ok_or(bad.clone())?;
            if p.is_empty() || p.len() > max_len || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad.clone());
            }
            Ok(p.parse().expect("digits"))
        };
        let class = next(1)?;
        let subject = next(3)?;
        let detail = next(3)?;
        if parts.next().is_some() || !matches!(class, 2 | 4 | 5) {
            return Err(ReplyError::Malformed("enhanced status"));
        }
        Ok(EnhancedStatus::new(class as u8, subject, detail))
    }
}

/// A server reply: a three digit code, optional enhanced status and one or
/// more text lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    code: u16,
    enhanced: Option<EnhancedStatus>,
    lines: Vec<String>,
}

impl Reply {
    pub fn new(code: u16, enhanced: Option<EnhancedStatus>, lines: Vec<String>) -> Result<Reply, ReplyError> {
        if !(200..=599).contains(&code) {
            return Err(ReplyError::BadCode(code));
        }
        if lines.is_empty() {
            return Err(ReplyError::NoLines);
        }
        if lines.iter().any(|l| l.contains(['\r', '\n'])) {
            return Err(ReplyError::LineBreak);
        }
        match enhanced {
            Some(status) if u16::from(status.class) != code / 100 => return Err(ReplyError::StatusMismatch),
            None if lines.iter().any(|l| starts_with_status(l)) => return Err(ReplyError::AmbiguousText),
            _ => {}
        }
        Ok(Reply { code, enhanced, lines })
    }

    /// Single-line constructor for replies built from static text.
    pub(crate) fn line(code: u16, enhanced: Option<EnhancedStatus>, text: impl Into<String>) -> Reply {
        Reply::new(code, enhanced, vec![text.into()]).expect("static reply is well formed")
    }

    pub fn code(&self) -> u16 {
        self.code
    }

    pub fn enhanced(&self) -> Option<EnhancedStatus> {
        self.enhanced
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn is_positive(&self) -> bool {
        self.code < 400
    }

    /// Wire rendering: hyphen continuation on all but the last line.
    pub fn render(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.lines.iter().map(|l| l.len() + 12).sum());
        self.render_into(&mut out);
        out
    }

    pub fn render_into(&self, out: &mut Vec<u8>) {
        let last = self.lines.len() - 1;
        for (i, line) in self.lines.iter().enumerate() {
            let sep = if i == last { ' ' } else { '-' };
            let status = self.enhanced.map(|s| format!("{s} ")).unwrap_or_default();
            out.extend_from_slice(format!("{}{sep}{status}{line}\r\n", self.code).as_bytes());
        }
    }

    /// Parses one complete reply from the front of `buf`, returning it with
    /// the number of octets consumed. `Incomplete` means more input is needed.
    pub fn parse(buf: &[u8]) -> Result<(Reply, usize), ReplyError> {
        let mut pos = 0;
        let mut code = None;
        let mut raw_lines = Vec::new();
        loop {
            let rest = &buf[pos..];
            let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
                return Err(ReplyError::Incomplete);
            };
            let line = rest[..nl].strip_suffix(b"\r").ok_or(ReplyError::Malformed("missing CR"))?;
            pos += nl + 1;
            let line = std::str::from_utf8(line).map_err(|_| ReplyError::Malformed("not UTF-8"))?;
            if line.len() < 4 || !line.as_bytes()[..3].iter().all(u8::is_ascii_digit) {
                return Err(ReplyError::Malformed("expected code"));
            }
            let this_code: u16 = line[..3].parse().expect("digits");
            if *code.get_or_insert(this_code) != this_code {
                return Err(ReplyError::Malformed("code changes within reply"));
            }
            let last = match line.as_bytes()[3] {
                b' ' => true,
                b'-' => false,
                _ => return Err(ReplyError::Malformed("expected SP or '-' after code")),
            };
            raw_lines.push(&line[4..]);
            if last {
                break;
            }
        }

        let code = code.expect("at least one line");
        let status_of = |l: &str| -> Option<EnhancedStatus> {
            let token = l.split(' ').next()?;
            token.parse().ok()
        };
        let enhanced = status_of(raw_lines[0]);
        let lines = match enhanced {
            Some(status) => {
                let prefix = status.to_string();
                raw_lines
                    .iter()
                    .map(|l| {
                        let rest = l.strip_prefix(prefix.as_str()).ok_or(ReplyError::Malformed("inconsistent status"))?;
                        Ok(rest.strip_prefix(' ').unwrap_or(rest).to_string())
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            None => raw_lines.iter().map(|l| l.to_string()).collect(),
        };
        Ok((Reply::new(code, enhanced, lines)?, pos))
    }
}

fn starts_with_status(line: &str) -> bool {
    line.split(' ').next().is_some_and(|t| t.parse::<EnhancedStatus>().is_ok())
}

impl fmt::Display for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.render()))
    }
}

pub(crate) const POLICY_REJECT: EnhancedStatus = EnhancedStatus::new(5, 7, 1);
pub(crate) const POLICY_TEMPFAIL: EnhancedStatus = EnhancedStatus::new(4, 7, 1);
pub(crate) const SIZE_EXCEEDED: EnhancedStatus = EnhancedStatus::new(5, 3, 4);

// Standard replies used by the session state machine and the server.
impl Reply {
    pub fn greeting(domain: &str) -> Reply {
        Reply::line(220, None, format!("{domain} ESMTP ready"))
    }

    pub fn closing(domain: &str) -> Reply {
        Reply::line(221, None, format!("{domain} closing connection"))
    }

    pub fn ok() -> Reply {
        Reply::line(250, None, "OK")
    }

    pub fn helo(domain: &str) -> Reply {
        Reply::line(250, None, domain)
    }

    pub fn ehlo(domain: &str, client: &str, max_message_octets: u64) -> Reply {
        Reply::new(
            250,
            None,
            vec![
                format!("{domain} greets {client}"),
                "PIPELINING".to_string(),
                format!("SIZE {max_message_octets}"),
            ],
        )
        .expect("ehlo reply is well formed")
    }

    pub fn start_data() -> Reply {
        Reply::line(354, None, "End data with <CR><LF>.<CR><LF>")
    }

    pub fn message_accepted() -> Reply {
        Reply::line(250, None, "OK message accepted")
    }

    pub fn message_rejected_as_spam() -> Reply {
        Reply::line(554, Some(POLICY_REJECT), "message rejected as spam")
    }

    pub fn message_too_large() -> Reply {
        Reply::line(552, Some(SIZE_EXCEEDED), "message size exceeds fixed limit")
    }

    pub fn too_many_recipients() -> Reply {
        Reply::line(452, None, "too many recipients")
    }

    pub fn blocked() -> Reply {
        Reply::line(554, Some(POLICY_REJECT), "blocked by ABL")
    }

    pub fn temporarily_blocked() -> Reply {
        Reply::line(451, Some(POLICY_TEMPFAIL), "temporarily blocked by ABL, try again later")
    }

    pub fn bad_sequence() -> Reply {
        Reply::line(503, None, "bad sequence of commands")
    }

    pub fn unrecognized() -> Reply {
        Reply::line(500, None, "command not recognized")
    }

    pub fn line_too_long() -> Reply {
        Reply::line(500, None, "line too long")
    }

    pub fn missing_crlf() -> Reply {
        Reply::line(500, None, "command lines must end with CRLF")
    }

    pub fn syntax_error() -> Reply {
        Reply::line(501, None, "syntax error in parameters or arguments")
    }

    pub fn not_implemented() -> Reply {
        Reply::line(502, None, "command not implemented")
    }

    pub fn service_unavailable(domain: &str, why: &str) -> Reply {
        Reply::line(421, None, format!("{domain} {why}, closing connection"))
    }
}
