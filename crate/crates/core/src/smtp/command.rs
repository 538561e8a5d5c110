use std::fmt;

use thiserror::Error;

/// Maximum command line length, CRLF included.
pub const MAX_COMMAND_LINE: usize = 512;

/// Verbs we recognise but deliberately do not implement (answered with 502).
const UNIMPLEMENTED_VERBS: &[&str] = &["VRFY", "EXPN", "AUTH", "STARTTLS", "HELP", "TURN", "ETRN", "BDAT"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("command line exceeds {MAX_COMMAND_LINE} octets")]
    LineTooLong,
    #[error("syntax error: {0}")]
    BadSyntax(&'static str),
    #[error("command line is not terminated by CRLF")]
    MissingCrlf,
}

/// A mailbox with its domain part lowercased and without angle brackets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mailbox(String);

impl Mailbox {
    /// Parses and normalizes `local@domain`. Surrounding angle brackets are
    /// accepted and stripped.
    pub fn parse(text: &str) -> Result<Mailbox, ParseError> {
        let text = strip_brackets(text);
        if text.is_empty() {
            return Err(ParseError::BadSyntax("empty mailbox"));
        }
        if text.bytes().any(|b| b <= b' ' || b == b'<' || b == b'>' || b >= 0x7f) {
            return Err(ParseError::BadSyntax("invalid character in mailbox"));
        }
        let Some(at) = text.rfind('@') else {
            if text.eq_ignore_ascii_case("postmaster") {
                return Ok(Mailbox("postmaster".to_string()));
            }
            return Err(ParseError::BadSyntax("mailbox lacks a domain"));
        };
        let (local, domain) = (&text[..at], &text[at + 1..]);
        if local.is_empty() || domain.is_empty() || domain.contains('@') {
            return Err(ParseError::BadSyntax("malformed mailbox"));
        }
        if local.starts_with('@') || local.contains(':') {
            return Err(ParseError::BadSyntax("source routes are not supported"));
        }
        Ok(Mailbox(format!("{local}@{}", domain.to_ascii_lowercase())))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Mailbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn strip_brackets(text: &str) -> &str {
    text.strip_prefix('<')
        .and_then(|t| t.strip_suffix('>'))
        .unwrap_or(text)
}

/// The MAIL FROM argument: either the null sender `<>` or a mailbox.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReversePath {
    Null,
    Mailbox(Mailbox),
}

impl ReversePath {
    /// Normalized text used as blacklist key; empty for the null sender.
    pub fn as_str(&self) -> &str {
        match self {
            ReversePath::Null => "",
            ReversePath::Mailbox(m) => m.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Helo(String),
    Ehlo(String),
    MailFrom {
        reverse_path: ReversePath,
        /// Declared message size from the ESMTP `SIZE=` parameter.
        size: Option<u64>,
        raw_line_length: usize,
    },
    RcptTo(Mailbox),
    Data,
    Rset,
    Noop,
    Quit,
    Unknown(String),
}

impl Command {
    /// Parses one command line, which must end in CRLF.
    pub fn parse(line: &[u8]) -> Result<Command, ParseError> {
        if line.len() > MAX_COMMAND_LINE {
            return Err(ParseError::LineTooLong);
        }
        let body = line.strip_suffix(b"\r\n").ok_or(ParseError::MissingCrlf)?;
        if body.iter().any(|&b| b == b'\r' || b == b'\n') {
            return Err(ParseError::BadSyntax("embedded line break"));
        }

        let split = body.iter().position(|&b| b == b' ').unwrap_or(body.len());
        let verb_bytes = &body[..split];
        let args = body.get(split + 1..).unwrap_or_default();

        let verb = match std::str::from_utf8(verb_bytes) {
            Ok(v) => v,
            Err(_) => return Ok(Command::Unknown(String::from_utf8_lossy(verb_bytes).into_owned())),
        };
        let upper = verb.to_ascii_uppercase();
        let recognised = matches!(
            upper.as_str(),
            "HELO" | "EHLO" | "MAIL" | "RCPT" | "DATA" | "RSET" | "NOOP" | "QUIT"
        );
        if !recognised {
            return Ok(Command::Unknown(verb.to_string()));
        }
        let args = std::str::from_utf8(args).map_err(|_| ParseError::BadSyntax("non-UTF-8 argument"))?;

        match upper.as_str() {
            "HELO" | "EHLO" => {
                let domain = args.trim_matches(' ');
                if domain.is_empty() || domain.contains(' ') || domain.bytes().any(|b| !(b' '..0x7f).contains(&b)) {
                    return Err(ParseError::BadSyntax("expected a single domain argument"));
                }
                Ok(if upper == "HELO" {
                    Command::Helo(domain.to_string())
                } else {
                    Command::Ehlo(domain.to_string())
                })
            }
            "MAIL" => {
                let rest = strip_keyword(args, "FROM:").ok_or(ParseError::BadSyntax("expected FROM:<address>"))?;
                let (path, params) = split_path(rest)?;
                let reverse_path = if path.is_empty() {
                    ReversePath::Null
                } else {
                    ReversePath::Mailbox(Mailbox::parse(path)?)
                };
                let size = parse_mail_params(params)?;
                Ok(Command::MailFrom {
                    reverse_path,
                    size,
                    raw_line_length: line.len(),
                })
            }
            "RCPT" => {
                let rest = strip_keyword(args, "TO:").ok_or(ParseError::BadSyntax("expected TO:<address>"))?;
                let (path, params) = split_path(rest)?;
                if !params.trim_matches(' ').is_empty() {
                    return Err(ParseError::BadSyntax("RCPT parameters are not supported"));
                }
                Ok(Command::RcptTo(Mailbox::parse(path)?))
            }
            "DATA" | "RSET" | "QUIT" => {
                if !args.trim_matches(' ').is_empty() {
                    return Err(ParseError::BadSyntax("command takes no arguments"));
                }
                Ok(match upper.as_str() {
                    "DATA" => Command::Data,
                    "RSET" => Command::Rset,
                    _ => Command::Quit,
                })
            }
            "NOOP" => Ok(Command::Noop),
            _ => unreachable!("verb list above is exhaustive"),
        }
    }

    /// True for verbs that are recognised but answered with 502.
    pub fn is_unimplemented(&self) -> bool {
        match self {
            Command::Unknown(verb) => UNIMPLEMENTED_VERBS.iter().any(|v| v.eq_ignore_ascii_case(verb)),
            _ => false,
        }
    }
}

/// Strips a case-insensitive keyword like `FROM:` that may be preceded by
/// spaces and followed by spaces.
fn strip_keyword<'a>(args: &'a str, keyword: &str) -> Option<&'a str> {
    let args = args.trim_start_matches(' ');
    let head = args.get(..keyword.len())?;
    head.eq_ignore_ascii_case(keyword)
        .then(|| args[keyword.len()..].trim_start_matches(' '))
}

/// Splits `<path> params` into the bracket contents and the parameter tail.
fn split_path(rest: &str) -> Result<(&str, &str), ParseError> {
    let inner = rest.strip_prefix('<').ok_or(ParseError::BadSyntax("address must be enclosed in <>"))?;
    let close = inner.find('>').ok_or(ParseError::BadSyntax("unterminated address"))?;
    let tail = &inner[close + 1..];
    if !tail.is_empty() && !tail.starts_with(' ') {
        return Err(ParseError::BadSyntax("junk after address"));
    }
    Ok((&inner[..close], tail))
}

fn parse_mail_params(params: &str) -> Result<Option<u64>, ParseError> {
    let mut size = None;
    for param in params.split(' ').filter(|p| !p.is_empty()) {
        let (key, value) = param.split_once('=').unwrap_or((param, ""));
        if key.eq_ignore_ascii_case("SIZE") {
            if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) || size.is_some() {
                return Err(ParseError::BadSyntax("invalid SIZE parameter"));
            }
            size = Some(value.parse().map_err(|_| ParseError::BadSyntax("SIZE out of range"))?);
        } else if key.eq_ignore_ascii_case("BODY") {
            if !(value.eq_ignore_ascii_case("7BIT") || value.eq_ignore_ascii_case("8BITMIME")) {
                return Err(ParseError::BadSyntax("invalid BODY parameter"));
            }
        } else {
            return Err(ParseError::BadSyntax("unsupported MAIL parameter"));
        }
    }
    Ok(size)
}
