//! Spam detection that feeds the blacklist.
//!
//! The built-in scorer sums keyword weights over case-insensitive,
//! non-overlapping occurrences in the body. An external hook can replace it:
//! the body goes to the hook's stdin and a single `score=<decimal>` line is
//! read back. A failing hook never marks a message as spam.

use std::process::Stdio;
use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::process::Command;

use crate::smtp::Envelope;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierVerdict {
    pub score: f64,
    pub is_spam: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("keyword must not be empty")]
    EmptyKeyword,
    #[error("weight for {0:?} must be finite and non-negative")]
    BadWeight(String),
    #[error("threshold must be finite and non-negative")]
    BadThreshold,
    #[error("malformed keyword list entry {0:?}, expected keyword:weight")]
    BadEntry(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HookFailure {
    #[error("could not start hook: {0}")]
    Spawn(String),
    #[error("hook timed out after {0:?}")]
    Timeout(Duration),
    #[error("hook exited with {0}")]
    ExitStatus(String),
    #[error("hook output is not `score=<decimal>`: {0:?}")]
    BadOutput(String),
    #[error("hook I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordScorer {
    keywords: Vec<(String, f64)>,
    threshold: f64,
}

impl KeywordScorer {
    pub fn new(keywords: Vec<(String, f64)>, threshold: f64) -> Result<Self, ClassifierError> {
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(ClassifierError::BadThreshold);
        }
        for (kw, w) in &keywords {
            if kw.is_empty() {
                return Err(ClassifierError::EmptyKeyword);
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(ClassifierError::BadWeight(kw.clone()));
            }
        }
        Ok(KeywordScorer { keywords, threshold })
    }

    /// Parses `kw:weight, kw:weight`.
    pub fn parse_keywords(text: &str) -> Result<Vec<(String, f64)>, ClassifierError> {
        text.split(',')
            .map(str::trim)
            .filter(|e| !e.is_empty())
            .map(|entry| {
                let (kw, w) = entry
                    .rsplit_once(':')
                    .ok_or_else(|| ClassifierError::BadEntry(entry.to_string()))?;
                let kw = kw.trim();
                if kw.is_empty() {
                    return Err(ClassifierError::EmptyKeyword);
                }
                let w: f64 = w.trim().parse().map_err(|_| ClassifierError::BadEntry(entry.to_string()))?;
                Ok((kw.to_string(), w))
            })
            .collect()
    }

    pub fn keywords(&self) -> &[(String, f64)] {
        &self.keywords
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn classify(&self, _envelope: &Envelope, body: &[u8]) -> ClassifierVerdict {
        let mut score = 0.0;
        let mut matched = Vec::new();
        for (kw, weight) in &self.keywords {
            let n = count_occurrences(body, kw.as_bytes());
            if n > 0 {
                score += weight * n as f64;
                matched.push(format!("{kw}*{n}"));
            }
        }
        let reason = if matched.is_empty() {
            "no keywords matched".to_string()
        } else {
            format!("keywords: {}", matched.join(" "))
        };
        ClassifierVerdict {
            score,
            is_spam: score >= self.threshold,
            reason,
        }
    }
}

/// Non-overlapping, left-to-right, ASCII case-insensitive occurrence count.
pub fn count_occurrences(haystack: &[u8], needle: &[u8]) -> usize {
    if needle.is_empty() || needle.len() > haystack.len() {
        return 0;
    }
    let mut count = 0;
    let mut i = 0;
    while i + needle.len() <= haystack.len() {
        if haystack[i..i + needle.len()].eq_ignore_ascii_case(needle) {
            count += 1;
            i += needle.len();
        } else {
            i += 1;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookConfig {
    /// Shell command line, run with `sh -c`.
    pub command: String,
    pub timeout: Duration,
}

/// Runs the hook with `body` on stdin and parses its score.
pub async fn classify_external(
    envelope: &Envelope,
    body: &[u8],
    hook: &HookConfig,
    threshold: f64,
) -> Result<ClassifierVerdict, HookFailure> {
    let mut child = Command::new("/bin/sh")
        .arg("-c")
        .arg(&hook.command)
        .env("ABL_CLIENT_IP", envelope.client_ip.to_string())
        .env(
            "ABL_SENDER",
            envelope.reverse_path.as_ref().map(|p| p.as_str()).unwrap_or_default(),
        )
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .kill_on_drop(true)
        .spawn()
        .map_err(|e| HookFailure::Spawn(e.to_string()))?;

    let mut stdin = child.stdin.take().expect("piped");
    let mut stdout = child.stdout.take().expect("piped");
    let body = body.to_vec();

    let run = async move {
        let writer = async move {
            // A hook may exit without reading its input.
            match stdin.write_all(&body).await {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e),
                _ => Ok(()),
            }
        };
        let mut out = Vec::new();
        let reader = stdout.read_to_end(&mut out);
        let (w, r) = tokio::join!(writer, reader);
        w.and(r).map_err(|e| HookFailure::Io(e.to_string()))?;
        let status = child.wait().await.map_err(|e| HookFailure::Io(e.to_string()))?;
        Ok::<_, HookFailure>((status, out))
    };

    let (status, out) = tokio::time::timeout(hook.timeout, run)
        .await
        .map_err(|_| HookFailure::Timeout(hook.timeout))??;
    if !status.success() {
        return Err(HookFailure::ExitStatus(status.to_string()));
    }
    let score = parse_hook_output(&out)?;
    Ok(ClassifierVerdict {
        score,
        is_spam: score >= threshold,
        reason: format!("hook score={score}"),
    })
}

pub fn parse_hook_output(out: &[u8]) -> Result<f64, HookFailure> {
    let bad = || HookFailure::BadOutput(String::from_utf8_lossy(out).chars().take(80).collect());
    let text = std::str::from_utf8(out).map_err(|_| bad())?;
    let line = text.strip_suffix('\n').unwrap_or(text);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.contains('\n') {
        return Err(bad());
    }
    let value = line.strip_prefix("score=").ok_or_else(bad)?;
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return Err(bad());
    }
    value.parse::<f64>().ok().filter(|s| s.is_finite()).ok_or_else(bad)
}

/// The configured detector.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Keywords(KeywordScorer),
    Hook { hook: HookConfig, threshold: f64 },
}

impl Classifier {
    /// Classifies a message, failing open when the hook misbehaves.
    pub async fn classify(&self, envelope: &Envelope, body: &[u8]) -> ClassifierVerdict {
        match self {
            Classifier::Keywords(scorer) => scorer.classify(envelope, body),
            Classifier::Hook { hook, threshold } => match classify_external(envelope, body, hook, *threshold).await {
                Ok(v) => v,
                Err(err) => {
                    tracing::warn!(%err, "spam hook failed; treating message as not spam");
                    ClassifierVerdict {
                        score: 0.0,
                        is_spam: false,
                        reason: format!("hook failure: {err}"),
                    }
                }
            },
        }
    }
}
