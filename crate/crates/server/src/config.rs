//! Flat `key = value` configuration.
//!
//! The same syntax is used for server configuration files and simulation
//! scenarios; scenarios additionally use `[section]` headers.

use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use abl_core::classifier::{Classifier, HookConfig, KeywordScorer};
use abl_core::smtp::{RejectPolicy, SessionLimits, DEFAULT_MAX_MESSAGE_OCTETS};
use abl_core::store::{parse_growth, TtlPolicy, DEFAULT_CAPACITY};
use num_rational::Ratio;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {message}")]
    BadValue { key: String, value: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    /// Attaches a line number to key/value errors raised while applying a file.
    pub fn at_line(self, line: usize) -> ConfigError {
        match self {
            ConfigError::Syntax { .. } => self,
            other => ConfigError::Syntax {
                line,
                message: other.to_string(),
            },
        }
    }
}

/// One `key = value` line, or a `[section]` header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlatItem {
    Section { line: usize, name: String },
    Entry { line: usize, key: String, value: String },
}

/// Parses flat configuration text. Blank lines and lines starting with `#`
/// are skipped; values are trimmed.
pub fn parse_flat(text: &str) -> Result<Vec<FlatItem>, ConfigError> {
    let mut items = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty section name".into(),
                });
            }
            items.push(FlatItem::Section {
                line,
                name: name.to_string(),
            });
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, found {trimmed:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
            return Err(ConfigError::Syntax {
                line,
                message: format!("invalid key {key:?}"),
            });
        }
        items.push(FlatItem::Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub listen_address: SocketAddr,
    pub admin_listen_address: SocketAddr,
    pub greeting_domain: String,
    pub policy: RejectPolicy,
    pub base_ttl_s: u64,
    pub growth_factor: Ratio<u64>,
    pub max_ttl_s: u64,
    pub max_entries: usize,
    pub classifier_keywords: Vec<(String, f64)>,
    pub classifier_threshold: f64,
    pub classifier_hook: Option<String>,
    pub classifier_hook_timeout_ms: u64,
    pub max_message_octets: u64,
    pub command_timeout_s: u64,
    pub max_concurrent_sessions: usize,
    pub snapshot_path: Option<PathBuf>,
    pub snapshot_interval_s: u64,
    pub abl_enabled: bool,
    pub reject_triggering_message: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen_address: "127.0.0.1:2525".parse().expect("literal"),
            admin_listen_address: "127.0.0.1:2526".parse().expect("literal"),
            greeting_domain: "localhost".to_string(),
            policy: RejectPolicy::RejectEarly554,
            base_ttl_s: 3600,
            growth_factor: Ratio::from_integer(2),
            max_ttl_s: 86_400,
            max_entries: DEFAULT_CAPACITY,
            classifier_keywords: vec![
                ("lottery".to_string(), 5.0),
                ("viagra".to_string(), 5.0),
                ("winner".to_string(), 2.5),
                ("free money".to_string(), 2.5),
            ],
            classifier_threshold: 5.0,
            classifier_hook: None,
            classifier_hook_timeout_ms: 5000,
            max_message_octets: DEFAULT_MAX_MESSAGE_OCTETS,
            command_timeout_s: 300,
            max_concurrent_sessions: 1024,
            snapshot_path: None,
            snapshot_interval_s: 60,
            abl_enabled: true,
            reject_triggering_message: false,
        }
    }
}

impl ServerConfig {
    /// Every configuration key, in documentation order.
    pub const KEYS: &'static [&'static str] = &[
        "listen_address",
        "admin_listen_address",
        "greeting_domain",
        "policy",
        "base_ttl_s",
        "growth_factor",
        "max_ttl_s",
        "max_entries",
        "classifier_keywords",
        "classifier_threshold",
        "classifier_hook",
        "classifier_hook_timeout_ms",
        "max_message_octets",
        "command_timeout_s",
        "max_concurrent_sessions",
        "snapshot_path",
        "snapshot_interval_s",
        "abl_enabled",
        "reject_triggering_message",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            message,
        };
        fn num<T: std::str::FromStr>(value: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "listen_address" => self.listen_address = num(value).map_err(bad)?,
            "admin_listen_address" => self.admin_listen_address = num(value).map_err(bad)?,
            "greeting_domain" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(bad("must be a single non-empty word".into()));
                }
                self.greeting_domain = value.to_string();
            }
            "policy" => self.policy = value.parse().map_err(bad)?,
            "base_ttl_s" => self.base_ttl_s = num(value).map_err(bad)?,
            "growth_factor" => self.growth_factor = parse_growth(value).map_err(|e| bad(e.to_string()))?,
            "max_ttl_s" => self.max_ttl_s = num(value).map_err(bad)?,
            "max_entries" => self.max_entries = num(value).map_err(bad)?,
            "classifier_keywords" => {
                self.classifier_keywords = KeywordScorer::parse_keywords(value).map_err(|e| bad(e.to_string()))?
            }
            "classifier_threshold" => self.classifier_threshold = num(value).map_err(bad)?,
            "classifier_hook" => self.classifier_hook = (!value.is_empty()).then(|| value.to_string()),
            "classifier_hook_timeout_ms" => self.classifier_hook_timeout_ms = num(value).map_err(bad)?,
            "max_message_octets" => self.max_message_octets = num(value).map_err(bad)?,
            "command_timeout_s" => self.command_timeout_s = num(value).map_err(bad)?,
            "max_concurrent_sessions" => self.max_concurrent_sessions = num(value).map_err(bad)?,
            "snapshot_path" => self.snapshot_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "snapshot_interval_s" => self.snapshot_interval_s = num(value).map_err(bad)?,
            "abl_enabled" => self.abl_enabled = parse_bool(value).map_err(bad)?,
            "reject_triggering_message" => self.reject_triggering_message = parse_bool(value).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Canonical text of a key's value; `set(key, &get(key))` is a no-op.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "listen_address" => self.listen_address.to_string(),
            "admin_listen_address" => self.admin_listen_address.to_string(),
            "greeting_domain" => self.greeting_domain.clone(),
            "policy" => self.policy.to_string(),
            "base_ttl_s" => self.base_ttl_s.to_string(),
            "growth_factor" => self.growth_factor.to_string(),
            "max_ttl_s" => self.max_ttl_s.to_string(),
            "max_entries" => self.max_entries.to_string(),
            "classifier_keywords" => self
                .classifier_keywords
                .iter()
                .map(|(k, w)| format!("{k}:{w}"))
                .collect::<Vec<_>>()
                .join(", "),
            "classifier_threshold" => self.classifier_threshold.to_string(),
            "classifier_hook" => self.classifier_hook.clone().unwrap_or_default(),
            "classifier_hook_timeout_ms" => self.classifier_hook_timeout_ms.to_string(),
            "max_message_octets" => self.max_message_octets.to_string(),
            "command_timeout_s" => self.command_timeout_s.to_string(),
            "max_concurrent_sessions" => self.max_concurrent_sessions.to_string(),
            "snapshot_path" => self
                .snapshot_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "snapshot_interval_s" => self.snapshot_interval_s.to_string(),
            "abl_enabled" => self.abl_enabled.to_string(),
            "reject_triggering_message" => self.reject_triggering_message.to_string(),
            _ => return None,
        })
    }

    /// Applies a configuration file's text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for item in parse_flat(text)? {
            match item {
                FlatItem::Section { line, .. } => {
                    return Err(ConfigError::Syntax {
                        line,
                        message: "sections are not allowed in a server configuration".into(),
                    })
                }
                FlatItem::Entry { line, key, value } => self.set(&key, &value).map_err(|e| e.at_line(line))?,
            }
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.apply_text(&text)
    }

    pub fn ttl_policy(&self) -> Result<TtlPolicy, ConfigError> {
        TtlPolicy::new(self.base_ttl_s, self.growth_factor, self.max_ttl_s).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn classifier(&self) -> Result<Classifier, ConfigError> {
        if let Some(command) = &self.classifier_hook {
            if !self.classifier_threshold.is_finite() || self.classifier_threshold < 0.0 {
                return Err(ConfigError::Invalid("classifier_threshold must be non-negative".into()));
            }
            return Ok(Classifier::Hook {
                hook: HookConfig {
                    command: command.clone(),
                    timeout: Duration::from_millis(self.classifier_hook_timeout_ms),
                },
                threshold: self.classifier_threshold,
            });
        }
        KeywordScorer::new(self.classifier_keywords.clone(), self.classifier_threshold)
            .map(Classifier::Keywords)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn session_limits(&self) -> SessionLimits {
        SessionLimits {
            server_domain: self.greeting_domain.clone(),
            max_message_octets: self.max_message_octets,
        }
    }

    /// Checks cross-field invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("command_timeout_s", self.command_timeout_s),
            ("snapshot_interval_s", self.snapshot_interval_s),
            ("classifier_hook_timeout_ms", self.classifier_hook_timeout_ms),
            ("max_message_octets", self.max_message_octets),
            ("max_concurrent_sessions", self.max_concurrent_sessions as u64),
            ("max_entries", self.max_entries as u64),
        ];
        if let Some((key, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Invalid(format!("{key} must be positive")));
        }
        if let RejectPolicy::Tarpit(d) = self.policy {
            if d.is_zero() {
                return Err(ConfigError::Invalid("tarpit delay must be positive".into()));
            }
        }
        self.ttl_policy()?;
        self.classifier()?;
        Ok(())
    }
}

pub fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}
