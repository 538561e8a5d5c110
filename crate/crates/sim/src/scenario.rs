//! Scenario files: the server configuration keys plus `[sender.<name>]`
//! blocks describing client populations.

use std::fmt;
use std::str::FromStr;

use abl_core::classifier::KeywordScorer;
use abl_server::{parse_flat, ConfigError, FlatItem, ServerConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("sender {sender}: {message}")]
    Sender { sender: String, message: String },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderKind {
    Spammer,
    Legit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressRotation {
    Fixed,
    PerMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Runs {
    AblOn,
    AblOff,
    Both,
}

impl Runs {
    /// ABL settings to run, in report order.
    pub fn settings(self) -> &'static [bool] {
        match self {
            Runs::AblOn => &[true],
            Runs::AblOff => &[false],
            Runs::Both => &[true, false],
        }
    }
}

macro_rules! text_enum {
    ($ty:ident { $($text:literal => $variant:ident),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)*
                    other => Err(format!("expected one of {}, found {other:?}", [$($text),*].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text,)* })
            }
        }
    };
}

text_enum!(SenderKind { "spammer" => Spammer, "legit" => Legit });
text_enum!(AddressRotation { "fixed" => Fixed, "per-message" => PerMessage });
text_enum!(Runs { "abl_on" => AblOn, "abl_off" => AblOff, "both" => Both });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenderProfile {
    pub name: String,
    pub kind: SenderKind,
    pub count: u32,
    pub messages: u32,
    pub payload_octets: usize,
    pub retry_on_reject: bool,
    pub inter_message_delay_ms: u64,
    pub address_rotation: AddressRotation,
    /// Trigger word placed in spam payloads; defaults to the heaviest
    /// classifier keyword.
    pub keyword: Option<String>,
}

impl SenderProfile {
    pub fn new(name: &str, kind: SenderKind) -> Self {
        SenderProfile {
            name: name.to_string(),
            kind,
            count: 1,
            messages: 1,
            payload_octets: 1024,
            retry_on_reject: true,
            inter_message_delay_ms: 0,
            address_rotation: AddressRotation::Fixed,
            keyword: None,
        }
    }

    pub const KEYS: &'static [&'static str] = &[
        "kind",
        "count",
        "messages",
        "payload_octets",
        "retry_on_reject",
        "inter_message_delay_ms",
        "address_rotation",
        "keyword",
    ];

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(value: &str) -> Result<T, String> {
            value.parse().map_err(|_| format!("expected a non-negative integer, found {value:?}"))
        }
        match key {
            "kind" => self.kind = value.parse()?,
            "count" => self.count = num(value)?,
            "messages" => self.messages = num(value)?,
            "payload_octets" => self.payload_octets = num(value)?,
            "retry_on_reject" => self.retry_on_reject = abl_server::parse_bool(value)?,
            "inter_message_delay_ms" => self.inter_message_delay_ms = num(value)?,
            "address_rotation" => self.address_rotation = value.parse()?,
            "keyword" => self.keyword = (!value.is_empty()).then(|| value.to_string()),
            _ => return Err(format!("unknown sender key {key:?}")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub senders: Vec<SenderProfile>,
    pub rng_seed: u64,
    pub runs: Runs,
    /// Server settings shared by every run; listen addresses, snapshots and
    /// `abl_enabled` are chosen by the simulator.
    pub server: ServerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            senders: Vec::new(),
            rng_seed: 0,
            runs: Runs::Both,
            server: ServerConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        let mut scenario = ScenarioConfig::default();
        let mut current: Option<(usize, SenderProfile, bool)> = None;
        let finish = |current: &mut Option<(usize, SenderProfile, bool)>, out: &mut Vec<SenderProfile>| {
            if let Some((line, profile, has_kind)) = current.take() {
                if !has_kind {
                    return Err(ScenarioError::Invalid {
                        line,
                        message: format!("sender {:?} has no kind", profile.name),
                    });
                }
                out.push(profile);
            }
            Ok(())
        };
        for item in parse_flat(text)? {
            match item {
                FlatItem::Section { line, name } => {
                    finish(&mut current, &mut scenario.senders)?;
                    let sender = name.strip_prefix("sender.").filter(|n| valid_name(n)).ok_or_else(|| {
                        ScenarioError::Invalid {
                            line,
                            message: format!("expected [sender.<name>] with a name of letters, digits, '-' or '_', found [{name}]"),
                        }
                    })?;
                    if scenario.senders.iter().any(|s| s.name == sender) {
                        return Err(ScenarioError::Invalid {
                            line,
                            message: format!("duplicate sender {sender:?}"),
                        });
                    }
                    current = Some((line, SenderProfile::new(sender, SenderKind::Legit), false));
                }
                FlatItem::Entry { line, key, value } => {
                    let invalid = |message: String| ScenarioError::Invalid { line, message };
                    match current.as_mut() {
                        Some((_, profile, has_kind)) => {
                            profile.set(&key, &value).map_err(invalid)?;
                            *has_kind |= key == "kind";
                        }
                        None => match key.as_str() {
                            "rng_seed" => {
                                scenario.rng_seed = value.parse().map_err(|_| invalid(format!("invalid rng_seed {value:?}")))?
                            }
                            "runs" => scenario.runs = value.parse().map_err(invalid)?,
                            _ => scenario.server.set(&key, &value).map_err(|e| e.at_line(line))?,
                        },
                    }
                }
            }
        }
        finish(&mut current, &mut scenario.senders)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Checks the profile invariants against the classifier settings.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.server.classifier_hook.is_some() {
            return Err(ScenarioError::Other(
                "simulations need the keyword classifier; classifier_hook must be empty".into(),
            ));
        }
        self.server.validate()?;
        let scorer = self.scorer()?;
        let total: u64 = self.senders.iter().map(|s| u64::from(s.count)).sum();
        if total > crate::client::MAX_SENDERS {
            return Err(ScenarioError::Other(format!(
                "{total} senders exceed the {} distinct source addresses available",
                crate::client::MAX_SENDERS
            )));
        }
        for profile in &self.senders {
            let bad = |message: String| ScenarioError::Sender {
                sender: profile.name.clone(),
                message,
            };
            if profile.messages == 0 {
                return Err(bad("messages must be at least 1".into()));
            }
            if profile.payload_octets < crate::payload::MIN_PAYLOAD {
                return Err(bad(format!("payload_octets must be at least {}", crate::payload::MIN_PAYLOAD)));
            }
            if profile.payload_octets as u64 > self.server.max_message_octets {
                return Err(bad("payload_octets exceeds max_message_octets".into()));
            }
            if profile.kind == SenderKind::Spammer {
                let keyword = self.keyword_for(profile)?;
                if keyword.len() + crate::payload::MIN_PAYLOAD > profile.payload_octets {
                    return Err(bad(format!("payload_octets too small to hold keyword {keyword:?}")));
                }
                if keyword.is_empty() || keyword.len() > MAX_KEYWORD || keyword.contains(['\r', '\n']) {
                    return Err(bad(format!("keyword must be a single line of 1 to {MAX_KEYWORD} octets")));
                }
                let weight: f64 = scorer
                    .keywords()
                    .iter()
                    .filter(|(k, _)| k.eq_ignore_ascii_case(&keyword))
                    .map(|(_, w)| w)
                    .sum();
                if weight < scorer.threshold() {
                    return Err(bad(format!(
                        "keyword {keyword:?} does not reach classifier_threshold {} on its own",
                        scorer.threshold()
                    )));
                }
            } else if profile.keyword.is_some() {
                return Err(bad("legit senders take no keyword".into()));
            }
        }
        Ok(())
    }

    pub fn scorer(&self) -> Result<KeywordScorer, ScenarioError> {
        KeywordScorer::new(self.server.classifier_keywords.clone(), self.server.classifier_threshold)
            .map_err(|e| ScenarioError::Other(e.to_string()))
    }

    /// Trigger word for a spammer profile.
    pub fn keyword_for(&self, profile: &SenderProfile) -> Result<String, ScenarioError> {
        if let Some(k) = &profile.keyword {
            return Ok(k.clone());
        }
        self.server
            .classifier_keywords
            .iter()
            .fold(None::<&(String, f64)>, |best, kw| match best {
                Some(b) if b.1 >= kw.1 => Some(b),
                _ => Some(kw),
            })
            .map(|(k, _)| k.clone())
            .ok_or_else(|| ScenarioError::Sender {
                sender: profile.name.clone(),
                message: "no classifier keywords configured to trigger on".into(),
            })
    }
}

/// Longest trigger word; it must fit on the first payload line.
pub const MAX_KEYWORD: usize = 64;

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}
