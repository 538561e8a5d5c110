use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;
use std::time::{Duration, Instant};

use abl_core::smtp::{RejectPolicy, Reply};
use abl_server::{AdminClient, AdminCommand, ManualClock, MetricsSnapshot, ServeError, ServerOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::client::{source_ip, SmtpClient, Transcript};
use crate::payload;
use crate::report::{RunReport, SimReport};
use crate::scenario::{AddressRotation, ScenarioConfig, ScenarioError, SenderKind};

/// Virtual start time of every run.
pub const SIM_EPOCH: u64 = 1_700_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("server failed to start: {0}")]
    Server(#[from] ServeError),
    #[error("sender {sender}: {error}\n{excerpt}")]
    Protocol { sender: String, error: String, excerpt: String },
    #[error("metrics collection failed: {0}")]
    Admin(String),
}

/// How one connection attempt ended, as seen by the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Accepted,
    /// Refused after the body was sent.
    RejectedAfterData,
    BlockedConnect,
    BlockedMail,
    /// Turned away by the session cap.
    Refused,
}

impl Outcome {
    pub fn is_rejection(self) -> bool {
        !matches!(self, Outcome::Accepted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub outcome: Outcome,
    /// Octets of the payload handed to DATA, zero if DATA was not reached.
    pub payload_octets: u64,
    pub transcript: Transcript,
}

/// Everything one simulated sender did in a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenderLog {
    pub name: String,
    pub kind: SenderKind,
    pub source: IpAddr,
    pub attempts: Vec<Attempt>,
}

struct Sender {
    log: SenderLog,
    messages: u32,
    payload_octets: usize,
    retry_on_reject: bool,
    delay_ms: u64,
    rotation: AddressRotation,
    keyword: Option<String>,
    index_in_profile: u32,
    profile: String,
    rng: ChaCha8Rng,
    stopped: bool,
}

impl Sender {
    fn envelope_sender(&self, message: u32) -> String {
        let local = match self.rotation {
            AddressRotation::Fixed => format!("s{}", self.index_in_profile),
            AddressRotation::PerMessage => format!("s{}-m{message}", self.index_in_profile),
        };
        format!("{local}@{}.sim.test", self.profile)
    }
}

fn senders(scenario: &ScenarioConfig) -> Result<Vec<Sender>, ScenarioError> {
    let mut out = Vec::new();
    let mut global = 0u64;
    for profile in &scenario.senders {
        let keyword = match profile.kind {
            SenderKind::Spammer => Some(scenario.keyword_for(profile)?),
            SenderKind::Legit => None,
        };
        for i in 0..profile.count {
            // One stream per sender so payloads do not depend on scheduling.
            let seed = scenario.rng_seed ^ global.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            out.push(Sender {
                log: SenderLog {
                    name: format!("{}#{i}", profile.name),
                    kind: profile.kind,
                    source: source_ip(global),
                    attempts: Vec::new(),
                },
                messages: profile.messages,
                payload_octets: profile.payload_octets,
                retry_on_reject: profile.retry_on_reject,
                delay_ms: profile.inter_message_delay_ms,
                rotation: profile.address_rotation,
                keyword: keyword.clone(),
                index_in_profile: i,
                profile: profile.name.clone(),
                rng: ChaCha8Rng::seed_from_u64(seed),
                stopped: false,
            });
            global += 1;
        }
    }
    Ok(out)
}

/// Runs the scenario once per requested ABL setting, each against a fresh
/// in-process server.
pub async fn run_scenario(scenario: &ScenarioConfig) -> Result<SimReport, SimError> {
    scenario.validate()?;
    let mut runs = Vec::new();
    for &abl in scenario.runs.settings() {
        runs.push(run_once(scenario, abl).await?);
    }
    Ok(SimReport { runs })
}

async fn run_once(scenario: &ScenarioConfig, abl_enabled: bool) -> Result<RunReport, SimError> {
    let started = Instant::now();
    let mut config = scenario.server.clone();
    config.listen_address = "127.0.0.1:0".parse().expect("literal");
    config.admin_listen_address = "127.0.0.1:0".parse().expect("literal");
    config.snapshot_path = None;
    config.abl_enabled = abl_enabled;
    let clock = Arc::new(ManualClock::new(SIM_EPOCH));
    let server = abl_server::start_with(
        config,
        ServerOptions {
            clock: clock.clone(),
            ..ServerOptions::default()
        },
    )
    .await?;
    let reply_timeout = match scenario.server.policy {
        RejectPolicy::Tarpit(d) => d + Duration::from_secs(30),
        _ => Duration::from_secs(30),
    };
    let scorer = scenario.scorer()?;
    let domain = scenario.server.greeting_domain.clone();

    let mut senders = senders(scenario)?;
    let rounds = senders.iter().map(|s| s.messages).max().unwrap_or(0);
    let mut elapsed_ms = 0u64;
    let mut attempted = 0u64;
    for round in 0..rounds {
        for sender in senders.iter_mut() {
            if sender.stopped || round >= sender.messages {
                continue;
            }
            if round > 0 && sender.delay_ms > 0 {
                elapsed_ms += sender.delay_ms;
                clock.set(SIM_EPOCH + elapsed_ms / 1000);
            }
            let body = payload::generate(&mut sender.rng, sender.payload_octets, sender.keyword.as_deref());
            if sender.log.kind == SenderKind::Legit && scorer.classify(&dummy_envelope(), &body).score > 0.0 {
                return Err(ScenarioError::Sender {
                    sender: sender.profile.clone(),
                    message: "generated legit payload matches a classifier keyword".into(),
                }
                .into());
            }
            let from = sender.envelope_sender(round);
            let attempt = attempt(server.smtp_addr(), sender.log.source, &from, &domain, &body, reply_timeout)
                .await
                .map_err(|(error, transcript)| SimError::Protocol {
                    sender: sender.log.name.clone(),
                    error,
                    excerpt: excerpt(&transcript),
                })?;
            attempted += 1;
            if attempt.outcome.is_rejection() && !sender.retry_on_reject {
                sender.stopped = true;
            }
            sender.log.attempts.push(attempt);
        }
    }

    let metrics = collect_metrics(server.admin_addr()).await;
    let _ = server.shutdown().await;
    let metrics = metrics?;
    Ok(RunReport {
        abl_enabled,
        attempted,
        metrics,
        wall_time: started.elapsed(),
        senders: senders.into_iter().map(|s| s.log).collect(),
    })
}

fn dummy_envelope() -> abl_core::smtp::Envelope {
    abl_core::smtp::Envelope::new(IpAddr::from([127, 0, 0, 1]))
}

async fn collect_metrics(admin: SocketAddr) -> Result<MetricsSnapshot, SimError> {
    let mut client = AdminClient::connect(admin).await.map_err(|e| SimError::Admin(e.to_string()))?;
    let response = client
        .request(&AdminCommand::Stats)
        .await
        .map_err(|e| SimError::Admin(e.to_string()))?;
    if let Some(err) = response.error {
        return Err(SimError::Admin(err));
    }
    MetricsSnapshot::from_lines(response.lines.iter().map(String::as_str)).map_err(SimError::Admin)
}

fn excerpt(transcript: &Transcript) -> String {
    let text = transcript.render();
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(12)..].join("\n")
}

type AttemptError = (String, Transcript);

/// One connection carrying at most one message.
async fn attempt(
    server: SocketAddr,
    source: IpAddr,
    from: &str,
    domain: &str,
    body: &[u8],
    timeout: Duration,
) -> Result<Attempt, AttemptError> {
    let mut client = SmtpClient::connect(source, server, timeout)
        .await
        .map_err(|e| (e.to_string(), Transcript::default()))?;

    macro_rules! step {
        ($call:expr, $what:literal) => {
            match $call.await {
                Ok(Some(reply)) => reply,
                Ok(None) => return Err((format!("server closed the connection after {}", $what), client.into_transcript())),
                Err(e) => return Err((format!("{} failed: {e}", $what), client.into_transcript())),
            }
        };
    }
    let done = |client: SmtpClient, outcome: Outcome, payload_octets: u64| async move {
        match client.quit().await {
            Ok(transcript) => Ok(Attempt {
                outcome,
                payload_octets,
                transcript,
            }),
            Err(e) => Err((format!("QUIT failed: {e}"), Transcript::default())),
        }
    };
    let unexpected = |what: &str, reply: &Reply, client: SmtpClient| -> AttemptError {
        (format!("unexpected reply to {what}: {}", reply.to_string().trim_end()), client.into_transcript())
    };

    let greeting = step!(client.reply(), "connect");
    match greeting.code() {
        220 => {}
        421 => {
            return Ok(Attempt {
                outcome: Outcome::Refused,
                payload_octets: 0,
                transcript: client.into_transcript(),
            })
        }
        _ if is_policy_block(&greeting) => return done(client, Outcome::BlockedConnect, 0).await,
        _ => return Err(unexpected("connect", &greeting, client)),
    }
    let ehlo = step!(client.command(&format!("EHLO {}", helo_name(from))), "EHLO");
    if ehlo.code() != 250 {
        return Err(unexpected("EHLO", &ehlo, client));
    }
    let mail = step!(client.command(&format!("MAIL FROM:<{from}>")), "MAIL FROM");
    match mail.code() {
        250 => {}
        _ if is_policy_block(&mail) => return done(client, Outcome::BlockedMail, 0).await,
        _ => return Err(unexpected("MAIL FROM", &mail, client)),
    }
    let rcpt = step!(client.command(&format!("RCPT TO:<postmaster@{domain}>")), "RCPT TO");
    if rcpt.code() != 250 {
        return Err(unexpected("RCPT TO", &rcpt, client));
    }
    let data = step!(client.command("DATA"), "DATA");
    if data.code() != 354 {
        return Err(unexpected("DATA", &data, client));
    }
    let fin = step!(client.data(body), "end of data");
    let outcome = match fin.code() {
        250 => Outcome::Accepted,
        554 => Outcome::RejectedAfterData,
        _ => return Err(unexpected("end of data", &fin, client)),
    };
    done(client, outcome, body.len() as u64).await
}

fn is_policy_block(reply: &Reply) -> bool {
    reply.enhanced().is_some_and(|s| s.subject == 7 && s.detail == 1) && matches!(reply.code(), 451 | 554)
}

fn helo_name(from: &str) -> &str {
    from.rsplit_once('@').map(|(_, d)| d).unwrap_or("client.sim.test")
}

