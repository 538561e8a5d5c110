//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::panic::AssertUnwindSafe;
use std::sync::Arc;
use std::time::{Duration, Instant};

use abl_core::smtp::RejectPolicy;
use abl_core::store::{AblStore, AblVerdict, SenderIdentity, StoreOp, TtlPolicy};
use abl_server::{AdminClient, AdminCommand, ManualClock, MetricsSnapshot, ServerConfig, ServerHandle, ServerOptions};
use abl_sim::{
    run_scenario, AddressRotation, Direction, Runs, ScenarioConfig, SenderKind, SenderProfile, SimReport,
    SmtpClient, Transcript,
};
use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::runtime::Runtime;

type Verdict = Result<String, String>;
type Check = fn(&Runtime) -> Verdict;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const CRITERIA: [(&str, Check); 8] = [
    ("protocol conformance", conformance),
    ("blocked senders never reach DATA", no_data_after_block),
    ("bandwidth reduction grid", reduction_grid),
    ("ttl schedule and store lookups", ttl_properties),
    ("legitimate traffic unaffected", legit_unaffected),
    ("restart keeps live entries", restart_persistence),
    ("simulation reproducible", reproducible_simulation),
    ("concurrent sessions stay consistent", concurrency),
];

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(8)
        .enable_all()
        .build()
        .expect("runtime");
    let mut failed = 0;
    for (i, (name, check)) in CRITERIA.iter().enumerate() {
        let started = Instant::now();
        let verdict = std::panic::catch_unwind(AssertUnwindSafe(|| check(&rt))).unwrap_or_else(|panic| {
            let text = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {text}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn base_config() -> ServerConfig {
    let mut c = ServerConfig::default();
    c.listen_address = "127.0.0.1:0".parse().unwrap();
    c.admin_listen_address = "127.0.0.1:0".parse().unwrap();
    c.greeting_domain = "mx.test".into();
    c
}

async fn start(config: ServerConfig, now: u64, journal: bool) -> Result<(ServerHandle, Arc<ManualClock>), String> {
    let clock = Arc::new(ManualClock::new(now));
    let handle = abl_server::start_with(
        config,
        ServerOptions {
            clock: clock.clone(),
            journal,
            shutdown_grace: Duration::from_secs(1),
        },
    )
    .await
    .map_err(|e| format!("server start: {e}"))?;
    Ok((handle, clock))
}

fn show(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).escape_debug().to_string()
}

fn ip(a: u8, b: u8, c: u8) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(127, a, b, c))
}

fn spam_body(n: usize) -> Vec<u8> {
    let mut body = vec![b'x'; n - 2];
    body[..7].copy_from_slice(b"lottery");
    body.extend_from_slice(b"\r\n");
    body
}

fn clean_body(n: usize) -> Vec<u8> {
    let mut body = vec![b'x'; n - 2];
    body.extend_from_slice(b"\r\n");
    body
}

// ---------------------------------------------------------------------------
// 1. Scripted dialogues, compared octet for octet.

struct Dialogue {
    name: &'static str,
    small: bool,
    steps: Vec<(Vec<u8>, Vec<u8>)>,
}

fn dialogue(name: &'static str) -> Dialogue {
    Dialogue {
        name,
        small: false,
        steps: vec![(Vec::new(), b"220 mx.test ESMTP ready\r\n".to_vec())],
    }
}

impl Dialogue {
    fn small(mut self) -> Self {
        self.small = true;
        self
    }

    fn step(mut self, send: impl AsRef<[u8]>, expect: impl AsRef<[u8]>) -> Self {
        self.steps.push((send.as_ref().to_vec(), expect.as_ref().to_vec()));
        self
    }

    fn helo(self) -> Self {
        self.step("HELO c.test\r\n", HELO)
    }

    fn envelope(self) -> Self {
        self.step("MAIL FROM:<a@c.test>\r\n", OK).step("RCPT TO:<b@mx.test>\r\n", OK)
    }

    fn quit(self) -> Self {
        self.step("QUIT\r\n", BYE)
    }
}

const HELO: &str = "250 mx.test\r\n";
const OK: &str = "250 OK\r\n";
const START: &str = "354 End data with <CR><LF>.<CR><LF>\r\n";
const ACCEPTED: &str = "250 OK message accepted\r\n";
const BYE: &str = "221 mx.test closing connection\r\n";
const SEQUENCE: &str = "503 bad sequence of commands\r\n";
const UNKNOWN: &str = "500 command not recognized\r\n";
const UNIMPLEMENTED: &str = "502 command not implemented\r\n";
const SYNTAX: &str = "501 syntax error in parameters or arguments\r\n";
const TOO_LONG: &str = "500 line too long\r\n";
const BARE_LF: &str = "500 command lines must end with CRLF\r\n";
const TOO_BIG: &str = "552 5.3.4 message size exceeds fixed limit\r\n";
const TOO_MANY: &str = "452 too many recipients\r\n";

fn ehlo(size: u64) -> String {
    format!("250-mx.test greets c.test\r\n250-PIPELINING\r\n250 SIZE {size}\r\n")
}

fn dialogues() -> Vec<Dialogue> {
    let big = ehlo(10_485_760);
    let mut many = dialogue("recipient_limit").helo().step("MAIL FROM:<a@c.test>\r\n", OK);
    for i in 0..100 {
        many = many.step(format!("RCPT TO:<r{i}@mx.test>\r\n"), OK);
    }
    let many = many
        .step("RCPT TO:<r100@mx.test>\r\n", TOO_MANY)
        .step("DATA\r\n", START)
        .step("x\r\n.\r\n", ACCEPTED)
        .quit();
    vec![
        dialogue("ehlo_transaction")
            .step("EHLO c.test\r\n", &big)
            .envelope()
            .step("DATA\r\n", START)
            .step("hello\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("helo_transaction")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step("hello\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("null_reverse_path")
            .helo()
            .step("MAIL FROM:<>\r\n", OK)
            .step("RCPT TO:<b@mx.test>\r\n", OK)
            .step("DATA\r\n", START)
            .step("bounce\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("data_before_mail").helo().step("DATA\r\n", SEQUENCE).quit(),
        dialogue("rcpt_before_mail").helo().step("RCPT TO:<b@mx.test>\r\n", SEQUENCE).quit(),
        dialogue("mail_before_helo").step("MAIL FROM:<a@c.test>\r\n", SEQUENCE).quit(),
        dialogue("data_without_recipients")
            .helo()
            .step("MAIL FROM:<a@c.test>\r\n", OK)
            .step("DATA\r\n", SEQUENCE)
            .quit(),
        dialogue("rset_discards_transaction")
            .helo()
            .envelope()
            .step("RSET\r\n", OK)
            .step("DATA\r\n", SEQUENCE)
            .quit(),
        dialogue("rset_then_new_transaction")
            .helo()
            .envelope()
            .step("RSET\r\n", OK)
            .envelope()
            .step("DATA\r\n", START)
            .step("again\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("two_messages_one_session")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step("one\r\n.\r\n", ACCEPTED)
            .envelope()
            .step("DATA\r\n", START)
            .step("two\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("nested_mail")
            .helo()
            .step("MAIL FROM:<a@c.test>\r\n", OK)
            .step("MAIL FROM:<a@c.test>\r\n", SEQUENCE)
            .quit(),
        dialogue("unknown_verb").step("FROB x\r\n", UNKNOWN).quit(),
        dialogue("vrfy_not_implemented").helo().step("VRFY bob\r\n", UNIMPLEMENTED).quit(),
        dialogue("unbracketed_reverse_path").helo().step("MAIL FROM:a@c.test\r\n", SYNTAX).quit(),
        dialogue("unknown_mail_parameter")
            .helo()
            .step("MAIL FROM:<a@c.test> FROB=1\r\n", SYNTAX)
            .quit(),
        dialogue("source_route_refused")
            .helo()
            .step("MAIL FROM:<@relay.test:a@c.test>\r\n", SYNTAX)
            .quit(),
        dialogue("null_forward_path_refused")
            .helo()
            .step("MAIL FROM:<a@c.test>\r\n", OK)
            .step("RCPT TO:<>\r\n", SYNTAX)
            .quit(),
        dialogue("bare_postmaster_recipient")
            .helo()
            .step("MAIL FROM:<a@c.test>\r\n", OK)
            .step("RCPT TO:<postmaster>\r\n", OK)
            .quit(),
        dialogue("oversize_line_then_recovery")
            .step(format!("NOOP {}\r\n", "x".repeat(600)), TOO_LONG)
            .step("NOOP\r\n", OK)
            .quit(),
        dialogue("bare_lf_command").step("NOOP\n", BARE_LF).quit(),
        dialogue("oversize_message")
            .small()
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step(format!("{}\r\n.\r\n", "y".repeat(98)), TOO_BIG)
            .envelope()
            .quit(),
        dialogue("declared_size_over_limit")
            .small()
            .helo()
            .step("MAIL FROM:<a@c.test> SIZE=65\r\n", TOO_BIG)
            .step("MAIL FROM:<a@c.test> SIZE=64\r\n", OK)
            .quit(),
        dialogue("ehlo_advertises_limit").small().step("EHLO c.test\r\n", ehlo(64)).quit(),
        dialogue("pipelined_envelope")
            .step(
                "EHLO c.test\r\nMAIL FROM:<a@c.test>\r\nRCPT TO:<b@mx.test>\r\nDATA\r\n",
                format!("{big}{OK}{OK}{START}"),
            )
            .step("piped\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("pipelined_through_quit").step(
            "HELO c.test\r\nMAIL FROM:<a@c.test>\r\nRCPT TO:<b@mx.test>\r\nDATA\r\nbody\r\n.\r\nQUIT\r\n",
            format!("{HELO}{OK}{OK}{START}{ACCEPTED}{BYE}"),
        ),
        dialogue("dot_stuffed_lines")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step("..hidden\r\n...\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("dot_space_is_not_terminator")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step("x\r\n. \r\n", "")
            .step(".\r\n", ACCEPTED)
            .quit(),
        dialogue("terminator_split_across_writes")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step("abc\r\n.", "")
            .step("\r", "")
            .step("\n", ACCEPTED)
            .quit(),
        dialogue("empty_body")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step(".\r\n", ACCEPTED)
            .quit(),
        dialogue("stray_cr_and_lf_in_body")
            .helo()
            .envelope()
            .step("DATA\r\n", START)
            .step("a\rb\nc\n.\n\r\n.\r\n", ACCEPTED)
            .quit(),
        dialogue("noop_in_every_phase")
            .step("NOOP\r\n", OK)
            .helo()
            .step("NOOP\r\n", OK)
            .step("MAIL FROM:<a@c.test>\r\n", OK)
            .step("NOOP\r\n", OK)
            .step("RCPT TO:<b@mx.test>\r\n", OK)
            .step("NOOP\r\n", OK)
            .quit(),
        dialogue("helo_resets_transaction")
            .helo()
            .step("MAIL FROM:<a@c.test>\r\n", OK)
            .helo()
            .step("RCPT TO:<b@mx.test>\r\n", SEQUENCE)
            .quit(),
        many,
        dialogue("lowercase_verbs")
            .step("helo c.test\r\n", HELO)
            .step("mail from:<a@c.test>\r\n", OK)
            .step("rcpt to:<b@mx.test>\r\n", OK)
            .step("data\r\n", START)
            .step("lower\r\n.\r\n", ACCEPTED)
            .step("quit\r\n", BYE),
        dialogue("quit_right_away").quit(),
        dialogue("rset_before_helo").step("RSET\r\n", OK).step("DATA\r\n", SEQUENCE).quit(),
    ]
}

async fn play(addr: SocketAddr, d: &Dialogue) -> Result<(), String> {
    let mut stream = TcpStream::connect(addr).await.map_err(|e| format!("{}: connect: {e}", d.name))?;
    stream.set_nodelay(true).ok();
    for (i, (send, expect)) in d.steps.iter().enumerate() {
        if !send.is_empty() {
            stream.write_all(send).await.map_err(|e| format!("{}: write: {e}", d.name))?;
        }
        let mut got = vec![0u8; expect.len()];
        let read = tokio::time::timeout(Duration::from_secs(3), stream.read_exact(&mut got)).await;
        if !matches!(read, Ok(Ok(_))) || got != *expect {
            return Err(format!(
                "{} step {i}: sent \"{}\", expected \"{}\", got \"{}\"",
                d.name,
                show(send),
                show(expect),
                show(&got)
            ));
        }
    }
    let mut rest = Vec::new();
    match tokio::time::timeout(Duration::from_secs(3), stream.read_to_end(&mut rest)).await {
        Ok(Ok(_)) if rest.is_empty() => Ok(()),
        Ok(_) => Err(format!("{}: trailing octets \"{}\" before close", d.name, show(&rest))),
        Err(_) => Err(format!("{}: server did not close", d.name)),
    }
}

fn conformance(rt: &Runtime) -> Verdict {
    rt.block_on(async {
        let started = Instant::now();
        let (normal, _) = start(base_config(), 1_000_000, false).await?;
        let mut small_config = base_config();
        small_config.max_message_octets = 64;
        let (small, _) = start(small_config, 1_000_000, false).await?;
        let all = dialogues();
        let mut failures = Vec::new();
        for d in &all {
            let addr = if d.small { small.smtp_addr() } else { normal.smtp_addr() };
            if let Err(e) = play(addr, d).await {
                failures.push(e);
            }
        }
        let elapsed = started.elapsed();
        normal.abort().await;
        small.abort().await;
        ensure!(failures.is_empty(), "{} of {} dialogues differ: {}", failures.len(), all.len(), failures.join("; "));
        ensure!(all.len() >= 25, "only {} dialogues", all.len());
        ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}, limit 5 s");
        Ok(format!("{} dialogues bit-exact in {:.2} s", all.len(), elapsed.as_secs_f64()))
    })
}

// ---------------------------------------------------------------------------
// 2. Blocked at either checkpoint, under each policy: no DATA, ever.

#[derive(Debug, Clone, Copy, PartialEq)]
enum Checkpoint {
    Connect,
    Mail,
}

fn is_block(reply: &abl_core::smtp::Reply) -> bool {
    matches!(reply.code(), 451 | 554) && reply.enhanced().is_some_and(|s| s.subject == 7 && s.detail == 1)
}

struct Blocked {
    transcript: Transcript,
    block_latency: Duration,
}

/// Tries to deliver one message and gives up at the first block reply.
async fn try_deliver(server: SocketAddr, source: IpAddr, from: &str, body: &[u8]) -> Result<Blocked, String> {
    let mut client = SmtpClient::connect(source, server, Duration::from_secs(10))
        .await
        .map_err(|e| e.to_string())?;
    let t = Instant::now();
    let greeting = client.reply().await.map_err(|e| e.to_string())?.ok_or("closed before greeting")?;
    let mut latency = t.elapsed();
    let mut blocked = is_block(&greeting);
    if !blocked {
        client.command("EHLO c.test").await.map_err(|e| e.to_string())?;
        let t = Instant::now();
        let mail = client
            .command(&format!("MAIL FROM:<{from}>"))
            .await
            .map_err(|e| e.to_string())?
            .ok_or("closed after MAIL")?;
        latency = t.elapsed();
        blocked = is_block(&mail);
        if !blocked {
            client.command("RCPT TO:<postmaster>").await.map_err(|e| e.to_string())?;
            client.command("DATA").await.map_err(|e| e.to_string())?;
            client.data(body).await.map_err(|e| e.to_string())?;
        }
    }
    let transcript = client.quit().await.map_err(|e| e.to_string())?;
    if !blocked {
        return Err(format!("never blocked:\n{}", transcript.render()));
    }
    Ok(Blocked {
        transcript,
        block_latency: latency,
    })
}

fn server_octets(t: &Transcript) -> Vec<u8> {
    t.events
        .iter()
        .filter(|(d, _)| *d == Direction::ServerToClient)
        .flat_map(|(_, b)| b.iter().copied())
        .collect()
}

fn client_octets(t: &Transcript) -> Vec<u8> {
    t.events
        .iter()
        .filter(|(d, _)| *d == Direction::ClientToServer)
        .flat_map(|(_, b)| b.iter().copied())
        .collect()
}

fn no_data_after_block(rt: &Runtime) -> Verdict {
    rt.block_on(async {
        let policies = [
            RejectPolicy::RejectEarly554,
            RejectPolicy::TempFail451,
            RejectPolicy::Tarpit(Duration::from_millis(200)),
        ];
        let source = ip(5, 0, 1);
        let from = "spam@bad.test";
        let mut cases = 0;
        for checkpoint in [Checkpoint::Connect, Checkpoint::Mail] {
            for policy in policies {
                let label = format!("{checkpoint:?}/{policy}");
                let mut config = base_config();
                config.policy = policy;
                let (server, clock) = start(config, 1_000_000, false).await?;
                let now = abl_server::Clock::now(clock.as_ref());
                let identity = match checkpoint {
                    Checkpoint::Connect => SenderIdentity::ip_only(source),
                    Checkpoint::Mail => SenderIdentity::parse(&source.to_string(), Some(from)).unwrap(),
                };
                server.store().record_spam(identity, "listed", now);

                let outcome = try_deliver(server.smtp_addr(), source, from, &spam_body(1000)).await;
                let metrics = server.metrics();
                server.abort().await;
                let run = outcome.map_err(|e| format!("{label}: {e}"))?;
                let replies = server_octets(&run.transcript);
                let sent = client_octets(&run.transcript);
                let text = String::from_utf8_lossy(&replies).into_owned();
                ensure!(!text.lines().any(|l| l.starts_with("354")), "{label}: server sent 354");
                ensure!(!String::from_utf8_lossy(&sent).contains("DATA"), "{label}: client reached DATA");
                ensure!(metrics.data_octets_received == 0, "{label}: {} DATA octets", metrics.data_octets_received);
                ensure!(metrics.messages_accepted == 0, "{label}: message accepted");
                let (at_connect, at_mail) = (metrics.sessions_blocked_at_connect, metrics.sessions_blocked_at_mail);
                let want = match checkpoint {
                    Checkpoint::Connect => (1, 0),
                    Checkpoint::Mail => (0, 1),
                };
                ensure!((at_connect, at_mail) == want, "{label}: blocked counters {at_connect}/{at_mail}");
                match policy {
                    RejectPolicy::RejectEarly554 => {
                        ensure!(
                            replies.ends_with(b"554 5.7.1 blocked by ABL\r\n"),
                            "{label}: transcript ends with \"{}\"",
                            show(&replies)
                        );
                    }
                    RejectPolicy::TempFail451 => {
                        ensure!(
                            text.contains("451 4.7.1 temporarily blocked by ABL, try again later\r\n"),
                            "{label}: no 451 4.7.1 in \"{}\"",
                            show(&replies)
                        );
                    }
                    RejectPolicy::Tarpit(delay) => {
                        ensure!(run.block_latency >= delay, "{label}: block reply after {:?}", run.block_latency);
                    }
                }
                cases += 1;
            }
        }
        Ok(format!("{cases} checkpoint/policy cases, 0 DATA octets, no 354"))
    })
}

// ---------------------------------------------------------------------------
// 3. Reduction grid.

/// DATA octets the server decodes, rebuilt from the client side of the
/// transcript after each 354.
fn data_octets_from_transcript(t: &Transcript) -> u64 {
    let mut total = 0;
    let mut in_data = false;
    for (dir, bytes) in &t.events {
        match dir {
            Direction::ServerToClient => in_data = bytes.starts_with(b"354 "),
            Direction::ClientToServer if in_data => {
                let end = bytes
                    .windows(5)
                    .position(|w| w == b"\r\n.\r\n")
                    .map(|p| p + 2)
                    .or_else(|| bytes.starts_with(b".\r\n").then_some(0))
                    .unwrap_or(bytes.len());
                for line in bytes[..end].split_inclusive(|&b| b == b'\n') {
                    let unstuffed = if line.starts_with(b".") { &line[1..] } else { line };
                    total += unstuffed.len() as u64;
                }
                in_data = false;
            }
            Direction::ClientToServer => {}
        }
    }
    total
}

fn transcript_octets(report: &SimReport, abl: bool) -> u64 {
    report
        .run(abl)
        .map(|r| {
            r.senders
                .iter()
                .flat_map(|s| &s.attempts)
                .map(|a| data_octets_from_transcript(&a.transcript))
                .sum()
        })
        .unwrap_or(0)
}

fn six_decimals(num: u64, den: u64) -> String {
    let micro = (num * 2_000_000 + den) / (2 * den);
    format!("{}.{:06}", micro / 1_000_000, micro % 1_000_000)
}

fn reduction_grid(rt: &Runtime) -> Verdict {
    rt.block_on(async {
        let started = Instant::now();
        let mut points = 0;
        for s in [1u32, 3] {
            for m in [1u32, 2, 5, 10] {
                for p in [512usize, 10_240] {
                    for rotation in [AddressRotation::Fixed, AddressRotation::PerMessage] {
                        let label = format!("s={s} m={m} p={p} {rotation}");
                        let mut scenario = ScenarioConfig::default();
                        let mut profile = SenderProfile::new("bulk", SenderKind::Spammer);
                        profile.count = s;
                        profile.messages = m;
                        profile.payload_octets = p;
                        profile.address_rotation = rotation;
                        scenario.senders.push(profile);
                        let report = run_scenario(&scenario).await.map_err(|e| format!("{label}: {e}"))?;
                        let (on, off) = (transcript_octets(&report, true), transcript_octets(&report, false));
                        let (s64, m64, p64) = (u64::from(s), u64::from(m), p as u64);
                        ensure!(off == s64 * m64 * p64, "{label}: baseline {off} octets");
                        ensure!(on == s64 * p64, "{label}: with ABL {on} octets");
                        let server_on = report.run(true).unwrap().data_octets();
                        let server_off = report.run(false).unwrap().data_octets();
                        ensure!((server_on, server_off) == (on, off), "{label}: server counted {server_on}/{server_off}");
                        let rho = report.reduction().ok_or("missing run")?;
                        let expected = Ratio::new(off - on, off);
                        ensure!(rho == expected, "{label}: reduction {rho}, transcripts give {expected}");
                        ensure!(rho == Ratio::new(m64 - 1, m64), "{label}: reduction {rho}");
                        let line = format!("reduction,{}", six_decimals(m64 - 1, m64));
                        ensure!(report.to_csv().lines().any(|l| l == line), "{label}: CSV lacks {line}");
                        points += 1;
                    }
                }
            }
        }
        let elapsed = started.elapsed();
        ensure!(elapsed < Duration::from_secs(60), "grid took {elapsed:?}, limit 60 s");
        Ok(format!("{points} grid points exactly (m-1)/m in {:.1} s", elapsed.as_secs_f64()))
    })
}

// ---------------------------------------------------------------------------
// 4. TTL schedule and lookups against independent oracles.

fn oracle_ttl(base: u64, p: u64, q: u64, max: u64, hits: u64) -> u64 {
    let e = u32::try_from(hits - 1).unwrap();
    let value = BigUint::from(base) * BigUint::from(p).pow(e) / BigUint::from(q).pow(e);
    value.min(BigUint::from(max)).to_u64().unwrap()
}

#[derive(Debug, Clone, PartialEq)]
struct ModelEntry {
    identity: SenderIdentity,
    first_seen: u64,
    last_hit: u64,
    hit_count: u64,
    expiry: u64,
}

fn same(model: Option<&ModelEntry>, real: Option<&abl_core::store::AblEntry>) -> bool {
    match (model, real) {
        (None, None) => true,
        (Some(m), Some(r)) => {
            m.identity == r.identity
                && (m.first_seen, m.last_hit, m.hit_count, m.expiry) == (r.first_seen, r.last_hit, r.hit_count, r.expiry)
        }
        _ => false,
    }
}

fn ttl_properties(_: &Runtime) -> Verdict {
    const CASES: u32 = 1000;
    let config = ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    };

    // One identity through spam reports, blocked attempts and expiry.
    let lifecycle = (
        1u64..=5000,
        1u64..=4,
        0u64..=6,
        0u64..=200_000,
        proptest::collection::vec((0u64..=20_000, any::<bool>()), 1..40),
    );
    TestRunner::new(config.clone())
        .run(&lifecycle, |(base, q, extra, headroom, steps)| {
            let (p, max) = (q + extra, base + headroom);
            let policy = TtlPolicy::new(base, Ratio::new(p, q), max).unwrap();
            let mut store = AblStore::new(policy, 16);
            let id = SenderIdentity::ip_only(IpAddr::from([10, 0, 0, 1]));
            let mut model: Option<ModelEntry> = None;
            let mut now = 1_000_000u64;
            for (gap, spam) in steps {
                now += gap;
                let live = model.as_ref().is_some_and(|m| m.expiry > now);
                prop_assert_eq!(store.check(&id, now).is_blacklisted(), live);
                if live {
                    let m = model.as_mut().unwrap();
                    let before = m.expiry;
                    let previous_ttl = oracle_ttl(base, p, q, max, m.hit_count);
                    m.hit_count += 1;
                    m.last_hit = now;
                    let ttl = oracle_ttl(base, p, q, max, m.hit_count);
                    m.expiry = now + ttl;
                    if spam {
                        store.record_spam(id.clone(), "r", now);
                    } else {
                        prop_assert!(store.record_blocked_attempt(&id, now).is_ok());
                    }
                    prop_assert!(m.expiry >= before);
                    if gap > 0 || ttl > previous_ttl {
                        prop_assert!(m.expiry > before, "expiry did not grow");
                    }
                } else if spam {
                    store.record_spam(id.clone(), "r", now);
                    model = Some(ModelEntry {
                        identity: id.clone(),
                        first_seen: now,
                        last_hit: now,
                        hit_count: 1,
                        expiry: now + base.min(max),
                    });
                } else {
                    prop_assert!(store.record_blocked_attempt(&id, now).is_err());
                }
                prop_assert!(same(model.as_ref(), store.get(&id)), "{:?} vs {:?}", model, store.get(&id));
            }
            Ok(())
        })
        .map_err(|e| format!("ttl lifecycle: {e}"))?;

    // Many identities, compared with a linear scan after every operation.
    let ops = proptest::collection::vec((0u64..=40, 0u8..4, 0u8..25, proptest::option::of(0u8..3)), 1..120);
    TestRunner::new(config)
        .run(&(1u64..=60, 1u64..=3, ops), |(base, growth, ops)| {
            let max = base * 16;
            let policy = TtlPolicy::new(base, Ratio::from_integer(growth), max).unwrap();
            let mut store = AblStore::new(policy, 1000);
            let mut model: Vec<ModelEntry> = Vec::new();
            let mut now = 5_000u64;
            for (gap, op, host, sender) in ops {
                now += gap;
                let ip = IpAddr::from([10, 1, 0, host]);
                let id = match sender {
                    Some(s) => SenderIdentity::parse(&ip.to_string(), Some(&format!("s{s}@x.test"))).unwrap(),
                    None => SenderIdentity::ip_only(ip),
                };
                let matched = |model: &Vec<ModelEntry>| -> Option<usize> {
                    let live = |want: &SenderIdentity| model.iter().position(|e| e.identity == *want && e.expiry > now);
                    live(&id).or_else(|| if id.is_ip_only() { None } else { live(&SenderIdentity::ip_only(ip)) })
                };
                match op {
                    0 => {
                        store.record_spam(id.clone(), "r", now);
                        match model.iter().position(|e| e.identity == id) {
                            Some(i) if model[i].expiry > now => {
                                let e = &mut model[i];
                                e.hit_count += 1;
                                e.last_hit = now;
                                e.expiry = now + oracle_ttl(base, growth, 1, max, e.hit_count);
                            }
                            found => {
                                if let Some(i) = found {
                                    model.remove(i);
                                }
                                model.push(ModelEntry {
                                    identity: id.clone(),
                                    first_seen: now,
                                    last_hit: now,
                                    hit_count: 1,
                                    expiry: now + base,
                                });
                            }
                        }
                    }
                    1 => {
                        let real = store.record_blocked_attempt(&id, now);
                        match matched(&model) {
                            Some(i) => {
                                let e = &mut model[i];
                                e.hit_count += 1;
                                e.last_hit = now;
                                e.expiry = now + oracle_ttl(base, growth, 1, max, e.hit_count);
                                prop_assert!(same(Some(e), real.as_ref().ok()));
                            }
                            None => prop_assert!(real.is_err()),
                        }
                    }
                    2 => {
                        let real = match store.check(&id, now) {
                            AblVerdict::Blacklisted(e) => Some(e),
                            AblVerdict::Clean => None,
                        };
                        prop_assert!(same(matched(&model).map(|i| &model[i]), real.as_ref()));
                    }
                    _ => {
                        let before = model.len();
                        model.retain(|e| e.expiry > now);
                        prop_assert_eq!(store.expire(now), before - model.len());
                    }
                }
                prop_assert!(model.len() <= 100);
                prop_assert_eq!(store.len(), model.len());
            }
            let mut sorted = model.clone();
            sorted.sort_by(|a, b| a.identity.cmp(&b.identity));
            let real = store.entries();
            prop_assert_eq!(real.len(), sorted.len());
            for (m, r) in sorted.iter().zip(real) {
                prop_assert!(same(Some(m), Some(r)));
            }
            Ok(())
        })
        .map_err(|e| format!("store lookups: {e}"))?;
    Ok(format!("2 properties x {CASES} cases, BigUint and linear-scan oracles"))
}

// ---------------------------------------------------------------------------
// 5. Legit-only traffic is the same with and without the blacklist.

fn legit_unaffected(rt: &Runtime) -> Verdict {
    rt.block_on(async {
        let cases = [
            (1, 1, 100, RejectPolicy::RejectEarly554),
            (3, 4, 700, RejectPolicy::TempFail451),
            (5, 3, 4096, RejectPolicy::Tarpit(Duration::from_millis(50))),
            (2, 6, 2, RejectPolicy::RejectEarly554),
        ];
        let mut messages = 0;
        for (i, (count, m, p, policy)) in cases.into_iter().enumerate() {
            let mut scenario = ScenarioConfig::default();
            scenario.rng_seed = 1000 + i as u64;
            scenario.runs = Runs::Both;
            scenario.server.policy = policy;
            let mut profile = SenderProfile::new("office", SenderKind::Legit);
            profile.count = count;
            profile.messages = m;
            profile.payload_octets = p;
            scenario.senders.push(profile);
            let report = run_scenario(&scenario).await.map_err(|e| format!("case {i}: {e}"))?;
            let (on, off) = (report.run(true).unwrap(), report.run(false).unwrap());
            ensure!(on.senders == off.senders, "case {i}: transcripts differ between runs");
            let expected = (count * m) as usize;
            ensure!(
                on.accepted_by(SenderKind::Legit) == expected && off.accepted_by(SenderKind::Legit) == expected,
                "case {i}: accepted {} with ABL, {} without, expected {expected}",
                on.accepted_by(SenderKind::Legit),
                off.accepted_by(SenderKind::Legit)
            );
            ensure!(
                on.metrics.messages_accepted == off.metrics.messages_accepted,
                "case {i}: server accepted counts differ"
            );
            ensure!(report.reduction() == Some(Ratio::from_integer(0)), "case {i}: nonzero reduction");
            messages += expected;
        }
        Ok(format!("{} scenarios, {messages} messages identical on and off", cases.len()))
    })
}

// ---------------------------------------------------------------------------
// 6. Kill mid-run, restart later: live entries survive, expired ones do not.

async fn greeting_from(server: SocketAddr, source: IpAddr) -> Result<String, String> {
    let mut client = SmtpClient::connect(source, server, Duration::from_secs(5))
        .await
        .map_err(|e| e.to_string())?;
    let reply = client.reply().await.map_err(|e| e.to_string())?.ok_or("closed")?;
    let _ = client.quit().await;
    Ok(reply.to_string())
}

fn restart_persistence(rt: &Runtime) -> Verdict {
    rt.block_on(async {
        const T0: u64 = 1_000_000;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("abl.snap");
        let mut config = base_config();
        config.base_ttl_s = 60;
        config.max_ttl_s = 3600;
        config.snapshot_path = Some(path.clone());
        config.snapshot_interval_s = 1;
        let (first, clock) = start(config.clone(), T0, false).await?;
        let (early, late, quiet) = (ip(6, 0, 1), ip(6, 0, 2), ip(6, 0, 3));

        let deliver = |source: IpAddr, from: &'static str| {
            let addr = first.smtp_addr();
            async move {
                let mut c = SmtpClient::connect(source, addr, Duration::from_secs(5)).await.map_err(|e| e.to_string())?;
                c.reply().await.map_err(|e| e.to_string())?;
                c.command("HELO c.test").await.map_err(|e| e.to_string())?;
                c.command(&format!("MAIL FROM:<{from}>")).await.map_err(|e| e.to_string())?;
                c.command("RCPT TO:<postmaster>").await.map_err(|e| e.to_string())?;
                c.command("DATA").await.map_err(|e| e.to_string())?;
                let fin = c.data(&spam_body(200)).await.map_err(|e| e.to_string())?.ok_or("closed")?;
                c.quit().await.map_err(|e| e.to_string())?;
                Ok::<u16, String>(fin.code())
            }
        };
        ensure!(deliver(early, "a@spam.test").await? == 250, "first spam not accepted");
        clock.advance(50);
        ensure!(deliver(late, "b@spam.test").await? == 250, "second spam not accepted");
        ensure!(first.store().len() == 4, "expected 4 learned entries, have {}", first.store().len());

        // A session still inside DATA when the process dies.
        let mut pending = SmtpClient::connect(quiet, first.smtp_addr(), Duration::from_secs(5))
            .await
            .map_err(|e| e.to_string())?;
        pending.reply().await.map_err(|e| e.to_string())?;
        for cmd in ["HELO c.test", "MAIL FROM:<c@c.test>", "RCPT TO:<postmaster>", "DATA"] {
            pending.command(cmd).await.map_err(|e| e.to_string())?;
        }
        pending.send(b"partial line\r\nand more").await.map_err(|e| e.to_string())?;

        let expected = first.store().persist();
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            if std::fs::read(&path).ok().as_deref() == Some(&expected[..]) {
                break;
            }
            ensure!(Instant::now() < deadline, "periodic snapshot never matched the store");
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        first.abort().await;
        drop(pending);

        let on_disk = std::fs::read(&path).map_err(|e| e.to_string())?;
        ensure!(on_disk == expected, "snapshot changed after the kill");
        let policy = config.ttl_policy().map_err(|e| e.to_string())?;
        let reloaded = AblStore::load(&on_disk, T0 + 50, policy, 1000).map_err(|e| e.to_string())?;
        ensure!(reloaded.persist() == on_disk, "snapshot does not round-trip byte for byte");

        // Early entries expire at T0+60, late ones at T0+110.
        let (second, _) = start(config, T0 + 80, false).await?;
        let survivors: Vec<u8> = String::from_utf8_lossy(&on_disk)
            .split_inclusive('\n')
            .filter(|l| !l.starts_with(&format!("{early}\t")))
            .collect::<String>()
            .into_bytes();
        let restored = second.store().persist();
        let early_greeting = greeting_from(second.smtp_addr(), early).await;
        let late_greeting = greeting_from(second.smtp_addr(), late).await;
        second.abort().await;
        ensure!(restored == survivors, "restored store \"{}\"", show(&restored));
        let early_greeting = early_greeting?;
        let late_greeting = late_greeting?;
        ensure!(early_greeting.starts_with("220 "), "expired sender greeted with {early_greeting:?}");
        ensure!(late_greeting.starts_with("554 5.7.1 "), "live sender greeted with {late_greeting:?}");
        Ok(format!(
            "{} octet snapshot round-trips; 2 live entries kept, 2 expired dropped",
            on_disk.len()
        ))
    })
}

// ---------------------------------------------------------------------------
// 7. The CLI produces the same CSV twice.

const REPRO_SCENARIO: &str = "\
rng_seed = 4242
runs = both
policy = tempfail451

[sender.bulk]
kind = spammer
count = 4
messages = 6
payload_octets = 1500
address_rotation = per-message

[sender.stubborn]
kind = spammer
count = 2
messages = 5
payload_octets = 700
retry_on_reject = false

[sender.office]
kind = legit
count = 3
messages = 4
payload_octets = 900
";

fn reproducible_simulation(_: &Runtime) -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.cfg");
    std::fs::write(&scenario, REPRO_SCENARIO).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let csv = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_abl"))
            .arg("simulate")
            .arg(&scenario)
            .arg("--out")
            .arg(&csv)
            .status()
            .map_err(|e| e.to_string())?;
        ensure!(status.success(), "abl simulate exited with {status}");
        outputs.push(std::fs::read(&csv).map_err(|e| e.to_string())?);
    }
    ensure!(outputs[0] == outputs[1], "CSV differs:\n{}\n---\n{}", show(&outputs[0]), show(&outputs[1]));
    let text = String::from_utf8_lossy(&outputs[0]);
    ensure!(text.lines().count() == 4, "unexpected CSV shape:\n{text}");
    Ok(format!("two runs, identical {} octet CSV", outputs[0].len()))
}

// ---------------------------------------------------------------------------
// 8. Many concurrent sessions against one store.

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Group {
    ListedIp,
    ListedIdentity,
    FreshSpammer,
    Legit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seen {
    Refused,
    BlockedConnect,
    BlockedMail,
    Accepted { spam: bool, octets: u64 },
}

const SESSIONS: usize = 200;
const CAP: usize = 150;

fn session_plan(i: usize) -> (Group, IpAddr, String) {
    match i {
        0..=39 => (Group::ListedIp, ip(2, 0, (i % 10 + 1) as u8), "a@spam.test".into()),
        40..=79 => (Group::ListedIdentity, ip(2, 1, (i % 10 + 1) as u8), "b@spam.test".into()),
        80..=119 => {
            let host = (i % 20 + 1) as u8;
            (Group::FreshSpammer, ip(2, 2, host), format!("c{host}@spam.test"))
        }
        _ => (Group::Legit, ip(2, 3, (i - 119) as u8), format!("user{i}@ham.test")),
    }
}

async fn concurrent_session(
    server: SocketAddr,
    i: usize,
    barrier: Arc<tokio::sync::Barrier>,
) -> Result<(Group, IpAddr, Seen), String> {
    let (group, source, from) = session_plan(i);
    let fail = |e: String| format!("session {i} ({group:?}): {e}");
    let mut c = SmtpClient::connect(source, server, Duration::from_secs(20))
        .await
        .map_err(|e| fail(e.to_string()))?;
    let greeting = c.reply().await.map_err(|e| fail(e.to_string()))?.ok_or_else(|| fail("no greeting".into()))?;
    barrier.wait().await;
    let seen = match greeting.code() {
        421 => return Ok((group, source, Seen::Refused)),
        _ if is_block(&greeting) => Seen::BlockedConnect,
        220 => {
            c.command("EHLO c.test").await.map_err(|e| fail(e.to_string()))?;
            let mail = c
                .command(&format!("MAIL FROM:<{from}>"))
                .await
                .map_err(|e| fail(e.to_string()))?
                .ok_or_else(|| fail("closed at MAIL".into()))?;
            if is_block(&mail) {
                Seen::BlockedMail
            } else {
                c.command("RCPT TO:<postmaster>").await.map_err(|e| fail(e.to_string()))?;
                c.command("DATA").await.map_err(|e| fail(e.to_string()))?;
                let spam = group != Group::Legit;
                let body = if spam { spam_body(300) } else { clean_body(300) };
                let fin = c.data(&body).await.map_err(|e| fail(e.to_string()))?.ok_or_else(|| fail("closed".into()))?;
                if fin.code() != 250 {
                    return Err(fail(format!("message refused: {fin}")));
                }
                Seen::Accepted {
                    spam,
                    octets: body.len() as u64,
                }
            }
        }
        _ => return Err(fail(format!("unexpected greeting {greeting}"))),
    };
    c.quit().await.map_err(|e| fail(e.to_string()))?;
    Ok((group, source, seen))
}

fn concurrency(rt: &Runtime) -> Verdict {
    rt.block_on(async {
        let mut config = base_config();
        config.max_concurrent_sessions = CAP;
        let (server, clock) = start(config.clone(), 1_000_000, true).await?;
        let now = abl_server::Clock::now(clock.as_ref());
        for host in 1..=10 {
            server.store().record_spam(SenderIdentity::ip_only(ip(2, 0, host)), "listed", now);
            let full = SenderIdentity::parse(&ip(2, 1, host).to_string(), Some("b@spam.test")).unwrap();
            server.store().record_spam(full, "listed", now);
        }

        let admin = server.admin_addr();
        let sampling = Arc::new(std::sync::atomic::AtomicBool::new(true));
        let sampler = {
            let sampling = sampling.clone();
            tokio::spawn(async move {
                let mut client = AdminClient::connect(admin).await.map_err(|e| e.to_string())?;
                let mut samples: Vec<MetricsSnapshot> = Vec::new();
                while sampling.load(std::sync::atomic::Ordering::Relaxed) {
                    let r = client.request(&AdminCommand::Stats).await.map_err(|e| e.to_string())?;
                    let snap = MetricsSnapshot::from_lines(r.lines.iter().map(String::as_str))?;
                    snap.check_invariants()?;
                    if let Some(prev) = samples.last() {
                        if !snap.dominates(prev) {
                            return Err(format!("counters went backwards: {prev:?} then {snap:?}"));
                        }
                    }
                    samples.push(snap);
                    tokio::time::sleep(Duration::from_millis(2)).await;
                }
                Ok::<usize, String>(samples.len())
            })
        };

        let barrier = Arc::new(tokio::sync::Barrier::new(SESSIONS));
        let mut tasks = tokio::task::JoinSet::new();
        for i in 0..SESSIONS {
            tasks.spawn(concurrent_session(server.smtp_addr(), i, barrier.clone()));
        }
        let mut results = Vec::new();
        while let Some(joined) = tasks.join_next().await {
            results.push(joined.map_err(|e| e.to_string())?);
        }
        // Let the last sessions finish their bookkeeping.
        let deadline = Instant::now() + Duration::from_secs(5);
        while server.metrics().connections_total < SESSIONS as u64 && Instant::now() < deadline {
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
        sampling.store(false, std::sync::atomic::Ordering::Relaxed);
        let samples = sampler.await.map_err(|e| e.to_string())?;

        let metrics = server.metrics();
        let journal = server.store().journal();
        let final_store = server.store().persist();
        let entries = server.store().entries();
        server.abort().await;
        let samples = samples?;
        let results: Vec<(Group, IpAddr, Seen)> = results.into_iter().collect::<Result<_, _>>()?;

        let count = |f: &dyn Fn(&Seen) -> bool| results.iter().filter(|(_, _, s)| f(s)).count() as u64;
        let refused = count(&|s| *s == Seen::Refused);
        let at_connect = count(&|s| *s == Seen::BlockedConnect);
        let at_mail = count(&|s| *s == Seen::BlockedMail);
        let accepted = count(&|s| matches!(s, Seen::Accepted { .. }));
        let accepted_spam = count(&|s| matches!(s, Seen::Accepted { spam: true, .. }));
        let octets: u64 = results
            .iter()
            .map(|(_, _, s)| match s {
                Seen::Accepted { octets, .. } => *octets,
                _ => 0,
            })
            .sum();

        ensure!(refused == (SESSIONS - CAP) as u64, "{refused} sessions refused, expected {}", SESSIONS - CAP);
        for (group, _, seen) in &results {
            let fine = match (group, seen) {
                (_, Seen::Refused) => true,
                (Group::ListedIp, s) => *s == Seen::BlockedConnect,
                (Group::ListedIdentity, s) => *s == Seen::BlockedMail,
                (Group::Legit, s) => matches!(s, Seen::Accepted { spam: false, .. }),
                (Group::FreshSpammer, _) => true,
            };
            ensure!(fine, "{group:?} session saw {seen:?}");
        }
        metrics.check_invariants()?;
        let observed = [
            ("connections_total", metrics.connections_total, SESSIONS as u64),
            ("sessions_refused_busy", metrics.sessions_refused_busy, refused),
            ("sessions_blocked_at_connect", metrics.sessions_blocked_at_connect, at_connect),
            ("sessions_blocked_at_mail", metrics.sessions_blocked_at_mail, at_mail),
            ("blocked_attempts_refreshed", metrics.blocked_attempts_refreshed, at_connect + at_mail),
            ("messages_accepted", metrics.messages_accepted, accepted),
            ("messages_classified_spam", metrics.messages_classified_spam, accepted_spam),
            ("data_octets_received", metrics.data_octets_received, octets),
        ];
        for (name, server_count, client_count) in observed {
            ensure!(server_count == client_count, "{name}: server {server_count}, clients {client_count}");
        }

        let journaled_blocks = journal.iter().filter(|op| matches!(op, StoreOp::BlockedAttempt { .. })).count() as u64;
        ensure!(journaled_blocks == at_connect + at_mail, "{journaled_blocks} journaled blocks");
        let mut replay = AblStore::new(config.ttl_policy().map_err(|e| e.to_string())?, config.max_entries);
        for op in &journal {
            replay.apply(op);
        }
        ensure!(replay.persist() == final_store, "journal replay differs from the final store");

        // Hits per source address: one per learning event plus one per block.
        let mut expected_hits: BTreeMap<IpAddr, u64> = BTreeMap::new();
        for host in 1..=10 {
            expected_hits.insert(ip(2, 0, host), 1);
            expected_hits.insert(ip(2, 1, host), 1);
        }
        for (_, source, seen) in &results {
            let add = match seen {
                Seen::BlockedConnect | Seen::BlockedMail => 1,
                Seen::Accepted { spam: true, .. } => 2,
                _ => 0,
            };
            if add > 0 {
                *expected_hits.entry(*source).or_default() += add;
            }
        }
        let mut actual_hits: BTreeMap<IpAddr, u64> = BTreeMap::new();
        for e in &entries {
            *actual_hits.entry(e.identity.ip()).or_default() += e.hit_count;
        }
        ensure!(actual_hits == expected_hits, "hit counts {actual_hits:?}, expected {expected_hits:?}");

        Ok(format!(
            "{} sessions: {refused} refused, {at_connect} blocked at connect, {at_mail} at MAIL, {accepted} accepted; {samples} monotone samples; journal replay exact",
            results.len()
        ))
    })
}
