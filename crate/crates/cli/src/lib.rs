//! The `abl` command line.
//!
//! Exit status is 0 on success, 1 on an `ERR` answer or a usage error and
//! 2 when the admin service cannot be reached.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use abl_server::{AdminClient, ConfigError, ServerConfig};
use abl_sim::{run_scenario, write_report, ScenarioConfig};
use clap::{Arg, ArgAction, ArgMatches, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERR: i32 = 1;
pub const EXIT_UNREACHABLE: i32 = 2;

/// The argument parser. Every configuration key is a global `--<key>`
/// flag, also spelled with hyphens.
pub fn command() -> Command {
    let mut cmd = Command::new("abl")
        .about("SMTP server with an active blacklist")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .global(true)
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("Configuration file of `key = value` lines"),
        )
        .subcommand(Command::new("serve").about("Run the SMTP and admin listeners until SIGINT or SIGTERM"))
        .subcommand(
            Command::new("bl")
                .about("Inspect or edit the blacklist of a running server")
                .subcommand_required(true)
                .subcommand(Command::new("list").about("List entries"))
                .subcommand(
                    Command::new("add")
                        .about("Add an entry")
                        .arg(Arg::new("ip").required(true))
                        .arg(Arg::new("sender").required(true).help("Envelope sender, `<>` or `-` for IP only"))
                        .arg(Arg::new("reason").required(true).num_args(1..)),
                )
                .subcommand(
                    Command::new("del")
                        .about("Remove an entry")
                        .arg(Arg::new("ip").required(true))
                        .arg(Arg::new("sender").required(true)),
                ),
        )
        .subcommand(Command::new("stats").about("Print the server counters"))
        .subcommand(
            Command::new("simulate")
                .about("Run a traffic scenario with and without the blacklist")
                .arg(Arg::new("scenario").required(true).value_parser(clap::value_parser!(PathBuf)))
                .arg(
                    Arg::new("out")
                        .long("out")
                        .short('o')
                        .value_name("CSV")
                        .value_parser(clap::value_parser!(PathBuf)),
                ),
        );
    for key in ServerConfig::KEYS {
        let hyphenated = key.replace('_', "-");
        let mut arg = Arg::new(*key)
            .long(*key)
            .global(true)
            .value_name("VALUE")
            .action(ArgAction::Set)
            .help_heading("Configuration");
        if hyphenated != *key {
            arg = arg.visible_alias(hyphenated);
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Built-in defaults, then the file given with `--config`, then flags.
pub fn resolve_config(matches: &ArgMatches) -> Result<ServerConfig, ConfigError> {
    let mut config = ServerConfig::default();
    if let Some(path) = matches.get_one::<PathBuf>("config") {
        config.apply_file(path)?;
    }
    apply_flags(&mut config, matches)?;
    Ok(config)
}

fn apply_flags(config: &mut ServerConfig, matches: &ArgMatches) -> Result<(), ConfigError> {
    for key in ServerConfig::KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            config.set(key, value)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub async fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match name {
        "simulate" => simulate(&matches, sub, out, err).await,
        _ => {
            let config = match resolve_config(&matches).and_then(|c| c.validate().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return fail(err, EXIT_ERR, &e.to_string()),
            };
            match name {
                "serve" => serve(config, err).await,
                "stats" => admin(config.admin_listen_address, "STATS".into(), out, err).await,
                "bl" => {
                    let line = match sub.subcommand().expect("subcommand required") {
                        ("list", _) => "BL LIST".to_string(),
                        ("add", a) => {
                            let reason: Vec<&str> = a.get_many::<String>("reason").expect("required").map(String::as_str).collect();
                            format!("BL ADD {} {} {}", arg(a, "ip"), arg(a, "sender"), reason.join(" "))
                        }
                        ("del", a) => format!("BL DEL {} {}", arg(a, "ip"), arg(a, "sender")),
                        _ => unreachable!("clap rejects other subcommands"),
                    };
                    admin(config.admin_listen_address, line, out, err).await
                }
                _ => unreachable!("clap rejects other subcommands"),
            }
        }
    }
}

fn arg<'a>(m: &'a ArgMatches, name: &str) -> &'a str {
    m.get_one::<String>(name).expect("required")
}

fn fail(err: &mut dyn Write, code: i32, message: &str) -> i32 {
    let _ = writeln!(err, "abl: {message}");
    code
}

async fn serve(config: ServerConfig, err: &mut dyn Write) -> i32 {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .try_init();
    match abl_server::serve(config).await {
        Ok(()) => EXIT_OK,
        Err(e) => fail(err, EXIT_ERR, &e.to_string()),
    }
}

async fn admin(addr: SocketAddr, line: String, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut client = match AdminClient::connect(addr).await {
        Ok(c) => c,
        Err(e) => return fail(err, EXIT_UNREACHABLE, &e.to_string()),
    };
    match client.request_line(&line).await {
        Ok(response) => {
            for l in &response.lines {
                let _ = writeln!(out, "{l}");
            }
            match response.error {
                None => {
                    let _ = writeln!(out, "OK");
                    EXIT_OK
                }
                Some(message) => fail(err, EXIT_ERR, &format!("ERR {message}")),
            }
        }
        Err(e) => fail(err, EXIT_UNREACHABLE, &e.to_string()),
    }
}

async fn simulate(global: &ArgMatches, sub: &ArgMatches, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let path = sub.get_one::<PathBuf>("scenario").expect("required");
    let mut scenario = match load_scenario(path) {
        Ok(s) => s,
        Err(e) => return fail(err, EXIT_ERR, &e),
    };
    if global.get_one::<PathBuf>("config").is_some() {
        return fail(err, EXIT_ERR, "simulate takes its configuration from the scenario file, not --config");
    }
    if let Err(e) = apply_flags(&mut scenario.server, global) {
        return fail(err, EXIT_ERR, &e.to_string());
    }
    let report = match run_scenario(&scenario).await {
        Ok(r) => r,
        Err(e) => return fail(err, EXIT_ERR, &e.to_string()),
    };
    let result = match sub.get_one::<PathBuf>("out") {
        Some(csv) => write_report(&report, csv).map_err(|e| format!("cannot write {}: {e}", csv.display())),
        None => out.write_all(report.to_csv().as_bytes()).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => fail(err, EXIT_ERR, &e),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ScenarioConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}
