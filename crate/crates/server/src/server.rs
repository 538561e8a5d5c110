use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use abl_core::classifier::Classifier;
use abl_core::smtp::SessionLimits;
use abl_core::store::{AblStore, SharedStore, SnapshotError};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::Semaphore;
use tokio::task::{JoinHandle, JoinSet};
use tokio_util::sync::CancellationToken;

use crate::admin::{format_entry, AdminCommand, AdminResponse, MAX_ADMIN_LINE};
use crate::clock::{Clock, SystemClock};
use crate::config::{ConfigError, ServerConfig};
use crate::connection;
use crate::metrics::{bump, Metrics, MetricsSnapshot};

/// How long in-flight sessions may run after a shutdown request.
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("snapshot {path}: {source}")]
    Snapshot { path: PathBuf, source: SnapshotError },
    #[error("snapshot {path}: {source}")]
    SnapshotIo { path: PathBuf, source: io::Error },
}

/// State shared by every task of a running server.
pub(crate) struct Shared {
    pub config: ServerConfig,
    pub limits: SessionLimits,
    pub store: Arc<SharedStore>,
    pub metrics: Metrics,
    pub classifier: Classifier,
    pub clock: Arc<dyn Clock>,
}

pub struct ServerOptions {
    pub clock: Arc<dyn Clock>,
    /// Record every store mutation for later replay.
    pub journal: bool,
    pub shutdown_grace: Duration,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            clock: Arc::new(SystemClock),
            journal: false,
            shutdown_grace: SHUTDOWN_GRACE,
        }
    }
}

/// A running server.
pub struct ServerHandle {
    smtp_addr: SocketAddr,
    admin_addr: SocketAddr,
    shared: Arc<Shared>,
    cancel: CancellationToken,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn smtp_addr(&self) -> SocketAddr {
        self.smtp_addr
    }

    pub fn admin_addr(&self) -> SocketAddr {
        self.admin_addr
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        self.shared.metrics.snapshot()
    }

    pub fn store(&self) -> &Arc<SharedStore> {
        &self.shared.store
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    /// Stops accepting, lets sessions finish within the grace period, then
    /// writes a final snapshot.
    pub async fn shutdown(self) -> Result<(), ServeError> {
        self.cancel.cancel();
        for task in self.tasks {
            let _ = task.await;
        }
        if let Some(path) = &self.shared.config.snapshot_path {
            write_snapshot(&self.shared, path)
                .await
                .map_err(|source| ServeError::SnapshotIo {
                    path: path.clone(),
                    source,
                })?;
        }
        Ok(())
    }

    /// Drops everything at once, without a final snapshot, as a crash would.
    pub async fn abort(self) {
        for task in &self.tasks {
            task.abort();
        }
        for task in self.tasks {
            let _ = task.await;
        }
    }
}

/// Binds both listeners and starts serving.
pub async fn start(config: ServerConfig) -> Result<ServerHandle, ServeError> {
    start_with(config, ServerOptions::default()).await
}

pub async fn start_with(config: ServerConfig, options: ServerOptions) -> Result<ServerHandle, ServeError> {
    config.validate()?;
    let store = AblStore::new(config.ttl_policy()?, config.max_entries);
    let store = if options.journal {
        SharedStore::with_journal(store)
    } else {
        SharedStore::new(store)
    };
    if let Some(path) = &config.snapshot_path {
        match tokio::fs::read(path).await {
            Ok(data) => {
                let n = store
                    .load(&data, options.clock.now())
                    .map_err(|source| ServeError::Snapshot {
                        path: path.clone(),
                        source,
                    })?;
                tracing::info!(path = %path.display(), entries = n, "snapshot loaded");
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(source) => {
                return Err(ServeError::SnapshotIo {
                    path: path.clone(),
                    source,
                })
            }
        }
    }

    let bind = |addr: SocketAddr| async move { TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source }) };
    let smtp = bind(config.listen_address).await?;
    let admin = bind(config.admin_listen_address).await?;
    let local = |l: &TcpListener, addr| l.local_addr().map_err(|source| ServeError::Bind { addr, source });
    let smtp_addr = local(&smtp, config.listen_address)?;
    let admin_addr = local(&admin, config.admin_listen_address)?;

    let shared = Arc::new(Shared {
        limits: config.session_limits(),
        classifier: config.classifier()?,
        store: Arc::new(store),
        metrics: Metrics::default(),
        clock: options.clock,
        config,
    });
    let cancel = CancellationToken::new();
    let mut tasks = vec![
        tokio::spawn(accept_loop(shared.clone(), smtp, cancel.clone(), options.shutdown_grace)),
        tokio::spawn(admin_loop(shared.clone(), admin, cancel.clone())),
    ];
    if let Some(path) = shared.config.snapshot_path.clone() {
        tasks.push(tokio::spawn(snapshot_loop(shared.clone(), path, cancel.clone())));
    }
    tracing::info!(%smtp_addr, %admin_addr, abl = shared.config.abl_enabled, policy = %shared.config.policy, "listening");
    Ok(ServerHandle {
        smtp_addr,
        admin_addr,
        shared,
        cancel,
        tasks,
    })
}

/// Runs until SIGINT or SIGTERM, then shuts down gracefully.
pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let handle = start(config).await?;
    shutdown_signal().await;
    tracing::info!("shutdown requested");
    handle.shutdown().await
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

async fn accept_loop(shared: Arc<Shared>, listener: TcpListener, cancel: CancellationToken, grace: Duration) {
    let permits = Arc::new(Semaphore::new(shared.config.max_concurrent_sessions));
    let mut sessions = JoinSet::new();
    loop {
        tokio::select! {
            _ = cancel.cancelled() => break,
            Some(_) = sessions.join_next(), if !sessions.is_empty() => {}
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    bump(&shared.metrics.connections_total, 1);
                    let _ = stream.set_nodelay(true);
                    match permits.clone().try_acquire_owned() {
                        Ok(permit) => {
                            let shared = shared.clone();
                            sessions.spawn(async move {
                                connection::handle(shared, stream, peer).await;
                                drop(permit);
                            });
                        }
                        Err(_) => {
                            bump(&shared.metrics.sessions_refused_busy, 1);
                            sessions.spawn(connection::refuse(shared.clone(), stream, peer));
                        }
                    }
                }
                Err(err) => {
                    tracing::warn!(%err, "accept failed");
                    tokio::time::sleep(Duration::from_millis(10)).await;
                }
            },
        }
    }
    drop(listener);
    let drained = tokio::time::timeout(grace, async {
        while sessions.join_next().await.is_some() {}
    })
    .await;
    if drained.is_err() {
        tracing::warn!(remaining = sessions.len(), "aborting sessions still open after the grace period");
        sessions.shutdown().await;
    }
}

async fn admin_loop(shared: Arc<Shared>, listener: TcpListener, cancel: CancellationToken) {
    let mut clients = JoinSet::new();
    loop {
        tokio::select! {
            _ = cancel.cancelled() => break,
            Some(_) = clients.join_next(), if !clients.is_empty() => {}
            accepted = listener.accept() => match accepted {
                Ok((stream, _)) => {
                    clients.spawn(admin_session(shared.clone(), stream));
                }
                Err(err) => {
                    tracing::warn!(%err, "admin accept failed");
                    tokio::time::sleep(Duration::from_millis(10)).await;
                }
            },
        }
    }
    clients.shutdown().await;
}

async fn admin_session(shared: Arc<Shared>, stream: TcpStream) {
    let (r, mut w) = stream.into_split();
    let mut reader = BufReader::new(r);
    loop {
        let mut line = Vec::new();
        let n = match (&mut reader).take(MAX_ADMIN_LINE as u64 + 1).read_until(b'\n', &mut line).await {
            Ok(n) => n,
            Err(_) => return,
        };
        if n == 0 {
            return;
        }
        if line.last() != Some(&b'\n') {
            let msg = if line.len() > MAX_ADMIN_LINE { "line too long" } else { "unterminated line" };
            let _ = w.write_all(AdminResponse::err(msg).render().as_bytes()).await;
            return;
        }
        let (response, quit) = match AdminCommand::parse(&line) {
            Ok(AdminCommand::Quit) => (AdminResponse::ok(vec![]), true),
            Ok(cmd) => (execute(&shared, cmd).await, false),
            Err(e) => (AdminResponse::err(e.to_string()), false),
        };
        if w.write_all(response.render().as_bytes()).await.is_err() || quit {
            return;
        }
    }
}

async fn execute(shared: &Shared, cmd: AdminCommand) -> AdminResponse {
    let store = &shared.store;
    match cmd {
        AdminCommand::Stats => AdminResponse::ok(shared.metrics.snapshot().to_lines()),
        AdminCommand::BlList => AdminResponse::ok(store.entries().iter().map(format_entry).collect()),
        AdminCommand::BlAdd { identity, reason } => {
            store.record_spam(identity, &reason, shared.clock.now());
            AdminResponse::ok(vec![])
        }
        AdminCommand::BlDel { identity } => match store.remove(&identity) {
            Some(_) => AdminResponse::ok(vec![]),
            None => AdminResponse::err(format!("no entry for {identity}")),
        },
        AdminCommand::Expire => {
            let removed = store.expire(shared.clock.now());
            AdminResponse::ok(vec![format!("removed={removed}")])
        }
        AdminCommand::Snapshot => match &shared.config.snapshot_path {
            None => AdminResponse::err("no snapshot_path configured"),
            Some(path) => match write_snapshot(shared, path).await {
                Ok(octets) => AdminResponse::ok(vec![format!("octets={octets}")]),
                Err(e) => AdminResponse::err(format!("snapshot failed: {e}")),
            },
        },
        AdminCommand::Quit => AdminResponse::ok(vec![]),
    }
}

async fn snapshot_loop(shared: Arc<Shared>, path: PathBuf, cancel: CancellationToken) {
    let period = Duration::from_secs(shared.config.snapshot_interval_s);
    let mut ticker = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
    loop {
        tokio::select! {
            _ = cancel.cancelled() => return,
            _ = ticker.tick() => {
                if let Err(err) = write_snapshot(&shared, &path).await {
                    tracing::warn!(path = %path.display(), %err, "periodic snapshot failed, retrying next interval");
                }
            }
        }
    }
}

/// Writes the store next to `path` and renames it into place.
async fn write_snapshot(shared: &Shared, path: &Path) -> io::Result<usize> {
    let data = shared.store.persist();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = tokio::fs::File::create(&tmp).await?;
        file.write_all(&data).await?;
        file.sync_all().await?;
    }
    tokio::fs::rename(&tmp, path).await?;
    bump(&shared.metrics.snapshots_written, 1);
    tracing::debug!(path = %path.display(), octets = data.len(), "snapshot written");
    Ok(data.len())
}
