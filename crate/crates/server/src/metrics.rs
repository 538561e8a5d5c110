use std::sync::atomic::{AtomicU64, Ordering};

macro_rules! counters {
    ($($name:ident),* $(,)?) => {
        /// Monotone server counters, updated with atomic increments.
        #[derive(Debug, Default)]
        pub struct Metrics {
            $(pub $name: AtomicU64,)*
        }

        /// A point-in-time copy of [`Metrics`].
        #[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
        pub struct MetricsSnapshot {
            $(pub $name: u64,)*
        }

        impl Metrics {
            pub fn snapshot(&self) -> MetricsSnapshot {
                MetricsSnapshot {
                    $($name: self.$name.load(Ordering::SeqCst),)*
                }
            }
        }

        impl MetricsSnapshot {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($name)),*];

            /// `(name, value)` pairs in a fixed order.
            pub fn pairs(&self) -> Vec<(&'static str, u64)> {
                vec![$((stringify!($name), self.$name)),*]
            }

            pub fn get(&self, name: &str) -> Option<u64> {
                match name {
                    $(stringify!($name) => Some(self.$name),)*
                    _ => None,
                }
            }

            pub fn set(&mut self, name: &str, value: u64) -> bool {
                match name {
                    $(stringify!($name) => { self.$name = value; true })*
                    _ => false,
                }
            }
        }
    };
}

counters!(
    connections_total,
    sessions_blocked_at_connect,
    sessions_blocked_at_mail,
    sessions_refused_busy,
    messages_accepted,
    messages_classified_spam,
    bytes_in,
    bytes_out,
    data_octets_received,
    blocked_attempts_refreshed,
    snapshots_written,
);

pub(crate) fn bump(counter: &AtomicU64, by: u64) {
    counter.fetch_add(by, Ordering::SeqCst);
}

impl MetricsSnapshot {
    /// `key=value` lines as served by the admin `STATS` command.
    pub fn to_lines(&self) -> Vec<String> {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    /// Parses `STATS` output back; unknown keys are ignored.
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self, String> {
        let mut snap = MetricsSnapshot::default();
        for line in lines {
            let (k, v) = line.split_once('=').ok_or_else(|| format!("malformed stats line {line:?}"))?;
            let v: u64 = v.parse().map_err(|_| format!("malformed stats value {line:?}"))?;
            snap.set(k, v);
        }
        Ok(snap)
    }

    /// Counter invariants that must hold at any instant.
    pub fn check_invariants(&self) -> Result<(), String> {
        let blocked = self.sessions_blocked_at_connect + self.sessions_blocked_at_mail;
        if blocked > self.connections_total {
            return Err(format!(
                "blocked sessions ({blocked}) exceed connections ({})",
                self.connections_total
            ));
        }
        if self.sessions_refused_busy > self.connections_total {
            return Err("refused sessions exceed connections".into());
        }
        if self.data_octets_received > self.bytes_in {
            return Err("data octets exceed bytes received".into());
        }
        Ok(())
    }

    /// True when no counter is below its value in `earlier`.
    pub fn dominates(&self, earlier: &MetricsSnapshot) -> bool {
        self.pairs().iter().zip(earlier.pairs()).all(|((_, a), (_, b))| *a >= b)
    }
}
