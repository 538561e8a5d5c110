//! The active blacklist.
//!
//! Entries are created from spam detected inside the SMTP dialogue and are
//! refreshed every time a listed sender tries again, so a persistent spammer
//! keeps its own entry alive with a growing lifetime while an idle one ages
//! out. Lookups are read-only; refreshes are explicit.

mod identity;
mod shared;
mod snapshot;
mod ttl;

use std::collections::{BTreeSet, HashMap};

pub use identity::{IdentityError, SenderIdentity};
pub use shared::{SharedStore, StoreOp};
pub use snapshot::SnapshotError;
pub use ttl::{parse_growth, TtlError, TtlPolicy};

/// Seconds since the Unix epoch.
pub type Timestamp = u64;

pub const DEFAULT_CAPACITY: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblEntry {
    pub identity: SenderIdentity,
    pub first_seen: Timestamp,
    pub last_hit: Timestamp,
    pub hit_count: u64,
    pub expiry: Timestamp,
    pub reason: String,
}

impl AblEntry {
    pub fn is_live(&self, now: Timestamp) -> bool {
        self.expiry > now
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AblVerdict {
    Clean,
    Blacklisted(AblEntry),
}

impl AblVerdict {
    pub fn is_blacklisted(&self) -> bool {
        matches!(self, AblVerdict::Blacklisted(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("no live blacklist entry for {0}")]
    NoLiveEntry(SenderIdentity),
}

#[derive(Debug, Clone)]
pub struct AblStore {
    policy: TtlPolicy,
    capacity: usize,
    entries: HashMap<SenderIdentity, AblEntry>,
    by_expiry: BTreeSet<(Timestamp, SenderIdentity)>,
}

impl Default for AblStore {
    fn default() -> Self {
        AblStore::new(TtlPolicy::default(), DEFAULT_CAPACITY)
    }
}

impl PartialEq for AblStore {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl AblStore {
    pub fn new(policy: TtlPolicy, capacity: usize) -> Self {
        AblStore {
            policy,
            capacity: capacity.max(1),
            entries: HashMap::new(),
            by_expiry: BTreeSet::new(),
        }
    }

    pub fn policy(&self) -> &TtlPolicy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, identity: &SenderIdentity) -> Option<&AblEntry> {
        self.entries.get(identity)
    }

    /// All entries ordered by identity.
    pub fn entries(&self) -> Vec<&AblEntry> {
        let mut all: Vec<&AblEntry> = self.entries.values().collect();
        all.sort_by(|a, b| a.identity.cmp(&b.identity));
        all
    }

    /// Records detected spam. A live entry is refreshed, anything else is
    /// replaced by a fresh entry with one hit.
    pub fn record_spam(&mut self, identity: SenderIdentity, reason: &str, now: Timestamp) -> AblEntry {
        let reason = sanitize_reason(reason);
        match self.entries.get(&identity) {
            Some(entry) if entry.is_live(now) => {
                let hits = entry.hit_count.saturating_add(1);
                self.refresh(&identity, hits, now)
            }
            _ => {
                let entry = AblEntry {
                    identity,
                    first_seen: now,
                    last_hit: now,
                    hit_count: 1,
                    expiry: now.saturating_add(self.policy.ttl(1)),
                    reason,
                };
                self.insert(entry.clone());
                entry
            }
        }
    }

    /// Looks up the identity and its IP-only projection. The exact match wins
    /// when both are live.
    pub fn check(&self, identity: &SenderIdentity, now: Timestamp) -> AblVerdict {
        match self.matched(identity, now) {
            Some(entry) => AblVerdict::Blacklisted(entry.clone()),
            None => AblVerdict::Clean,
        }
    }

    fn matched(&self, identity: &SenderIdentity, now: Timestamp) -> Option<&AblEntry> {
        let exact = self.entries.get(identity).filter(|e| e.is_live(now));
        if exact.is_some() || identity.is_ip_only() {
            return exact;
        }
        self.entries.get(&identity.projection()).filter(|e| e.is_live(now))
    }

    /// Counts a rejected attempt against the entry `check` would return.
    pub fn record_blocked_attempt(&mut self, identity: &SenderIdentity, now: Timestamp) -> Result<AblEntry, StoreError> {
        let (key, hits) = match self.matched(identity, now) {
            Some(entry) => (entry.identity.clone(), entry.hit_count.saturating_add(1)),
            None => return Err(StoreError::NoLiveEntry(identity.clone())),
        };
        Ok(self.refresh(&key, hits, now))
    }

    fn refresh(&mut self, key: &SenderIdentity, hits: u64, now: Timestamp) -> AblEntry {
        let ttl = self.policy.ttl(hits);
        let entry = self.entries.get_mut(key).expect("refresh of a present entry");
        // A clock stepping backwards must not break first_seen <= last_hit.
        let now = now.max(entry.last_hit);
        self.by_expiry.remove(&(entry.expiry, key.clone()));
        entry.hit_count = hits;
        entry.last_hit = now;
        entry.expiry = now.saturating_add(ttl);
        self.by_expiry.insert((entry.expiry, key.clone()));
        entry.clone()
    }

    /// Removes every entry with `expiry <= now`.
    pub fn expire(&mut self, now: Timestamp) -> usize {
        let mut removed = 0;
        while let Some((expiry, _)) = self.by_expiry.first() {
            if *expiry > now {
                break;
            }
            let (_, identity) = self.by_expiry.pop_first().expect("first exists");
            self.entries.remove(&identity);
            removed += 1;
        }
        removed
    }

    pub fn remove(&mut self, identity: &SenderIdentity) -> Option<AblEntry> {
        let entry = self.entries.remove(identity)?;
        self.by_expiry.remove(&(entry.expiry, entry.identity.clone()));
        Some(entry)
    }

    /// Inserts or replaces an entry verbatim, evicting the entry closest to
    /// expiry when the store is full.
    pub(crate) fn insert(&mut self, entry: AblEntry) {
        if let Some(old) = self.entries.get(&entry.identity) {
            self.by_expiry.remove(&(old.expiry, entry.identity.clone()));
        } else if self.entries.len() >= self.capacity {
            if let Some((_, victim)) = self.by_expiry.pop_first() {
                self.entries.remove(&victim);
            }
        }
        self.by_expiry.insert((entry.expiry, entry.identity.clone()));
        self.entries.insert(entry.identity.clone(), entry);
    }
}

fn sanitize_reason(reason: &str) -> String {
    reason.replace(['\t', '\r', '\n'], " ")
}
