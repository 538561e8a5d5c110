use parking_lot::RwLock;

use super::{AblEntry, AblStore, AblVerdict, SenderIdentity, SnapshotError, Timestamp};

/// A mutation applied to the store, in the order it was applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreOp {
    RecordSpam {
        identity: SenderIdentity,
        reason: String,
        now: Timestamp,
    },
    BlockedAttempt {
        identity: SenderIdentity,
        now: Timestamp,
    },
    Expire {
        now: Timestamp,
    },
    Remove {
        identity: SenderIdentity,
    },
}

impl AblStore {
    /// Applies a journaled operation. Returns true when it changed an entry.
    pub fn apply(&mut self, op: &StoreOp) -> bool {
        match op {
            StoreOp::RecordSpam { identity, reason, now } => {
                self.record_spam(identity.clone(), reason, *now);
                true
            }
            StoreOp::BlockedAttempt { identity, now } => self.record_blocked_attempt(identity, *now).is_ok(),
            StoreOp::Expire { now } => self.expire(*now) > 0,
            StoreOp::Remove { identity } => self.remove(identity).is_some(),
        }
    }
}

struct Inner {
    store: AblStore,
    journal: Option<Vec<StoreOp>>,
}

impl Inner {
    fn log(&mut self, op: StoreOp) {
        if let Some(journal) = self.journal.as_mut() {
            journal.push(op);
        }
    }
}

/// The store shared between sessions, the admin service and the snapshot
/// task. Readers never see a half-applied update: every mutation happens
/// under the write lock, together with its journal record.
pub struct SharedStore {
    inner: RwLock<Inner>,
}

impl SharedStore {
    pub fn new(store: AblStore) -> Self {
        SharedStore {
            inner: RwLock::new(Inner { store, journal: None }),
        }
    }

    /// Like `new`, but records every mutation for later replay.
    pub fn with_journal(store: AblStore) -> Self {
        SharedStore {
            inner: RwLock::new(Inner {
                store,
                journal: Some(Vec::new()),
            }),
        }
    }

    pub fn check(&self, identity: &SenderIdentity, now: Timestamp) -> AblVerdict {
        self.inner.read().store.check(identity, now)
    }

    /// Checkpoint lookup: if the identity is listed, counts the attempt
    /// against the matched entry and returns the refreshed entry. Check and
    /// refresh happen atomically.
    pub fn screen(&self, identity: &SenderIdentity, now: Timestamp) -> AblVerdict {
        if !self.check(identity, now).is_blacklisted() {
            return AblVerdict::Clean;
        }
        let mut inner = self.inner.write();
        match inner.store.record_blocked_attempt(identity, now) {
            Ok(entry) => {
                inner.log(StoreOp::BlockedAttempt {
                    identity: identity.clone(),
                    now,
                });
                AblVerdict::Blacklisted(entry)
            }
            Err(_) => AblVerdict::Clean,
        }
    }

    pub fn record_spam(&self, identity: SenderIdentity, reason: &str, now: Timestamp) -> AblEntry {
        let mut inner = self.inner.write();
        let entry = inner.store.record_spam(identity.clone(), reason, now);
        inner.log(StoreOp::RecordSpam {
            identity,
            reason: reason.to_string(),
            now,
        });
        entry
    }

    pub fn expire(&self, now: Timestamp) -> usize {
        let mut inner = self.inner.write();
        let removed = inner.store.expire(now);
        inner.log(StoreOp::Expire { now });
        removed
    }

    pub fn remove(&self, identity: &SenderIdentity) -> Option<AblEntry> {
        let mut inner = self.inner.write();
        let removed = inner.store.remove(identity);
        inner.log(StoreOp::Remove {
            identity: identity.clone(),
        });
        removed
    }

    /// Point-in-time snapshot bytes.
    pub fn persist(&self) -> Vec<u8> {
        self.inner.read().store.persist()
    }

    pub fn entries(&self) -> Vec<AblEntry> {
        self.inner.read().store.entries().into_iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.inner.read().store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces the contents with a snapshot, keeping entries live at `now`.
    pub fn load(&self, data: &[u8], now: Timestamp) -> Result<usize, SnapshotError> {
        let mut inner = self.inner.write();
        let policy = inner.store.policy().clone();
        let capacity = inner.store.capacity;
        inner.store = AblStore::load(data, now, policy, capacity)?;
        Ok(inner.store.len())
    }

    /// Copy of the current store.
    pub fn to_store(&self) -> AblStore {
        self.inner.read().store.clone()
    }

    pub fn journal(&self) -> Vec<StoreOp> {
        self.inner.read().journal.clone().unwrap_or_default()
    }
}
