//! Text snapshot of the blacklist.
//!
//! ```text
//! ABLv1
//! ip<TAB>sender-or--<TAB>first_seen<TAB>last_hit<TAB>hit_count<TAB>expiry<TAB>reason
//! ```
//!
//! Entries are written sorted by identity so that a snapshot is a canonical
//! rendering of the store.

use std::collections::HashSet;

use super::{AblEntry, AblStore, SenderIdentity, Timestamp, TtlPolicy};

pub const HEADER: &str = "ABLv1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported snapshot version {0:?}")]
    UnsupportedVersion(String),
}

impl SnapshotError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        SnapshotError::Format {
            line,
            message: message.into(),
        }
    }
}

impl AblEntry {
    /// One snapshot line without the trailing LF.
    pub fn to_record(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.identity.ip(),
            self.identity.sender_field(),
            self.first_seen,
            self.last_hit,
            self.hit_count,
            self.expiry,
            self.reason
        )
    }

    pub fn from_record(record: &str) -> Result<AblEntry, String> {
        let fields: Vec<&str> = record.splitn(7, '\t').collect();
        if fields.len() != 7 {
            return Err(format!("expected 7 tab-separated fields, found {}", fields.len()));
        }
        let sender = match fields[1] {
            "-" => None,
            s => Some(s),
        };
        let identity = SenderIdentity::parse(fields[0], sender).map_err(|e| e.to_string())?;
        let number = |i: usize, name: &str| -> Result<u64, String> {
            let f = fields[i];
            if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("{name} is not a decimal integer: {f:?}"));
            }
            f.parse().map_err(|_| format!("{name} out of range: {f:?}"))
        };
        let entry = AblEntry {
            identity,
            first_seen: number(2, "first_seen")?,
            last_hit: number(3, "last_hit")?,
            hit_count: number(4, "hit_count")?,
            expiry: number(5, "expiry")?,
            reason: fields[6].to_string(),
        };
        if entry.hit_count == 0 {
            return Err("hit_count must be at least 1".into());
        }
        if !(entry.first_seen <= entry.last_hit && entry.last_hit < entry.expiry) {
            return Err("timestamps must satisfy first_seen <= last_hit < expiry".into());
        }
        Ok(entry)
    }
}

impl AblStore {
    pub fn persist(&self) -> Vec<u8> {
        let mut out = String::with_capacity(16 + self.len() * 64);
        out.push_str(HEADER);
        out.push('\n');
        for entry in self.entries() {
            out.push_str(&entry.to_record());
            out.push('\n');
        }
        out.into_bytes()
    }

    /// Loads a snapshot, dropping entries that are no longer live at `now`.
    pub fn load(data: &[u8], now: Timestamp, policy: TtlPolicy, capacity: usize) -> Result<AblStore, SnapshotError> {
        let text = std::str::from_utf8(data).map_err(|e| {
            let line = data[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            SnapshotError::at(line, "not valid UTF-8")
        })?;
        if text.is_empty() {
            return Err(SnapshotError::at(1, "missing version header"));
        }
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().expect("split yields one item");
        if header != HEADER {
            return Err(SnapshotError::UnsupportedVersion(header.to_string()));
        }

        let mut store = AblStore::new(policy, capacity);
        let mut seen = HashSet::new();
        let mut terminated = false;
        for (line, record) in lines {
            if terminated {
                return Err(SnapshotError::at(line - 1, "empty line"));
            }
            if record.is_empty() {
                // The final split piece after the last LF.
                terminated = true;
                continue;
            }
            let entry = AblEntry::from_record(record).map_err(|m| SnapshotError::at(line, m))?;
            if !seen.insert(entry.identity.clone()) {
                return Err(SnapshotError::at(line, format!("duplicate entry for {}", entry.identity)));
            }
            if entry.is_live(now) {
                store.insert(entry);
            }
        }
        if !terminated {
            return Err(SnapshotError::at(text.split('\n').count(), "last line is not LF-terminated"));
        }
        Ok(store)
    }
}
