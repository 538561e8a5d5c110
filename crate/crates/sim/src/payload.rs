//! Deterministic message bodies of an exact size.

use rand::seq::SliceRandom;
use rand::Rng;

/// Smallest payload: one CRLF.
pub const MIN_PAYLOAD: usize = 2;

const LINE_WIDTH: usize = 72;

// No entry contains a default classifier keyword.
const VOCABULARY: &[&str] = &[
    "agenda", "budget", "meeting", "report", "quarter", "draft", "review", "notes", "project", "schedule", "invoice",
    "summary", "update", "minutes", "thanks", "regards", "attached", "please", "confirm", "tomorrow", "office",
    "team", "plan", "status", "deadline", "client", "proposal", "lunch", "call", "week", "monday", "friday",
    "figures", "section", "comments", "agreed", "shipping", "order", "account", "travel",
];

/// Builds a body of exactly `octets` octets: CRLF-terminated lines of
/// words, with `keyword` (if any) opening the first line. No line starts
/// with a dot, so the body is never dot-stuffed on the wire.
pub fn generate<R: Rng>(rng: &mut R, octets: usize, keyword: Option<&str>) -> Vec<u8> {
    assert!(octets >= MIN_PAYLOAD, "payload must hold at least CRLF");
    let mut out = Vec::with_capacity(octets);
    let mut first = keyword.map(str::as_bytes);
    while out.len() < octets {
        let room = octets - out.len();
        // Leave no remainder too short for its own CRLF.
        let width = if room <= LINE_WIDTH + 2 + MIN_PAYLOAD {
            room - 2
        } else {
            LINE_WIDTH.min(room - 2 - MIN_PAYLOAD)
        };
        let mut line = Vec::with_capacity(width);
        if let Some(k) = first.take() {
            line.extend_from_slice(&k[..k.len().min(width)]);
        }
        while line.len() < width {
            if !line.is_empty() {
                line.push(b' ');
            }
            let word = VOCABULARY.choose(rng).expect("non-empty vocabulary").as_bytes();
            let take = word.len().min(width - line.len());
            line.extend_from_slice(&word[..take]);
        }
        line.truncate(width);
        out.extend_from_slice(&line);
        out.extend_from_slice(b"\r\n");
    }
    debug_assert_eq!(out.len(), octets);
    out
}
