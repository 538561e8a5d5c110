/// Incremental DATA-phase decoder: removes dot-stuffing and finds the
/// `CRLF.CRLF` terminator regardless of how the stream is chunked.
///
/// The body starts at a line boundary, so a lone `.` line right after the
/// 354 reply terminates an empty message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DataReceiver {
    scan: Scan,
    body: Vec<u8>,
    octets: u64,
    max: u64,
    overflow: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scan {
    LineStart,
    Dot,
    DotCr,
    Mid,
    Cr,
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Fed {
    /// The whole chunk was consumed, the terminator has not been seen.
    Pending,
    /// Terminator found; `consumed` octets of the chunk belong to the body.
    Terminated { consumed: usize },
}

impl DataReceiver {
    pub(crate) fn new(max: u64) -> Self {
        DataReceiver {
            scan: Scan::LineStart,
            body: Vec::new(),
            octets: 0,
            max,
            overflow: false,
        }
    }

    /// Un-stuffed body octets seen so far, including any beyond the limit.
    pub(crate) fn octets(&self) -> u64 {
        self.octets
    }

    pub(crate) fn overflowed(&self) -> bool {
        self.overflow
    }

    pub(crate) fn into_body(self) -> Vec<u8> {
        self.body
    }

    fn emit(&mut self, bytes: &[u8]) {
        self.octets += bytes.len() as u64;
        if self.octets > self.max {
            self.overflow = true;
            self.body = Vec::new();
        }
        if !self.overflow {
            self.body.extend_from_slice(bytes);
        }
    }

    pub(crate) fn feed(&mut self, chunk: &[u8]) -> Fed {
        let mut i = 0;
        while i < chunk.len() {
            let b = chunk[i];
            i += 1;
            self.scan = match (self.scan, b) {
                (Scan::LineStart, b'.') => Scan::Dot,
                (Scan::LineStart | Scan::Mid, b'\r') => Scan::Cr,
                (Scan::LineStart | Scan::Mid, _) => {
                    self.emit(&[b]);
                    Scan::Mid
                }
                (Scan::Dot, b'\r') => Scan::DotCr,
                // A leading dot is always removed; `..` becomes `.`.
                (Scan::Dot, _) => {
                    self.emit(&[b]);
                    Scan::Mid
                }
                (Scan::DotCr, b'\n') => {
                    self.scan = Scan::LineStart;
                    return Fed::Terminated { consumed: i };
                }
                (Scan::DotCr, b'\r') => {
                    self.emit(b"\r");
                    Scan::Cr
                }
                (Scan::DotCr, _) => {
                    self.emit(&[b'\r', b]);
                    Scan::Mid
                }
                (Scan::Cr, b'\n') => {
                    self.emit(b"\r\n");
                    Scan::LineStart
                }
                (Scan::Cr, b'\r') => {
                    self.emit(b"\r");
                    Scan::Cr
                }
                (Scan::Cr, _) => {
                    self.emit(&[b'\r', b]);
                    Scan::Mid
                }
            };
        }
        Fed::Pending
    }
}

/// Dot-stuffs `body` and appends the terminator, producing the octets a
/// client sends after the 354 reply. A body not ending in CRLF gets one.
pub fn encode_data(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + body.len() / 64 + 5);
    let mut at_line_start = true;
    for &b in body {
        if at_line_start && b == b'.' {
            out.push(b'.');
        }
        out.push(b);
        at_line_start = b == b'\n' && out.ends_with(b"\r\n");
    }
    if !body.is_empty() && !body.ends_with(b"\r\n") {
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(b".\r\n");
    out
}
