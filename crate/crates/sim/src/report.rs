use std::path::Path;
use std::time::Duration;

use abl_server::MetricsSnapshot;
use num_rational::Ratio;

use crate::run::{Outcome, SenderLog};
use crate::scenario::SenderKind;

pub const CSV_HEADER: &str = "run,connections,attempted,accepted,blocked_connect,blocked_mail,data_octets,bytes_in,bytes_out";

#[derive(Debug, Clone)]
pub struct RunReport {
    pub abl_enabled: bool,
    /// Connection attempts made by the simulated clients.
    pub attempted: u64,
    /// Server counters at the end of the run.
    pub metrics: MetricsSnapshot,
    pub wall_time: Duration,
    pub senders: Vec<SenderLog>,
}

impl RunReport {
    pub fn label(&self) -> &'static str {
        if self.abl_enabled {
            "abl_on"
        } else {
            "abl_off"
        }
    }

    pub fn data_octets(&self) -> u64 {
        self.metrics.data_octets_received
    }

    /// Messages the clients of one kind saw accepted.
    pub fn accepted_by(&self, kind: SenderKind) -> usize {
        self.senders
            .iter()
            .filter(|s| s.kind == kind)
            .flat_map(|s| &s.attempts)
            .filter(|a| a.outcome == Outcome::Accepted)
            .count()
    }

    pub fn csv_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.label(),
            m.connections_total,
            self.attempted,
            m.messages_accepted,
            m.sessions_blocked_at_connect,
            m.sessions_blocked_at_mail,
            m.data_octets_received,
            m.bytes_in,
            m.bytes_out
        )
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub runs: Vec<RunReport>,
}

impl SimReport {
    pub fn run(&self, abl_enabled: bool) -> Option<&RunReport> {
        self.runs.iter().find(|r| r.abl_enabled == abl_enabled)
    }

    /// `1 - on/off` over DATA-phase octets, exactly. Zero when the baseline
    /// received nothing; `None` unless both runs are present.
    pub fn reduction(&self) -> Option<Ratio<u64>> {
        let on = self.run(true)?.data_octets();
        let off = self.run(false)?.data_octets();
        if off == 0 {
            return Some(Ratio::from_integer(0));
        }
        Some(Ratio::new(off.saturating_sub(on), off))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for run in &self.runs {
            out.push_str(&run.csv_row());
            out.push('\n');
        }
        if let Some(rho) = self.reduction() {
            out.push_str(&format!("reduction,{}\n", decimal6(rho)));
        }
        out
    }
}

/// Six-decimal rendering, rounded half up, computed without floats.
pub fn decimal6(r: Ratio<u64>) -> String {
    let num = u128::from(*r.numer());
    let den = u128::from(*r.denom());
    let scaled = (num * 1_000_000 * 2 + den) / (den * 2);
    format!("{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
}

pub fn write_report(report: &SimReport, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, report.to_csv())
}
