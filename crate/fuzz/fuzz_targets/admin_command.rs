#![no_main]

use abl_server::{AdminCommand, MetricsSnapshot};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cmd) = AdminCommand::parse(data) {
        let line = cmd.render();
        assert_eq!(AdminCommand::parse(line.as_bytes()), Ok(cmd));
    }
    // STATS answers are parsed by the client side.
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(snapshot) = MetricsSnapshot::from_lines(text.lines()) {
            let lines = snapshot.to_lines();
            assert_eq!(MetricsSnapshot::from_lines(lines.iter().map(String::as_str)), Ok(snapshot));
        }
    }
});
