#![no_main]

use abl_sim::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(scenario) = ScenarioConfig::parse(text) {
        if scenario.validate().is_ok() {
            for profile in &scenario.senders {
                let _ = scenario.keyword_for(profile);
            }
        }
    }
});
