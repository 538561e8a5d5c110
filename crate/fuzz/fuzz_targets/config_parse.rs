#![no_main]

use abl_server::ServerConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let mut config = ServerConfig::default();
    if config.apply_text(text).is_err() {
        return;
    }
    let _ = config.validate();
    for key in ServerConfig::KEYS {
        let value = config.get(key).expect("known key");
        let mut again = config.clone();
        again.set(key, &value).expect("canonical value is accepted");
        assert_eq!(again.get(key).as_deref(), Some(value.as_str()), "{key}");
    }
});
