#![no_main]

use abl_core::store::{AblStore, TtlPolicy};
use libfuzzer_sys::fuzz_target;

const NOW: u64 = 1_700_000_000;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = AblStore::load(data, NOW, TtlPolicy::default(), 64) {
        assert!(store.len() <= 64);
        assert!(store.entries().iter().all(|e| e.is_live(NOW) && e.first_seen <= e.last_hit));
        let saved = store.persist();
        let again = AblStore::load(&saved, NOW, TtlPolicy::default(), 64).expect("persisted snapshot loads");
        assert_eq!(again.persist(), saved);
    }
});
