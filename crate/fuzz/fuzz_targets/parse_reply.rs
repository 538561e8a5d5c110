#![no_main]

use abl_core::smtp::Reply;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((reply, used)) = Reply::parse(data) {
        assert!(used <= data.len());
        // Rendering is canonical: it parses back to the same reply.
        let wire = reply.render();
        let (again, n) = Reply::parse(&wire).expect("rendered reply parses");
        assert_eq!(n, wire.len());
        assert_eq!(again, reply);
    }
});
