#![no_main]

use abl_core::smtp::{Command, Mailbox, ParseError, MAX_COMMAND_LINE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    match Command::parse(data) {
        Ok(_) => assert!(data.len() <= MAX_COMMAND_LINE && data.ends_with(b"\r\n")),
        Err(ParseError::LineTooLong) => assert!(data.len() > MAX_COMMAND_LINE),
        Err(_) => {}
    }
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mailbox) = Mailbox::parse(text) {
            assert_eq!(Mailbox::parse(mailbox.as_str()).as_ref(), Ok(&mailbox));
        }
    }
});
