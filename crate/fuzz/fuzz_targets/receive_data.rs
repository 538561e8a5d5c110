#![no_main]

use std::net::{IpAddr, Ipv4Addr};

use abl_core::smtp::{encode_data, DataError, DataOutcome, Phase, SessionLimits, SessionState};
use libfuzzer_sys::fuzz_target;

const CLIENT: IpAddr = IpAddr::V4(Ipv4Addr::LOCALHOST);

fn receiving(max_message_octets: u64) -> SessionState {
    let limits = SessionLimits {
        server_domain: "fuzz.test".into(),
        max_message_octets,
    };
    SessionState::at_phase(Phase::ReceivingData, CLIENT, limits)
}

fuzz_target!(|data: &[u8]| {
    let Some((&chunk, body)) = data.split_first() else {
        return;
    };

    // Raw octets in arbitrary chunks, against a small size limit.
    let mut state = receiving(256);
    for piece in body.chunks(usize::from(chunk).max(1)) {
        let (next, outcome) = state.receive_data(piece);
        state = next;
        match outcome {
            Ok(DataOutcome::Pending) => assert_eq!(state.phase(), Phase::ReceivingData),
            Ok(DataOutcome::Complete { consumed, message }) => {
                assert!(consumed <= piece.len());
                assert!(message.body.len() <= 256);
                break;
            }
            Err(DataError::MessageTooLarge { consumed, data_octets }) => {
                assert!(consumed <= piece.len());
                assert!(data_octets > 256);
                break;
            }
            Err(DataError::NotReceiving) => panic!("left the DATA phase early"),
        }
    }

    // Encoding then receiving gives the body back.
    let wire = encode_data(body);
    let (_, outcome) = receiving(u64::MAX).receive_data(&wire);
    let mut expected = body.to_vec();
    if !body.is_empty() && !body.ends_with(b"\r\n") {
        expected.extend_from_slice(b"\r\n");
    }
    match outcome {
        Ok(DataOutcome::Complete { consumed, message }) => {
            assert_eq!(consumed, wire.len());
            assert_eq!(message.body, expected);
        }
        other => panic!("encoded body not received whole: {other:?}"),
    }
});
