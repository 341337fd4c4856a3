#![no_main]

use evt_core::event_io::{decode_evt1, encode_evt1};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = decode_evt1(data) {
        let bytes = encode_evt1(&s);
        assert_eq!(bytes.as_slice(), data);
        assert_eq!(decode_evt1(&bytes).unwrap(), s);
    }
});
