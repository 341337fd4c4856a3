#![no_main]

use evt_core::event_io::{decode_csv, encode_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for geometry in [None, Some((64, 64))] {
        if let Ok(s) = decode_csv(text, geometry) {
            assert_eq!(decode_csv(&encode_csv(&s), None).unwrap(), s);
        }
    }
});
