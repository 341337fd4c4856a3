#![no_main]

use evt_core::backbone::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = Checkpoint::decode(data) {
        let bytes = c.encode().unwrap();
        let again = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(again.encode().unwrap(), bytes);
    }
});
