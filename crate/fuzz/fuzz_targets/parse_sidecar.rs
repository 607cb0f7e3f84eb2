#![no_main]

use libfuzzer_sys::fuzz_target;
use pmqkd::montecarlo::SimMetadata;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(meta) = SimMetadata::from_json(text) {
            let json = meta.to_json().expect("serializing parsed metadata");
            assert_eq!(SimMetadata::from_json(&json).expect("re-reading"), meta);
        }
    }
});
