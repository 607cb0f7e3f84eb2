#![no_main]

use libfuzzer_sys::fuzz_target;
use pmqkd_cli::{parse_config, RunConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(layers) = parse_config(text) {
            // Resolution may reject values but must not panic.
            let _ = RunConfig::resolve(&layers, None);
        }
    }
});
