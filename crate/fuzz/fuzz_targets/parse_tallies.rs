#![no_main]

use libfuzzer_sys::fuzz_target;
use pmqkd::decoy::TallyTable;

fuzz_target!(|data: &[u8]| {
    // Whatever parses must survive a write and re-read unchanged.
    if let Ok(table) = TallyTable::read_csv(data) {
        let mut out = Vec::new();
        table.write_csv(&mut out).expect("writing a parsed table");
        assert_eq!(
            TallyTable::read_csv(out.as_slice()).expect("re-reading"),
            table
        );
    }
});
