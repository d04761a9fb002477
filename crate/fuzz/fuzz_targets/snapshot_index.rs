#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::io::{parse_snapshot_index, write_snapshot_index};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_snapshot_index(text) {
        assert_eq!(parse_snapshot_index(&write_snapshot_index(&entries)).unwrap(), entries);
    }
});
