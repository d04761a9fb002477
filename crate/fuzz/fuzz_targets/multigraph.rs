#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::io::{parse_multigraph, write_multigraph};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mg) = parse_multigraph(text) {
        assert_eq!(parse_multigraph(&write_multigraph(&mg)).unwrap(), mg);
        let _ = mg.collapse();
    }
});
