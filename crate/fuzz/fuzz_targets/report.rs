#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::report::{merge_reports, parse_report};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_report(text) {
        let _ = merge_reports(&[("a".into(), rows.clone()), ("b".into(), rows)]);
    }
});
