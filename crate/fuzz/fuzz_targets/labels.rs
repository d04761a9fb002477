#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::io::{parse_labels, write_labels};

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(y) = parse_labels(text, usize::from(n % 16)) {
        assert_eq!(parse_labels(&write_labels(&y), y.len()).unwrap(), y);
    }
});
