#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::io::{parse_split, write_split};

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(s) = parse_split(text, usize::from(n % 16)) {
        assert_eq!(parse_split(&write_split(&s), s.len()).unwrap(), s);
    }
});
