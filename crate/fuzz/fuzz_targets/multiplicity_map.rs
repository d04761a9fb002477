#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::io::parse_multiplicity_map;
use eegnn::propagation::build_p_hat;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = parse_multiplicity_map(text) {
        if map.num_nodes() <= 4096 {
            let _ = build_p_hat(&map);
        }
    }
});
