#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::io::parse_labeled_edge_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((g, ids)) = parse_labeled_edge_list(text) {
        assert_eq!(g.num_nodes(), ids.len());
    }
});
