#![no_main]

use libfuzzer_sys::fuzz_target;

use eegnn::config::KeyValues;
use eegnn::mcmc::ChainConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(kv) = KeyValues::parse(text) {
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
        let _ = ChainConfig::from_kv(&kv);
    }
});
