#![no_main]

use landau::config::parse_config_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config_str(text) {
        // Accepted configs must survive serialize -> parse unchanged.
        let again = parse_config_str(&config.to_toml()).expect("echoed config parses");
        assert_eq!(again, config);
    }
});
