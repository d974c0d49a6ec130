#![no_main]

use landau::io::{ledger_to_csv, parse_ledger};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ledger) = parse_ledger(text) {
        let first = ledger_to_csv(&ledger);
        let second = ledger_to_csv(&parse_ledger(&first).expect("written ledger parses"));
        assert_eq!(first, second);
    }
});
