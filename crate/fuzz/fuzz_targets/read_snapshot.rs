#![no_main]

use landau::io::{parse_snapshot, snapshot_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_snapshot(text) {
        let first = snapshot_to_csv(&rows);
        let second = snapshot_to_csv(&parse_snapshot(&first).expect("written snapshot parses"));
        assert_eq!(first, second);
    }
});
