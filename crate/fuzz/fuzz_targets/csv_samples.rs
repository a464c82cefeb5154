#![no_main]

use libfuzzer_sys::fuzz_target;
use sparc::sources::parse_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = parse_csv(data) {
        assert!(v.iter().all(|x| x.is_finite()));
    }
});
