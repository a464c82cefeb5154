#![no_main]

use libfuzzer_sys::fuzz_target;
use sparc::sources::{parse_raw_f64, to_raw_f64};

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = parse_raw_f64(data) {
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(to_raw_f64(&v), data);
    }
});
