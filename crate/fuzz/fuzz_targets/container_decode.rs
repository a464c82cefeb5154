#![no_main]

use libfuzzer_sys::fuzz_target;
use sparc::bitstream::unpack;
use sparc::stream::{decode_stream, parse_container};

fuzz_target!(|data: &[u8]| {
    let Ok((blocks, padding)) = parse_container(data) else { return };
    // headers may ask for arbitrarily long blocks; only decode small ones
    let mut work = 0u64;
    for b in &blocks {
        if unpack(b).is_err() {
            return;
        }
        work += b.n as u64 * b.sections as u64;
    }
    if work <= 1 << 20 {
        let total: u64 = blocks.iter().map(|b| b.n as u64).sum();
        let out = decode_stream(data).unwrap();
        assert_eq!(out.len() as u64, total - padding as u64);
    }
});
