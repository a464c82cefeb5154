#![no_main]

use libfuzzer_sys::fuzz_target;
use sparc::bitstream::{pack, unpack, CompressedBlock};

fuzz_target!(|data: &[u8]| {
    if let Ok((block, used)) = CompressedBlock::parse(data) {
        assert!(used <= data.len());
        assert_eq!(block.to_bytes(), &data[..used]);
        if let Ok((p, idx)) = unpack(&block) {
            // anything that unpacks must pack back to the same block
            assert_eq!(pack(&p, &idx).unwrap(), block);
        }
    }
    let _ = CompressedBlock::from_bytes(data);
});
