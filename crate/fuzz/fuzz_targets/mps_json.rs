#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_core::reductions::{born, mps_to_circuit, Mps};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Mps::from_json_str(s) {
        if m.d * m.r * m.r * m.v <= 4096 {
            let _ = mps_to_circuit(&m);
            let _ = born(&m);
        }
    }
});
