#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_core::reductions::{snefy_to_socs, SnefySpec};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SnefySpec::from_json_str(s) {
        if spec.b.len() * spec.v.len() * spec.variables.len() <= 256 {
            let _ = snefy_to_socs(&spec);
        }
    }
});
