#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_core::reductions::{psd_to_socs, PsdModel};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = PsdModel::from_json_str(s) {
        let _ = psd_to_socs(&p);
    }
});
