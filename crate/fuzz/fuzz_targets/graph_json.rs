#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_core::constructions::{build_fudisj, build_futq, GraphSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(g) = GraphSpec::from_json_str(s) {
        if g.vertices <= 8 && g.edges.len() <= 16 {
            let _ = build_fudisj(&g);
            let _ = build_futq(&g);
        }
    }
});
