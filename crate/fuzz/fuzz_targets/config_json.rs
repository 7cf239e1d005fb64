#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_cli::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_json_str(s) {
        let _ = cfg.layer_spec();
        let _ = cfg.region_graph(4);
    }
});
