#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_cli::data::parse_csv;
use socs_core::tensorized::InputFamily;
use socs_core::training::Split;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_csv(s) {
        let vars = t.infer_variables(InputFamily::Auto);
        let _ = t.bind(&vars, Split::Train);
    }
});
