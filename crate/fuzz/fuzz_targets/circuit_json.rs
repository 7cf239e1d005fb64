#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_core::Circuit;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Circuit::from_json_str(s) {
        let text = c.to_json_string();
        let again = Circuit::from_json_str(&text).expect("serialized circuit must parse");
        assert_eq!(again.to_json_string(), text);
    }
});
