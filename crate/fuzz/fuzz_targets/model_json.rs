#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_cli::model_io::ModelFile;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(f) = ModelFile::from_json_str(s) {
        // Large layer sizes are legal but too slow to build here.
        if f.spec.sum_units * f.spec.input_units <= 64 && f.variables.len() <= 16 {
            let _ = f.to_model();
        }
    }
});
