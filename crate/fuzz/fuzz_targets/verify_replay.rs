#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_cli::verify::Replay;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    // Parsing only; rerunning a case can take seconds.
    let _ = serde_json_roundtrip(s);
});

fn serde_json_roundtrip(s: &str) -> Option<()> {
    let r: Replay = serde_json::from_str(s).ok()?;
    let text = serde_json::to_string(&r).ok()?;
    let again: Replay = serde_json::from_str(&text).ok()?;
    assert_eq!(again.case, r.case);
    Some(())
}
