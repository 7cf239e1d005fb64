#![no_main]

use libfuzzer_sys::fuzz_target;
use socs_cli::assign::parse_assignment;
use socs_core::{Domain, Variable};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let vars = vec![
        Variable::new("X1", Domain::Boolean),
        Variable::new("X2", Domain::Real),
        Variable::new("X7", Domain::Categorical(4)),
    ];
    if let Ok(e) = parse_assignment(s, &vars) {
        assert_eq!(e.len(), vars.len());
    }
});
