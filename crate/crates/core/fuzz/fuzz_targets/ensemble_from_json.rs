#![no_main]

use hdx_core::io::{ensemble_from_json, ensemble_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = ensemble_from_json(text) {
        let back = ensemble_from_json(&ensemble_to_json(&f)).expect("written ensembles parse");
        assert_eq!(back.values, f.values);
    }
});
