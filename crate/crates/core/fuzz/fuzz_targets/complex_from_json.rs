#![no_main]

use hdx_core::io::{complex_from_json, complex_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    hdx_core::caps::set_level_cap(20_000);
    hdx_core::caps::set_table_cap(20_000);
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = complex_from_json(text) {
        let back = complex_from_json(&complex_to_json(&c)).expect("written complexes parse");
        assert_eq!(back.n_vertices(), c.n_vertices());
        let _ = c.level(0);
    }
});
