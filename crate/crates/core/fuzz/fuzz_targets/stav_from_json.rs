#![no_main]

use hdx_core::io::stav_from_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    hdx_core::caps::set_table_cap(20_000);
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = stav_from_json(text) {
        let _ = x.check_invariants();
    }
});
