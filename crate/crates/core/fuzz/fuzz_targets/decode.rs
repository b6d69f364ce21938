#![no_main]

use std::sync::OnceLock;

use hdx_core::agreement::Ensemble;
use hdx_core::decoder::{global_decode, DecoderConfig};
use hdx_core::stav::{hdx_stav, StavInstance};
use hdx_core::Complex;
use libfuzzer_sys::fuzz_target;

static STAV: OnceLock<StavInstance> = OnceLock::new();

// one byte per set on a fixed small instance, so every input is a well-formed ensemble
fuzz_target!(|data: &[u8]| {
    let x = STAV.get_or_init(|| hdx_stav(&Complex::complete(7, 4).unwrap(), 4, 1).unwrap());
    let Some((&q, rest)) = data.split_first() else { return };
    let q = u32::from(q % 4) + 1;
    let values: Vec<Vec<u32>> = x
        .s_sets
        .iter()
        .enumerate()
        .map(|(i, s)| s.iter().enumerate().map(|(j, _)| rest.get(i * s.len() + j).map_or(0, |&b| u32::from(b) % q)).collect())
        .collect();
    let Ok(f) = Ensemble::new(q, x.s_sets.clone(), values) else { return };
    if let Ok(out) = global_decode(x, &f, &DecoderConfig::default()) {
        assert!(out.assignment(0).iter().all(|&a| a < q));
    }
});
