#![no_main]
use libfuzzer_sys::fuzz_target;
use regime_dividends::BarrierPolicy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = BarrierPolicy::from_json(text) {
        for i in 0..p.len() {
            assert!(p.barrier(i).is_finite() && p.barrier(i) >= 0.0);
            assert!(p.liquidation_level(i) <= p.barrier(i));
        }
    }
});
