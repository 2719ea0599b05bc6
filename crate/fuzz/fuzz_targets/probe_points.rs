#![no_main]
use libfuzzer_sys::fuzz_target;
use regime_dividends::policy::parse_probe_points;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(points) = parse_probe_points(text) {
        assert!(!points.is_empty());
        assert!(points.iter().all(|x| x.is_finite() && *x >= 0.0));
    }
});
