#![no_main]
use libfuzzer_sys::fuzz_target;
use regime_dividends::model::RegimeModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = RegimeModel::from_json(text) {
        // Accepted models round-trip and have a usable contraction factor.
        let back = RegimeModel::from_json(&m.to_json()).expect("round trip");
        assert_eq!(back.len(), m.len());
        let c = m.contraction_factor();
        assert!(c.is_finite() && (0.0..1.0).contains(&c));
    }
});
