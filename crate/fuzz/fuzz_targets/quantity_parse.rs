#![no_main]

use homolock::units::{parse_quantity, Dimension};
use libfuzzer_sys::fuzz_target;

const DIMENSIONS: [Dimension; 6] = [
    Dimension::Rate,
    Dimension::Frequency,
    Dimension::Time,
    Dimension::Level,
    Dimension::Diffusion,
    Dimension::Dimensionless,
];

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for dimension in DIMENSIONS {
            if let Ok(q) = parse_quantity(text, dimension) {
                assert!(q.value.is_finite());
            }
        }
    }
});
