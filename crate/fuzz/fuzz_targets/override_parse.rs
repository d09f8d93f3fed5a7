#![no_main]

use homolock::config::{parse_override, ConfigDocument};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((section, key, value)) = parse_override(text) {
            let mut doc = ConfigDocument::default();
            doc.set(&section, &key, &value);
            assert_eq!(
                doc.get(&section, &key).map(|e| e.value.as_str()),
                Some(value.as_str())
            );
        }
    }
});
