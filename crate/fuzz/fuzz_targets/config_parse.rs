#![no_main]

use homolock::config::ConfigDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = ConfigDocument::parse(text) {
            let again = ConfigDocument::parse(text).expect("parsing is deterministic");
            assert_eq!(doc.hash(), again.hash());
        }
    }
});
