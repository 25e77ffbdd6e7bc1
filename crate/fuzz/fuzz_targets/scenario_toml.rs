#![no_main]

use armspace::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = Scenario::from_toml(text) {
        // anything accepted must survive its own serialization
        let again = Scenario::from_toml(&s.to_toml()).expect("round trip");
        assert_eq!(again, s);
    }
    let _ = Scenario::environment_from_toml(text);
});
