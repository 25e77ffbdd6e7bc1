#![no_main]

use armspace::session::RunLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(log) = RunLog::parse(text) {
        let m = log.metrics();
        assert!(m.path_length >= 0.0);
        let again = RunLog::parse(&log.to_text()).expect("round trip");
        assert_eq!(again.metrics(), m);
    }
});
