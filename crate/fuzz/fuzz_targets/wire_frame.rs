#![no_main]

use armspace::gateway::protocol::read_frame;
use armspace::gateway::{Engine, EngineConfig};
use libfuzzer_sys::fuzz_target;

// A byte stream as a session host would see it: frames until the first
// error, each applied to one engine.
fuzz_target!(|data: &[u8]| {
    let mut r = data;
    let mut engine = Engine::new(EngineConfig::default());
    let mut t = 0.0;
    while let Ok(Some(payload)) = read_frame(&mut r) {
        t += 0.02;
        let _ = engine.apply_payload(t, &payload);
    }
});
