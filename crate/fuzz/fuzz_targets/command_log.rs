#![no_main]

use armspace::gateway::engine::{events_jsonl, parse_command_log, replay};
use armspace::gateway::EngineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(log) = parse_command_log(text) else {
        return;
    };
    // keep raster requests cheap
    let config = EngineConfig {
        max_raster_n: 64,
        ..EngineConfig::default()
    };
    let (_, a) = replay(config.clone(), &log);
    let (_, b) = replay(config, &log);
    assert_eq!(events_jsonl(&a), events_jsonl(&b));
});
