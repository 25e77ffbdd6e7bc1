#![no_main]

use armspace::gateway::protocol::{decode_command, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cmd) = decode_command(data) {
        let back = decode_command(&encode(&cmd)).expect("re-encoded command decodes");
        // NaN never decodes from JSON, so equality is safe here
        assert_eq!(back, cmd);
    }
});
