#![no_main]

use armspace::cspace::CSpaceRaster;
use armspace::gateway::protocol::{apply_chunk, assemble_raster, decode_event, raster_chunks, Event};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ev) = decode_event(data) else {
        return;
    };
    if let Event::RasterChunk {
        n,
        row_start,
        row_end,
        ref bits,
    } = ev
    {
        if (8..=256).contains(&n) {
            let mut r = CSpaceRaster::free(n).unwrap();
            if apply_chunk(&mut r, row_start, row_end, bits).is_ok() {
                // a decoded chunk re-encodes to a raster that decodes the same
                let again = assemble_raster(&raster_chunks(&r, 64)).expect("reassembles");
                assert_eq!(again, r);
            }
        }
        let _ = assemble_raster(std::slice::from_ref(&ev));
    }
});
