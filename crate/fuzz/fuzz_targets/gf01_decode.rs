#![no_main]
use libfuzzer_sys::fuzz_target;
use tnl::grid::GridField;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = GridField::from_gf01(data) {
        let bytes = g.to_gf01();
        let again = GridField::from_gf01(&bytes).expect("encoded grid must decode");
        // NaN payloads survive bit for bit, so compare encodings.
        assert_eq!(bytes, again.to_gf01());
    }
});
