#![no_main]
use libfuzzer_sys::fuzz_target;
use tnl::FieldSpec;

fuzz_target!(|data: &str| {
    if let Ok(spec) = FieldSpec::from_kv(data) {
        let text = spec.to_kv();
        let again = FieldSpec::from_kv(&text).expect("rendered spec must parse");
        assert_eq!(spec, again, "{text}");
    }
});
