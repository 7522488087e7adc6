#![no_main]
use libfuzzer_sys::fuzz_target;
use tnl::Dyadic;

fuzz_target!(|data: &str| {
    if let Ok(d) = data.parse::<Dyadic>() {
        let again: Dyadic = d.to_string().parse().expect("display form must parse");
        assert_eq!(d, again);
        let lit: Dyadic = d.to_literal().parse().expect("literal form must parse");
        assert_eq!(d, lit);
    }
});
