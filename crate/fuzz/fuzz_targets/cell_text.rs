#![no_main]
use libfuzzer_sys::fuzz_target;
use tnl::CellField;

fuzz_target!(|data: &str| {
    if let Ok(field) = CellField::from_text(data) {
        let text = field.to_text();
        let again = CellField::from_text(&text).expect("rendered field must parse");
        assert_eq!(field, again);
    }
});
