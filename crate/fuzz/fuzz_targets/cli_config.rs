#![no_main]
use libfuzzer_sys::fuzz_target;
use tnl::config::parse_config;

// Input: argv words separated by NUL, then an optional config file after a
// second NUL run.
fuzz_target!(|data: &str| {
    let (args, file) = match data.split_once("\0\0") {
        Some((a, f)) => (a, Some(f)),
        None => (data, None),
    };
    let argv: Vec<String> = args.split('\0').map(str::to_string).collect();
    if let Ok(cfg) = parse_config(&argv, file) {
        let again = parse_config(&cfg.to_args(), None).expect("canonical args must parse");
        assert_eq!(cfg.canonical(), again.canonical());
    }
});
