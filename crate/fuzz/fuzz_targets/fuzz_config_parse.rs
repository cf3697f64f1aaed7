#![no_main]

use libfuzzer_sys::fuzz_target;

use guillemin_ma::config::{load_config, parse_config};

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        // Raw TOML parse plus semantic validation; both must return errors,
        // never panic, on arbitrary input.
        let _ = parse_config(src);
        let _ = load_config(src);
    }
});
