//! Config loading must never panic, and a config that loads must convert
//! cleanly into every runtime setting it describes.

#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;

use ifl_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_toml_str(text, Path::new("fuzz.toml")) else {
        return;
    };
    cfg.csv_options()
        .expect("a loaded config has coherent csv options");
    cfg.ifl_config(42)
        .expect("a loaded config has a coherent [ifl] section");
    cfg.classifier_config()
        .expect("a loaded config has a coherent [classifier] section");
    let _ = cfg.data_path(Path::new("data"));
});
