#![no_main]

use dcf_snc::config::ScenarioFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = ScenarioFile::parse(text) {
        // Anything accepted must survive a round trip.
        let again = ScenarioFile::parse(&file.to_toml()).expect("serialized scenario parses");
        assert_eq!(again, file);
        let _ = file.sim_config().horizon_slots();
    }
});
