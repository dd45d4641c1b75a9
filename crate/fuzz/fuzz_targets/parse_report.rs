#![no_main]

use dcf_snc::report::Report;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = Report::parse(text) {
        let _ = Report::parse(&report.to_json());
    }
});
