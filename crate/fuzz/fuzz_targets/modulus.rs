#![no_main]
use libfuzzer_sys::fuzz_target;
use sparsedom_euclid::Modulus;

fuzz_target!(|data: &[u8]| {
    let parsed = match std::str::from_utf8(data) {
        Ok(text) if !text.contains('\n') => Modulus::expression(text),
        _ => Modulus::read_table(data),
    };
    if let Ok(omega) = parsed {
        for t in [0.0, 1e-9, 0.25, 1.0] {
            let _ = omega.eval(t);
        }
    }
});
