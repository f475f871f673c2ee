#![no_main]
use libfuzzer_sys::fuzz_target;
use sparsedom_euclid::{Lattice, LatticeFunction};

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let d = usize::from(selector % 3) + 1;
    let lattice = Lattice::new(d, 3).unwrap();
    if let Ok(f) = LatticeFunction::read_csv(lattice, rest) {
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let g = LatticeFunction::read_csv(lattice, out.as_slice()).unwrap();
        assert_eq!(f.values(), g.values());
    }
});
