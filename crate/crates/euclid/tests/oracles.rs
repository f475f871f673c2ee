//! Lattice operators against brute-force evaluation of their defining sums.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedom_euclid::grid::units_to_f64;
use sparsedom_euclid::*;

fn centers_f64(l: Lattice, cell: usize) -> Vec<f64> {
    l.center(cell)[..l.dim()].iter().map(|&c| units_to_f64(c)).collect()
}

/// `Σ_y K(x - y) [ψ((x-y)/t) - ψ((x-y)/s)] f(y) h^d`, one target at a time.
fn brute_truncation(k: &DiniKernel, f: &LatticeFunction, s: f64, t: f64, x: usize) -> f64 {
    let l = f.lattice();
    let xc = centers_f64(l, x);
    let mut acc = 0.0;
    for y in 0..l.len() {
        let fy = f.values()[y];
        if fy == 0.0 {
            continue;
        }
        let yc = centers_f64(l, y);
        let z: Vec<f64> = xc.iter().zip(&yc).map(|(a, b)| a - b).collect();
        let zt: Vec<f64> = z.iter().map(|v| v / t).collect();
        let zs: Vec<f64> = z.iter().map(|v| v / s).collect();
        acc += k.eval(&z) * (CutoffPsi.eval(&zt) - CutoffPsi.eval(&zs)) * fy * l.cell_measure();
    }
    acc
}

fn brute_average(f: &LatticeFunction, t: f64, x: usize) -> f64 {
    let l = f.lattice();
    let xc = centers_f64(l, x);
    let mut acc = 0.0;
    for y in 0..l.len() {
        let yc = centers_f64(l, y);
        let z: Vec<f64> = xc.iter().zip(&yc).map(|(a, b)| (a - b) / t).collect();
        acc += f.values()[y].abs() * CutoffPsi.eval(&z) * l.cell_measure();
    }
    acc / t.powi(l.dim() as i32)
}

fn dist_to_boundary(p: &Cube, l: Lattice, x: usize) -> f64 {
    units_to_f64(p.dist_to_boundary(&l.center(x)[..l.dim()]))
}

fn random_function(l: Lattice, rng: &mut ChaCha8Rng, density: f64) -> LatticeFunction {
    LatticeFunction::from_fn(l, |_| {
        if rng.random::<f64>() < density {
            rng.random_range(-2.0..2.0)
        } else {
            0.0
        }
    })
    .unwrap()
}

fn random_cube(rng: &mut ChaCha8Rng, d: usize) -> Cube {
    let side = rng.random_range(UNIT / 8..=UNIT);
    let lo: Vec<Coord> = (0..d).map(|_| rng.random_range(-UNIT / 4..UNIT - side / 2)).collect();
    Cube::new(&lo, side).unwrap()
}

#[test]
fn far_cell_hilbert_value() {
    // f = indicator of cell 5, x = cell 40 of 2^7: K = 1/(x - y), inside the
    // annulus only the ψ(·/t) factor is below 1.
    let l = Lattice::new(1, 7).unwrap();
    let f = LatticeFunction::from_fn(l, |i| f64::from(i == 5)).unwrap();
    let k = DiniKernel::hilbert();
    let (s, t) = (4.0 / 128.0, 64.0 / 128.0);
    let out = truncated_apply(&k, &f, s, t).unwrap();
    let z: f64 = 35.0 / 128.0;
    let expected = (1.0 / z) * CutoffPsi::axis(z / t) / 128.0;
    assert!((out.values()[40] - expected).abs() < 1e-13);
    // Targets farther than t see nothing; targets within s/2 see nothing.
    assert_eq!(out.values()[127], 0.0);
    assert!(out.values()[6].abs() < 1e-15);
}

#[test]
fn truncated_apply_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (d, k, kernel) in [
        (1usize, 8u32, DiniKernel::hilbert()),
        (2, 5, DiniKernel::lipschitz(2).unwrap()),
        (3, 3, DiniKernel::lipschitz(3).unwrap()),
    ] {
        let l = Lattice::new(d, k).unwrap();
        let h = l.h();
        for density in [0.05, 0.6] {
            let f = random_function(l, &mut rng, density);
            for (s, t) in [(2.0 * h, 4.0 * h), (2.5 * h, 7.3 * h), (3.0 * h, 0.9), (0.25, 3.0)] {
                if s >= t {
                    continue;
                }
                let fast = truncated_apply(&kernel, &f, s, t).unwrap();
                let scale: f64 = fast.values().iter().map(|v| v.abs()).fold(1e-300, f64::max);
                for x in (0..l.len()).step_by(7) {
                    let slow = brute_truncation(&kernel, &f, s, t, x);
                    assert!(
                        (fast.values()[x] - slow).abs() <= 1e-10 * scale.max(1.0),
                        "d={d} s={s} t={t} x={x}: {} vs {slow}",
                        fast.values()[x]
                    );
                }
            }
        }
    }
}

#[test]
fn empty_annulus_gives_zero() {
    let l = Lattice::new(1, 8).unwrap();
    let f = LatticeFunction::from_fn(l, |i| f64::from(i < 10)).unwrap();
    let h = l.h();
    let out = truncated_apply(&DiniKernel::hilbert(), &f, 40.0 * h, 41.0 * h).unwrap();
    // Within distance 20 cells of the support the annulus [20h, 41h) misses it.
    assert!(out.values()[..10].iter().all(|&v| v == 0.0));
    assert!(out.values()[52..].iter().all(|&v| v == 0.0));
}

#[test]
fn adapted_maximal_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (d, k) in [(1usize, 8u32), (2, 5)] {
        let l = Lattice::new(d, k).unwrap();
        for _ in 0..3 {
            let f = random_function(l, &mut rng, 0.3);
            let p = random_cube(&mut rng, d);
            let fast = adapted_maximal(&f, &p).unwrap();
            for x in 0..l.len() {
                let dist = dist_to_boundary(&p, l, x);
                let mut best = 0.0f64;
                let mut t = l.h();
                while t < dist && t <= 2.0 {
                    best = best.max(brute_average(&f, t, x));
                    t *= 2.0;
                }
                assert!((fast.values()[x] - best).abs() <= 1e-12 * (1.0 + best), "{x}");
            }
        }
    }
}

#[test]
fn adapted_truncation_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let l = Lattice::new(1, 9).unwrap();
    let k = DiniKernel::hilbert();
    let h = l.h();
    for _ in 0..3 {
        let f = random_function(l, &mut rng, 0.2);
        let p = random_cube(&mut rng, 1);
        let fast = adapted_truncation(&k, &f, &p).unwrap();
        for x in (0..l.len()).step_by(5) {
            let dist = dist_to_boundary(&p, l, x);
            let levels: Vec<f64> = (1..=10).map(|i| h * 2f64.powi(i)).filter(|&t| 12.0 * t < dist).collect();
            let mut best = 0.0f64;
            for (a, &s) in levels.iter().enumerate() {
                for &t in &levels[a + 1..] {
                    best = best.max(brute_truncation(&k, &f, s, t, x).abs());
                }
            }
            assert!((fast.values()[x] - best).abs() <= 1e-10 * (1.0 + best), "{x}: {} vs {best}", fast.values()[x]);
            if dist < 48.0 * h {
                assert_eq!(fast.values()[x], 0.0);
            }
        }
    }
}

#[test]
fn monotone_in_the_cube() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let l = Lattice::new(1, 10).unwrap();
    let k = DiniKernel::hilbert();
    let f = random_function(l, &mut rng, 0.3);
    let profiles = ScaleProfiles::new(&k, &f).unwrap();
    for _ in 0..200 {
        let q = random_cube(&mut rng, 1);
        let side = rng.random_range(1..=q.side());
        let lo = q.lo()[0] + rng.random_range(0..=q.side() - side);
        let p = Cube::new(&[lo], side).unwrap();
        assert!(q.contains_cube(&p));
        let (tp, tq) = (profiles.adapted_truncation(&p), profiles.adapted_truncation(&q));
        let (mp, mq) = (profiles.adapted_maximal(&p), profiles.adapted_maximal(&q));
        for x in 0..l.len() {
            assert!(tp.values()[x] <= tq.values()[x]);
            assert!(mp.values()[x] <= mq.values()[x]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn cover_cube_is_minimal(d in 1usize..=3, side in 1i128..(UNIT * 16), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo: Vec<Coord> = (0..d).map(|_| rng.random_range(-UNIT * 32..UNIT * 32)).collect();
        let p = Cube::new(&lo, side).unwrap();
        let (u, q) = cover_cube(&p);
        let qc = q.cube();
        prop_assert_eq!(u, q.grid());
        prop_assert!(qc.contains_cube(&p));
        prop_assert!(qc.side() <= 6 * side);
        // No finer scale and no earlier grid at this scale qualifies.
        let family = ShiftedGridFamily::new(d).unwrap();
        for scale in (q.scale()..=(q.scale() + 3).min(60)).rev() {
            if UNIT >> scale.max(0) << (-scale).max(0) < side {
                continue;
            }
            for g in family.grids() {
                if scale == q.scale() && g >= u {
                    break;
                }
                let other = family.locate(g, scale, p.lo()).unwrap();
                prop_assert!(!other.cube().contains_cube(&p), "{} also covers", other);
            }
        }
    }
}
