use mixmom::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(600);
    for trial in 0..100 {
        let k4: f64 = -rng.gen_range(0.25..4.0);
        let nonic = pearson_nonic(0.0, k4, 0.0);
        let roots = real_roots(&nonic, DEFAULT_ROOT_TOL).unwrap();
        let expect = [
            (-(1.5 * -k4).sqrt(), 2usize),
            (-(0.5 * -k4).sqrt(), 1),
            (0.0, 3),
            ((0.5 * -k4).sqrt(), 1),
            ((1.5 * -k4).sqrt(), 2),
        ];
        let ok = roots.roots.len() == 5
            && roots.roots.iter().zip(expect.iter()).all(|(&(r, m), &(er, em))| {
                (r - er).abs() <= 1e-7 * er.abs().max(1.0) && m == em
            });
        if !ok {
            println!("trial {trial} k4={k4}");
            println!("  got {:?}", roots.roots);
            println!("  expect {:?}", expect);
        }
    }
    println!("done");
}
