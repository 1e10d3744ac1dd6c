//! The `(1,1)` entry of a token in the discrete-log embedding, walked term by
//! term and compared with candidate closed forms.

use make_kex::attacks::{dl_embedding_params, embedding_corner, TokenWalk};
use make_kex::modmath::{safe_prime_order, SafePrime};
use make_kex::Residue;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 4] = [11, 23, 47, 2027];

fn corners(p: u64, g: u64, a11: u64, seed: u64) -> Vec<(u64, Residue)> {
    let prime = SafePrime::new(BigUint::from(p)).unwrap();
    let md = prime.modulus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = dl_embedding_params(
        &prime,
        &Residue::from_u64(a11, md),
        &Residue::from_u64(g, md),
        &Residue::random(md, &mut rng),
        &Residue::random(md, &mut rng),
        &Residue::random(md, &mut rng),
    )
    .unwrap();
    TokenWalk::new(&params).take(50).map(|(m, a)| (m, a.residue(0, 0))).collect()
}

#[test]
fn geometric_sum_matches_every_m() {
    for (i, p) in PRIMES.into_iter().enumerate() {
        let md = make_kex::Modulus::from_u64(p).unwrap();
        for g in [2u64, 3, 5] {
            for a11 in [1u64, g] {
                for (m, corner) in corners(p, g, a11, i as u64) {
                    let want = embedding_corner(&Residue::from_u64(a11, &md), &Residue::from_u64(g, &md), &BigUint::from(m));
                    assert_eq!(corner, want.unwrap(), "p={p} g={g} a11={a11} m={m}");
                }
            }
        }
    }
}

#[test]
fn exponent_forms_do_not_hold() {
    // Neither g^(m(m-1)) nor g^((m-1)(m-2)) tracks the brute-forced entry.
    let p = 2027;
    let prime = SafePrime::new(BigUint::from(p)).unwrap();
    let md = prime.modulus();
    let g = Residue::from_u64(3, md);
    assert!(safe_prime_order(&g, &prime).unwrap() > BigUint::from(2u8));
    let walked = corners(p, 3, 1, 99);
    let hits = |f: &dyn Fn(u64) -> u64| walked.iter().filter(|(m, c)| g.pow_u64(f(*m)) == *c).count();
    let sum_of_2i = hits(&|m| m * (m - 1));
    let printed = hits(&|m| if m >= 2 { (m - 1) * (m - 2) } else { 0 });
    assert!(sum_of_2i < 5, "m(m-1) matched {sum_of_2i} of 50");
    assert!(printed < 5, "(m-1)(m-2) matched {printed} of 50");
}
