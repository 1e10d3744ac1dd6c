//! The semidirect product of the additive matrix semigroup with a cyclic
//! semigroup of matrix pairs acting by `X -> P X Q`.
//!
//! Elements are triples `(X, (P, Q))` multiplied by
//!
//! ```text
//! (X, (P, Q)) * (X', (P', Q')) = (P' X Q' + X', (P P', Q Q'))
//! ```
//!
//! The action is only well defined when the pairs commute with each other,
//! which holds for powers of a single generating pair `(H1, H2)`.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::matrix::MatrixZp;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemidirectElement {
    additive: MatrixZp,
    left: MatrixZp,
    right: MatrixZp,
}

impl SemidirectElement {
    pub fn new(additive: MatrixZp, left: MatrixZp, right: MatrixZp) -> Result<Self> {
        for m in [&left, &right] {
            if m.dim() != additive.dim() {
                return Err(Error::ShapeMismatch("semidirect components differ in dimension".into()));
            }
            if m.modulus() != additive.modulus() {
                return Err(Error::ModulusMismatch);
            }
        }
        Ok(SemidirectElement { additive, left, right })
    }

    /// The additive (first) component.
    pub fn additive(&self) -> &MatrixZp {
        &self.additive
    }

    /// Left factor `P` of the multiplicative pair.
    pub fn left(&self) -> &MatrixZp {
        &self.left
    }

    /// Right factor `Q` of the multiplicative pair.
    pub fn right(&self) -> &MatrixZp {
        &self.right
    }

    pub fn into_parts(self) -> (MatrixZp, MatrixZp, MatrixZp) {
        (self.additive, self.left, self.right)
    }

    pub fn mul(&self, other: &SemidirectElement) -> Result<SemidirectElement> {
        let acted = self.additive.sandwich(&other.left, &other.right)?;
        Ok(SemidirectElement {
            additive: acted.add(&other.additive)?,
            left: self.left.mul(&other.left)?,
            right: self.right.mul(&other.right)?,
        })
    }

    /// `(X, (P, Q))^2 = (P X Q + X, (P^2, Q^2))`.
    pub fn square(&self) -> SemidirectElement {
        self.mul(self).expect("an element is compatible with itself")
    }

    /// Left-to-right square-and-multiply over sliding windows of up to
    /// four bits (plain binary for short exponents). The semigroup has no
    /// identity once `det(P) = det(Q) = 0`, so `e = 0` is rejected.
    pub fn pow(&self, e: &BigUint) -> Result<SemidirectElement> {
        if e.is_zero() {
            return Err(Error::ZeroExponent);
        }
        if e.bits() < 64 {
            return self.pow_binary(e);
        }
        const WINDOW: u64 = 4;
        // odd[i] = self^(2i + 1)
        let sq = self.square();
        let mut odd = vec![self.clone()];
        for i in 1..(1usize << (WINDOW - 1)) {
            odd.push(odd[i - 1].mul(&sq)?);
        }

        let mut acc: Option<SemidirectElement> = None;
        let mut i = e.bits() as i64 - 1;
        while i >= 0 {
            if !e.bit(i as u64) {
                acc = acc.map(|a| a.square());
                i -= 1;
                continue;
            }
            // Longest window e[i..=j] of at most WINDOW bits ending in a 1.
            let mut j = (i - WINDOW as i64 + 1).max(0);
            while !e.bit(j as u64) {
                j += 1;
            }
            let mut value = 0usize;
            for b in (j..=i).rev() {
                value = (value << 1) | e.bit(b as u64) as usize;
            }
            acc = Some(match acc {
                None => odd[value >> 1].clone(),
                Some(mut a) => {
                    for _ in j..=i {
                        a = a.square();
                    }
                    a.mul(&odd[value >> 1])?
                }
            });
            i = j - 1;
        }
        Ok(acc.expect("e has a set bit"))
    }

    /// Plain left-to-right binary square-and-multiply.
    pub fn pow_binary(&self, e: &BigUint) -> Result<SemidirectElement> {
        if e.is_zero() {
            return Err(Error::ZeroExponent);
        }
        let mut acc = self.clone();
        for i in (0..e.bits() - 1).rev() {
            acc = acc.square();
            if e.bit(i) {
                acc = acc.mul(self)?;
            }
        }
        Ok(acc)
    }

    pub fn pow_u64(&self, e: u64) -> Result<SemidirectElement> {
        self.pow(&BigUint::from(e))
    }
}

/// The transcript sum `sum_{i=0}^{m-1} H1^i M H2^i`, evaluated term by term.
///
/// Costs `O(m)` matrix products; meant as a reference for small `m`.
pub fn naive_transcript(m: &MatrixZp, h1: &MatrixZp, h2: &MatrixZp, count: u64) -> Result<MatrixZp> {
    if count == 0 {
        return Err(Error::ZeroExponent);
    }
    let mut left = MatrixZp::identity(m.dim(), m.modulus());
    let mut right = left.clone();
    let mut sum = MatrixZp::zero(m.dim(), m.modulus());
    for _ in 0..count {
        sum = sum.add(&m.sandwich(&left, &right)?)?;
        left = left.mul(h1)?;
        right = right.mul(h2)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modmath::Modulus;
    use num_bigint::RandBigInt;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn md(p: u64) -> Modulus {
        Modulus::from_u64(p).unwrap()
    }

    fn example() -> (MatrixZp, MatrixZp, MatrixZp) {
        let p7 = md(7);
        (
            MatrixZp::from_u64(2, &p7, &[1, 2, 3, 4]).unwrap(),
            MatrixZp::from_u64(2, &p7, &[0, 0, 0, 2]).unwrap(),
            MatrixZp::from_u64(2, &p7, &[0, 0, 0, 3]).unwrap(),
        )
    }

    #[test]
    fn square_by_hand() {
        let (m, h1, h2) = example();
        let g = SemidirectElement::new(m.clone(), h1.clone(), h2.clone()).unwrap();
        let sq = g.square();
        // H1 M H2 = [[0,0],[0,2*4*3]] = [[0,0],[0,24 mod 7 = 3]]; + M = [[1,2],[3,0]]
        assert_eq!(sq.additive(), &MatrixZp::from_u64(2, m.modulus(), &[1, 2, 3, 0]).unwrap());
        assert_eq!(sq.left(), &h1.mul(&h1).unwrap());
        assert_eq!(sq.right(), &h2.mul(&h2).unwrap());
    }

    #[test]
    fn cube_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = md(10007);
        let m = MatrixZp::random(3, &p, &mut rng);
        let h1 = MatrixZp::random(3, &p, &mut rng);
        let h2 = MatrixZp::random(3, &p, &mut rng);
        let g = SemidirectElement::new(m.clone(), h1.clone(), h2.clone()).unwrap();
        let cube = g.pow_u64(3).unwrap();
        let expect = m
            .sandwich(&h1.mul(&h1).unwrap(), &h2.mul(&h2).unwrap())
            .unwrap()
            .add(&m.sandwich(&h1, &h2).unwrap())
            .unwrap()
            .add(&m)
            .unwrap();
        assert_eq!(cube.additive(), &expect);
        assert_eq!(g.pow_u64(1).unwrap(), g);
        assert_eq!(g.pow_u64(2).unwrap(), g.mul(&g).unwrap());
    }

    #[test]
    fn zero_exponent_rejected() {
        let (m, h1, h2) = example();
        let g = SemidirectElement::new(m, h1, h2).unwrap();
        assert!(matches!(g.pow_u64(0), Err(Error::ZeroExponent)));
    }

    #[test]
    fn mismatched_components() {
        let (m, h1, _) = example();
        assert!(SemidirectElement::new(m.clone(), h1.clone(), MatrixZp::identity(3, m.modulus())).is_err());
        assert!(SemidirectElement::new(m, h1, MatrixZp::identity(2, &md(11))).is_err());
    }

    #[test]
    fn naive_transcript_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = md(101);
        let m = MatrixZp::random(3, &p, &mut rng);
        let i = MatrixZp::identity(3, &p);
        let z = MatrixZp::zero(3, &p);
        let h = MatrixZp::random(3, &p, &mut rng);
        assert_eq!(naive_transcript(&m, &h, &h, 1).unwrap(), m);
        for k in 1..20u64 {
            let scaled = m.scalar(&p.residue(k)).unwrap();
            assert_eq!(naive_transcript(&m, &i, &i, k).unwrap(), scaled);
            assert_eq!(naive_transcript(&m, &z, &z, k).unwrap(), m);
        }
    }

    #[test]
    fn pow_matches_naive_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (p, dim) in [(11u64, 2usize), (101, 3), (65521, 3)] {
            let pm = md(p);
            let m = MatrixZp::random(dim, &pm, &mut rng);
            let h1 = MatrixZp::random(dim, &pm, &mut rng);
            let h2 = MatrixZp::random(dim, &pm, &mut rng);
            let g = SemidirectElement::new(m.clone(), h1.clone(), h2.clone()).unwrap();
            for e in 1..=64u64 {
                let pw = g.pow_u64(e).unwrap();
                assert_eq!(pw.additive(), &naive_transcript(&m, &h1, &h2, e).unwrap(), "p={p} e={e}");
                assert_eq!(pw.left(), &h1.pow_u64(e));
                assert_eq!(pw.right(), &h2.pow_u64(e));
            }
        }
    }

    #[test]
    fn doubling_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pm = md(997);
        let g = SemidirectElement::new(
            MatrixZp::random(2, &pm, &mut rng),
            MatrixZp::random(2, &pm, &mut rng),
            MatrixZp::random(2, &pm, &mut rng),
        )
        .unwrap();
        for e in [1u64, 2, 7, 100, 1023, 4000] {
            let half = g.pow_u64(e).unwrap();
            let doubled = g.pow_u64(2 * e).unwrap();
            let expect = half.additive().sandwich(half.left(), half.right()).unwrap().add(half.additive()).unwrap();
            assert_eq!(doubled.additive(), &expect);
        }
    }

    #[test]
    fn windowed_matches_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pm = md(1_000_003);
        let g = SemidirectElement::new(
            MatrixZp::random(3, &pm, &mut rng),
            MatrixZp::random(3, &pm, &mut rng),
            MatrixZp::random(3, &pm, &mut rng),
        )
        .unwrap();
        for bits in [64u64, 65, 100, 257] {
            for _ in 0..5 {
                let mut e = rng.gen_biguint(bits);
                e.set_bit(bits - 1, true);
                assert_eq!(g.pow(&e).unwrap(), g.pow_binary(&e).unwrap(), "e={e}");
            }
        }
        let all_ones = (BigUint::from(1u8) << 70) - 1u32;
        assert_eq!(g.pow(&all_ones).unwrap(), g.pow_binary(&all_ones).unwrap());
        let sparse = (BigUint::from(1u8) << 90) + 1u32;
        assert_eq!(g.pow(&sparse).unwrap(), g.pow_binary(&sparse).unwrap());
    }

    #[test]
    fn associativity_needs_commuting_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pm = md(101);
        let h1 = MatrixZp::random(2, &pm, &mut rng);
        let h2 = MatrixZp::random(2, &pm, &mut rng);
        let elem = |i: u64, rng: &mut ChaCha8Rng| {
            SemidirectElement::new(MatrixZp::random(2, &pm, rng), h1.pow_u64(i), h2.pow_u64(i)).unwrap()
        };
        for (i, j, k) in [(1u64, 2u64, 3u64), (5, 1, 9), (17, 4, 2)] {
            let (a, b, c) = (elem(i, &mut rng), elem(j, &mut rng), elem(k, &mut rng));
            assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        }
        // Unrelated pairs generally break it.
        let rand_elem = |rng: &mut ChaCha8Rng| {
            SemidirectElement::new(
                MatrixZp::random(2, &pm, rng),
                MatrixZp::random(2, &pm, rng),
                MatrixZp::random(2, &pm, rng),
            )
            .unwrap()
        };
        let (a, b, c) = (rand_elem(&mut rng), rand_elem(&mut rng), rand_elem(&mut rng));
        assert_ne!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
    }

    fn arb_element(dim: usize, p: u64)-> impl Strategy<Value = SemidirectElement> {
        proptest::collection::vec(0..p, 3 * dim * dim).prop_map(move |v| {
            let pm = md(p);
            let n = dim * dim;
            SemidirectElement::new(
                MatrixZp::from_u64(dim, &pm, &v[..n]).unwrap(),
                MatrixZp::from_u64(dim, &pm, &v[n..2 * n]).unwrap(),
                MatrixZp::from_u64(dim, &pm, &v[2 * n..]).unwrap(),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn power_addition_law(g in arb_element(2, 983), a in 1u64..5000, b in 1u64..5000) {
            let lhs = g.pow_u64(a + b).unwrap();
            prop_assert_eq!(lhs, g.pow_u64(a).unwrap().mul(&g.pow_u64(b).unwrap()).unwrap());
        }

        #[test]
        fn matches_naive_large_exponent(g in arb_element(2, 991), e in 1u64..=4096) {
            let (m, h1, h2) = g.clone().into_parts();
            let pw = g.pow_u64(e).unwrap();
            prop_assert_eq!(pw.additive(), &naive_transcript(&m, &h1, &h2, e).unwrap());
        }
    }
}
