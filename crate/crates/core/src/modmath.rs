//! Residue arithmetic modulo an odd prime, primality testing, safe-prime
//! generation and a baby-step giant-step discrete logarithm.
#![allow(clippy::should_implement_trait)]

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Miller-Rabin rounds used wherever a primality verdict matters.
pub const MR_ROUNDS: u32 = 40;

/// The 2000-bit safe prime used for the reference timings of the scheme.
pub const BUILTIN_PRIME_2000_DEC: &str = concat!(
    "10045850546888500363341857765622433390255317048443698327360730996384584773950711586086",
    "59647532399390279723388347079039419401883143486789818089104137543067189650872669444298",
    "78241410578991733762502442817585765598816431431108282071433256273345939973526837788093",
    "19929255772120459055406150435912157422236830704891980901048998096101770672922203479101",
    "71309250704268933498140571458129953409915489060783331049514406144820373564438646999671",
    "24299012034397810342312642333550598174454039699165710636052240583294703998189114479917",
    "6571252706970862342004424895444746595605833540527975793095735071212653022265289427895",
    "19",
);

/// An odd modulus shared between residues and matrices.
///
/// Cloning is cheap; equality compares the numeric value.
#[derive(Clone)]
pub struct Modulus(Arc<BigUint>);

impl Modulus {
    pub fn new(p: BigUint) -> Result<Self> {
        if p < BigUint::from(3u8) || p.is_even() {
            return Err(Error::InvalidModulus(format!("{p} is not an odd integer >= 3")));
        }
        Ok(Modulus(Arc::new(p)))
    }

    pub fn from_u64(p: u64) -> Result<Self> {
        Self::new(BigUint::from(p))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    pub fn residue(&self, v: impl Into<BigUint>) -> Residue {
        Residue::new(v.into(), self)
    }

    /// `v mod p`, for callers outside the `Residue` type.
    pub fn reduce(&self, v: &BigUint) -> BigUint {
        if v < self.value() {
            v.clone()
        } else {
            v % self.value()
        }
    }
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for Modulus {}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits() <= 128 {
            write!(f, "Modulus({})", self.0)
        } else {
            write!(f, "Modulus({} bits)", self.bits())
        }
    }
}

/// An element of Z_p in canonical form `0 <= value < p`.
#[derive(Clone, PartialEq, Eq)]
pub struct Residue {
    value: BigUint,
    modulus: Modulus,
}

impl fmt::Debug for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {:?})", self.value, self.modulus)
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Residue {
    pub fn new(value: BigUint, modulus: &Modulus) -> Self {
        let value = if &value < modulus.value() { value } else { value % modulus.value() };
        Residue { value, modulus: modulus.clone() }
    }

    pub fn from_u64(value: u64, modulus: &Modulus) -> Self {
        Self::new(BigUint::from(value), modulus)
    }

    pub fn zero(modulus: &Modulus) -> Self {
        Residue { value: BigUint::zero(), modulus: modulus.clone() }
    }

    pub fn one(modulus: &Modulus) -> Self {
        Residue { value: BigUint::one(), modulus: modulus.clone() }
    }

    pub fn random<R: Rng + ?Sized>(modulus: &Modulus, rng: &mut R) -> Self {
        Residue { value: rng.gen_biguint_below(modulus.value()), modulus: modulus.clone() }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn into_value(self) -> BigUint {
        self.value
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.value.is_one()
    }

    fn check(&self, other: &Residue) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch);
        }
        Ok(())
    }

    fn p(&self) -> &BigUint {
        self.modulus.value()
    }

    pub fn add(&self, other: &Residue) -> Result<Residue> {
        self.check(other)?;
        let mut v = &self.value + &other.value;
        if &v >= self.p() {
            v -= self.p();
        }
        Ok(Residue { value: v, modulus: self.modulus.clone() })
    }

    pub fn sub(&self, other: &Residue) -> Result<Residue> {
        self.check(other)?;
        let v = if self.value >= other.value {
            &self.value - &other.value
        } else {
            self.p() - &other.value + &self.value
        };
        Ok(Residue { value: v, modulus: self.modulus.clone() })
    }

    pub fn mul(&self, other: &Residue) -> Result<Residue> {
        self.check(other)?;
        Ok(Residue { value: (&self.value * &other.value) % self.p(), modulus: self.modulus.clone() })
    }

    pub fn neg(&self) -> Residue {
        let value = if self.value.is_zero() { BigUint::zero() } else { self.p() - &self.value };
        Residue { value, modulus: self.modulus.clone() }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(&self) -> Result<Residue> {
        inverse_mod(&self.value, self.p())
            .map(|value| Residue { value, modulus: self.modulus.clone() })
            .ok_or(Error::NotInvertible)
    }

    /// `self^e` by square-and-multiply; `e = 0` gives 1.
    pub fn pow(&self, e: &BigUint) -> Residue {
        Residue { value: self.value.modpow(e, self.p()), modulus: self.modulus.clone() }
    }

    pub fn pow_u64(&self, e: u64) -> Residue {
        self.pow(&BigUint::from(e))
    }

    /// Euler's criterion. Zero counts as a residue (0 = 0^2).
    pub fn is_quadratic_residue(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        let half = (self.p() - 1u32) >> 1;
        self.value.modpow(&half, self.p()).is_one()
    }
}

/// Inverse of `a` modulo `m` if `gcd(a, m) = 1`.
pub fn inverse_mod(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let a = BigInt::from(a % m);
    let m_int = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return None;
    }
    let x = ext.x.mod_floor(&m_int);
    x.to_biguint()
}

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        const LIMIT: usize = 2000;
        let mut sieve = vec![true; LIMIT];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..LIMIT {
            if sieve[i] {
                for j in (i * i..LIMIT).step_by(i) {
                    sieve[j] = false;
                }
            }
        }
        (0..LIMIT as u32).filter(|&i| sieve[i as usize]).collect()
    })
}

/// `Some(verdict)` when trial division settles the question.
fn trial_division(x: &BigUint) -> Option<bool> {
    let primes = small_primes();
    if let Some(small) = x.to_u32() {
        if small <= *primes.last().unwrap() {
            return Some(primes.binary_search(&small).is_ok());
        }
    }
    for &sp in primes {
        if (x % sp).is_zero() {
            return Some(false);
        }
    }
    None
}

/// Miller-Rabin with `rounds` bases, preceded by trial division by primes
/// below 2000. Bases come from an RNG seeded by the candidate itself, so the
/// verdict is a deterministic function of `(x, rounds)`.
pub fn is_probable_prime(x: &BigUint, rounds: u32) -> bool {
    if let Some(verdict) = trial_division(x) {
        return verdict;
    }
    let one = BigUint::one();
    let x_minus_1 = x - &one;
    let s = x_minus_1.trailing_zeros().unwrap_or(0);
    let d = &x_minus_1 >> s;

    let seed = x.iter_u64_digits().next().unwrap_or(0) ^ x.bits();
    let mut rng = StdRng::seed_from_u64(seed);
    let two = BigUint::from(2u8);

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &x_minus_1);
        let mut y = a.modpow(&d, x);
        if y == one || y == x_minus_1 {
            continue;
        }
        for _ in 1..s {
            y = (&y * &y) % x;
            if y == x_minus_1 {
                continue 'witness;
            }
            if y == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// A prime `p = 2q + 1` with `q` prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafePrime {
    p: BigUint,
    q: BigUint,
    modulus: Modulus,
}

impl SafePrime {
    /// Validates `p` as a safe prime congruent to 3 mod 4.
    pub fn new(p: BigUint) -> Result<Self> {
        if p < BigUint::from(7u8) {
            return Err(Error::InvalidArgument(format!("{p} is too small for a safe prime")));
        }
        if (&p % 4u32) != BigUint::from(3u8) {
            return Err(Error::InvalidArgument("prime is not 3 mod 4".into()));
        }
        let q = (&p - 1u32) >> 1;
        if !is_probable_prime(&q, MR_ROUNDS) || !is_probable_prime(&p, MR_ROUNDS) {
            return Err(Error::InvalidArgument("not a safe prime".into()));
        }
        Ok(Self::new_unchecked(p))
    }

    /// Skips the primality tests. The caller vouches for `p`.
    pub fn new_unchecked(p: BigUint) -> Self {
        let q = (&p - 1u32) >> 1;
        let modulus = Modulus::new(p.clone()).expect("safe prime is odd and >= 7");
        SafePrime { p, q, modulus }
    }

    /// The built-in 2000-bit safe prime.
    pub fn builtin_2000() -> Self {
        let p: BigUint = BUILTIN_PRIME_2000_DEC.parse().expect("valid decimal literal");
        Self::new_unchecked(p)
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn is_3_mod_4(&self) -> bool {
        (&self.p % 4u32) == BigUint::from(3u8)
    }
}

/// Samples a safe prime of exactly `bits` bits: draw an odd `q` of
/// `bits - 1` bits, keep it when both `q` and `2q + 1` are prime.
pub fn gen_safe_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<SafePrime> {
    if bits < 4 {
        return Err(Error::InvalidArgument(format!("safe primes need at least 4 bits, got {bits}")));
    }
    let qbits = bits - 1;
    loop {
        let mut q = rng.gen_biguint(qbits);
        q.set_bit(qbits - 1, true);
        q.set_bit(0, true);
        let p = (&q << 1) + 1u32;
        // Cheap filters first on both halves, then the expensive rounds.
        if trial_division(&q) == Some(false) || trial_division(&p) == Some(false) {
            continue;
        }
        if is_probable_prime(&q, MR_ROUNDS) && is_probable_prime(&p, MR_ROUNDS) {
            debug_assert_eq!(p.bits(), bits);
            return Ok(SafePrime::new_unchecked(p));
        }
    }
}

/// Least `e < bound` with `g^e = h`, or `None`.
///
/// Stores `ceil(sqrt(bound))` baby steps in a hash map, so memory grows as
/// the square root of the bound; keep `bound` below about 2^40.
pub fn discrete_log_bsgs(g: &Residue, h: &Residue, bound: u64) -> Result<Option<u64>> {
    Ok(discrete_log_bsgs_counted(g, h, bound)?.0)
}

/// [`discrete_log_bsgs`] plus the number of group multiplications spent.
pub fn discrete_log_bsgs_counted(g: &Residue, h: &Residue, bound: u64) -> Result<(Option<u64>, u64)> {
    g.check(h)?;
    if bound == 0 {
        return Ok((None, 0));
    }
    if h.is_one() {
        return Ok((Some(0), 0));
    }
    if g.is_zero() {
        return Ok(((h.is_zero() && bound > 1).then_some(1), 0));
    }
    let p = g.p();
    let m = ((bound as f64).sqrt().ceil() as u64).max(1);

    let mut table: HashMap<BigUint, u64> = HashMap::with_capacity(m as usize);
    let mut cur = BigUint::one();
    for j in 0..m {
        table.entry(cur.clone()).or_insert(j);
        cur = (&cur * g.value()) % p;
    }
    let mut work = m;
    // cur = g^m now; giant step multiplies by g^{-m}.
    let giant = inverse_mod(&cur, p).expect("g is a unit");
    let mut gamma = h.value().clone();
    let giant_steps = bound.div_ceil(m);
    for i in 0..giant_steps {
        if let Some(&j) = table.get(&gamma) {
            let e = i * m + j;
            return Ok(((e < bound).then_some(e), work));
        }
        gamma = (&gamma * &giant) % p;
        work += 1;
    }
    Ok((None, work))
}

/// Multiplicative order of a unit `g` in Z_p^* for a safe prime `p`: one of
/// 1, 2, q or 2q.
pub fn safe_prime_order(g: &Residue, prime: &SafePrime) -> Result<BigUint> {
    if g.is_zero() {
        return Err(Error::NotInvertible);
    }
    let two = BigUint::from(2u8);
    let candidates = [BigUint::one(), two.clone(), prime.q().clone(), prime.q() * &two];
    Ok(candidates
        .into_iter()
        .find(|d| g.pow(d).is_one())
        .expect("order divides p - 1"))
}
