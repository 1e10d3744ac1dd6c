//! Sampling of public parameters `(p, M, H1, H2)` and private exponents.
//!
//! `H1` and `H2` are built as `S^-1 D S` with `D` diagonal, `D[0][0] = 0`
//! and every other diagonal entry a unit of order greater than 2. Both are
//! therefore singular of rank `n - 1`. `M` is uniform and is resampled until
//! it commutes with neither `H1` nor `H2`.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::One;
use rand::Rng;

use crate::codec::{put_biguint, Reader, MAGIC, VERSION};
use crate::error::{Error, Result};
use crate::matrix::MatrixZp;
use crate::modmath::{gen_safe_prime, SafePrime};
use crate::semidirect::SemidirectElement;

/// Attempts allowed in each resampling loop before giving up.
pub const RETRY_CAP: usize = 1000;

pub const DEFAULT_DIM: usize = 3;

/// A failed validity condition on public parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    DetH1NonZero,
    DetH2NonZero,
    CommutesH1,
    CommutesH2,
    PrimeNot3Mod4,
    ShapeMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::DetH1NonZero => "det(H1) != 0",
            Violation::DetH2NonZero => "det(H2) != 0",
            Violation::CommutesH1 => "M commutes with H1",
            Violation::CommutesH2 => "M commutes with H2",
            Violation::PrimeNot3Mod4 => "prime not 4n+3",
            Violation::ShapeMismatch => "matrix shapes or moduli disagree",
        })
    }
}

/// Public parameters of an exchange.
///
/// Construction only checks that the matrices share a shape and modulus;
/// use [`validate_params`] for the protocol's validity conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    prime: SafePrime,
    m: MatrixZp,
    h1: MatrixZp,
    h2: MatrixZp,
}

impl PublicParams {
    pub fn new(prime: SafePrime, m: MatrixZp, h1: MatrixZp, h2: MatrixZp) -> Result<Self> {
        for x in [&m, &h1, &h2] {
            if x.modulus() != prime.modulus() {
                return Err(Error::ModulusMismatch);
            }
            if x.dim() != m.dim() {
                return Err(Error::ShapeMismatch("public matrices differ in dimension".into()));
            }
        }
        Ok(PublicParams { prime, m, h1, h2 })
    }

    pub fn prime(&self) -> &SafePrime {
        &self.prime
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn m(&self) -> &MatrixZp {
        &self.m
    }

    pub fn h1(&self) -> &MatrixZp {
        &self.h1
    }

    pub fn h2(&self) -> &MatrixZp {
        &self.h2
    }

    /// The generator `(M, (H1, H2))`.
    pub fn base(&self) -> SemidirectElement {
        SemidirectElement::new(self.m.clone(), self.h1.clone(), self.h2.clone())
            .expect("checked at construction")
    }

    /// Binary form: `MAKE`, version, dim byte, prime, then `M`, `H1`, `H2`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(self.dim() as u8);
        put_biguint(&mut buf, self.prime.p());
        for x in [&self.m, &self.h1, &self.h2] {
            x.write_to(&mut buf);
        }
        buf
    }

    /// Parses the binary form, re-running the safe-prime checks on `p`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let params = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(params)
    }

    pub fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        r.header()?;
        let dim = r.u8()? as usize;
        let prime = SafePrime::new(r.biguint()?)?;
        let md = prime.modulus().clone();
        let m = MatrixZp::read_from(r, &md)?;
        let h1 = MatrixZp::read_from(r, &md)?;
        let h2 = MatrixZp::read_from(r, &md)?;
        if m.dim() != dim {
            return Err(Error::Decode(format!("header dim {dim} but matrices are {}x{0}", m.dim())));
        }
        Self::new(prime, m, h1, h2)
    }

    /// Line-oriented hex text, one `key=value` per line.
    pub fn to_hex_fixture(&self) -> String {
        let row = |x: &MatrixZp| {
            x.entries().iter().map(|e| format!("{e:x}")).collect::<Vec<_>>().join(",")
        };
        format!(
            "format=MAKE-params-v1\ndim={}\np={:x}\nM={}\nH1={}\nH2={}\n",
            self.dim(),
            self.prime.p(),
            row(&self.m),
            row(&self.h1),
            row(&self.h2)
        )
    }

    pub fn from_hex_fixture(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Decode(format!("malformed fixture line {line:?}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| Error::Decode(format!("missing {k}")));
        if get("format")? != "MAKE-params-v1" {
            return Err(Error::Decode("unknown fixture format".into()));
        }
        let dim: usize = get("dim")?.parse().map_err(|_| Error::Decode("bad dim".into()))?;
        let hex = |s: &str| {
            BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| Error::Decode(format!("bad hex {s:?}")))
        };
        let prime = SafePrime::new(hex(get("p")?)?)?;
        let matrix = |k: &str| -> Result<MatrixZp> {
            let entries = get(k)?.split(',').map(|s| hex(s.trim())).collect::<Result<Vec<_>>>()?;
            if entries.iter().any(|e| e >= prime.p()) {
                return Err(Error::Decode(format!("{k} entry not reduced modulo p")));
            }
            MatrixZp::new(dim, prime.modulus(), entries)
        };
        let (m, h1, h2) = (matrix("M")?, matrix("H1")?, matrix("H2")?);
        Self::new(prime, m, h1, h2)
    }
}

/// How an `H` was built: `H = S^-1 D S`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugateWitness {
    pub s: MatrixZp,
    pub d: MatrixZp,
}

impl ConjugateWitness {
    pub fn conjugate(&self) -> Result<MatrixZp> {
        let s_inv = self.s.inverse().ok_or(Error::NotInvertible)?;
        self.d.sandwich(&s_inv, &self.s)
    }
}

/// Samples `H = S^-1 D S` with `det(H) = 0`.
///
/// `D[0][0] = 0`; the remaining diagonal entries are uniform over
/// `Z_p \ {0, 1, p-1}`, i.e. units of order at least `q`.
pub fn build_singular_conjugate<R: Rng + ?Sized>(
    prime: &SafePrime,
    dim: usize,
    rng: &mut R,
) -> Result<(MatrixZp, ConjugateWitness)> {
    if dim < 2 {
        return Err(Error::InvalidArgument("dimension must be at least 2".into()));
    }
    let md = prime.modulus();
    let p_minus_1 = prime.p() - 1u32;
    let two = BigUint::from(2u8);
    let mut diag = vec![BigUint::from(0u8)];
    for _ in 1..dim {
        diag.push(rng.gen_biguint_range(&two, &p_minus_1));
    }
    let d = MatrixZp::diagonal(md, &diag)?;
    for _ in 0..RETRY_CAP {
        let s = MatrixZp::random(dim, md, rng);
        if let Some(s_inv) = s.inverse() {
            let h = d.sandwich(&s_inv, &s)?;
            return Ok((h, ConjugateWitness { s, d }));
        }
    }
    Err(Error::RetryLimit { what: "invertible conjugator", attempts: RETRY_CAP })
}

/// Generates fresh parameters over a freshly sampled safe prime.
pub fn gen_public_params<R: Rng + ?Sized>(bits: u64, dim: usize, rng: &mut R) -> Result<PublicParams> {
    let prime = gen_safe_prime(bits, rng)?;
    Ok(gen_params_for_prime(prime, dim, rng)?.0)
}

/// Generates parameters over a fixed prime, also returning the conjugation
/// witnesses of `H1` and `H2`.
pub fn gen_params_for_prime<R: Rng + ?Sized>(
    prime: SafePrime,
    dim: usize,
    rng: &mut R,
) -> Result<(PublicParams, [ConjugateWitness; 2])> {
    if prime.p() < &BigUint::from(7u8) {
        return Err(Error::InvalidArgument("prime too small for unit diagonal entries".into()));
    }
    let (h1, w1) = build_singular_conjugate(&prime, dim, rng)?;
    let (h2, w2) = build_singular_conjugate(&prime, dim, rng)?;
    for _ in 0..RETRY_CAP {
        let m = MatrixZp::random(dim, prime.modulus(), rng);
        if !m.commutes_with(&h1)? && !m.commutes_with(&h2)? {
            let params = PublicParams::new(prime, m, h1, h2)?;
            return Ok((params, [w1, w2]));
        }
    }
    Err(Error::RetryLimit { what: "non-commuting M", attempts: RETRY_CAP })
}

/// Adversarial parameters with invertible `H1`, `H2`, invertible `M`, and
/// `det(H1 H2)` a generator of Z_p^*. These violate the protocol's
/// conditions on purpose and exist only to exercise the determinant attack.
pub fn gen_invertible_h_params<R: Rng + ?Sized>(
    prime: SafePrime,
    dim: usize,
    rng: &mut R,
) -> Result<PublicParams> {
    let md = prime.modulus().clone();
    for _ in 0..RETRY_CAP {
        let h1 = MatrixZp::random(dim, &md, rng);
        let h2 = MatrixZp::random(dim, &md, rng);
        let d = h1.det().mul(&h2.det())?;
        if d.is_zero() {
            continue;
        }
        let order = crate::modmath::safe_prime_order(&d, &prime)?;
        if order != prime.p() - 1u32 {
            continue;
        }
        let m = MatrixZp::random(dim, &md, rng);
        if m.det().is_zero() || m.commutes_with(&h1)? || m.commutes_with(&h2)? {
            continue;
        }
        return PublicParams::new(prime, m, h1, h2);
    }
    Err(Error::RetryLimit { what: "adversarial parameters", attempts: RETRY_CAP })
}

/// Empty iff all validity conditions hold.
pub fn validate_params(params: &PublicParams) -> Vec<Violation> {
    let mut out = Vec::new();
    if !params.prime.is_3_mod_4() {
        out.push(Violation::PrimeNot3Mod4);
    }
    if !params.h1.det().is_zero() {
        out.push(Violation::DetH1NonZero);
    }
    if !params.h2.det().is_zero() {
        out.push(Violation::DetH2NonZero);
    }
    match (params.m.commutes_with(&params.h1), params.m.commutes_with(&params.h2)) {
        (Ok(c1), Ok(c2)) => {
            if c1 {
                out.push(Violation::CommutesH1);
            }
            if c2 {
                out.push(Violation::CommutesH2);
            }
        }
        _ => out.push(Violation::ShapeMismatch),
    }
    out
}

/// A private exponent `m` or `n`.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateExponent(BigUint);

impl fmt::Debug for PrivateExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrivateExponent({} bits)", self.0.bits())
    }
}

impl PrivateExponent {
    /// Any positive value; sampled exponents come from [`gen_private_exponent`].
    pub fn new(value: BigUint) -> Result<Self> {
        if value < BigUint::one() {
            return Err(Error::ZeroExponent);
        }
        Ok(PrivateExponent(value))
    }

    pub fn from_u64(value: u64) -> Result<Self> {
        Self::new(BigUint::from(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

/// Uniform over `[2^(L-1), 2^L - 1]` where `L` is the bit length of `q`.
pub fn gen_private_exponent<R: Rng + ?Sized>(q: &BigUint, rng: &mut R) -> Result<PrivateExponent> {
    if q < &BigUint::from(2u8) {
        return Err(Error::InvalidArgument("q must be at least 2".into()));
    }
    let bits = q.bits();
    let lo = BigUint::one() << (bits - 1);
    let hi = BigUint::one() << bits;
    Ok(PrivateExponent(rng.gen_biguint_range(&lo, &hi)))
}
