//! Exponent-recovery attacks and the discrete-log embedding.
//!
//! Every recovered exponent is replayed through the honest protocol and
//! checked against the victim's token before it is reported.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::MatrixZp;
use crate::modmath::{discrete_log_bsgs_counted, Residue, SafePrime};
use crate::paramgen::{PrivateExponent, PublicParams};
use crate::protocol::ExchangeState;

/// Largest modulus (in bits) the determinant attack will hand to BSGS.
pub const MAX_BSGS_BITS: u64 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackMethod {
    BruteForce,
    Determinant,
    DlReduction,
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMethod::BruteForce => "brute",
            AttackMethod::Determinant => "det",
            AttackMethod::DlReduction => "dlreduce",
        })
    }
}

#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub method: AttackMethod,
    pub recovered_exponent: Option<BigUint>,
    pub recovered_key: Option<MatrixZp>,
    /// Group operations spent: semidirect steps for brute force, Z_p
    /// multiplications in BSGS for the determinant attack.
    pub work: u64,
}

/// Walks the tokens `A_1 = M, A_{k+1} = H1 A_k H2 + M`, one action per step.
#[derive(Clone, Debug)]
pub struct TokenWalk<'a> {
    params: &'a PublicParams,
    next: Option<MatrixZp>,
    k: u64,
}

impl<'a> TokenWalk<'a> {
    pub fn new(params: &'a PublicParams) -> Self {
        TokenWalk { params, next: Some(params.m().clone()), k: 1 }
    }
}

impl Iterator for TokenWalk<'_> {
    type Item = (u64, MatrixZp);

    fn next(&mut self) -> Option<Self::Item> {
        let cur = self.next.take()?;
        let p = self.params;
        let following = cur
            .sandwich(p.h1(), p.h2())
            .and_then(|x| x.add(p.m()))
            .expect("params are shape-consistent");
        self.next = Some(following);
        let k = self.k;
        self.k += 1;
        Some((k, cur))
    }
}

/// Replays exponent `m` and, if it reproduces `token`, derives the key
/// shared with `peer_token`.
fn replay(
    params: &PublicParams,
    token: &MatrixZp,
    m: &BigUint,
    peer_token: Option<&MatrixZp>,
) -> Result<Option<MatrixZp>> {
    let mut state = ExchangeState::initiate_unchecked(params, PrivateExponent::new(m.clone())?)?;
    if state.sent_token() != token {
        return Err(Error::NotFound);
    }
    match peer_token {
        Some(b) => Ok(Some(state.finalize(b)?.matrix().clone())),
        None => Ok(None),
    }
}

/// Searches `k = 1..=bound` for the least `k` with `A_k = token`.
pub fn brute_force_exponent(
    params: &PublicParams,
    token: &MatrixZp,
    peer_token: Option<&MatrixZp>,
    bound: u64,
) -> Result<AttackOutcome> {
    let (k, _) = TokenWalk::new(params)
        .take(bound.min(u64::MAX - 1) as usize)
        .find(|(_, a)| a == token)
        .ok_or(Error::NotFound)?;
    let m = BigUint::from(k);
    let key = replay(params, token, &m, peer_token)?;
    Ok(AttackOutcome {
        method: AttackMethod::BruteForce,
        recovered_exponent: Some(m),
        recovered_key: key,
        work: k,
    })
}

/// `H1 A H2 + M - A`, which equals `H1^m M H2^m` for the token of `m`.
pub fn determinant_attack_lhs(params: &PublicParams, token: &MatrixZp) -> Result<MatrixZp> {
    token.sandwich(params.h1(), params.h2())?.add(params.m())?.sub(token)
}

/// Recovers `m` from `det((H1 A H2 + M - A) M^-1) = det(H1 H2)^m` when
/// `det(H1 H2)` is nonzero and `p` is small enough for BSGS.
pub fn determinant_attack(
    params: &PublicParams,
    token: &MatrixZp,
    peer_token: Option<&MatrixZp>,
) -> Result<AttackOutcome> {
    let d = params.h1().det().mul(&params.h2().det())?;
    if d.is_zero() {
        return Err(Error::AttackInapplicable("det(H1 H2) = 0".into()));
    }
    let m_inv = params
        .m()
        .inverse()
        .ok_or_else(|| Error::AttackInapplicable("M is singular".into()))?;
    let prime = params.prime();
    if prime.bits() > MAX_BSGS_BITS {
        return Err(Error::AttackInapplicable(format!(
            "{}-bit modulus is beyond BSGS range",
            prime.bits()
        )));
    }
    let lhs = determinant_attack_lhs(params, token)?;
    let d_pow_m = lhs.mul(&m_inv)?.det();

    // Least e >= 0 with d^e = d^(m-1), so m >= 1 is returned as e + 1.
    let shifted = d_pow_m.mul(&d.inv()?)?;
    let bound = (prime.p() - 1u32).to_u64().expect("checked bit size");
    let (found, work) = discrete_log_bsgs_counted(&d, &shifted, bound)?;
    let m = BigUint::from(found.ok_or(Error::NotFound)? + 1);

    let h1m = params.h1().pow(&m);
    let h2m = params.h2().pow(&m);
    if params.m().sandwich(&h1m, &h2m)? != lhs {
        return Err(Error::NotFound);
    }
    let key = replay(params, token, &m, peer_token)?;
    Ok(AttackOutcome {
        method: AttackMethod::Determinant,
        recovered_exponent: Some(m),
        recovered_key: key,
        work,
    })
}

/// Public matrices of the discrete-log embedding: `H1 = H2 = diag(h11, 1, 0)`
/// and
///
/// ```text
///     [ a11  0    0   ]
/// M = [ 0    a22  a23 ]
///     [ 0    0    a33 ]
/// ```
pub fn dl_embedding_params(
    prime: &SafePrime,
    a11: &Residue,
    h11: &Residue,
    a22: &Residue,
    a23: &Residue,
    a33: &Residue,
) -> Result<PublicParams> {
    let md = prime.modulus();
    let z = BigUint::zero();
    let m = MatrixZp::new(
        3,
        md,
        vec![
            a11.value().clone(), z.clone(), z.clone(),
            z.clone(), a22.value().clone(), a23.value().clone(),
            z.clone(), z.clone(), a33.value().clone(),
        ],
    )?;
    let h = MatrixZp::diagonal(md, &[h11.value().clone(), BigUint::one(), z])?;
    PublicParams::new(prime.clone(), m, h.clone(), h)
}

/// Closed form of the `(1,1)` entry of the token for exponent `m` in the
/// embedding: `a11 * sum_{i=0}^{m-1} h11^(2i)`, a geometric sum.
pub fn embedding_corner(a11: &Residue, h11: &Residue, m: &BigUint) -> Result<Residue> {
    let ratio = h11.mul(h11)?;
    let one = Residue::one(a11.modulus());
    let sum = if ratio.is_one() {
        Residue::new(m.clone(), a11.modulus())
    } else {
        ratio.pow(m).sub(&one)?.mul(&ratio.sub(&one)?.inv()?)?
    };
    a11.mul(&sum)
}

/// A forged instance whose token corresponds to `g^(2m) = target`.
#[derive(Clone, Debug)]
pub struct DlEmbedding {
    pub params: PublicParams,
    pub token: MatrixZp,
}

/// Builds the embedding with `a11 = 1`, `h11 = g`, `a22 = 0` and random
/// nonzero `a23`, `a33`.
///
/// The token then has `(1,1)` entry `(g^(2m) - 1) / (g^2 - 1)` for every
/// honest exponent `m`, so placing `(target - 1) / (g^2 - 1)` there yields a
/// genuine token whenever `target` lies in the subgroup generated by `g^2`.
/// The remaining entries of an honest token are independent of `m`
/// (`a23`, `a33` and zeros), so they are filled exactly.
pub fn build_dl_embedding<R: Rng + ?Sized>(
    prime: &SafePrime,
    g: &Residue,
    target: &Residue,
    rng: &mut R,
) -> Result<DlEmbedding> {
    let md = prime.modulus();
    if g.modulus() != md || target.modulus() != md {
        return Err(Error::ModulusMismatch);
    }
    let one = Residue::one(md);
    let g2_minus_1 = g.mul(g)?.sub(&one)?;
    if g2_minus_1.is_zero() || g.is_zero() {
        return Err(Error::InvalidArgument("g must have order greater than 2".into()));
    }
    let nonzero = |rng: &mut R| loop {
        let r = Residue::random(md, rng);
        if !r.is_zero() {
            break r;
        }
    };
    let a23 = nonzero(rng);
    let a33 = nonzero(rng);
    let params = dl_embedding_params(prime, &one, g, &Residue::zero(md), &a23, &a33)?;

    let corner = target.sub(&one)?.mul(&g2_minus_1.inv()?)?;
    let mut token = MatrixZp::zero(3, md);
    token.set(0, 0, corner.value());
    token.set(1, 2, a23.value());
    token.set(2, 2, a33.value());
    Ok(DlEmbedding { params, token })
}

/// Anything that can recover the private exponent from a public instance.
pub trait ExponentOracle: Sync {
    fn recover_exponent(&self, params: &PublicParams, token: &MatrixZp) -> Option<BigUint>;
}

impl<F> ExponentOracle for F
where
    F: Fn(&PublicParams, &MatrixZp) -> Option<BigUint> + Sync,
{
    fn recover_exponent(&self, params: &PublicParams, token: &MatrixZp) -> Option<BigUint> {
        self(params, token)
    }
}

/// [`brute_force_exponent`] as an oracle.
#[derive(Clone, Copy, Debug)]
pub struct BruteForceOracle {
    pub bound: u64,
}

impl ExponentOracle for BruteForceOracle {
    fn recover_exponent(&self, params: &PublicParams, token: &MatrixZp) -> Option<BigUint> {
        brute_force_exponent(params, token, None, self.bound).ok()?.recovered_exponent
    }
}

#[derive(Clone, Debug)]
pub struct DlReduction {
    /// Recovered `k` with `g^k = gk`, reduced below `p - 1`.
    pub k: BigUint,
    /// 0 if the embedding of `gk` succeeded, 1 for `g * gk`.
    pub branch: usize,
    pub exponent: BigUint,
}

/// Solves `g^k = gk` with one call to an exponent oracle per branch.
///
/// Branch 0 embeds `gk` and succeeds when `k` is even modulo the order of
/// `g`; branch 1 embeds `g * gk = g^(k+1)` and covers the odd case. For a
/// generator of Z_p^* with `p = 2q + 1` exactly one branch applies; the two
/// run on separate threads.
pub fn reduce_dlog_to_make<R, O>(
    prime: &SafePrime,
    g: &Residue,
    gk: &Residue,
    oracle: &O,
    rng: &mut R,
) -> Result<DlReduction>
where
    R: Rng + ?Sized,
    O: ExponentOracle + ?Sized,
{
    let instances = [
        build_dl_embedding(prime, g, gk, rng)?,
        build_dl_embedding(prime, g, &gk.mul(g)?, rng)?,
    ];
    let answers: Vec<Option<BigUint>> = std::thread::scope(|s| {
        let handles: Vec<_> = instances
            .iter()
            .map(|inst| s.spawn(move || oracle.recover_exponent(&inst.params, &inst.token)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("oracle thread panicked")).collect()
    });

    let order = prime.p() - 1u32;
    for (branch, m) in answers.into_iter().enumerate() {
        let Some(m) = m else { continue };
        if m.is_zero() {
            continue;
        }
        let k = ((&m << 1) - branch as u32) % &order;
        if &g.pow(&k) == gk {
            return Ok(DlReduction { k, branch, exponent: m });
        }
    }
    Err(Error::NotFound)
}
