//! One party's view of the key exchange, and the scalar Diffie-Hellman
//! baseline it is benchmarked against.
//!
//! Each party raises `(M, (H1, H2))` to its secret `m`, obtaining
//! `(A, (H1^m, H2^m))`, and transmits only `A`. On receiving the peer's
//! token `B` it computes `K = H1^m B H2^m + A`, which is the additive part
//! of `(M, (H1, H2))^(m+n)` for both parties.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::{BigUint, RandBigInt};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::codec::{Reader, MAGIC, VERSION};
use crate::error::{Error, Result};
use crate::matrix::MatrixZp;
use crate::modmath::{Modulus, Residue};
use crate::paramgen::{gen_private_exponent, validate_params, PrivateExponent, PublicParams};
use crate::semidirect::SemidirectElement;

/// Message-type byte of a token message.
pub const MSG_TOKEN: u8 = 0x01;

/// The agreed matrix and its SHA-256 digest.
#[derive(Clone, PartialEq, Eq)]
pub struct SharedKey {
    k: MatrixZp,
    digest: [u8; 32],
}

impl fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SharedKey({})", self.digest_hex())
    }
}

impl SharedKey {
    pub fn from_matrix(k: MatrixZp) -> Self {
        let digest = Sha256::digest(k.to_bytes()).into();
        SharedKey { k, digest }
    }

    pub fn matrix(&self) -> &MatrixZp {
        &self.k
    }

    /// Hash of the canonical serialization of `K`.
    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }
}

/// State held by one party.
#[derive(Clone)]
pub struct ExchangeState {
    params: PublicParams,
    secret: PrivateExponent,
    own_power: SemidirectElement,
    received: Option<MatrixZp>,
    shared: Option<SharedKey>,
}

impl fmt::Debug for ExchangeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExchangeState")
            .field("dim", &self.params.dim())
            .field("prime_bits", &self.params.prime().bits())
            .field("finalized", &self.shared.is_some())
            .finish_non_exhaustive()
    }
}

impl ExchangeState {
    /// Computes `(M, (H1, H2))^secret`. Rejects parameters that fail
    /// [`validate_params`].
    pub fn initiate(params: &PublicParams, secret: PrivateExponent) -> Result<Self> {
        let violations = validate_params(params);
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        Self::initiate_unchecked(params, secret)
    }

    /// As [`initiate`](Self::initiate) without the validity checks. Used by
    /// the attack harness, which deliberately runs on broken parameters.
    pub fn initiate_unchecked(params: &PublicParams, secret: PrivateExponent) -> Result<Self> {
        let own_power = params.base().pow(secret.value())?;
        Ok(ExchangeState { params: params.clone(), secret, own_power, received: None, shared: None })
    }

    pub fn params(&self) -> &PublicParams {
        &self.params
    }

    pub fn secret(&self) -> &PrivateExponent {
        &self.secret
    }

    /// `(A, (H1^m, H2^m))`. Never transmitted.
    pub fn own_power(&self) -> &SemidirectElement {
        &self.own_power
    }

    /// The token `A` sent to the peer.
    pub fn sent_token(&self) -> &MatrixZp {
        self.own_power.additive()
    }

    pub fn received_token(&self) -> Option<&MatrixZp> {
        self.received.as_ref()
    }

    pub fn shared_key(&self) -> Option<&SharedKey> {
        self.shared.as_ref()
    }

    pub fn token_message(&self) -> Vec<u8> {
        encode_token_message(self.sent_token())
    }

    /// `K = H1^m B H2^m + A` using the pair retained from exponentiation.
    pub fn finalize(&mut self, received: &MatrixZp) -> Result<SharedKey> {
        let k = received
            .sandwich(self.own_power.left(), self.own_power.right())?
            .add(self.own_power.additive())?;
        let key = SharedKey::from_matrix(k);
        self.received = Some(received.clone());
        self.shared = Some(key.clone());
        Ok(key)
    }
}

/// `MAKE`, version, type `0x01`, then the canonical matrix.
pub fn encode_token_message(token: &MatrixZp) -> Vec<u8> {
    let mut buf = Vec::with_capacity(6 + token.entries().len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(MSG_TOKEN);
    token.write_to(&mut buf);
    buf
}

pub fn decode_token_message(bytes: &[u8], modulus: &Modulus) -> Result<MatrixZp> {
    let mut r = Reader::new(bytes);
    r.header()?;
    let ty = r.u8()?;
    if ty != MSG_TOKEN {
        return Err(Error::Decode(format!("expected token message, got type 0x{ty:02x}")));
    }
    let m = MatrixZp::read_from(&mut r, modulus)?;
    r.finish()?;
    Ok(m)
}

/// Public record of one exchange.
#[derive(Clone, Debug)]
pub struct Transcript {
    /// Messages in the order sent: Alice's token, then Bob's.
    pub messages: Vec<Vec<u8>>,
    pub token_a: MatrixZp,
    pub token_b: MatrixZp,
    pub alice_initiate: Duration,
    pub bob_initiate: Duration,
    pub alice_finalize: Duration,
    pub bob_finalize: Duration,
}

impl Transcript {
    pub fn total(&self) -> Duration {
        self.alice_initiate + self.bob_initiate + self.alice_finalize + self.bob_finalize
    }
}

#[derive(Clone, Debug)]
pub struct ExchangeRun {
    pub alice: SharedKey,
    pub bob: SharedKey,
    pub transcript: Transcript,
}

impl ExchangeRun {
    pub fn agree(&self) -> bool {
        self.alice == self.bob
    }
}

/// Runs both parties in-process with fresh secrets.
pub fn run_exchange<R: Rng + ?Sized>(params: &PublicParams, rng: &mut R) -> Result<ExchangeRun> {
    let m = gen_private_exponent(params.prime().q(), rng)?;
    let n = gen_private_exponent(params.prime().q(), rng)?;
    run_exchange_with(params, m, n)
}

pub fn run_exchange_with(params: &PublicParams, m: PrivateExponent, n: PrivateExponent) -> Result<ExchangeRun> {
    let t = Instant::now();
    let mut alice = ExchangeState::initiate(params, m)?;
    let alice_initiate = t.elapsed();
    let msg_a = alice.token_message();

    let t = Instant::now();
    let mut bob = ExchangeState::initiate(params, n)?;
    let bob_initiate = t.elapsed();
    let msg_b = bob.token_message();

    let md = params.prime().modulus();
    let t = Instant::now();
    let alice_key = alice.finalize(&decode_token_message(&msg_b, md)?)?;
    let alice_finalize = t.elapsed();
    let t = Instant::now();
    let bob_key = bob.finalize(&decode_token_message(&msg_a, md)?)?;
    let bob_finalize = t.elapsed();

    Ok(ExchangeRun {
        alice: alice_key,
        bob: bob_key,
        transcript: Transcript {
            messages: vec![msg_a, msg_b],
            token_a: alice.sent_token().clone(),
            token_b: bob.sent_token().clone(),
            alice_initiate,
            bob_initiate,
            alice_finalize,
            bob_finalize,
        },
    })
}

/// Result of the scalar baseline: both parties' `g^(mn)`.
#[derive(Clone, Debug)]
pub struct ClassicDhRun {
    pub alice_token: Residue,
    pub bob_token: Residue,
    pub alice_key: Residue,
    pub bob_key: Residue,
}

impl ClassicDhRun {
    pub fn agree(&self) -> bool {
        self.alice_key == self.bob_key
    }
}

/// Classic Diffie-Hellman in Z_p^* with exponents drawn below `p - 1`.
pub fn classic_dh_exchange<R: Rng + ?Sized>(g: &Residue, rng: &mut R) -> Result<ClassicDhRun> {
    let upper = g.modulus().value() - 1u32;
    let one = BigUint::from(1u8);
    let m = rng.gen_biguint_range(&one, &upper);
    let n = rng.gen_biguint_range(&one, &upper);
    classic_dh_with(g, &m, &n)
}

pub fn classic_dh_with(g: &Residue, m: &BigUint, n: &BigUint) -> Result<ClassicDhRun> {
    if g.is_zero() {
        return Err(Error::InvalidArgument("generator must be nonzero".into()));
    }
    let alice_token = g.pow(m);
    let bob_token = g.pow(n);
    let alice_key = bob_token.pow(m);
    let bob_key = alice_token.pow(n);
    Ok(ClassicDhRun { alice_token, bob_token, alice_key, bob_key })
}
