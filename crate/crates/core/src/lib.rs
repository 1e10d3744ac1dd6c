//! Matrix action key exchange over Z_p.
//!
//! Two parties agree on public matrices `M`, `H1`, `H2` and each raise the
//! semidirect element `(M, (H1, H2))` to a private power, publishing only the
//! additive component. The shared key is the additive component of the
//! power with the sum of both exponents.

pub mod attacks;
pub mod codec;
pub mod error;
pub mod matrix;
pub mod modmath;
pub mod netdemo;
pub mod paramgen;
pub mod protocol;
pub mod semidirect;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::MatrixZp;
pub use modmath::{Modulus, Residue, SafePrime};
pub use paramgen::{PrivateExponent, PublicParams};
pub use protocol::{ExchangeState, SharedKey};
pub use semidirect::SemidirectElement;
