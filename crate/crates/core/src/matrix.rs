//! Dense square matrices over Z_p.

use std::cell::Cell;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::codec::{put_biguint, put_u32, Reader};
use crate::error::{Error, Result};
use crate::modmath::{inverse_mod, Modulus, Residue};

/// Largest dimension accepted when decoding untrusted input.
pub const MAX_DECODE_DIM: usize = 64;

thread_local! {
    static SCALAR_MULS: Cell<u64> = const { Cell::new(0) };
}

/// Number of Z_p multiplications performed by matrix products on this thread.
pub fn scalar_mul_count() -> u64 {
    SCALAR_MULS.with(|c| c.get())
}

pub fn reset_scalar_mul_count() {
    SCALAR_MULS.with(|c| c.set(0));
}

/// An `n x n` matrix over Z_p, stored row-major with canonical entries.
#[derive(Clone, PartialEq, Eq)]
pub struct MatrixZp {
    dim: usize,
    modulus: Modulus,
    entries: Vec<BigUint>,
}

impl fmt::Debug for MatrixZp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixZp[{:?}](", self.modulus)?;
        for i in 0..self.dim {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            write!(f, "[{}]", row.join(", "))?;
        }
        write!(f, ")")
    }
}

impl MatrixZp {
    pub fn new(dim: usize, modulus: &Modulus, entries: Vec<BigUint>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::ShapeMismatch(format!("dimension must be at least 2, got {dim}")));
        }
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        let entries = entries.iter().map(|e| modulus.reduce(e)).collect();
        Ok(MatrixZp { dim, modulus: modulus.clone(), entries })
    }

    pub fn from_u64(dim: usize, modulus: &Modulus, entries: &[u64]) -> Result<Self> {
        Self::new(dim, modulus, entries.iter().map(|&e| BigUint::from(e)).collect())
    }

    pub fn zero(dim: usize, modulus: &Modulus) -> Self {
        assert!(dim >= 2, "dimension must be at least 2");
        MatrixZp { dim, modulus: modulus.clone(), entries: vec![BigUint::zero(); dim * dim] }
    }

    pub fn identity(dim: usize, modulus: &Modulus) -> Self {
        let mut m = Self::zero(dim, modulus);
        for i in 0..dim {
            m.entries[i * dim + i] = BigUint::one();
        }
        m
    }

    pub fn diagonal(modulus: &Modulus, diag: &[BigUint]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![BigUint::zero(); dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = d.clone();
        }
        Self::new(dim, modulus, entries)
    }

    /// Entries drawn independently and uniformly from Z_p.
    pub fn random<R: Rng + ?Sized>(dim: usize, modulus: &Modulus, rng: &mut R) -> Self {
        assert!(dim >= 2, "dimension must be at least 2");
        let entries = (0..dim * dim).map(|_| rng.gen_biguint_below(modulus.value())).collect();
        MatrixZp { dim, modulus: modulus.clone(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn entries(&self) -> &[BigUint] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &BigUint {
        &self.entries[i * self.dim + j]
    }

    pub fn residue(&self, i: usize, j: usize) -> Residue {
        Residue::new(self.get(i, j).clone(), &self.modulus)
    }

    pub fn set(&mut self, i: usize, j: usize, v: &BigUint) {
        self.entries[i * self.dim + j] = self.modulus.reduce(v);
    }

    pub fn row(&self, i: usize) -> &[BigUint] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    fn check(&self, other: &MatrixZp) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!("{}x{0} vs {}x{1}", self.dim, other.dim)));
        }
        Ok(())
    }

    fn p(&self) -> &BigUint {
        self.modulus.value()
    }

    pub fn add(&self, other: &MatrixZp) -> Result<MatrixZp> {
        self.check(other)?;
        let p = self.p();
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                let s = a + b;
                if &s >= p {
                    s - p
                } else {
                    s
                }
            })
            .collect();
        Ok(MatrixZp { dim: self.dim, modulus: self.modulus.clone(), entries })
    }

    pub fn neg(&self) -> MatrixZp {
        let p = self.p();
        let entries = self
            .entries
            .iter()
            .map(|a| if a.is_zero() { BigUint::zero() } else { p - a })
            .collect();
        MatrixZp { dim: self.dim, modulus: self.modulus.clone(), entries }
    }

    pub fn sub(&self, other: &MatrixZp) -> Result<MatrixZp> {
        self.add(&other.neg())
    }

    pub fn scalar(&self, c: &Residue) -> Result<MatrixZp> {
        if c.modulus() != &self.modulus {
            return Err(Error::ModulusMismatch);
        }
        let p = self.p();
        let entries = self.entries.iter().map(|a| (a * c.value()) % p).collect();
        Ok(MatrixZp { dim: self.dim, modulus: self.modulus.clone(), entries })
    }

    /// Row-by-column product. Each output entry accumulates its `n` products
    /// before a single reduction.
    pub fn mul(&self, other: &MatrixZp) -> Result<MatrixZp> {
        self.check(other)?;
        let n = self.dim;
        let p = self.p();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = self.row(i);
            for j in 0..n {
                let mut acc = BigUint::zero();
                for (k, a) in row.iter().enumerate() {
                    let b = &other.entries[k * n + j];
                    if !a.is_zero() && !b.is_zero() {
                        acc += a * b;
                    }
                }
                entries.push(if &acc >= p { acc % p } else { acc });
            }
        }
        SCALAR_MULS.with(|c| c.set(c.get() + (n * n * n) as u64));
        Ok(MatrixZp { dim: n, modulus: self.modulus.clone(), entries })
    }

    /// `left * self * right`, the two-sided action.
    pub fn sandwich(&self, left: &MatrixZp, right: &MatrixZp) -> Result<MatrixZp> {
        left.mul(self)?.mul(right)
    }

    pub fn commutes_with(&self, other: &MatrixZp) -> Result<bool> {
        Ok(self.mul(other)? == other.mul(self)?)
    }

    /// `self^e` by square-and-multiply; `e = 0` gives the identity.
    pub fn pow(&self, e: &BigUint) -> MatrixZp {
        let mut acc = MatrixZp::identity(self.dim, &self.modulus);
        for i in (0..e.bits()).rev() {
            acc = acc.mul(&acc).expect("same shape");
            if e.bit(i) {
                acc = acc.mul(self).expect("same shape");
            }
        }
        acc
    }

    pub fn pow_u64(&self, e: u64) -> MatrixZp {
        self.pow(&BigUint::from(e))
    }

    /// Row-echelon reduction in place over a working copy. Returns the
    /// reduced rows, the pivot count and the sign/scale needed for the
    /// determinant.
    fn echelon(&self) -> (Vec<Vec<BigUint>>, usize, Residue) {
        let n = self.dim;
        let p = self.p();
        let mut rows: Vec<Vec<BigUint>> = (0..n).map(|i| self.row(i).to_vec()).collect();
        let mut det = Residue::one(&self.modulus);
        let mut rank = 0;
        for col in 0..n {
            let Some(pivot) = (rank..n).find(|&r| !rows[r][col].is_zero()) else {
                det = Residue::zero(&self.modulus);
                continue;
            };
            if pivot != rank {
                rows.swap(pivot, rank);
                det = det.neg();
            }
            let pv = rows[rank][col].clone();
            det = det.mul(&Residue::new(pv.clone(), &self.modulus)).expect("same modulus");
            let inv = inverse_mod(&pv, p).expect("nonzero mod prime");
            let (top, below) = rows.split_at_mut(rank + 1);
            let pivot_row = &top[rank];
            for row in below.iter_mut().filter(|row| !row[col].is_zero()) {
                let factor = (&row[col] * &inv) % p;
                for (cur, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    let sub = (&factor * pv) % p;
                    *cur = if *cur >= sub { &*cur - &sub } else { &*cur + p - &sub };
                }
            }
            rank += 1;
        }
        (rows, rank, det)
    }

    /// Determinant by Gaussian elimination over the field Z_p.
    pub fn det(&self) -> Residue {
        self.echelon().2
    }

    pub fn rank(&self) -> usize {
        self.echelon().1
    }

    /// Gauss-Jordan inverse, `None` when the determinant is zero.
    pub fn inverse(&self) -> Option<MatrixZp> {
        let n = self.dim;
        let p = self.p();
        let mut a: Vec<Vec<BigUint>> = (0..n).map(|i| self.row(i).to_vec()).collect();
        let mut inv: Vec<Vec<BigUint>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { BigUint::one() } else { BigUint::zero() }).collect())
            .collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(pivot, col);
            inv.swap(pivot, col);
            let pinv = inverse_mod(&a[col][col], p)?;
            for c in 0..n {
                a[col][c] = (&a[col][c] * &pinv) % p;
                inv[col][c] = (&inv[col][c] * &pinv) % p;
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let factor = a[r][col].clone();
                for c in 0..n {
                    let s1 = (&factor * &a[col][c]) % p;
                    a[r][c] = (&a[r][c] + p - s1) % p;
                    let s2 = (&factor * &inv[col][c]) % p;
                    inv[r][c] = (&inv[r][c] + p - s2) % p;
                }
            }
        }
        Some(MatrixZp { dim: n, modulus: self.modulus.clone(), entries: inv.concat() })
    }

    /// Canonical encoding: dimension as a 4-byte big-endian integer, then the
    /// `n^2` entries row-major, each length-prefixed.
    pub fn write_to(&self, buf: &mut Vec<u8>) {
        put_u32(buf, self.dim as u32);
        for e in &self.entries {
            put_biguint(buf, e);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf);
        buf
    }

    /// Decodes a matrix whose modulus is known from context.
    pub fn read_from(r: &mut Reader<'_>, modulus: &Modulus) -> Result<MatrixZp> {
        let dim = r.u32()? as usize;
        if !(2..=MAX_DECODE_DIM).contains(&dim) {
            return Err(Error::Decode(format!("matrix dimension {dim} out of range")));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            let e = r.biguint()?;
            if &e >= modulus.value() {
                return Err(Error::Decode("matrix entry not reduced modulo p".into()));
            }
            entries.push(e);
        }
        Ok(MatrixZp { dim, modulus: modulus.clone(), entries })
    }

    pub fn from_bytes(bytes: &[u8], modulus: &Modulus) -> Result<MatrixZp> {
        let mut r = Reader::new(bytes);
        let m = Self::read_from(&mut r, modulus)?;
        r.finish()?;
        Ok(m)
    }
}
