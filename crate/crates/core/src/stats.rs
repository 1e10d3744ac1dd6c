//! Uniformity checks on shared keys: single-entry histograms, histograms of
//! in-field means, pairwise joint histograms and Pearson chi-square tests.
//!
//! Values in `[0, p)` go into 10 bins of width `floor(p / 10)`; the at most
//! nine values past `10 * floor(p / 10)` are folded into the last bin.

use std::io::{self, Write};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::MatrixZp;
use crate::modmath::{Modulus, Residue};
use crate::paramgen::{gen_params_for_prime, PublicParams};
use crate::protocol::run_exchange;

pub const BINS: usize = 10;
pub const DEFAULT_TRIALS: u64 = 10_000;

/// Upper 0.001 quantile of chi-square with 9 degrees of freedom.
pub const CHI2_CRITICAL_9DF: f64 = 27.877;
/// Upper 0.001 quantile of chi-square with 99 degrees of freedom.
pub const CHI2_CRITICAL_99DF: f64 = 148.23;

/// Standard normal quantile at 0.999.
const Z_999: f64 = 3.090_232_306;

/// Critical value at α = 0.001. Tabulated for 9 and 99 degrees of freedom,
/// Wilson-Hilferty approximation otherwise.
pub fn chi2_critical_001(df: usize) -> f64 {
    match df {
        9 => CHI2_CRITICAL_9DF,
        99 => CHI2_CRITICAL_99DF,
        _ => {
            let k = df as f64;
            let t = 2.0 / (9.0 * k);
            k * (1.0 - t + Z_999 * t.sqrt()).powi(3)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Binning {
    p: BigUint,
    width: BigUint,
}

impl Binning {
    fn new(modulus: &Modulus) -> Self {
        let p = modulus.value().clone();
        let width = &p / BINS as u32;
        assert!(!width.is_zero(), "modulus must be at least {BINS}");
        Binning { p, width }
    }

    fn index(&self, v: &BigUint) -> usize {
        (v / &self.width).to_usize().unwrap_or(usize::MAX).min(BINS - 1)
    }

    fn bounds(&self, i: usize) -> (BigUint, BigUint) {
        let lo = &self.width * i;
        let hi = if i == BINS - 1 { &self.p - 1u32 } else { &self.width * (i + 1) - 1u32 };
        (lo, hi)
    }
}

/// Something with a flat table of counts to test for uniformity.
pub trait Tally {
    fn cells(&self) -> &[u64];
    fn trials(&self) -> u64;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    binning: Binning,
    counts: Vec<u64>,
    trials: u64,
}

impl Histogram {
    pub fn new(modulus: &Modulus) -> Self {
        Histogram { binning: Binning::new(modulus), counts: vec![0; BINS], trials: 0 }
    }

    pub fn record(&mut self, v: &BigUint) {
        self.counts[self.binning.index(v)] += 1;
        self.trials += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bin_width(&self) -> &BigUint {
        &self.binning.width
    }

    /// Adds another histogram over the same modulus.
    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.binning, other.binning, "histograms over different moduli");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.binning.bounds(i);
            writeln!(w, "{lo},{hi},{c}")?;
        }
        Ok(())
    }
}

impl Tally for Histogram {
    fn cells(&self) -> &[u64] {
        &self.counts
    }
    fn trials(&self) -> u64 {
        self.trials
    }
}

/// 10 x 10 joint histogram of two entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairHistogram {
    binning: Binning,
    counts: Vec<u64>,
    trials: u64,
}

impl PairHistogram {
    pub fn new(modulus: &Modulus) -> Self {
        PairHistogram { binning: Binning::new(modulus), counts: vec![0; BINS * BINS], trials: 0 }
    }

    pub fn record(&mut self, a: &BigUint, b: &BigUint) {
        self.counts[self.binning.index(a) * BINS + self.binning.index(b)] += 1;
        self.trials += 1;
    }

    pub fn count(&self, bin1: usize, bin2: usize) -> u64 {
        self.counts[bin1 * BINS + bin2]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin1,bin2,count")?;
        for i in 0..BINS {
            for j in 0..BINS {
                writeln!(w, "{i},{j},{}", self.count(i, j))?;
            }
        }
        Ok(())
    }
}

impl Tally for PairHistogram {
    fn cells(&self) -> &[u64] {
        &self.counts
    }
    fn trials(&self) -> u64 {
        self.trials
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub critical: f64,
    pub pass: bool,
}

/// Pearson statistic against the uniform expectation, judged at α = 0.001.
/// Requires at least ten trials per cell.
pub fn chi_square_uniform<T: Tally + ?Sized>(t: &T) -> Result<ChiSquare> {
    let cells = t.cells();
    let total: u64 = cells.iter().sum();
    let needed = 10 * cells.len() as u64;
    if total < needed {
        return Err(Error::Undersampled { needed, have: total });
    }
    let expected = total as f64 / cells.len() as f64;
    let statistic = cells.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let df = cells.len() - 1;
    let critical = chi2_critical_001(df);
    Ok(ChiSquare { statistic, df, critical, pass: statistic < critical })
}

/// Which entries a per-key mean is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanSelector {
    Row(usize),
    Column(usize),
    All,
}

/// Mean of the selected entries computed in Z_p: their sum times the
/// inverse of their count.
pub fn selected_mean(k: &MatrixZp, selector: MeanSelector) -> Result<Residue> {
    let n = k.dim();
    let positions: Vec<(usize, usize)> = match selector {
        MeanSelector::Row(r) if r < n => (0..n).map(|j| (r, j)).collect(),
        MeanSelector::Column(c) if c < n => (0..n).map(|i| (i, c)).collect(),
        MeanSelector::All => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
        _ => return Err(Error::InvalidArgument(format!("{selector:?} out of range for {n}x{n}"))),
    };
    let md = k.modulus();
    let mut sum = Residue::zero(md);
    for (i, j) in &positions {
        sum = sum.add(&k.residue(*i, *j))?;
    }
    sum.mul(&Residue::from_u64(positions.len() as u64, md).inv()?)
}

/// How each trial's parameters are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamsMode {
    /// Every trial reuses the template.
    Fixed,
    /// Fresh `M`, `H1`, `H2` over the template's prime for every trial.
    FreshMatrices,
}

/// Yields the shared key of `trials` independent exchanges with fresh
/// exponents.
pub fn sample_keys<'a, R: Rng + ?Sized>(
    template: &'a PublicParams,
    mode: ParamsMode,
    trials: u64,
    rng: &'a mut R,
) -> impl Iterator<Item = Result<MatrixZp>> + 'a {
    (0..trials).map(move |_| {
        let fresh;
        let params = match mode {
            ParamsMode::Fixed => template,
            ParamsMode::FreshMatrices => {
                fresh = gen_params_for_prime(template.prime().clone(), template.dim(), rng)?.0;
                &fresh
            }
        };
        let run = run_exchange(params, rng)?;
        if !run.agree() {
            return Err(Error::KeyMismatch);
        }
        Ok(run.alice.matrix().clone())
    })
}

fn check_position(k: &MatrixZp, (i, j): (usize, usize)) -> Result<()> {
    if i >= k.dim() || j >= k.dim() {
        return Err(Error::InvalidArgument(format!("position ({i},{j}) outside {0}x{0}", k.dim())));
    }
    Ok(())
}

pub fn entry_histogram<'a, I>(keys: I, modulus: &Modulus, pos: (usize, usize)) -> Result<Histogram>
where
    I: IntoIterator<Item = &'a MatrixZp>,
{
    let mut h = Histogram::new(modulus);
    for k in keys {
        check_position(k, pos)?;
        h.record(k.get(pos.0, pos.1));
    }
    Ok(h)
}

pub fn mean_histogram<'a, I>(keys: I, modulus: &Modulus, selector: MeanSelector) -> Result<Histogram>
where
    I: IntoIterator<Item = &'a MatrixZp>,
{
    let mut h = Histogram::new(modulus);
    for k in keys {
        h.record(selected_mean(k, selector)?.value());
    }
    Ok(h)
}

pub fn pair_histogram<'a, I>(
    keys: I,
    modulus: &Modulus,
    pos1: (usize, usize),
    pos2: (usize, usize),
) -> Result<PairHistogram>
where
    I: IntoIterator<Item = &'a MatrixZp>,
{
    if pos1 == pos2 {
        return Err(Error::InvalidArgument("pair positions must differ".into()));
    }
    let mut h = PairHistogram::new(modulus);
    for k in keys {
        check_position(k, pos1)?;
        check_position(k, pos2)?;
        h.record(k.get(pos1.0, pos1.1), k.get(pos2.0, pos2.1));
    }
    Ok(h)
}
