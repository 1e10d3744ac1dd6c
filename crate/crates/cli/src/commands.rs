use std::fs::{self, File};
use std::io::BufWriter;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use make_kex::attacks::{
    brute_force_exponent, determinant_attack, reduce_dlog_to_make, AttackMethod, AttackOutcome, BruteForceOracle,
};
use make_kex::codec::MAGIC;
use make_kex::matrix::{reset_scalar_mul_count, scalar_mul_count};
use make_kex::modmath::{gen_safe_prime, safe_prime_order};
use make_kex::netdemo::{connect, serve_on};
use make_kex::paramgen::{gen_invertible_h_params, gen_params_for_prime, gen_private_exponent, validate_params};
use make_kex::protocol::{classic_dh_with, run_exchange};
use make_kex::stats::{
    chi_square_uniform, entry_histogram, mean_histogram, pair_histogram, sample_keys, MeanSelector, ParamsMode,
    Tally,
};
use make_kex::{Error, ExchangeState, MatrixZp, PrivateExponent, PublicParams, Residue, Result, SafePrime};
use num_bigint::{BigUint, RandBigInt};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::report::RunReport;
use crate::ParamsArgs;

/// Published estimate of scalar multiplications per 3x3 semidirect squaring.
pub const REFERENCE_MULS_PER_SQUARING: u64 = 24;

pub const DEFAULT_BRUTE_BOUND: u64 = 1 << 20;

pub fn seeded(seed: Option<u64>) -> (u64, ChaCha20Rng) {
    let seed = seed.unwrap_or_else(rand::random);
    (seed, ChaCha20Rng::seed_from_u64(seed))
}

/// Reads either the binary form or the hex text fixture.
pub fn load_params(path: &Path) -> Result<PublicParams> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        PublicParams::from_bytes(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Decode("params file is neither binary nor text".into()))?;
        PublicParams::from_hex_fixture(&text)
    }
}

fn prime_for(args: &ParamsArgs, default_bits: u64, rng: &mut ChaCha20Rng) -> Result<SafePrime> {
    if args.builtin_prime {
        Ok(SafePrime::builtin_2000())
    } else {
        gen_safe_prime(args.bits.unwrap_or(default_bits), rng)
    }
}

/// Loads `--params` or generates compliant parameters.
fn resolve_params(args: &ParamsArgs, default_bits: u64, rng: &mut ChaCha20Rng) -> Result<PublicParams> {
    match &args.params {
        Some(path) => load_params(path),
        None => Ok(gen_params_for_prime(prime_for(args, default_bits, rng)?, args.dim, rng)?.0),
    }
}

fn describe(report: &mut RunReport, params: &PublicParams) {
    report.field("prime_bits", params.prime().bits()).field("dim", params.dim());
}

pub fn gen(args: &ParamsArgs, seed: Option<u64>, out: &Path, hex: bool) -> Result<RunReport> {
    let (seed, mut rng) = seeded(seed);
    let t = Instant::now();
    let params = resolve_params(args, 64, &mut rng)?;
    let elapsed = t.elapsed();
    let body = if hex { params.to_hex_fixture().into_bytes() } else { params.to_bytes() };
    fs::write(out, &body)?;
    // Read back what was written.
    let back = load_params(out)?;
    let mut report = RunReport::new("gen");
    report.field("seed", seed);
    describe(&mut report, &params);
    report
        .field("format", if hex { "hex" } else { "binary" })
        .field("out", out.display())
        .field("bytes", body.len())
        .field("round_trip", back == params)
        .field("valid", validate_params(&params).is_empty())
        .time("generate", elapsed);
    Ok(report)
}

pub fn exchange(args: &ParamsArgs, seed: Option<u64>) -> Result<RunReport> {
    let (seed, mut rng) = seeded(seed);
    let params = resolve_params(args, 64, &mut rng)?;
    let t = Instant::now();
    let run = run_exchange(&params, &mut rng)?;
    let wall = t.elapsed();
    let agree = run.agree();
    let mut report = RunReport::new("exchange");
    report.field("seed", seed);
    describe(&mut report, &params);
    report
        .field("token_bytes", run.transcript.messages.iter().map(Vec::len).sum::<usize>())
        .field("digest_a", run.alice.digest_hex())
        .field("digest_b", run.bob.digest_hex())
        .field("key_agree", agree)
        .time("initiate_a", run.transcript.alice_initiate)
        .time("initiate_b", run.transcript.bob_initiate)
        .time("finalize_a", run.transcript.alice_finalize)
        .time("finalize_b", run.transcript.bob_finalize)
        .time("total", wall);
    if !agree {
        report.exit_code = 1;
    }
    Ok(report)
}

pub struct AttackArgs<'a> {
    pub method: AttackMethod,
    pub params: &'a ParamsArgs,
    pub seed: Option<u64>,
    pub bound: Option<u64>,
    pub allow_invertible_h: bool,
    pub secret: Option<u64>,
    pub generator: Option<u64>,
    pub target_exponent: Option<u64>,
}

/// Honest victim: returns params, the victim's token, the peer's token and
/// the key both parties derive.
struct Victim {
    params: PublicParams,
    secret: BigUint,
    token: MatrixZp,
    peer_token: MatrixZp,
    key: MatrixZp,
}

fn victim(params: PublicParams, secret: BigUint, rng: &mut ChaCha20Rng) -> Result<Victim> {
    let mut a = ExchangeState::initiate_unchecked(&params, PrivateExponent::new(secret.clone())?)?;
    let n = gen_private_exponent(params.prime().q(), rng)?;
    let mut b = ExchangeState::initiate_unchecked(&params, n)?;
    let key = a.finalize(b.sent_token())?.matrix().clone();
    b.finalize(a.sent_token())?;
    let (token, peer_token) = (a.sent_token().clone(), b.sent_token().clone());
    Ok(Victim { params, secret, token, peer_token, key })
}

fn report_outcome(report: &mut RunReport, v: &Victim, outcome: Result<AttackOutcome>) -> Result<()> {
    match outcome {
        Ok(o) => {
            let m = o.recovered_exponent.as_ref();
            report
                .field("status", "recovered")
                .field("recovered_exponent", m.map(|m| m.to_string()).unwrap_or_default())
                .field("exponent_match", m == Some(&v.secret))
                .field("key_match", o.recovered_key.as_ref() == Some(&v.key))
                .field("work", o.work);
        }
        Err(Error::NotFound) => {
            report.field("status", "not_found");
            report.exit_code = 3;
        }
        Err(Error::AttackInapplicable(why)) => {
            report.field("status", "inapplicable").field("reason", why);
            report.exit_code = 3;
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

pub fn attack(a: &AttackArgs<'_>) -> Result<RunReport> {
    let (seed, mut rng) = seeded(a.seed);
    let mut report = RunReport::new("attack");
    report.field("seed", seed).field("method", a.method);
    match a.method {
        AttackMethod::BruteForce => {
            let params = resolve_params(a.params, 16, &mut rng)?;
            let secret = match a.secret {
                Some(m) => BigUint::from(m),
                None => gen_private_exponent(params.prime().q(), &mut rng)?.value().clone(),
            };
            let v = victim(params, secret, &mut rng)?;
            describe(&mut report, &v.params);
            let bound = a.bound.unwrap_or(DEFAULT_BRUTE_BOUND);
            report.field("bound", bound).field("secret", &v.secret);
            let t = Instant::now();
            let outcome = brute_force_exponent(&v.params, &v.token, Some(&v.peer_token), bound);
            report.time("attack", t.elapsed());
            report_outcome(&mut report, &v, outcome)?;
        }
        AttackMethod::Determinant => {
            let params = match (&a.params.params, a.allow_invertible_h) {
                (Some(path), _) => load_params(path)?,
                (None, true) => {
                    let prime = prime_for(a.params, 20, &mut rng)?;
                    gen_invertible_h_params(prime, a.params.dim, &mut rng)?
                }
                (None, false) => resolve_params(a.params, 20, &mut rng)?,
            };
            let secret = match a.secret {
                Some(m) => BigUint::from(m),
                None if a.allow_invertible_h => {
                    // Any exponent below the group order.
                    rng.gen_biguint_range(&BigUint::from(1u8), &(params.prime().p() - 1u32))
                }
                None => gen_private_exponent(params.prime().q(), &mut rng)?.value().clone(),
            };
            let v = victim(params, secret, &mut rng)?;
            describe(&mut report, &v.params);
            report
                .field("adversarial", a.allow_invertible_h)
                .field("violations", validate_params(&v.params).len())
                .field("secret", &v.secret);
            let t = Instant::now();
            let outcome = determinant_attack(&v.params, &v.token, Some(&v.peer_token));
            report.time("attack", t.elapsed());
            report_outcome(&mut report, &v, outcome)?;
        }
        AttackMethod::DlReduction => {
            let prime = match (a.params.bits, a.params.builtin_prime) {
                (_, true) => return Err(Error::InvalidArgument("dlreduce needs a small prime".into())),
                (Some(bits), _) => gen_safe_prime(bits, &mut rng)?,
                (None, _) => SafePrime::new(BigUint::from(2027u32))?,
            };
            let md = prime.modulus();
            let g = match a.generator {
                Some(g) => Residue::from_u64(g, md),
                None => generator(&prime)?,
            };
            let k = match a.target_exponent {
                Some(k) => BigUint::from(k),
                None => rng.gen_biguint_below(&(prime.p() - 1u32)),
            };
            let gk = g.pow(&k);
            let bound = a.bound.unwrap_or_else(|| prime.p().try_into().unwrap_or(DEFAULT_BRUTE_BOUND));
            report
                .field("prime", prime.p())
                .field("generator", g.value())
                .field("target_exponent", &k)
                .field("target", gk.value())
                .field("bound", bound);
            let t = Instant::now();
            let outcome = reduce_dlog_to_make(&prime, &g, &gk, &BruteForceOracle { bound }, &mut rng);
            report.time("attack", t.elapsed());
            match outcome {
                Ok(r) => {
                    report
                        .field("status", "recovered")
                        .field("recovered_k", &r.k)
                        .field("branch", r.branch)
                        .field("oracle_exponent", &r.exponent)
                        .field("verified", g.pow(&r.k) == gk);
                }
                Err(Error::NotFound) => {
                    report.field("status", "not_found");
                    report.exit_code = 3;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

/// Smallest generator of Z_p^*.
fn generator(prime: &SafePrime) -> Result<Residue> {
    let order = prime.p() - 1u32;
    (2u64..)
        .map(|g| Residue::from_u64(g, prime.modulus()))
        .find(|g| safe_prime_order(g, prime).map(|o| o == order).unwrap_or(false))
        .ok_or(Error::NotFound)
}

fn write_csv(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    f(BufWriter::new(File::create(&path)?))?;
    Ok(path)
}

pub fn stats(args: &ParamsArgs, seed: Option<u64>, trials: u64, fresh: bool, csv: Option<&Path>) -> Result<RunReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let (seed, mut rng) = seeded(seed);
    let params = resolve_params(args, 200, &mut rng)?;
    let mode = if fresh { ParamsMode::FreshMatrices } else { ParamsMode::Fixed };
    let t = Instant::now();
    let keys: Vec<MatrixZp> = sample_keys(&params, mode, trials, &mut rng).collect::<Result<_>>()?;
    let sampling = t.elapsed();
    let md = params.prime().modulus();

    let entry = entry_histogram(&keys, md, (0, 0))?;
    let pair = pair_histogram(&keys, md, (0, 0), (1, 1))?;
    let means = [
        ("mean_row1", MeanSelector::Row(0)),
        ("mean_col1", MeanSelector::Column(0)),
        ("mean_all", MeanSelector::All),
    ];
    let mean_hists = means
        .iter()
        .map(|(name, sel)| Ok((*name, mean_histogram(&keys, md, *sel)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut report = RunReport::new("stats");
    report.field("seed", seed);
    describe(&mut report, &params);
    report.field("trials", trials).field("fresh_matrices", fresh);

    let chi = |report: &mut RunReport, name: &str, t: &dyn Tally| match chi_square_uniform(t) {
        Ok(c) => {
            report
                .field(format!("{name}.chi2"), format!("{:.3}", c.statistic))
                .field(format!("{name}.df"), c.df)
                .field(format!("{name}.critical"), c.critical)
                .field(format!("{name}.pass"), c.pass);
        }
        Err(Error::Undersampled { needed, .. }) => {
            report.field(format!("{name}.pass"), format!("undersampled (need {needed} trials)"));
        }
        Err(e) => {
            report.field(format!("{name}.pass"), format!("error: {e}"));
        }
    };
    chi(&mut report, "entry_1_1", &entry);
    chi(&mut report, "pair_11_22", &pair);
    for (name, h) in &mean_hists {
        chi(&mut report, name, h);
    }

    if let Some(dir) = csv {
        fs::create_dir_all(dir)?;
        let mut files = vec![
            write_csv(dir, "entry_1_1.csv", |w| entry.write_csv(w))?,
            write_csv(dir, "pair_11_22.csv", |w| pair.write_csv(w))?,
        ];
        for (name, h) in &mean_hists {
            files.push(write_csv(dir, &format!("{name}.csv"), |w| h.write_csv(w))?);
        }
        let list: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
        report.field("csv", list.join(","));
    }
    report.time("sampling", sampling);
    Ok(report)
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Scalar multiplications spent on one squaring of a `dim x dim` element.
pub fn muls_per_squaring(params: &PublicParams) -> u64 {
    let base = params.base();
    reset_scalar_mul_count();
    let _ = base.square();
    scalar_mul_count()
}

pub fn bench(bits: &[u64], dim: usize, trials: usize, seed: Option<u64>) -> Result<RunReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let (seed, mut rng) = seeded(seed);
    let mut report = RunReport::new("bench");
    report.field("seed", seed).field("dim", dim).field("trials", trials);
    let mut squaring_count = None;
    for &b in bits {
        let prime = if b == 2000 { SafePrime::builtin_2000() } else { gen_safe_prime(b, &mut rng)? };
        let (params, _) = gen_params_for_prime(prime.clone(), dim, &mut rng)?;
        let g = generator(&prime)?;
        let mut make_times = Vec::with_capacity(trials);
        let mut dh_times = Vec::with_capacity(trials);
        for _ in 0..trials {
            let t = Instant::now();
            let run = run_exchange(&params, &mut rng)?;
            make_times.push(t.elapsed());
            if !run.agree() {
                return Err(Error::KeyMismatch);
            }
            // Same exponent range as the matrix exchange.
            let m = gen_private_exponent(prime.q(), &mut rng)?;
            let n = gen_private_exponent(prime.q(), &mut rng)?;
            let t = Instant::now();
            let dh = classic_dh_with(&g, m.value(), n.value())?;
            dh_times.push(t.elapsed());
            if !dh.agree() {
                return Err(Error::KeyMismatch);
            }
        }
        let (mk, dh) = (median(make_times), median(dh_times));
        let ratio = mk.as_secs_f64() / dh.as_secs_f64();
        report
            .field(format!("bits_{b}.prime_bits"), prime.bits())
            .field(format!("bits_{b}.make_median_ms"), format!("{:.3}", mk.as_secs_f64() * 1e3))
            .field(format!("bits_{b}.dh_median_ms"), format!("{:.3}", dh.as_secs_f64() * 1e3))
            .field(format!("bits_{b}.ratio"), format!("{ratio:.2}"));
        if squaring_count.is_none() {
            squaring_count = Some(muls_per_squaring(&params));
        }
    }
    if let Some(c) = squaring_count {
        report
            .field("muls_per_squaring", c)
            .field("muls_per_squaring_reference", REFERENCE_MULS_PER_SQUARING);
    }
    Ok(report)
}

fn session_report(command: &'static str, seed: u64, outcome: Result<make_kex::netdemo::SessionOutcome>) -> Result<RunReport> {
    let mut report = RunReport::new(command);
    report.field("seed", seed);
    match outcome {
        Ok(o) => {
            describe(&mut report, o.state.params());
            report.field("digest", o.digest_hex()).field("key_agree", true);
        }
        Err(Error::KeyMismatch) => {
            report.field("key_agree", false).field("error", "KeyMismatch");
            report.exit_code = 1;
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

pub fn serve(listen: &str, args: &ParamsArgs, seed: Option<u64>) -> Result<RunReport> {
    let (seed, mut rng) = seeded(seed);
    let params = resolve_params(args, 64, &mut rng)?;
    let listener = TcpListener::bind(listen)?;
    // Announced before blocking so callers binding port 0 can find us.
    println!("listening={}", listener.local_addr()?);
    let t = Instant::now();
    let outcome = serve_on(&listener, &params, &mut rng);
    let mut report = session_report("serve", seed, outcome)?;
    report.time("session", t.elapsed());
    Ok(report)
}

pub fn connect_cmd(remote: &str, seed: Option<u64>) -> Result<RunReport> {
    let (seed, mut rng) = seeded(seed);
    let t = Instant::now();
    let outcome = connect(remote, &mut rng);
    let mut report = session_report("connect", seed, outcome)?;
    report.time("session", t.elapsed());
    Ok(report)
}
