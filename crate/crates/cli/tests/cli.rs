mod common;

use std::fs;

use common::{finish_server, run, spawn_server};
use make_kex::{PublicParams, SafePrime};

#[test]
fn gen_is_reproducible_and_parses() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for p in [&a, &b] {
        let r = run(&["gen", "--bits", "16", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(r.code, 0);
        assert_eq!(r.get("round_trip"), "true");
        assert_eq!(r.get("valid"), "true");
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let params = PublicParams::from_bytes(&bytes).unwrap();
    assert_eq!(params.prime().bits(), 16);
    assert_eq!(params.dim(), 3);
}

#[test]
fn gen_builtin_prime_hex() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.txt");
    let r = run(&["gen", "--builtin-prime", "--hex", "--dim", "2", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    let params = PublicParams::from_hex_fixture(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(params.prime(), &SafePrime::builtin_2000());
    assert_eq!(params.dim(), 2);
}

#[test]
fn exchange_reports_equal_digests() {
    let r = run(&["exchange", "--bits", "32", "--dim", "2", "--seed", "5"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.get("key_agree"), "true");
    let (a, b) = (r.get("digest_a"), r.get("digest_b"));
    assert_eq!(a.len(), 64);
    assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(a, b);
    assert!(r.fields.contains_key("time.total_ms"));
}

#[test]
fn exchange_from_params_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.bin");
    assert_eq!(run(&["gen", "--bits", "24", "--seed", "2", "--out", out.to_str().unwrap()]).code, 0);
    let r = run(&["exchange", "--params", out.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.get("prime_bits"), "24");
}

#[test]
fn seeded_output_is_reproducible() {
    for args in [
        &["exchange", "--bits", "40", "--seed", "9"][..],
        &["attack", "dlreduce", "--seed", "9"][..],
        &["stats", "--bits", "24", "--trials", "200", "--seed", "9"][..],
    ] {
        let (a, b) = (run(args), run(args));
        assert_eq!(a.stable_lines(), b.stable_lines(), "{args:?}");
    }
}

#[test]
fn det_attack_inapplicable_on_compliant_params() {
    let r = run(&["attack", "det", "--bits", "20", "--seed", "1"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.get("status"), "inapplicable");
}

#[test]
fn det_attack_recovers_with_invertible_h() {
    let r = run(&["attack", "det", "--allow-invertible-h", "--bits", "20", "--seed", "2"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.get("status"), "recovered");
    assert_eq!(r.get("recovered_exponent"), r.get("secret"));
    assert_eq!(r.get("key_match"), "true");
}

#[test]
fn brute_force_bound_below_secret() {
    let r = run(&["attack", "brute", "--bits", "16", "--secret", "500", "--bound", "499", "--seed", "3"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.get("status"), "not_found");
    let r = run(&["attack", "brute", "--bits", "16", "--secret", "500", "--bound", "500", "--seed", "3"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.get("recovered_exponent"), "500");
    assert_eq!(r.get("key_match"), "true");
}

#[test]
fn dlreduce_recovers_k() {
    let r = run(&["attack", "dlreduce", "--target-exponent", "1000", "--seed", "4"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.get("recovered_k"), "1000");
    assert_eq!(r.get("verified"), "true");
}

#[test]
fn stats_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hist");
    let r = run(&["stats", "--bits", "32", "--trials", "1000", "--seed", "6", "--csv", csv.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert_eq!(r.get("trials"), "1000");
    assert_eq!(r.get("entry_1_1.critical"), "27.877");
    assert_eq!(r.get("pair_11_22.critical"), "148.23");
    let entry = fs::read_to_string(csv.join("entry_1_1.csv")).unwrap();
    assert!(entry.starts_with("bin_lo,bin_hi,count\n"));
    let total: u64 = entry.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 1000);
    let pair = fs::read_to_string(csv.join("pair_11_22.csv")).unwrap();
    assert!(pair.starts_with("bin1,bin2,count\n"));
    assert_eq!(pair.lines().count(), 101);
    for name in ["mean_row1.csv", "mean_col1.csv", "mean_all.csv"] {
        assert!(csv.join(name).exists());
    }
}

#[test]
fn stats_undersampled_pair() {
    let r = run(&["stats", "--bits", "24", "--trials", "300", "--seed", "7"]);
    assert_eq!(r.code, 0);
    assert!(r.get("pair_11_22.pass").starts_with("undersampled"));
    assert!(!r.get("entry_1_1.pass").starts_with("undersampled"));
}

#[test]
fn bench_reports_ratio_per_size() {
    let r = run(&["bench", "--bits", "32,64", "--trials", "3", "--seed", "8"]);
    assert_eq!(r.code, 0);
    for b in ["32", "64"] {
        let ratio: f64 = r.get(&format!("bits_{b}.ratio")).parse().unwrap();
        assert!(ratio > 0.0);
    }
    assert_eq!(r.get("muls_per_squaring"), "108");
    assert_eq!(r.get("muls_per_squaring_reference"), "24");
}

#[test]
fn serve_and_connect() {
    let (server, addr, rest) = spawn_server(&["--bits", "48", "--seed", "10"]);
    let client = run(&["connect", "--remote", &addr.to_string(), "--seed", "11"]);
    let server = finish_server(server, rest);
    assert_eq!(client.code, 0);
    assert_eq!(server.code, 0);
    assert_eq!(client.get("digest"), server.get("digest"));
    assert_eq!(client.get("prime_bits"), "48");
}

#[test]
fn connection_refused() {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    drop(l);
    let r = run(&["connect", "--remote", &addr]);
    assert_eq!(r.code, 1);
    assert!(r.fields.contains_key("error"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["exchange", "--bits", "16", "--builtin-prime"]).code, 2);
    assert_eq!(run(&["attack", "nope"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["exchange", "--bits", "2"]).code, 2);
}
