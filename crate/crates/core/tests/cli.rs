use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use ibeetfa::cli::{self, EXIT_DATA, EXIT_NOT_EQUAL, EXIT_OK, EXIT_REJECT, EXIT_USAGE};
use ibeetfa::format::{self, CiphertextFile, HEADER_LEN};
use ibeetfa::hash::BitString;
use ibeetfa::params::preset;
use ibeetfa::sampler::RandomSource;
use ibeetfa::scheme::{self, Identity, Message, PublicParams};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(dir: &Path, args: &[&str]) -> Run {
    let mut argv = vec!["ibeetfa".to_string()];
    argv.extend(args.iter().map(|a| a.replace("{}", dir.to_str().unwrap())));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(&argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn ok(dir: &Path, cmd: &str) {
    let r = run(dir, &cmd.split_whitespace().collect::<Vec<_>>());
    assert_eq!(r.code, EXIT_OK, "{cmd}: {}", r.stderr);
}

/// One seeded setup with keys for alice and bob and four ciphertexts:
/// `a1`, `a2` (alice, "same"), `b1` (bob, "other") and `b2` (bob, "same").
fn world() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        fs::write(d.join("m1"), b"same").unwrap();
        fs::write(d.join("m2"), b"other").unwrap();
        for cmd in [
            "--seed 01 setup --pp {}/pp --msk {}/msk",
            "--seed 02 extract --pp {}/pp --msk {}/msk --id alice --out {}/alice.sk",
            "--seed 03 extract --pp {}/pp --msk {}/msk --id bob --out {}/bob.sk",
            "--seed 04 encrypt --pp {}/pp --id alice --in {}/m1 --out {}/a1",
            "--seed 05 encrypt --pp {}/pp --id alice --in {}/m1 --out {}/a2",
            "--seed 06 encrypt --pp {}/pp --id bob --in {}/m2 --out {}/b1",
            "--seed 07 encrypt --pp {}/pp --id bob --in {}/m1 --out {}/b2",
        ] {
            ok(d, cmd);
        }
        dir
    })
    .path()
}

fn scratch() -> TempDir {
    tempfile::tempdir().unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn setup_writes_both_files_and_warns() {
    let d = scratch();
    let r = run(d.path(), &["--seed", "aa", "setup", "--pp", "{}/pp", "--msk", "{}/msk"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stderr.contains("no cryptographic security"));
    assert!(d.path().join("pp").exists() && d.path().join("msk").exists());
    // no temporary files left behind
    assert_eq!(fs::read_dir(d.path()).unwrap().count(), 2);
}

#[test]
fn decrypt_restores_the_exact_file() {
    let w = world();
    let d = scratch();
    let out = p(d.path(), "plain");
    let r = run(w, &["decrypt", "--pp", "{}/pp", "--sk", "{}/alice.sk", "--in", "{}/a1", "--out", &out]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(fs::read(&out).unwrap(), b"same");

    let r = run(w, &["decrypt", "--pp", "{}/pp", "--sk", "{}/bob.sk", "--in", "{}/b1", "--out", &out]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(fs::read(&out).unwrap(), b"other");
}

#[test]
fn empty_and_full_length_messages_round_trip() {
    let w = world();
    let d = scratch();
    for body in [&b""[..], &b"12345678"[..]] {
        fs::write(d.path().join("m"), body).unwrap();
        ok(d.path(), &format!("--seed 10 encrypt --pp {}/pp --id alice --in {{}}/m --out {{}}/ct", w.display()));
        let r = run(d.path(), &["decrypt", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--in", "{}/ct", "--out", "{}/x"]);
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
        assert_eq!(fs::read(d.path().join("x")).unwrap(), body);
    }
}

#[test]
fn wrong_identity_key_is_rejected() {
    let w = world();
    let d = scratch();
    let r = run(d.path(), &["decrypt", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--in", &p(w, "b1"), "--out", "{}/x"]);
    assert_eq!((r.code, r.stdout.trim()), (EXIT_REJECT, "REJECT"));
    assert!(!d.path().join("x").exists());
}

#[test]
fn oversized_message_is_a_data_error() {
    let w = world();
    let d = scratch();
    fs::write(d.path().join("m"), [0u8; 9]).unwrap();
    let r = run(d.path(), &["encrypt", "--pp", &p(w, "pp"), "--id", "alice", "--in", "{}/m", "--out", "{}/ct"]);
    assert_eq!(r.code, EXIT_DATA);
    assert!(!d.path().join("ct").exists());
}

#[test]
fn type_one_test_compares_messages() {
    let w = world();
    ok(w, "td --type 1 --pp {}/pp --sk {}/alice.sk --out {}/alice.td1");
    ok(w, "td --type 1 --pp {}/pp --sk {}/bob.sk --out {}/bob.td1");
    let test = |a: &str, b: &str, ca: &str, cb: &str| {
        let args = ["test", "--type", "1", "--pp", "{}/pp", "--td-i", a, "--td-j", b, "--ct-i", ca, "--ct-j", cb];
        run(w, &args)
    };
    let r = test("{}/alice.td1", "{}/alice.td1", "{}/a1", "{}/a2");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_OK, "EQUAL"));
    let r = test("{}/alice.td1", "{}/bob.td1", "{}/a1", "{}/b2");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_OK, "EQUAL"));
    let r = test("{}/alice.td1", "{}/bob.td1", "{}/a1", "{}/b1");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_NOT_EQUAL, "NOT-EQUAL"));
}

#[test]
fn type_two_trapdoor_is_bound_to_its_ciphertext() {
    let w = world();
    let d = scratch();
    let td = |sk: &str, ct: &str, out: &str| {
        let args = ["--seed", "20", "td", "--type", "2", "--pp", &p(w, "pp"), "--sk", &p(w, sk), "--ct", &p(w, ct), "--out", out];
        assert_eq!(run(d.path(), &args).code, EXIT_OK);
    };
    td("alice.sk", "a1", "{}/t_a1");
    td("alice.sk", "a2", "{}/t_a2");
    td("bob.sk", "b1", "{}/t_b1");
    let test = |ti: &str, tj: &str, ci: &str, cj: &str| {
        let args = ["test", "--type", "2", "--pp", &p(w, "pp"), "--td-i", ti, "--td-j", tj, "--ct-i", &p(w, ci), "--ct-j", &p(w, cj)];
        run(d.path(), &args)
    };
    let r = test("{}/t_a1", "{}/t_a2", "a1", "a2");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_OK, "EQUAL"));
    let r = test("{}/t_a1", "{}/t_b1", "a1", "b1");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_NOT_EQUAL, "NOT-EQUAL"));
    // trapdoor of a2 presented with a1
    let r = test("{}/t_a2", "{}/t_a1", "a1", "a2");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_REJECT, "REJECT"));
}

#[test]
fn type_three_mixes_basis_and_ciphertext_trapdoors() {
    let w = world();
    let d = scratch();
    let args = ["td", "--type", "3", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--out", "{}/basis"];
    assert_eq!(run(d.path(), &args).code, EXIT_OK);
    let args = ["--seed", "21", "td", "--type", "3", "--pp", &p(w, "pp"), "--sk", &p(w, "bob.sk"), "--ct", &p(w, "b2"), "--out", "{}/bound"];
    assert_eq!(run(d.path(), &args).code, EXIT_OK);
    let test = |ci: &str| {
        let args = ["test", "--type", "3", "--pp", &p(w, "pp"), "--td-i", "{}/basis", "--td-j", "{}/bound", "--ct-i", &p(w, ci), "--ct-j", &p(w, "b2")];
        run(d.path(), &args)
    };
    assert_eq!(test("a1").stdout.trim(), "EQUAL");
    // alice's basis opened against bob's ciphertext yields an unrelated digest
    let r = test("b1");
    assert_eq!((r.code, r.stdout.trim()), (EXIT_NOT_EQUAL, "NOT-EQUAL"));
}

#[test]
fn flipped_ciphertext_bit_is_rejected() {
    let w = world();
    let d = scratch();
    let mut bytes = fs::read(w.join("a1")).unwrap();
    // lowest bit of the first entry of the tag matrix
    bytes[HEADER_LEN + 8] ^= 1;
    fs::write(d.path().join("bad"), &bytes).unwrap();
    let args = ["decrypt", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--in", "{}/bad", "--out", "{}/x"];
    let r = run(d.path(), &args);
    assert_eq!((r.code, r.stdout.trim()), (EXIT_REJECT, "REJECT"));

    let args = ["td", "--type", "2", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--ct", "{}/bad", "--out", "{}/td"];
    assert_eq!(run(d.path(), &args).code, EXIT_REJECT);
}

#[test]
fn load_failures_exit_with_data_error() {
    let w = world();
    let d = scratch();
    let mut bytes = fs::read(w.join("a1")).unwrap();
    bytes[0] ^= 0xff;
    fs::write(d.path().join("bad_magic"), &bytes).unwrap();
    let decrypt = |input: &str, params: &str| {
        let args = ["--params", params, "decrypt", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--in", input, "--out", "{}/x"];
        run(d.path(), &args)
    };
    let r = decrypt("{}/bad_magic", "toy");
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.stderr.contains("magic"), "{}", r.stderr);

    assert_eq!(decrypt("{}/missing", "toy").code, EXIT_DATA);
    // a secret key where a ciphertext belongs
    assert_eq!(decrypt(&p(w, "bob.sk"), "toy").code, EXIT_DATA);
    // files were made under toy
    let r = decrypt(&p(w, "a1"), "small");
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.stderr.contains("parameter"), "{}", r.stderr);
}

#[test]
fn usage_errors_exit_64() {
    let d = scratch();
    for args in [
        &["frobnicate"][..],
        &[][..],
        &["extract", "--out", "x"][..],
        &["td", "--type", "4", "--sk", "x", "--out", "y"][..],
        &["--seed", "zz", "setup"][..],
        &["--seed", &"00".repeat(33), "setup"][..],
        &["--params", "nonexistent", "setup"][..],
    ] {
        let r = run(d.path(), args);
        assert_eq!(r.code, EXIT_USAGE, "{args:?}: {}", r.stderr);
    }
    let w = world();
    let args = ["td", "--type", "2", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--out", "{}/td"];
    assert_eq!(run(d.path(), &args).code, EXIT_USAGE);
}

#[test]
fn help_and_version_exit_zero() {
    let d = scratch();
    let r = run(d.path(), &["--help"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("setup"));
    assert_eq!(run(d.path(), &["--version"]).code, EXIT_OK);
}

#[test]
fn params_validate_reports_violations() {
    let d = scratch();
    for name in ["toy", "small"] {
        let r = run(d.path(), &["--params", name, "params", "validate"]);
        assert_eq!((r.code, r.stdout.trim()), (EXIT_OK, "ok"));
        assert!(r.stderr.contains("no cryptographic security"));
    }
    let bad = "lambda = 128\nn = 8\nm = 576\nq = 4093\nt = 64\nell = 8\nsigma = 1000.0\nalpha = 0.01\nq_bound = 16\n";
    fs::write(d.path().join("bad.toml"), bad).unwrap();
    let r = run(d.path(), &["--params", "{}/bad.toml", "params", "validate"]);
    assert_eq!(r.code, EXIT_NOT_EQUAL);
    assert!(r.stdout.contains("TrapGenWidth"), "{}", r.stdout);
    assert!(r.stderr.is_empty());

    fs::write(d.path().join("garbage.toml"), "n = \"eight\"").unwrap();
    assert_eq!(run(d.path(), &["--params", "{}/garbage.toml", "params", "validate"]).code, EXIT_DATA);
}

#[test]
fn parameter_file_matching_a_preset_interoperates() {
    let w = world();
    let d = scratch();
    let toml = toml::to_string(&preset("toy").unwrap()).unwrap();
    fs::write(d.path().join("toy.toml"), toml).unwrap();
    let args = ["--params", "{}/toy.toml", "decrypt", "--pp", &p(w, "pp"), "--sk", &p(w, "alice.sk"), "--in", &p(w, "a1"), "--out", "{}/x"];
    let r = run(d.path(), &args);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(fs::read(d.path().join("x")).unwrap(), b"same");
}

#[test]
fn cli_matches_library_for_the_same_seed() {
    let d = scratch();
    let dir = d.path();
    fs::write(dir.join("m"), b"hi").unwrap();
    ok(dir, "--seed 0a0b setup --pp {}/pp --msk {}/msk");
    ok(dir, "--seed 0c extract --pp {}/pp --msk {}/msk --id dana --out {}/sk");
    ok(dir, "--seed 0d encrypt --pp {}/pp --id dana --in {}/m --out {}/ct");
    ok(dir, "--seed 0e td --type 2 --pp {}/pp --sk {}/sk --ct {}/ct --out {}/td2");

    let params = preset("toy").unwrap();
    let seeded = |hex: &str| RandomSource::from_seed_bytes(&hex::decode(hex).unwrap()).unwrap();
    let (pp, msk) = scheme::setup(&params, &mut seeded("0a0b")).unwrap();
    assert_eq!(fs::read(dir.join("pp")).unwrap(), format::encode(&params, &pp));
    assert_eq!(fs::read(dir.join("msk")).unwrap(), format::encode(&params, &msk));

    let id = Identity::from_name("dana", params.ell);
    let sk = scheme::extract(&pp, &msk, &id, &mut seeded("0c")).unwrap();
    assert_eq!(fs::read(dir.join("sk")).unwrap(), format::encode(&params, &sk));

    let mut bits = BitString::zeros(params.t);
    for (i, byte) in b"hi".iter().enumerate() {
        for k in 0..8 {
            bits.set(8 * i + k, byte >> k & 1 == 1);
        }
    }
    let msg = Message::new(bits, params.t).unwrap();
    let ct = scheme::encrypt(&pp, &id, &msg, &mut seeded("0d")).unwrap();
    let file = CiphertextFile { ct: ct.clone(), message_len: 2 };
    assert_eq!(fs::read(dir.join("ct")).unwrap(), format::encode(&params, &file));

    let td = ibeetfa::authz::td2(&pp, &sk, &ct, &mut seeded("0e")).unwrap().unwrap();
    assert_eq!(fs::read(dir.join("td2")).unwrap(), format::encode(&params, &td));

    let got = scheme::decrypt(&pp, &sk, &ct, &mut seeded("01")).unwrap().unwrap();
    assert_eq!(got, msg);
    let loaded: PublicParams = format::decode_with(&fs::read(dir.join("pp")).unwrap(), &params).unwrap();
    assert_eq!(loaded, pp);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = PathBuf::from(env!("CARGO_BIN_EXE_ibeetfa"));
    let d = scratch();
    let status = std::process::Command::new(&exe).arg("--params").arg("toy").args(["params", "validate"]).current_dir(d.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&status.stdout).trim(), "ok");
    let status = std::process::Command::new(&exe).arg("nope").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    fs::write(d.path().join("junk"), b"not an artifact").unwrap();
    let status = std::process::Command::new(&exe)
        .args(["decrypt", "--pp", "junk", "--sk", "junk", "--in", "junk", "--out", "x"])
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_DATA));
}
