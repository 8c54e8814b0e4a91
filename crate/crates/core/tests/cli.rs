use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lerwlab::experiments::quarter_disk_spec;
use lerwlab::lattice::LatticeDomain;
use lerwlab::approximate;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 5
ns = [16, 24, 32]
n_fine = 48
n_couple = 16
kl_ns = [16, 24]
h_ratio_ns = [12, 16]
refinement = 2

[samples]
one_point = 2000
length = 50
content = 3
rn = 200
couple = 200
calibrate = 50
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn lerwlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lerwlab")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lerwlab(&args)
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn hash_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).lines().find_map(|l| l.strip_prefix("config ")).unwrap().to_string()
}

#[test]
fn bad_configs_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let unknown = write_config(tmp.path(), "a.toml", "seeed = 3\n");
    assert_eq!(run("domain", &unknown, &out, &[]).status.code(), Some(1));
    let negative = write_config(tmp.path(), "b.toml", "sine_floor = 1.5\n");
    assert_eq!(run("domain", &negative, &out, &[]).status.code(), Some(1));
    let missing = tmp.path().join("nope.toml");
    let o = run("domain", &missing, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let spec = write_config(tmp.path(), "c.toml", "[domain]\nshape = { kind = \"disk\", center = [0.0, 0.0], radius = -1.0 }\na = [1.0, 0.0]\nb = [0.0, 1.0]\n");
    assert_eq!(run("domain", &spec, &out, &[]).status.code(), Some(1));
}

#[test]
fn single_scale_regressions_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL.replace("ns = [16, 24, 32]", "ns = [32]");
    let cfg = write_config(tmp.path(), "one.toml", &text);
    assert_eq!(run("exponents", &cfg, &tmp.path().join("e"), &[]).status.code(), Some(1));
    assert_eq!(run("calibrate-cstar", &cfg, &tmp.path().join("c"), &[]).status.code(), Some(1));
}

#[test]
fn domain_files_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "d.toml", "ns = [16, 64]\n");
    let out = tmp.path().join("o");
    let o = run("domain", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read(out.join("domain_n64.txt")).unwrap();
    let back = LatticeDomain::read_from(&text[..]).unwrap();
    let expect = approximate(&quarter_disk_spec(), 64).unwrap();
    assert_eq!(back.n, 64);
    assert_eq!(back.spec, Some(quarter_disk_spec()));
    assert_eq!(back.domain.sites(), expect.sites());
    let csv = fs::read_to_string(out.join("domains.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("64,")).unwrap();
    assert_eq!(row.split(',').nth(1).unwrap(), expect.len().to_string());
}

#[test]
fn fixed_seed_runs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    for cmd in ["rn", "couple", "exponents", "calibrate-cstar"] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        let oa = run(cmd, &cfg, &a, &[]);
        let ob = run(cmd, &cfg, &b, &[]);
        assert_ne!(oa.status.code(), Some(1), "{cmd}: {}", String::from_utf8_lossy(&oa.stderr));
        assert_eq!(oa.status.code(), ob.status.code());
        assert_eq!(oa.stdout, ob.stdout);
        let (fa, fb) = (files(&a), files(&b));
        assert!(fa.keys().any(|k| k.ends_with(".csv")), "{cmd}");
        assert_eq!(fa, fb, "{cmd}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    for cmd in ["couple", "exponents"] {
        let one = tmp.path().join(format!("{cmd}-1"));
        let two = tmp.path().join(format!("{cmd}-2"));
        run(cmd, &cfg, &one, &["--threads", "1"]);
        run(cmd, &cfg, &two, &["--threads", "2"]);
        assert_eq!(files(&one), files(&two), "{cmd}");
    }
}

#[test]
fn manifests_carry_the_config_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL);
    let a = run("rn", &cfg, &tmp.path().join("a"), &[]);
    let b = run("rn", &cfg, &tmp.path().join("b"), &["--seed", "6"]);
    let (ha, hb) = (hash_line(&a), hash_line(&b));
    assert_ne!(ha, hb);
    assert_eq!(ha.len(), 64);
    for (dir, hash, seed) in [("a", &ha, 5), ("b", &hb, 6)] {
        let text = fs::read_to_string(tmp.path().join(dir).join("rn.manifest.jsonl")).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(lines.len() > 3);
        for v in &lines {
            assert_eq!(v["config_hash"], **hash);
            assert_eq!(v["seed"], seed);
            assert_eq!(v["command"], "rn");
        }
        assert_eq!(lines.last().unwrap()["kind"], "summary");
    }
}

#[test]
fn failed_checks_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL.replace("couple = 200", "couple = 20");
    let cfg = write_config(tmp.path(), "f.toml", &text);
    let o = run("couple", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL "));
}
