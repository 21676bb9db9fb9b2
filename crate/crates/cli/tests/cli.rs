//! Binary-level checks: the exit-code contract, file formats through the
//! command line, and bench statistics.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_housekit"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("housekit-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

const MARKET: &str = "\
market 3
agent 0 prefs 1 2 0
agent 1 prefs 0 2 1
agent 2 prefs 0 1 2
endow 0 0
endow 1 1
endow 2 2
";

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

#[test]
fn exit_code_contract() {
    let dir = tmpdir("exit");
    let market = dir.join("m.market");
    fs::write(&market, MARKET).unwrap();

    // 0: success.
    let solve = bin()
        .args(["solve", "--algo", "ttc"])
        .arg(&market)
        .output()
        .unwrap();
    assert_eq!(code(&solve), 0, "{solve:?}");
    let stdout = String::from_utf8(solve.stdout).unwrap();
    assert_eq!(stdout, "match 0 1\nmatch 1 0\nmatch 2 2\n");

    // 1: property failure with a printed certificate.
    let m1 = dir.join("m1.match");
    fs::write(&m1, "match 0 1\nmatch 1 2\nmatch 2 0\n").unwrap();
    let verify = bin()
        .args(["verify", "--property", "core"])
        .arg(&market)
        .arg("--matching")
        .arg(&m1)
        .output()
        .unwrap();
    assert_eq!(code(&verify), 1, "{verify:?}");
    let text = String::from_utf8(verify.stdout).unwrap();
    assert!(text.contains("coalition"), "{text}");

    // 0: the same property holding.
    let m2 = dir.join("m2.match");
    fs::write(&m2, &stdout).unwrap();
    let verify_ok = bin()
        .args(["verify", "--property", "core"])
        .arg(&market)
        .arg("--matching")
        .arg(&m2)
        .output()
        .unwrap();
    assert_eq!(code(&verify_ok), 0, "{verify_ok:?}");

    // 2: usage errors and malformed inputs.
    let usage = bin()
        .args(["gen", "--kind", "market", "--agents", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&usage), 2, "{usage:?}");

    let unknown = bin().arg("frobnicate").output().unwrap();
    assert_eq!(code(&unknown), 2, "{unknown:?}");

    let broken = dir.join("broken.market");
    fs::write(&broken, "market 2\nagent 0 prefs 0 0\n").unwrap();
    let parse = bin()
        .args(["solve", "--algo", "ttc"])
        .arg(&broken)
        .output()
        .unwrap();
    assert_eq!(code(&parse), 2, "{parse:?}");

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn gen_solve_verify_pipeline() {
    let dir = tmpdir("pipe");
    let inst = dir.join("gen.market");
    let gen = bin()
        .args(["gen", "--kind", "market", "--agents", "12", "--seed", "3", "--out"])
        .arg(&inst)
        .output()
        .unwrap();
    assert_eq!(code(&gen), 0, "{gen:?}");

    let matching = dir.join("core.match");
    let solve = bin()
        .args(["solve", "--algo", "ttc"])
        .arg(&inst)
        .arg("--out")
        .arg(&matching)
        .output()
        .unwrap();
    assert_eq!(code(&solve), 0);

    for property in ["ir", "pareto", "core"] {
        let verify = bin()
            .args(["verify", "--property", property])
            .arg(&inst)
            .arg("--matching")
            .arg(&matching)
            .output()
            .unwrap();
        assert_eq!(code(&verify), 0, "{property}: {verify:?}");
    }

    // The brute-force escape hatch agrees on this small instance.
    let small = dir.join("small.market");
    let gen_small = bin()
        .args(["gen", "--kind", "market", "--agents", "5", "--seed", "8", "--out"])
        .arg(&small)
        .output()
        .unwrap();
    assert_eq!(code(&gen_small), 0);
    let small_match = dir.join("small.match");
    let solve_small = bin()
        .args(["solve", "--algo", "ttc"])
        .arg(&small)
        .arg("--out")
        .arg(&small_match)
        .output()
        .unwrap();
    assert_eq!(code(&solve_small), 0);
    let brute = bin()
        .args(["verify", "--property", "core", "--brute-force"])
        .arg(&small)
        .arg("--matching")
        .arg(&small_match)
        .output()
        .unwrap();
    assert_eq!(code(&brute), 0, "{brute:?}");

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn reduce_lfmm_market_pipeline() {
    let dir = tmpdir("reduce");
    let graph = dir.join("g.graph");
    fs::write(
        &graph,
        "graph 4 5\nedge 0 1\nedge 0 3\nedge 0 2\nedge 2 3\nedge 1 3\n",
    )
    .unwrap();

    let lfmm = bin().arg("lfmm").arg(&graph).output().unwrap();
    assert_eq!(code(&lfmm), 0);
    assert_eq!(
        String::from_utf8(lfmm.stdout).unwrap(),
        "edge 0 1\nedge 2 3\n"
    );

    let market = dir.join("reduced.market");
    let reduce = bin()
        .args(["reduce", "--from", "lfmm", "--to", "market"])
        .arg(&graph)
        .arg("--out")
        .arg(&market)
        .output()
        .unwrap();
    assert_eq!(code(&reduce), 0);
    let text = fs::read_to_string(&market).unwrap();
    assert!(text.starts_with("market 4\n"));
    assert!(text.contains("agent 0 prefs 1 3 2 0"));

    // The reduced market's core trades exactly the chosen edges.
    let solve = bin()
        .args(["solve", "--algo", "ttc"])
        .arg(&market)
        .output()
        .unwrap();
    assert_eq!(
        String::from_utf8(solve.stdout).unwrap(),
        "match 0 1\nmatch 1 0\nmatch 2 3\nmatch 3 2\n"
    );

    fs::remove_dir_all(&dir).ok();
}

fn parse_records(path: &PathBuf) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn bench_records_are_wellformed_and_medians_monotone() {
    let dir = tmpdir("bench");
    let stats = dir.join("bench.jsonl");
    let bench = bin()
        .args([
            "bench",
            "--algo",
            "lv-cycles",
            "--sizes",
            "4,16,64",
            "--trials",
            "50",
            "--seed",
            "1",
            "--stats",
        ])
        .arg(&stats)
        .output()
        .unwrap();
    assert_eq!(code(&bench), 0, "{bench:?}");
    let records = parse_records(&stats);
    assert_eq!(records.len(), 3 * 50);

    let median_rounds = |size: u64| -> u64 {
        let mut rounds: Vec<u64> = records
            .iter()
            .filter(|r| r["n"].as_u64() == Some(size))
            .map(|r| r["rounds"].as_u64().unwrap())
            .collect();
        assert_eq!(rounds.len(), 50);
        rounds.sort_unstable();
        rounds[rounds.len() / 2]
    };
    let (m4, m16, m64) = (median_rounds(4), median_rounds(16), median_rounds(64));
    assert!(m4 <= m16 && m16 <= m64, "medians not monotone: {m4} {m16} {m64}");

    // Records carry every field the acceptance tooling needs and parse back
    // losslessly.
    for r in &records {
        for field in [
            "algorithm",
            "n",
            "seed",
            "rounds",
            "messages",
            "stages",
            "perStage",
            "wallTimeMs",
            "traceDigest",
        ] {
            assert!(r.get(field).is_some(), "missing {field}: {r}");
        }
        let total: u64 = r["perStage"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["messages"].as_u64().unwrap())
            .sum();
        assert_eq!(total, r["messages"].as_u64().unwrap());
    }

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_dttc_message_ratio_bounded() {
    let dir = tmpdir("bench-dttc");
    let stats = dir.join("dttc.jsonl");
    let bench = bin()
        .args([
            "bench", "--algo", "dttc", "--sizes", "8,16,32", "--trials", "20", "--seed", "5",
            "--stats",
        ])
        .arg(&stats)
        .output()
        .unwrap();
    assert_eq!(code(&bench), 0, "{bench:?}");
    for r in parse_records(&stats) {
        let n = r["n"].as_u64().unwrap();
        let messages = r["messages"].as_u64().unwrap();
        assert!(
            messages <= 64 * n * n,
            "n {n}: {messages} messages over 64 n^2"
        );
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_single_trial_repeats_identically() {
    let dir = tmpdir("bench-det");
    let run = |tag: &str| -> Vec<serde_json::Value> {
        let stats = dir.join(format!("{tag}.jsonl"));
        let out = bin()
            .args([
                "bench", "--algo", "dttc", "--sizes", "16", "--trials", "1", "--seed", "9",
                "--stats",
            ])
            .arg(&stats)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        parse_records(&stats)
            .into_iter()
            .map(|mut r| {
                r["wallTimeMs"] = serde_json::Value::from(0);
                r
            })
            .collect()
    };
    assert_eq!(run("a"), run("b"));
    fs::remove_dir_all(&dir).ok();
}
