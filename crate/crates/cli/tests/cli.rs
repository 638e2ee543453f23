use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cachevet_core::corpus::{DESK_CACHE, EX_A, EX_B, LRU_FIXTURE};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        ws.file("exA.prog", EX_A);
        ws.file("exB.prog", EX_B);
        ws.file("lru.prog", LRU_FIXTURE);
        ws.file("desk.toml", DESK_CACHE);
        ws.file("lru.toml", "sets = 1\nline_size = 32\nassoc = 2\npolicy = \"lru\"\n");
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cachevet"));
        cmd.current_dir(self.dir.path()).args(args).env_remove("CACHEVET_SOLVER");
        cmd.output().unwrap()
    }

    fn cmd(&self, sub: &str, program: &str, cache: &str, model: &str, extra: &[&str]) -> Output {
        let mut args = vec![sub, "--program", program, "--cache", cache, "--model", model];
        args.extend_from_slice(extra);
        self.run(&args)
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(' '))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let ws = Workspace::new();
    let a = ws.cmd("verify", "exA.prog", "desk.toml", "time", &[]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(field(&stdout(&a), "verdict"), Some("verified"));

    let b = ws.cmd("verify", "exB.prog", "desk.toml", "time", &[]);
    assert_eq!(b.status.code(), Some(1));
    let text = stdout(&b);
    assert_eq!(field(&text, "verdict"), Some("violation"));
    assert!(field(&text, "witness1").is_some() && field(&text, "witness2").is_some());
    assert_ne!(field(&text, "observation1"), field(&text, "observation2"));
}

#[test]
fn missing_solver_is_an_error() {
    let ws = Workspace::new();
    let o = ws.cmd("verify", "exA.prog", "desk.toml", "time", &["--solver", "/nonexistent/solver"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot start solver"));
}

#[test]
fn solver_default_comes_from_the_environment() {
    let ws = Workspace::new();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cachevet"));
    cmd.current_dir(ws.dir.path())
        .args(["verify", "--program", "exA.prog", "--cache", "desk.toml", "--model", "time"])
        .env("CACHEVET_SOLVER", "/nonexistent/solver");
    assert_eq!(cmd.output().unwrap().status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_with_a_diagnostic() {
    let ws = Workspace::new();
    let o = ws.cmd("verify", "missing.prog", "desk.toml", "time", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.prog"));
    ws.file("bad.toml", "sets = 3\nline_size = 32\nassoc = 1\npolicy = \"direct\"\n");
    assert_eq!(ws.cmd("quantify", "exA.prog", "bad.toml", "time", &[]).status.code(), Some(2));
    let o = ws.cmd("simulate", "exB.prog", "desk.toml", "time", &["--secret", "key=256"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ws.cmd("verify", "exA.prog", "desk.toml", "time", &["--unroll-limit", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_and_transcripts_land_in_the_output_directory() {
    let ws = Workspace::new();
    let o = ws.cmd("verify", "exB.prog", "desk.toml", "trace", &["--out", "run"]);
    assert_eq!(o.status.code(), Some(1));
    let doc = json(&ws.path("run/verify.json"));
    assert_eq!(doc["verdict"], "violation");
    assert_eq!(doc["witnesses"].as_array().map(Vec::len), Some(2));
    assert_eq!(std::fs::read_to_string(ws.path("run/verify.txt")).unwrap(), stdout(&o));
    let logs: Vec<_> = std::fs::read_dir(ws.path("run/solver")).unwrap().collect();
    assert!(!logs.is_empty());

    // structured reports are reproducible
    ws.cmd("verify", "exB.prog", "desk.toml", "trace", &["--out", "again"]);
    assert_eq!(
        std::fs::read(ws.path("run/verify.json")).unwrap(),
        std::fs::read(ws.path("again/verify.json")).unwrap()
    );

    let j = ws.cmd("verify", "exA.prog", "desk.toml", "time", &["--format", "json"]);
    let doc: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(doc["verdict"], "verified");
}

#[test]
fn patch_ex_b_under_time_adds_one_miss() {
    let ws = Workspace::new();
    let o = ws.cmd("patch", "exB.prog", "desk.toml", "time", &["--out", "p"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let patches = json(&ws.path("p/patches.json"));
    let deltas: Vec<u64> = patches.as_array().unwrap().iter().map(|p| p["delta"].as_u64().unwrap()).collect();
    assert_eq!(deltas.len(), 2);
    assert_eq!(deltas.iter().filter(|&&d| d != 0).collect::<Vec<_>>(), vec![&1]);
    let text = stdout(&o);
    assert_eq!(field(&text, "before.classes"), Some("2"));
    assert_eq!(field(&text, "after.classes"), Some("1"));
    let doc = json(&ws.path("p/patch.json"));
    assert_eq!(doc["metrics"]["after"]["capacity_bits"], 0.0);
}

#[test]
fn patch_ex_b_under_trace_schedules_actions() {
    let ws = Workspace::new();
    let o = ws.cmd("patch", "exB.prog", "desk.toml", "trace", &["--patches", "exB.patches"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "reference"), Some("1100"));
    let fixes: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("patch ")).collect();
    assert_eq!(fixes, vec!["110 actions [(3, hit)]", "100 actions [(0, miss)]"]);

    let q = ws.cmd("quantify", "exB.prog", "desk.toml", "trace", &["--patches", "exB.patches"]);
    assert_eq!(q.status.code(), Some(0));
    assert_eq!(field(&stdout(&q), "classes"), Some("1"));

    let s = ws.cmd("simulate", "exB.prog", "desk.toml", "trace", &["--secret", "key=255", "--patches", "exB.patches"]);
    assert_eq!(field(&stdout(&s), "patched trace"), Some("1100"));
}

#[test]
fn patch_ex_a_needs_nothing() {
    let ws = Workspace::new();
    let o = ws.cmd("patch", "exA.prog", "desk.toml", "time", &["--patches", "exA.patches"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("note verified"));
    assert_eq!(json(&ws.path("exA.patches")), serde_json::json!([]));
}

#[test]
fn patch_needs_a_destination() {
    let ws = Workspace::new();
    assert_eq!(ws.cmd("patch", "exB.prog", "desk.toml", "time", &[]).status.code(), Some(2));
}

#[cfg(unix)]
#[test]
fn partial_exploration_exits_with_three() {
    use std::os::unix::fs::PermissionsExt;
    let ws = Workspace::new();
    // a solver that gives up on every check
    let script = ws.file(
        "giveup.sh",
        "#!/bin/sh\nwhile read -r line; do case \"$line\" in *check-sat*) echo unknown;; esac; done\n",
    );
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let solver = script.to_str().unwrap();
    let o = ws.cmd("patch", "exB.prog", "desk.toml", "time", &["--solver", solver, "--out", "p"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert_eq!(field(&stdout(&o), "exploration"), Some("partial"));
    assert!(ws.path("p/patches.json").exists());

    let v = ws.cmd("verify", "exB.prog", "desk.toml", "time", &["--solver", solver]);
    assert_eq!(v.status.code(), Some(2));
    assert_eq!(field(&stdout(&v), "verdict"), Some("inconclusive"));
}

#[test]
fn quantify_reports_capacity() {
    let ws = Workspace::new();
    let b = ws.cmd("quantify", "exB.prog", "desk.toml", "time", &[]);
    assert_eq!(b.status.code(), Some(0));
    let text = stdout(&b);
    assert_eq!(field(&text, "capacity_bits"), Some("1.000000 1*log2(2)"));
    assert_eq!(field(&text, "classes"), Some("2"));

    ws.cmd("patch", "exB.prog", "desk.toml", "time", &["--patches", "exB.patches"]);
    let p = ws.cmd("quantify", "exB.prog", "desk.toml", "time", &["--patches", "exB.patches", "--out", "q"]);
    assert_eq!(field(&stdout(&p), "capacity_bits"), Some("0.000000 0"));
    assert_eq!(field(&stdout(&p), "shannon_remaining"), field(&stdout(&p), "shannon_prior"));
    let doc = json(&ws.path("q/quantify.json"));
    assert_eq!(doc["metrics"]["classes"], 1);

    let a = ws.cmd("quantify", "exA.prog", "desk.toml", "time", &[]);
    assert_eq!(field(&stdout(&a), "capacity_bits"), Some("0.000000 0"));
}

#[test]
fn quantify_accepts_a_prior() {
    let ws = Workspace::new();
    ws.file("prior.json", r#"{"default": 1, "weights": {"key=255": 255}}"#);
    let o = ws.cmd("quantify", "exB.prog", "desk.toml", "time", &["--prior", "prior.json"]);
    assert_eq!(o.status.code(), Some(0));
    // half of the mass sits on the singleton class
    assert_eq!(field(&stdout(&o), "min_prior").map(|v| v.split(' ').next().unwrap()), Some("1.000000"));
}

#[test]
fn simulate_dumps_each_access() {
    let ws = Workspace::new();
    let o = ws.cmd("simulate", "exB.prog", "desk.toml", "trace", &["--secret", "key=255"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "access 1"), Some("guard=0"));
    assert_eq!(field(&text, "access 2"), Some("guard=1 address=0x1fe0 block=255 set=31 tag=7 miss"));
    assert_eq!(field(&text, "observation trace"), Some("100"));
    assert_eq!(field(&text, "observation time"), Some("1"));

    // the default input is all zeros and the dump is deterministic
    let z1 = ws.cmd("simulate", "exB.prog", "desk.toml", "time", &[]);
    let z2 = ws.cmd("simulate", "exB.prog", "desk.toml", "time", &["--secret", "key=0"]);
    assert_eq!(stdout(&z1), stdout(&z2));
    assert_eq!(field(&stdout(&z1), "input"), Some("key=0"));
}

#[test]
fn simulate_lru_refresh() {
    let ws = Workspace::new();
    let o = ws.cmd("simulate", "lru.prog", "lru.toml", "trace", &[]);
    let text = stdout(&o);
    assert_eq!(field(&text, "observation trace"), Some("1100"));
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("access ")).collect();
    assert_eq!(lines.len(), 4);
}
