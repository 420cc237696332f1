use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn side() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_side"));
    c.env_remove("SIDE_CONFIG");
    c
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_to(name: &str, trace: &Path, extra: &[&str]) -> Output {
    side()
        .arg("run")
        .arg(scenarios().join(format!("{name}.scn")))
        .arg("--trace")
        .arg(trace)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t");
    assert_eq!(run_to("fetch", &t, &[]).status.code(), Some(0));
    assert_eq!(run_to("waterleak", &t, &["--no-hazard"]).status.code(), Some(2));
    assert_eq!(run_to("fetch", &t, &["--max-ticks", "3"]).status.code(), Some(2));
    let missing = side().args(["run", "no/such/file.scn"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
    assert!(!missing.stderr.is_empty());
    let bad_key = run_to("fetch", &t, &["--set", "memory.nope=1"]);
    assert_eq!(bad_key.status.code(), Some(3));
}

#[test]
fn replay_reports_first_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("spill.trace");
    assert!(run_to("spill", &t, &[]).status.success());
    let ok = side().arg("replay").arg(&t).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let text = std::fs::read_to_string(&t).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // nudge the first attention score of tick 2
    let i = lines.iter().position(|l| l.contains("\"record\":\"tick\",\"tick\":2,")).unwrap();
    let at = lines[i].find("\"score\":").unwrap() + "\"score\":".len();
    let end = at + lines[i][at..].find('}').unwrap();
    lines[i].replace_range(at..end, "0.123456");
    let edited = dir.path().join("edited.trace");
    std::fs::write(&edited, lines.join("\n") + "\n").unwrap();
    let out = side().arg("replay").arg(&edited).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = stdout(&out);
    assert!(msg.contains("tick 2") && msg.contains("top[0].score"), "{msg}");

    let truncated = dir.path().join("truncated.trace");
    std::fs::write(&truncated, lines[..3].join("\n") + "\n").unwrap();
    assert_eq!(side().arg("replay").arg(&truncated).output().unwrap().status.code(), Some(3));
}

#[test]
fn config_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let tight = dir.path().join("tight.toml");
    let loose = dir.path().join("loose.toml");
    std::fs::write(&tight, "[run]\nmax_ticks = 2\n").unwrap();
    std::fs::write(&loose, "[run]\nmax_ticks = 100\n").unwrap();
    let t = dir.path().join("t");
    // the scenario's own `ticks` line sits above the file, so use one without it
    let scn = dir.path().join("walk.scn");
    std::fs::write(&scn, "scenario walk\nversion 1\ngrid 5 5\nagent robot at 0 0\ntask navigate x=4 y=4\n").unwrap();
    let run = |env: Option<&Path>, flag: Option<&Path>| {
        let mut c = side();
        c.arg("run").arg(&scn).arg("--trace").arg(&t);
        if let Some(e) = env {
            c.env("SIDE_CONFIG", e);
        }
        if let Some(f) = flag {
            c.arg("--config").arg(f);
        }
        c.output().unwrap().status.code()
    };
    assert_eq!(run(Some(&tight), None), Some(2));
    assert_eq!(run(Some(&tight), Some(&loose)), Some(0));
    assert_eq!(run(None, None), Some(0));
}

#[test]
fn reason_queries() {
    let kb = scenarios().join("vase_room.kb");
    let ask = |q: &str| side().arg("reason").arg("--kb").arg(&kb).arg(q).output().unwrap();
    let left = ask("LeftOf(vase, ?x)");
    assert!(left.status.success());
    assert_eq!(stdout(&left), "?x = bed\n");
    assert_eq!(stdout(&ask("Near(vase, window)")), "");
    assert_eq!(stdout(&ask("Near(bed, window)")), "true\n");

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.kb");
    std::fs::write(&empty, "").unwrap();
    let out = side().arg("reason").arg("--kb").arg(&empty).arg("LeftOf(?a, ?b)").output().unwrap();
    assert!(out.status.success());
    assert_eq!(stdout(&out), "");

    let bad = dir.path().join("bad.kb");
    std::fs::write(&bad, "LeftOf(a, b)\nLeftOf(a b\n").unwrap();
    let out = side().arg("reason").arg("--kb").arg(&bad).arg("LeftOf(?a, ?b)").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.kb:2"));
}

#[test]
fn planner_over_tcp() {
    use std::io::{BufRead, BufReader};
    let mut server = Command::new(env!("CARGO_BIN_EXE_side-stub-planner"))
        .args(["--listen", "127.0.0.1:0"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut banner).unwrap();
    let addr = banner.trim().rsplit(' ').next().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = run_to("fetch", &dir.path().join("t"), &["--planner", &format!("tcp:{addr}")]);
    server.kill().unwrap();
    server.wait().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
