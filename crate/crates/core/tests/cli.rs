mod common;

use common::PI_SOURCE;
use std::fs;
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};
use tempfile::TempDir;

fn lagarto(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagarto")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn workdir(files: &[(&str, &str)]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in files {
        fs::write(dir.path().join(name), body).unwrap();
    }
    dir
}

fn stat_line<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim_start_matches(':').trim()))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{out}"))
}

#[test]
fn run_pi_from_source() {
    let dir = workdir(&[("pi.s", PI_SOURCE)]);
    let o = lagarto(&["run", "--src", "pi.s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("La aproximación de PI es: 3.1415927\n"), "{out}");
    assert_eq!(stat_line(&out, "end"), "exit");
    assert_eq!(stat_line(&out, "cycles"), "1573");
    assert_eq!(stat_line(&out, "retired"), "751");
}

#[test]
fn asm_then_run_matches_direct_run() {
    let dir = workdir(&[("pi.s", PI_SOURCE)]);
    let o = lagarto(&["asm", "pi.s", "-o", "pi.hex", "--data", "pi.data.hex"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let images = lagarto(
        &["run", "--imem", "pi.hex", "--dmem", "pi.data.hex", "--trace", "a.jsonl", "--stats", "a.json"],
        dir.path(),
    );
    let direct = lagarto(&["run", "--src", "pi.s", "--trace", "b.jsonl", "--stats", "b.json"], dir.path());
    assert_eq!(stdout(&images), stdout(&direct));
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.jsonl")).unwrap());
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 1573, "one trace line per cycle");
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(stats["cycles"], 1573);
    assert_eq!(stats["halt_reason"], "exit");
}

#[test]
fn asm_default_data_path() {
    let dir = workdir(&[("prog.s", ".data\nv: .word 7\n.text\nnop\n")]);
    let o = lagarto(&["asm", "prog.s", "-o", "out.hex"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let data = fs::read_to_string(dir.path().join("prog.dmem.hex")).unwrap();
    assert!(data.contains("00000007"), "{data}");
}

#[test]
fn disasm_lists_words() {
    let dir = workdir(&[("i.hex", "@00400000\n24080005\n0000000c\nffffffff\n")]);
    let o = lagarto(&["disasm", "i.hex"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("00400000: 24080005  addiu $t0, $zero, 5"), "{out}");
    assert!(out.contains("syscall"));
    assert!(out.contains(".word 0xFFFFFFFF"));
}

#[test]
fn fault_exits_with_two() {
    let dir = workdir(&[("f.s", "li $t0, 0x7fffffff\nadd $t1, $t0, $t0\n")]);
    let o = lagarto(&["run", "--src", "f.s"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stat_line(&stdout(&o), "end"), "integer_overflow");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = workdir(&[("bad.s", "foo $t0\n"), ("ok.s", "nop\n"), ("bad.toml", "colour = 3\n")]);
    for args in [
        &["run", "--src", "bad.s"][..],
        &["run", "--src", "missing.s"],
        &["run"],
        &["run", "--src", "ok.s", "--predictor", "oracle"],
        &["run", "--src", "ok.s", "--bht", "3"],
        &["run", "--src", "ok.s", "--config", "bad.toml"],
        &["frobnicate"],
    ] {
        let o = lagarto(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn cycle_limit_is_not_a_failure() {
    let dir = workdir(&[("spin.s", "top: b top\n")]);
    let o = lagarto(&["run", "--src", "spin.s", "--max-cycles", "500"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(stat_line(&out, "end"), "cycle limit");
    assert_eq!(stat_line(&out, "cycles"), "500");
}

#[test]
fn flags_override_config_file() {
    let dir = workdir(&[
        ("pi.s", PI_SOURCE),
        ("cfg.toml", "src = \"pi.s\"\npredictor = \"static\"\ncache_stats = true\n"),
    ]);
    let from_file = stdout(&lagarto(&["run", "--config", "cfg.toml"], dir.path()));
    assert!(stat_line(&from_file, "mispredicts").starts_with("122"), "{from_file}");
    assert!(from_file.contains("icache:"));
    let overridden = stdout(&lagarto(&["run", "--config", "cfg.toml", "--predictor", "twobit"], dir.path()));
    assert!(stat_line(&overridden, "mispredicts").starts_with("42"), "{overridden}");
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn serve_port_busy_exits_with_one() {
    let port = free_port();
    let first = Server(
        Command::new(env!("CARGO_BIN_EXE_lagarto"))
            .args(["serve", "--port", &port.to_string()])
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(10);
    while TcpStream::connect(("127.0.0.1", port)).is_err() {
        assert!(Instant::now() < deadline, "first server never came up");
        std::thread::sleep(Duration::from_millis(20));
    }
    let second = Command::new(env!("CARGO_BIN_EXE_lagarto"))
        .args(["serve", "--port", &port.to_string()])
        .output()
        .unwrap();
    assert_eq!(second.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&second.stderr).contains("cannot listen"));
    drop(first);
}
