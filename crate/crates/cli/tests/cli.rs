use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("k2.el", "2 1\n0 1\n"),
            ("k3.el", "3 3\n0 1\n0 2\n1 2\n"),
            ("p3.el", "3 2\n0 1\n1 2\n"),
            ("p4.el", "# path on four vertices\n4 3\n0 1\n1 2\n2 3\n"),
        ] {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str], stdin: &str) -> Output {
        let mut child = Command::new(env!("CARGO_BIN_EXE_online-ramsey"))
            .args(args)
            .current_dir(self.dir.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
        child.wait_with_output().unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn density_lines() {
    let fx = Fixture::new();
    let out = ok(fx.run(&["density", "--graph", "k3.el", "--colors", "2"], ""));
    assert!(out.starts_with("m1_star = 4/3  (theta_star = 3/4)\n"), "{out}");
    let out = ok(fx.run(&["density", "--graph", "p4.el", "--colors", "2"], ""));
    assert!(out.contains("m1_star = 15/16") && out.contains("k_star = 16"), "{out}");
    let out = ok(fx.run(&["density", "--graph", "p3.el", "--colors", "2"], ""));
    assert!(out.contains("m1_star = 8/9") && out.contains("k_star = 9"), "{out}");
}

#[test]
fn lambda_signs() {
    let fx = Fixture::new();
    let out = ok(fx.run(&["lambda", "--graph", "k3.el", "--colors", "2", "--theta", "1/2"], ""));
    assert!(out.contains("sign = positive"), "{out}");
    let full = ok(fx.run(&["lambda", "--graph", "k3.el", "--colors", "2", "--theta", "1/2", "--variant", "full"], ""));
    assert_eq!(out.lines().next(), full.lines().next());
    let out = ok(fx.run(&["lambda", "--graph", "k3.el", "--colors", "2", "--theta", "7/8"], ""));
    assert!(out.contains("sign = negative"), "{out}");
}

#[test]
fn oracle_matches_density() {
    let fx = Fixture::new();
    let out = ok(fx.run(&["oracle", "--graph", "k2.el", "--colors", "2", "--max-steps", "8", "--min-density"], ""));
    assert_eq!(out.trim(), "min_winning_density = 3/4");
    let win = ok(fx.run(&["oracle", "--graph", "k2.el", "--colors", "2", "--max-steps", "8", "--density", "3/4"], ""));
    assert!(win.contains("winner: builder"), "{win}");
    let lose = ok(fx.run(&["oracle", "--graph", "k2.el", "--colors", "2", "--max-steps", "8", "--density", "2/3"], ""));
    assert!(lose.contains("winner: painter"), "{lose}");
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    let bad_theta = fx.run(&["lambda", "--graph", "k3.el", "--colors", "2", "--theta", "3/0"], "");
    assert_eq!(bad_theta.status.code(), Some(2));
    let missing = fx.run(&["density", "--graph", "nope.el", "--colors", "2"], "");
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(fx.path("bad.el"), "3 1\n2 1\n").unwrap();
    let malformed = fx.run(&["density", "--graph", "bad.el", "--colors", "2"], "");
    assert_eq!(malformed.status.code(), Some(2));
    let usage = fx.run(&["density", "--graph", "k3.el"], "");
    assert_eq!(usage.status.code(), Some(2));
    // 16/15 is not reachable with denominators <= 1
    let resource = fx.run(&["density", "--graph", "p4.el", "--colors", "2", "--max-den", "1"], "");
    assert_eq!(resource.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&resource.stderr).contains("theta* lies in"));
}

#[test]
fn exported_strategy_plays_like_the_derived_one() {
    let fx = Fixture::new();
    let list = fx.path("list.txt");
    let out = ok(fx.run(&["strategy", "--graph", "k3.el", "--colors", "2", "--out", p(&list)], ""));
    assert!(out.starts_with("wrote "), "{out}");
    let text = std::fs::read_to_string(&list).unwrap();
    assert!(text.starts_with("# colors 2\n"));
    // a legal script at d = 397/300: path, then a vertex on both ends
    let script = "\n0\n1\n0 2\n3\n\n5 4\n";
    let args = ["play", "--mode", "painter", "--graph", "k3.el", "--colors", "2", "--density", "397/300"];
    let derived = ok(fx.run(&args, script));
    let mut with_list = args.to_vec();
    with_list.extend(["--strategy", p(&list)]);
    let loaded = ok(fx.run(&with_list, script));
    assert_eq!(derived, loaded);
    assert!(derived.ends_with("painter survived 7 vertices\n"), "{derived}");
    assert_eq!(derived.lines().filter(|l| l.starts_with("color ")).count(), 7);
}

#[test]
fn painter_rejects_illegal_moves() {
    let fx = Fixture::new();
    // K4 has density 3/2 > 397/300
    let out =
        fx.run(&["play", "--mode", "painter", "--graph", "k3.el", "--colors", "2", "--density", "397/300"], "\n0\n0 1\n0 1 2\n");
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn builder_beats_scripted_colors() {
    let fx = Fixture::new();
    let colors = "1\n2\n".repeat(40);
    let out = ok(fx.run(&["play", "--mode", "builder", "--graph", "k2.el", "--colors", "2", "--density", "3/4"], &colors));
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("builder wins: monochromatic F"), "{out}");
    let out = ok(fx.run(&["play", "--mode", "builder", "--graph", "k3.el", "--colors", "2", "--density", "4/3"], &colors));
    assert!(out.lines().last().unwrap().starts_with("builder wins"), "{out}");
    // below the threshold Builder refuses to start
    let refused = fx.run(&["play", "--mode", "builder", "--graph", "k3.el", "--colors", "2", "--density", "5/4"], &colors);
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_across_jobs() {
    let fx = Fixture::new();
    let base = [
        "simulate",
        "--graph",
        "k3.el",
        "--colors",
        "2",
        "--n",
        "300",
        "--p-exp",
        "0.9,0.75,0.6",
        "--trials",
        "30",
        "--seed",
        "11",
    ];
    let run = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend(extra);
        ok(fx.run(&a, ""))
    };
    let one = run(&["--jobs", "1"]);
    assert_eq!(one, run(&["--jobs", "4"]));
    assert_eq!(one, run(&["--jobs", "1"]));
    assert!(one.starts_with("n,p_exponent,p,trials,survivals,rate\n"));
    assert_eq!(one.lines().count(), 4);
    let greedy = run(&["--painter", "greedy", "--jobs", "3"]);
    assert_eq!(greedy, run(&["--painter", "greedy", "--jobs", "1"]));
    let d1 = ok(fx.run(&["density", "--graph", "p4.el", "--colors", "2", "--jobs", "1"], ""));
    let d4 = ok(fx.run(&["density", "--graph", "p4.el", "--colors", "2", "--jobs", "4"], ""));
    assert_eq!(d1, d4);
}
