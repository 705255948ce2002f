//! End-to-end runs of the `gifs-lab` binary.

use std::path::Path;
use std::process::{Command, Output};

fn gifs_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gifs-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn scattered_build_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let build = gifs_lab(&[
        "gifs",
        "build",
        "scattered",
        "--alpha",
        "w",
        "--n",
        "1",
        "--b",
        "geom:1/30",
        "--depth",
        "4",
        "--width",
        "6",
        "-o",
        p(&out),
    ]);
    assert_eq!(
        code(&build),
        0,
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    for f in ["space.json", "gifs.json", "witnesses.json", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let verify = gifs_lab(&["gifs", "verify-attractor", p(&out), "--lip"]);
    assert_eq!(code(&verify), 0);
    let lip = gifs_lab(&["gifs", "check-lip", p(&out)]);
    assert_eq!(code(&lip), 0);
}

#[test]
fn every_recipe_passes_its_own_verification() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "sandwiched",
            "--tree",
            "r",
            "--b",
            "geom:1/30",
            "--depth",
            "3",
            "--width",
            "4",
        ],
        vec![
            "mixed",
            "--p",
            "power:2:m=2",
            "--m",
            "2",
            "--depth",
            "3",
            "--width",
            "4",
        ],
        vec![
            "component-space",
            "--grid",
            "8",
            "--b",
            "geom:1/30",
            "--depth",
            "3",
            "--width",
            "4",
        ],
        vec![
            "densify",
            "--points",
            "0;10",
            "--epsilon",
            "1",
            "--b",
            "geom:1/30",
            "--depth",
            "3",
            "--width",
            "4",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        let out = dir.path().join(format!("b{i}"));
        let mut full = vec!["gifs", "build"];
        full.extend(args);
        full.extend(["-o", p(&out)]);
        let build = gifs_lab(&full);
        assert_eq!(
            code(&build),
            0,
            "{:?}: {}",
            args,
            String::from_utf8_lossy(&build.stderr)
        );
        let verify = gifs_lab(&["gifs", "verify-attractor", p(&out)]);
        assert_eq!(code(&verify), 0, "{args:?}");
    }
    let quotient = gifs_lab(&["quotient", p(&dir.path().join("b2"))]);
    assert_eq!(code(&quotient), 0);
    assert_eq!(code(&gifs_lab(&["quotient", p(&dir.path().join("b0"))])), 2);
}

#[test]
fn builds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &str| {
        vec![
            "gifs",
            "build",
            "scattered",
            "--alpha",
            "2",
            "--n",
            "2",
            "--b",
            "geom:1/30",
            "--depth",
            "3",
            "--width",
            "4",
            "--lip",
            "-o",
        ]
        .into_iter()
        .map(String::from)
        .chain([o.to_string()])
        .collect::<Vec<_>>()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let argv = args(p(d));
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        assert_eq!(code(&gifs_lab(&refs)), 0);
    }
    for f in ["space.json", "gifs.json", "witnesses.json", "report.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn space_build_verify_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    let build = gifs_lab(&[
        "space",
        "build",
        "--tree",
        "alpha:2",
        "--b",
        "geom:1/30",
        "--depth",
        "3",
        "--width",
        "4",
        "-o",
        p(&json),
    ]);
    assert_eq!(code(&build), 0);
    assert_eq!(code(&gifs_lab(&["space", "verify", p(&json)])), 0);
    for (fmt, ext) in [("csv", "csv"), ("svg", "svg"), ("json", "json")] {
        let target = dir.path().join(format!("export.{ext}"));
        assert_eq!(
            code(&gifs_lab(&["export", fmt, p(&json), "-o", p(&target)])),
            0
        );
        assert!(std::fs::metadata(&target).unwrap().len() > 0);
    }
    let bp = dir.path().join("bp.json");
    let build = gifs_lab(&[
        "space",
        "build",
        "--tree",
        "alpha:1",
        "--b",
        "pair:power:2:m=2",
        "--depth",
        "2",
        "--width",
        "3",
        "-o",
        p(&bp),
    ]);
    assert_eq!(code(&build), 0);
    assert_eq!(code(&gifs_lab(&["space", "verify", p(&bp)])), 0);
}

#[test]
fn tampered_space_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    gifs_lab(&[
        "space",
        "build",
        "--b",
        "geom:1/30",
        "--depth",
        "2",
        "--width",
        "3",
        "-o",
        p(&json),
    ]);
    let text = std::fs::read_to_string(&json).unwrap().replacen(
        "\"x\": [\n        0.0",
        "\"x\": [\n        0.5",
        1,
    );
    std::fs::write(&json, text).unwrap();
    assert_ne!(code(&gifs_lab(&["space", "verify", p(&json)])), 0);
}

#[test]
fn iterate_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    gifs_lab(&[
        "gifs",
        "build",
        "scattered",
        "--alpha",
        "1",
        "--b",
        "geom:1/30",
        "--depth",
        "4",
        "--width",
        "6",
        "-o",
        p(&out),
    ]);
    let hist = dir.path().join("h.csv");
    let run = gifs_lab(&[
        "gifs",
        "iterate",
        p(&out),
        "--tol",
        "1e-9",
        "--max-iter",
        "50",
        "--history",
        p(&hist),
    ]);
    assert_eq!(code(&run), 0);
    let text = std::fs::read_to_string(&hist).unwrap();
    assert!(text.starts_with("iter,hausdorff_step,set_size\n"));
    let short = gifs_lab(&["gifs", "iterate", p(&out), "--tol", "0", "--max-iter", "1"]);
    assert_eq!(code(&short), 1);
}

#[test]
fn bound_profile_and_rank() {
    let out = gifs_lab(&[
        "bound-profile",
        "--p",
        "power:2:m=2",
        "--order",
        "1",
        "--n",
        "6",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("c_3 = 31/16"));
    assert!(text.contains("c_5 = 439/65536"));
    assert_eq!(text.lines().count(), 6);
    assert_eq!(code(&gifs_lab(&["rank", "--alpha", "2", "--n", "3"])), 0);
    assert_eq!(code(&gifs_lab(&["rank", "--alpha", "w"])), 2);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&gifs_lab(&["space", "verify", "nonexistent.json"])), 2);
    assert_eq!(
        code(&gifs_lab(&[
            "gifs",
            "build",
            "scattered",
            "--alpha",
            "q",
            "--b",
            "geom:1/30",
            "--depth",
            "2",
            "--width",
            "2",
            "-o",
            "x"
        ])),
        2
    );
    assert_eq!(
        code(&gifs_lab(&[
            "gifs",
            "build",
            "sandwiched",
            "--tree",
            "max",
            "--b",
            "geom:1/30",
            "--depth",
            "2",
            "--width",
            "3",
            "-o",
            "/tmp/never"
        ])),
        2
    );
    assert_eq!(code(&gifs_lab(&[])), 2);
}
