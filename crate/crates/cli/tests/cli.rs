// Copyright (c) 2026 The midas-stego contributors
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn corpus(i: usize) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../core/tests/fixtures/corpus/img{i:02}.png"))
}

fn midas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midas"))
        .args(args)
        .env_remove("MIDAS_BACKEND")
        .output()
        .expect("spawn midas")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn hide_two(dir: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let stego = dir.join("stego.png");
    let (a, b) = (corpus(0), corpus(3));
    let mut args = vec![
        "hide", "--secrets", s(&a), s(&b), "--priv-seeds", "11", "12", "--pub-seed", "5", "--prompt",
        "a lighthouse", "--out", s(&stego),
    ];
    args.extend_from_slice(extra);
    (midas(&args), stego)
}

#[test]
fn hide_then_reveal_writes_every_segment() {
    let dir = tempfile::tempdir().unwrap();
    let (out, stego) = hide_two(dir.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stego.exists());

    let outdir = dir.path().join("rev");
    let out = midas(&[
        "reveal", "--stego", s(&stego), "--user", "2", "--priv-seed", "12", "--pub-seed", "5", "--prompt",
        "a lighthouse", "--outdir", s(&outdir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(outdir.join("segment_1.png").exists());
    assert!(outdir.join("segment_2.png").exists());
    assert!(!outdir.join("metrics.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("segment 2 (designated)"));
}

#[test]
fn mismatched_seed_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (corpus(0), corpus(1));
    let out = midas(&[
        "hide", "--secrets", s(&a), s(&b), "--priv-seeds", "1", "2", "3", "--out",
        s(&dir.path().join("x.png")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("--priv-seeds has 3") && msg.contains("--secrets has 2"), "{msg}");
}

#[test]
fn degraded_reveal_reports_finite_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let (out, stego) = hide_two(dir.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let outdir = dir.path().join("rev");
    let (a, b) = (corpus(0), corpus(3));
    let out = midas(&[
        "reveal", "--stego", s(&stego), "--user", "1", "--priv-seed", "11", "--pub-seed", "5", "--prompt",
        "a lighthouse", "--outdir", s(&outdir), "--degrade", "gaussian:5", "--extra-denoise", "5", "--truth",
        s(&a), s(&b),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(outdir.join("received.png").exists());

    let mut rdr = csv::Reader::from_path(outdir.join("metrics.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["name", "psnr", "ssim", "s", "corr"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let psnr: f64 = row[1].parse().unwrap();
        assert!(psnr.is_finite() && psnr > 0.0, "{row:?}");
    }
}

#[test]
fn config_file_feeds_hide_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        format!(
            "secrets = {} {}\npriv_seeds = 3, 4\npub_seed = 9\nout = stego.png\nalpha = 0.9\n",
            s(&corpus(2)),
            s(&corpus(5))
        ),
    )
    .unwrap();
    let out = midas(&["--config", s(&cfg), "hide"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("stego.png").exists(), "relative paths resolve beside the config");

    std::fs::write(&cfg, "alpha = 0.9\nbeta = 1\n").unwrap();
    let out = midas(&["--config", s(&cfg), "hide"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2: unknown key `beta`"), "{}", stderr(&out));

    let out = midas(&["--set", "gamma=1", "refgen", "--out", s(&dir.path().join("r.png"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "pub_seed = 1\n").unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    let c = dir.path().join("c.png");
    assert!(midas(&["--config", s(&cfg), "refgen", "--out", s(&a)]).status.success());
    assert!(midas(&["--config", s(&cfg), "refgen", "--pub-seed", "2", "--out", s(&b)]).status.success());
    assert!(midas(&["refgen", "--pub-seed", "2", "--out", s(&c)]).status.success());
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(read(&b), read(&c));
}

#[test]
fn exit_codes_separate_io_and_backend_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.png");
    let out = midas(&["hide", "--secrets", s(&missing), "--priv-seeds", "1", "--out", s(&dir.path().join("o.png"))]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let backend = format!("tcp:127.0.0.1:{port}");
    let out = midas(&["--backend", &backend, "refgen", "--out", s(&dir.path().join("r.png"))]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = midas(&["hide", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(midas(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_reads_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus(1), dir.path().join("ref.png")).unwrap();
    std::fs::copy(corpus(1), dir.path().join("same.png")).unwrap();
    std::fs::copy(corpus(6), dir.path().join("other.png")).unwrap();
    let manifest = dir.path().join("pairs.csv");
    std::fs::write(&manifest, "name,reference,candidate\nsame,ref.png,same.png\nother,ref.png,other.png\n").unwrap();
    let csv_out = dir.path().join("out/metrics.csv");
    let out = midas(&["eval", "--pairs", s(&manifest), "--out", s(&csv_out)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(&csv_out).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][0], "same");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 99.0);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    assert!(rows[1][1].parse::<f64>().unwrap() < 40.0);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let csv_out = dir.path().join("sweep.csv");
    let (a, b) = (corpus(4), corpus(7));
    let out = midas(&[
        "sweep", "--param", "alpha", "--values", "0.8,0.95", "--secrets", s(&a), s(&b), "--priv-seeds", "1", "2",
        "--out", s(&csv_out),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(&csv_out).unwrap();
    assert_eq!(&rdr.headers().unwrap()[0], "param");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "alpha");
    assert_eq!(&rows[1][1], "0.95");
    // More reference weight makes the stego closer to the reference image.
    let near = |r: &csv::StringRecord| r[2].parse::<f64>().unwrap();
    assert!(near(&rows[0]) > near(&rows[1]), "{rows:?}");
}

#[test]
fn tcp_backend_against_the_echo_server() {
    let mut server = Command::new(env!("CARGO_BIN_EXE_midas"))
        .args(["echo-server", "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();

    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.png");
    let out = Command::new(env!("CARGO_BIN_EXE_midas"))
        .args(["refgen", "--out", s(&r)])
        .env("MIDAS_BACKEND", format!("tcp:{addr}"))
        .output()
        .unwrap();
    let _ = server.kill();
    let _ = server.wait();
    assert!(out.status.success(), "{}", stderr(&out));
    let img = midas_core::codec::ImageBuffer::load(&r).unwrap();
    // The echo backend reports 4×64×64 latents at scale 4.
    assert_eq!((img.width(), img.height()), (256, 256));
}
