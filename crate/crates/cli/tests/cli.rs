//! End-to-end tests of the `dwt` binary: every subcommand, the exit-code
//! contract, and file-level determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dwt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dwt"))
}

fn run(args: &[&str]) -> Output {
    dwt().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_f32(path: &Path, values: &[f32]) {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).unwrap();
}

fn read_f32(path: &Path) -> Vec<f32> {
    std::fs::read(path)
        .unwrap()
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

fn random_values(n: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

struct TestDir(tempfile::TempDir);

impl TestDir {
    fn new(tag: &str) -> Self {
        Self(tempfile::Builder::new().prefix(&format!("dwt-cli-{tag}-")).tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

#[test]
fn forward_inverse_roundtrip_raw_f32() {
    let dir = TestDir::new("roundtrip");
    let input = dir.path("in.f32");
    let coeffs = dir.path("coef.f32");
    let back = dir.path("back.f32");
    let values = random_values(96 * 64, 7);
    write_f32(&input, &values);

    for scheme in ["sep-lifting", "sep-conv", "ns-lifting", "ns-adapted"] {
        for wavelet in ["cdf53", "cdf97"] {
            let out = run(&[
                "forward",
                input.to_str().unwrap(),
                coeffs.to_str().unwrap(),
                "--size",
                "96x64",
                "--scheme",
                scheme,
                "--wavelet",
                wavelet,
            ]);
            assert!(out.status.success(), "forward {scheme}/{wavelet}: {}", stderr(&out));
            let out = run(&[
                "inverse",
                coeffs.to_str().unwrap(),
                back.to_str().unwrap(),
                "--size",
                "96x64",
                "--scheme",
                scheme,
                "--wavelet",
                wavelet,
            ]);
            assert!(out.status.success(), "inverse {scheme}/{wavelet}: {}", stderr(&out));
            let recon = read_f32(&back);
            let err = values
                .iter()
                .zip(&recon)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(err < 1e-4, "{scheme}/{wavelet}: max error {err}");
        }
    }
}

#[test]
fn thread_count_does_not_change_output_bytes() {
    let dir = TestDir::new("threads");
    let input = dir.path("in.f32");
    write_f32(&input, &random_values(128 * 128, 9));
    let a = dir.path("a.f32");
    let b = dir.path("b.f32");

    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        a.to_str().unwrap(),
        "--size",
        "128",
        "--threads",
        "1",
        "--wavelet",
        "cdf97",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        b.to_str().unwrap(),
        "--size",
        "128",
        "--threads",
        "8",
        "--wavelet",
        "cdf97",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "1-thread and 8-thread coefficient files differ"
    );
}

#[test]
fn mallat_layout_roundtrips() {
    let dir = TestDir::new("mallat");
    let input = dir.path("in.f32");
    let coeffs = dir.path("coef.f32");
    let back = dir.path("back.f32");
    let values = random_values(64 * 64, 11);
    write_f32(&input, &values);

    for step in [
        vec!["forward", "--layout", "mallat"],
        vec!["inverse", "--layout", "mallat"],
    ] {
        let (src, dst) = if step[0] == "forward" { (&input, &coeffs) } else { (&coeffs, &back) };
        let mut args = vec![step[0], src.to_str().unwrap(), dst.to_str().unwrap()];
        args.extend_from_slice(&["--size", "64", "--layout", "mallat"]);
        let out = run(&args);
        assert!(out.status.success(), "{}: {}", step[0], stderr(&out));
    }
    let recon = read_f32(&back);
    let err =
        values.iter().zip(&recon).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(err < 1e-4, "mallat roundtrip error {err}");
}

#[test]
fn pgm_pipeline_runs() {
    let dir = TestDir::new("pgm");
    let input = dir.path("in.pgm");
    // 32x16 gradient.
    let mut pgm = b"P5\n32 16\n255\n".to_vec();
    pgm.extend((0u32..32 * 16).map(|i| (i % 256) as u8));
    std::fs::write(&input, pgm).unwrap();

    // PGM carries its own size; subbands to a PGM for inspection.
    let vis = dir.path("subbands.pgm");
    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        vis.to_str().unwrap(),
        "--layout",
        "mallat",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("quantizes"), "PGM coefficient output should warn");
    let header = std::fs::read(&vis).unwrap();
    assert_eq!(&header[..2], b"P5");

    // Lossless pipeline: PGM in, f32 coefficients out, PGM back.
    let coeffs = dir.path("coef.f32");
    let back = dir.path("back.pgm");
    let out = run(&["forward", input.to_str().unwrap(), coeffs.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "inverse",
        coeffs.to_str().unwrap(),
        back.to_str().unwrap(),
        "--size",
        "32x16",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let original = std::fs::read(&input).unwrap();
    let reconstructed = std::fs::read(&back).unwrap();
    let o_raster = &original[original.len() - 32 * 16..];
    let r_raster = &reconstructed[reconstructed.len() - 32 * 16..];
    let max_byte_err = o_raster
        .iter()
        .zip(r_raster)
        .map(|(a, b)| (*a as i32 - *b as i32).abs())
        .max()
        .unwrap();
    assert!(max_byte_err <= 1, "PGM roundtrip drifted by {max_byte_err} levels");
}

#[test]
fn custom_wavelet_file_is_accepted() {
    let dir = TestDir::new("custom");
    let config = dir.path("skew.wavelet");
    std::fs::write(&config, "name = skew\npredict[1] = -1\nupdate[1] = 1/2\nscale_low = 1\n")
        .unwrap();
    let input = dir.path("in.f32");
    let coeffs = dir.path("coef.f32");
    let back = dir.path("back.f32");
    let values = random_values(32 * 32, 13);
    write_f32(&input, &values);

    let spec = format!("@{}", config.display());
    for (cmd, src, dst) in [("forward", &input, &coeffs), ("inverse", &coeffs, &back)] {
        let out = run(&[
            cmd,
            src.to_str().unwrap(),
            dst.to_str().unwrap(),
            "--size",
            "32",
            "--wavelet",
            &spec,
        ]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    }
    let recon = read_f32(&back);
    let err =
        values.iter().zip(&recon).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(err < 1e-4, "custom wavelet roundtrip error {err}");

    // A malformed config is a usage error (exit 2) with a located message.
    std::fs::write(&config, "name = broken\npredict[1] = -1\nupdate[1] = 1/2 + zq\n").unwrap();
    let out = run(&["verify", "--wavelet", &spec]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn verify_passes_and_negative_control_fails() {
    let out = run(&["verify", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 11);
    assert!(text.contains("11/11 checks passed"));

    let out = run(&["verify", "--negative-control"]);
    assert_eq!(out.status.code(), Some(1), "negative control must exit 1");
    let text = stdout(&out);
    assert!(text.contains("FAIL symbolic-equivalence"));
    assert!(text.contains("10/11 checks passed"));
}

#[test]
fn verify_zero_pad_and_cdf97_pass() {
    let out = run(&["verify", "--extension", "zero-pad", "--wavelet", "cdf97", "--threads", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("11/11 checks passed"));
}

#[test]
fn ops_reports_counts_and_dumps_factors() {
    let out = run(&["ops"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for scheme in ["sep-lifting", "sep-conv", "ns-lifting", "ns-adapted"] {
        assert!(text.contains(scheme), "missing {scheme} row");
    }
    // cdf53 costs are part of the contract.
    assert!(text.contains("16"), "sep-lifting macs");
    assert!(text.contains("18"), "ns-adapted macs");
    assert!(text.contains("24"), "ns-lifting macs");
    assert!(text.contains("28"), "sep-conv macs");

    let out = run(&["ops", "--wavelet", "cdf97", "--dump", "ns-adapted"]);
    assert!(out.status.success());
    let dump = stdout(&out);
    assert!(dump.contains("step"), "factor dump missing");
    let forward_len = dump.len();

    let out = run(&["ops", "--wavelet", "cdf97", "--dump", "ns-adapted", "--inverse"]);
    assert!(out.status.success());
    assert!(stdout(&out).len() >= forward_len / 2, "inverse dump suspiciously short");
}

#[test]
fn bench_emits_well_formed_csv() {
    let dir = TestDir::new("bench");
    let csv_path = dir.path("out.csv");
    let out = run(&[
        "bench",
        "--runs",
        "3",
        "--warmup",
        "1",
        "--threads",
        "1,2",
        "--sizes",
        "32",
        "--edges",
        "64",
        "--tile",
        "32",
        "--schemes",
        "sep-lifting,ns-adapted",
        "--output",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next().unwrap(),
        "experiment,scheme,wavelet,threads,width,height,runs,median_ns_per_pel,min_ns_per_pel,max_ns_per_pel"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 + 2 + 2, "threads(2x2) + tile-size(1x2) + image(2)");
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10);
        assert!(fields[7].parse::<f64>().unwrap() > 0.0);
    }
    assert!(stderr(&out).contains("sep-lifting"), "speedup summary expected on stderr");
}

#[test]
fn usage_errors_exit_2() {
    let dir = TestDir::new("usage");
    let input = dir.path("in.f32");
    write_f32(&input, &random_values(16, 1));

    // Raw f32 without --size.
    let out = run(&["forward", input.to_str().unwrap(), dir.path("o.f32").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dimensions"));

    // Odd dimensions.
    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        dir.path("o.f32").to_str().unwrap(),
        "--size",
        "4x3",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Wrong byte count for the declared size.
    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        dir.path("o.f32").to_str().unwrap(),
        "--size",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown scheme name (clap parse error).
    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        dir.path("o.f32").to_str().unwrap(),
        "--size",
        "4",
        "--scheme",
        "magic",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown wavelet.
    let out = run(&[
        "forward",
        input.to_str().unwrap(),
        dir.path("o.f32").to_str().unwrap(),
        "--size",
        "4",
        "--wavelet",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Missing input file.
    let out = run(&[
        "forward",
        dir.path("absent.f32").to_str().unwrap(),
        dir.path("o.f32").to_str().unwrap(),
        "--size",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown subcommand.
    let out = run(&["transmogrify"]);
    assert_eq!(out.status.code(), Some(2));

    // Bad bench config.
    let out = run(&["bench", "--runs", "1", "--sizes", "32", "--edges", "64"]);
    assert_eq!(out.status.code(), Some(2));
}
