//! Command-line front end for the tiled 2-D wavelet engine.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or input
//! problems (clap reports its own parse errors as 2 as well).

use clap::{Args, Parser, Subcommand};
use dwt_core::bench::{run_bench, BenchConfig, BenchError, Experiment};
use dwt_core::engine::{Executor, ExtensionMode, QuadField};
use dwt_core::imageio::{self, ImageFormat};
use dwt_core::schemes::{build, count_ops, invert, SchemeKind};
use dwt_core::verify::{all_passed, run_checks, VerifyOptions};
use dwt_core::wavelets::{builtin, builtin_names, load_custom, WaveletSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dwt",
    version,
    about = "Tiled 2-D wavelet transforms: separable and fused non-separable schemes",
    long_about = "Forward and inverse 2-D discrete wavelet transforms over 2x2 coefficient \
                  quads, with four interchangeable execution schemes (separable lifting, \
                  separable convolution, non-separable lifting, and a fused non-separable \
                  form adapted for banded multithreading). Raw little-endian f32 files and \
                  binary PGM are supported; a file's format follows its extension (.pgm is \
                  PGM, everything else raw f32)."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Forward transform an image into subband coefficients
    Forward(TransformArgs),
    /// Reconstruct an image from subband coefficients
    Inverse(TransformArgs),
    /// Run the built-in correctness audit and report each check
    Verify(VerifyArgs),
    /// Print per-scheme operation counts and optionally the full factors
    Ops(OpsArgs),
    /// Measure throughput and emit CSV
    Bench(BenchArgs),
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse()
}

fn parse_extension(s: &str) -> Result<ExtensionMode, String> {
    s.parse()
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse()
}

/// "512" or "640x480".
fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse_edge = |t: &str| {
        t.parse::<usize>().map_err(|_| format!("bad dimension '{t}' in size '{s}'"))
    };
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok((parse_edge(w)?, parse_edge(h)?)),
        None => {
            let e = parse_edge(s)?;
            Ok((e, e))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Quad,
    Mallat,
}

fn parse_layout(s: &str) -> Result<Layout, String> {
    match s {
        "quad" => Ok(Layout::Quad),
        "mallat" => Ok(Layout::Mallat),
        other => Err(format!("unknown layout '{other}' (quad, mallat)")),
    }
}

#[derive(Args)]
struct TransformArgs {
    /// Input file (.pgm or raw f32)
    input: PathBuf,
    /// Output file (.pgm or raw f32)
    output: PathBuf,
    /// Built-in wavelet name, or @path to a lifting config file
    #[arg(long, default_value = "cdf53")]
    wavelet: String,
    #[arg(long, default_value = "ns-adapted", value_parser = parse_scheme)]
    scheme: SchemeKind,
    /// Worker threads (defaults to the detected core count)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "symmetric", value_parser = parse_extension)]
    extension: ExtensionMode,
    /// Pixel dimensions, required for raw f32 input ("W", or "WxH")
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    /// Coefficient arrangement: interleaved quads in place, or the four
    /// subband planes tiled into quadrants of one image
    #[arg(long, default_value = "quad", value_parser = parse_layout)]
    layout: Layout,
}

#[derive(Args)]
struct VerifyArgs {
    /// Built-in wavelet name, or @path to a lifting config file
    #[arg(long, default_value = "cdf53")]
    wavelet: String,
    #[arg(long, default_value = "symmetric", value_parser = parse_extension)]
    extension: ExtensionMode,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Plant a known defect; the audit must then fail (exit 1)
    #[arg(long)]
    negative_control: bool,
}

#[derive(Args)]
struct OpsArgs {
    /// Built-in wavelet name, or @path to a lifting config file
    #[arg(long, default_value = "cdf53")]
    wavelet: String,
    /// Print every step's matrix factors for this scheme
    #[arg(long, value_parser = parse_scheme)]
    dump: Option<SchemeKind>,
    /// Dump the inverse factors instead of the forward ones
    #[arg(long, requires = "dump")]
    inverse: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Built-in wavelet name, or @path to a lifting config file
    #[arg(long, default_value = "cdf53")]
    wavelet: String,
    /// Experiments to run
    #[arg(long, value_delimiter = ',', value_parser = parse_experiment)]
    experiments: Option<Vec<Experiment>>,
    /// Timed repetitions per cell (median reported)
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    /// Thread counts for the threads sweep, e.g. 1,2,8
    #[arg(long, value_delimiter = ',')]
    threads: Option<Vec<usize>>,
    /// Square tile edges for the tile-size sweep, e.g. 256,512,1024
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Image size for the threads and image sweeps ("W" or "WxH")
    #[arg(long, value_parser = parse_size)]
    edges: Option<(usize, usize)>,
    /// Tile edge for the image sweep
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long, default_value_t = 0xD417)]
    seed: u64,
    #[arg(long, default_value = "symmetric", value_parser = parse_extension)]
    extension: ExtensionMode,
    /// Schemes to measure
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Option<Vec<SchemeKind>>,
    /// Write CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

fn resolve_wavelet(spec: &str) -> Result<WaveletSpec, String> {
    if let Some(path) = spec.strip_prefix('@') {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read wavelet config {path}: {e}"))?;
        load_custom(&text).map_err(|e| format!("{path}: {e}"))
    } else {
        builtin(spec).map_err(|_| {
            format!("unknown wavelet '{spec}' (built-ins: {}; @path loads a config)", builtin_names().join(", "))
        })
    }
}

fn detected_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run_transform(args: &TransformArgs, forward: bool) -> Result<(), String> {
    let wavelet = resolve_wavelet(&args.wavelet)?;
    let scheme = build(args.scheme, &wavelet);
    let threads = args.threads.unwrap_or_else(detected_threads);
    if threads == 0 {
        return Err("--threads must be at least 1".into());
    }
    let (data, width, height) =
        imageio::load_image(&args.input, args.size).map_err(|e| e.to_string())?;
    if width % 2 != 0 || height % 2 != 0 {
        return Err(format!("{width}x{height} input: both sides must be even"));
    }

    let tile = if forward || args.layout == Layout::Quad {
        QuadField::from_pixels(&data, width, height, args.extension).map_err(|e| e.to_string())?
    } else {
        imageio::from_mallat_image(&data, width, height, args.extension)
            .map_err(|e| e.to_string())?
    };

    let exec = Executor::new(threads);
    let out = if forward {
        exec.forward(&tile, &scheme).map_err(|e| e.to_string())?
    } else {
        exec.inverse(&tile, &scheme).map_err(|e| e.to_string())?
    };

    let result = if forward && args.layout == Layout::Mallat {
        imageio::to_mallat_image(&out)
    } else {
        out.to_pixels()
    };
    if forward && ImageFormat::from_path(&args.output) == ImageFormat::Pgm {
        eprintln!("note: PGM output clamps coefficients to [0,1] and quantizes to 8 bits");
    }
    imageio::store_image(&args.output, &result, width, height).map_err(|e| e.to_string())?;
    println!(
        "{} {} {} {}x{} {} ({} threads) -> {}",
        if forward { "forward" } else { "inverse" },
        args.scheme,
        wavelet.name(),
        width,
        height,
        args.extension,
        threads,
        args.output.display()
    );
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<bool, String> {
    let wavelet = resolve_wavelet(&args.wavelet)?;
    let mut opts = VerifyOptions::new(wavelet);
    opts.extension = args.extension;
    opts.threads = args.threads.unwrap_or_else(detected_threads).max(1);
    opts.seed = args.seed;
    opts.negative_control = args.negative_control;
    let outcomes = run_checks(&opts);
    for o in &outcomes {
        println!("{}", o.render_line());
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} checks passed", outcomes.len());
    Ok(all_passed(&outcomes))
}

fn run_ops(args: &OpsArgs) -> Result<(), String> {
    let wavelet = resolve_wavelet(&args.wavelet)?;
    println!(
        "wavelet {}: {} lifting pair(s), {}",
        wavelet.name(),
        wavelet.pairs().len(),
        if wavelet.has_scaling() { "scaled channels" } else { "unit channel gain" }
    );
    println!("{:<14} {:>6} {:>10} {:>12}", "scheme", "steps", "macs/quad", "copies/quad");
    for kind in SchemeKind::all() {
        let ops = count_ops(&build(kind, &wavelet));
        println!(
            "{:<14} {:>6} {:>10} {:>12}",
            kind.to_string(),
            ops.steps,
            ops.macs_per_quad,
            ops.copies_per_quad
        );
    }
    if let Some(kind) = args.dump {
        let scheme = build(kind, &wavelet);
        let scheme = if args.inverse {
            invert(&scheme).map_err(|e| e.to_string())?
        } else {
            scheme
        };
        println!();
        print!("{}", scheme.dump_text());
    }
    Ok(())
}

fn run_bench_cmd(args: &BenchArgs) -> Result<bool, String> {
    let wavelet = resolve_wavelet(&args.wavelet)?;
    let mut cfg = BenchConfig::new(wavelet);
    if let Some(x) = &args.experiments {
        cfg.experiments = x.clone();
    }
    cfg.runs = args.runs;
    cfg.warmup = args.warmup;
    if let Some(t) = &args.threads {
        cfg.thread_list = t.clone();
    }
    if let Some(s) = &args.sizes {
        cfg.size_list = s.clone();
    }
    if let Some(e) = args.edges {
        cfg.edges = e;
    }
    if let Some(t) = args.tile {
        cfg.tile = t;
    }
    cfg.seed = args.seed;
    cfg.extension = args.extension;
    if let Some(s) = &args.schemes {
        cfg.schemes = s.clone();
    }

    let report = match run_bench(&cfg, &mut |msg| eprintln!("# {msg}")) {
        Ok(r) => r,
        Err(BenchError::SelfCheck(msg)) => {
            eprintln!("self-check failed: {msg}");
            return Ok(false);
        }
        Err(e) => return Err(e.to_string()),
    };
    let csv = report.to_csv();
    match &args.output {
        Some(path) => {
            std::fs::write(path, &csv).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            eprintln!("# wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    eprint!("{}", report.speedup_summary());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, String> = match &cli.cmd {
        Cmd::Forward(args) => run_transform(args, true).map(|()| true),
        Cmd::Inverse(args) => run_transform(args, false).map(|()| true),
        Cmd::Verify(args) => run_verify(args),
        Cmd::Ops(args) => run_ops(args).map(|()| true),
        Cmd::Bench(args) => run_bench_cmd(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
