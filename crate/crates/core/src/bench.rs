//! Throughput measurement for the four schemes.
//!
//! Three sweeps: thread count at a fixed tile, tile size at a fixed thread
//! count, and a full image processed tile by tile. Every cell reports
//! nanoseconds per pixel as the median over `runs` timed repetitions
//! (min/max kept as spread), after discarding `warmup` repetitions. The
//! timed region covers only the forward transform (plus tile extract and
//! writeback in the image sweep); input generation and I/O stay outside.

use crate::engine::{EngineError, ExecPlan, Executor, ExtensionMode, QuadField};
use crate::oracle;
use crate::schemes::{build, SchemeKind};
use crate::wavelets::WaveletSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Threads,
    TileSize,
    Image,
}

impl Experiment {
    pub fn all() -> [Experiment; 3] {
        [Experiment::Threads, Experiment::TileSize, Experiment::Image]
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Threads => "threads",
            Experiment::TileSize => "tile-size",
            Experiment::Image => "image",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "threads" => Ok(Experiment::Threads),
            "tile-size" => Ok(Experiment::TileSize),
            "image" => Ok(Experiment::Image),
            other => Err(format!("unknown experiment '{other}' (threads, tile-size, image)")),
        }
    }
}

#[derive(Debug)]
pub enum BenchError {
    BadConfig(String),
    /// The pre-run correctness gate failed: timing numbers for a wrong
    /// transform are worthless, so the whole bench aborts.
    SelfCheck(String),
    Engine(EngineError),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::BadConfig(msg) => write!(f, "{msg}"),
            BenchError::SelfCheck(msg) => write!(f, "self-check failed: {msg}"),
            BenchError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<EngineError> for BenchError {
    fn from(e: EngineError) -> Self {
        BenchError::Engine(e)
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub experiments: Vec<Experiment>,
    pub runs: usize,
    pub warmup: usize,
    pub thread_list: Vec<usize>,
    pub size_list: Vec<usize>,
    /// Full image size for the threads and image sweeps (width, height).
    pub edges: (usize, usize),
    /// Tile edge for the image sweep.
    pub tile: usize,
    pub seed: u64,
    pub extension: ExtensionMode,
    pub schemes: Vec<SchemeKind>,
    pub wavelet: WaveletSpec,
}

impl BenchConfig {
    pub fn new(wavelet: WaveletSpec) -> Self {
        let detected = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let mut thread_list = vec![1];
        if detected > 1 {
            if detected > 2 {
                thread_list.push(detected / 2);
            }
            thread_list.push(detected);
        }
        Self {
            experiments: Experiment::all().to_vec(),
            runs: 5,
            warmup: 3,
            thread_list,
            size_list: vec![256, 512, 1024, 2048],
            edges: (2048, 2048),
            tile: 1024,
            seed: 0xD417,
            extension: ExtensionMode::Symmetric,
            schemes: SchemeKind::all().to_vec(),
            wavelet,
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::BadConfig(msg));
        if self.runs < 3 {
            return bad(format!("need at least 3 timed runs for a median, got {}", self.runs));
        }
        if self.experiments.is_empty() || self.schemes.is_empty() {
            return bad("nothing to measure".into());
        }
        if self.thread_list.is_empty() || self.thread_list.contains(&0) {
            return bad("thread list must be non-empty positive".into());
        }
        if self.edges.0 == 0 || self.edges.1 == 0 || self.edges.0 % 2 != 0 || self.edges.1 % 2 != 0
        {
            return bad(format!("image size {}x{} must be even", self.edges.0, self.edges.1));
        }
        for &s in &self.size_list {
            if s == 0 || s % 2 != 0 {
                return bad(format!("tile size {s} must be even"));
            }
        }
        if self.tile == 0 || self.tile % 2 != 0 {
            return bad(format!("tile edge {} must be even", self.tile));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub experiment: Experiment,
    pub scheme: SchemeKind,
    pub wavelet: String,
    pub threads: usize,
    pub width: usize,
    pub height: usize,
    pub runs: usize,
    pub median_ns_per_pel: f64,
    pub min_ns_per_pel: f64,
    pub max_ns_per_pel: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub meta: Vec<(String, String)>,
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<String>,
}

pub const CSV_HEADER: &str = "experiment,scheme,wavelet,threads,width,height,runs,median_ns_per_pel,min_ns_per_pel,max_ns_per_pel";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        for s in &self.skipped {
            out.push_str(&format!("# skipped: {s}\n"));
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.3},{:.3},{:.3}\n",
                r.experiment,
                r.scheme,
                r.wavelet,
                r.threads,
                r.width,
                r.height,
                r.runs,
                r.median_ns_per_pel,
                r.min_ns_per_pel,
                r.max_ns_per_pel
            ));
        }
        out
    }

    /// Per-cell speedup of every scheme against sep-lifting measured under
    /// identical conditions, highest first.
    pub fn speedup_summary(&self) -> String {
        let mut lines = Vec::new();
        for r in &self.records {
            if r.scheme == SchemeKind::SepLifting {
                continue;
            }
            let baseline = self.records.iter().find(|b| {
                b.scheme == SchemeKind::SepLifting
                    && b.experiment == r.experiment
                    && (b.threads, b.width, b.height) == (r.threads, r.width, r.height)
            });
            if let Some(b) = baseline {
                if r.median_ns_per_pel > 0.0 {
                    lines.push((
                        b.median_ns_per_pel / r.median_ns_per_pel,
                        format!(
                            "{}: {} is {:.2}x sep-lifting at {}x{}, {} threads",
                            r.experiment,
                            r.scheme,
                            b.median_ns_per_pel / r.median_ns_per_pel,
                            r.width,
                            r.height,
                            r.threads
                        ),
                    ));
                }
            }
        }
        lines.sort_by(|a, b| b.0.total_cmp(&a.0));
        lines.into_iter().map(|(_, l)| l + "\n").collect()
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn random_pixels(width: usize, height: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..width * height).map(|_| rng.gen_range(0.0f32..1.0)).collect()
}

/// Correctness gate: every configured scheme against the single-stage
/// filter-bank reference on a 64x64 tile before any timing starts.
fn precheck(cfg: &BenchConfig) -> Result<(), BenchError> {
    let px = random_pixels(64, 64, cfg.seed ^ 0x5eed);
    let tile = QuadField::from_pixels(&px, 64, 64, ExtensionMode::Symmetric)?;
    let reference = oracle::direct_transform(&px, 64, 64, &cfg.wavelet, ExtensionMode::Symmetric);
    let exec = Executor::new(1);
    for &kind in &cfg.schemes {
        let got = exec.forward(&tile, &build(kind, &cfg.wavelet))?;
        let planes = got.to_mallat();
        for c in 0..4 {
            for (i, (a, b)) in planes[c].iter().zip(&reference[c]).enumerate() {
                let err = (*a as f64 - b).abs();
                if err > 1e-3 {
                    return Err(BenchError::SelfCheck(format!(
                        "{kind} disagrees with the filter-bank reference: component {c} \
                         sample {i} is off by {err:.2e}"
                    )));
                }
            }
        }
    }
    Ok(())
}

struct Cell {
    experiment: Experiment,
    scheme: SchemeKind,
    threads: usize,
    width: usize,
    height: usize,
    samples_ns_per_pel: Vec<f64>,
}

fn time_tile_cell(
    cfg: &BenchConfig,
    exec: &Executor,
    experiment: Experiment,
    kind: SchemeKind,
    width: usize,
    height: usize,
) -> Result<Cell, BenchError> {
    let px = random_pixels(width, height, cfg.seed);
    let tile = QuadField::from_pixels(&px, width, height, cfg.extension)?;
    let wq = width / 2;
    let hq = height / 2;
    let plan = ExecPlan::forward(&build(kind, &cfg.wavelet), exec.threads(), wq, hq)?;
    let mut dst = QuadField::new(wq, hq, cfg.extension);
    let mut scratch = QuadField::new(wq, hq, cfg.extension);
    let pels = (width * height) as f64;
    let mut samples = Vec::with_capacity(cfg.runs);
    for i in 0..cfg.warmup + cfg.runs {
        let t0 = Instant::now();
        exec.run_into(&tile, &plan, &mut dst, &mut scratch)?;
        let ns = t0.elapsed().as_nanos() as f64;
        if i >= cfg.warmup {
            samples.push(ns / pels);
        }
    }
    Ok(Cell {
        experiment,
        scheme: kind,
        threads: exec.threads(),
        width,
        height,
        samples_ns_per_pel: samples,
    })
}

fn time_image_cell(
    cfg: &BenchConfig,
    exec: &Executor,
    kind: SchemeKind,
) -> Result<Cell, BenchError> {
    let (width, height) = cfg.edges;
    let image = random_pixels(width, height, cfg.seed);
    let mut out_image = vec![0.0f32; image.len()];
    let tile_edge = cfg.tile.min(width).min(height);
    let tiles_x = width / tile_edge;
    let tiles_y = height / tile_edge;
    let wq = tile_edge / 2;
    let hq = tile_edge / 2;
    let plan = ExecPlan::forward(&build(kind, &cfg.wavelet), exec.threads(), wq, hq)?;
    let mut tile = QuadField::new(wq, hq, cfg.extension);
    let mut dst = QuadField::new(wq, hq, cfg.extension);
    let mut scratch = QuadField::new(wq, hq, cfg.extension);
    let mut tile_px = vec![0.0f32; tile_edge * tile_edge];
    let pels = (tiles_x * tiles_y * tile_edge * tile_edge) as f64;

    let mut samples = Vec::with_capacity(cfg.runs);
    for i in 0..cfg.warmup + cfg.runs {
        let t0 = Instant::now();
        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                let x0 = tx * tile_edge;
                let y0 = ty * tile_edge;
                for r in 0..tile_edge {
                    let row = (y0 + r) * width + x0;
                    tile_px[r * tile_edge..(r + 1) * tile_edge]
                        .copy_from_slice(&image[row..row + tile_edge]);
                }
                fill_quads(&mut tile, &tile_px, tile_edge);
                exec.run_into(&tile, &plan, &mut dst, &mut scratch)?;
                let transformed = dst.to_pixels();
                for r in 0..tile_edge {
                    let row = (y0 + r) * width + x0;
                    out_image[row..row + tile_edge]
                        .copy_from_slice(&transformed[r * tile_edge..(r + 1) * tile_edge]);
                }
            }
        }
        let ns = t0.elapsed().as_nanos() as f64;
        if i >= cfg.warmup {
            samples.push(ns / pels);
        }
    }
    std::hint::black_box(&out_image);
    Ok(Cell {
        experiment: Experiment::Image,
        scheme: kind,
        threads: exec.threads(),
        width,
        height,
        samples_ns_per_pel: samples,
    })
}

/// Refill an existing QuadField from a square pixel tile without
/// reallocating.
fn fill_quads(tile: &mut QuadField, px: &[f32], edge: usize) {
    let wq = edge / 2;
    for n in 0..edge / 2 {
        for m in 0..wq {
            let base = (n * wq + m) * 4;
            let data = tile.data_mut();
            data[base] = px[(2 * n) * edge + 2 * m];
            data[base + 1] = px[(2 * n) * edge + 2 * m + 1];
            data[base + 2] = px[(2 * n + 1) * edge + 2 * m];
            data[base + 3] = px[(2 * n + 1) * edge + 2 * m + 1];
        }
    }
}

pub fn run_bench(
    cfg: &BenchConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    progress("self-check against the filter-bank reference on 64x64");
    precheck(cfg)?;

    let detected = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut report = BenchReport {
        meta: vec![
            ("wavelet".into(), cfg.wavelet.name().to_string()),
            ("extension".into(), cfg.extension.to_string()),
            ("seed".into(), cfg.seed.to_string()),
            ("runs".into(), cfg.runs.to_string()),
            ("warmup".into(), cfg.warmup.to_string()),
            ("host_threads".into(), detected.to_string()),
        ],
        records: Vec::new(),
        skipped: Vec::new(),
    };

    let max_threads = *cfg.thread_list.iter().max().unwrap();
    let mut cells: Vec<Cell> = Vec::new();

    for &experiment in &cfg.experiments {
        match experiment {
            Experiment::Threads => {
                let (width, height) = cfg.edges;
                for &threads in &cfg.thread_list {
                    let exec = Executor::new(threads);
                    for &kind in &cfg.schemes {
                        progress(&format!("threads sweep: {kind}, {threads} threads"));
                        cells.push(time_tile_cell(cfg, &exec, experiment, kind, width, height)?);
                    }
                }
            }
            Experiment::TileSize => {
                let exec = Executor::new(max_threads);
                for &size in &cfg.size_list {
                    if size < 2 {
                        report.skipped.push(format!("tile-size {size}: too small"));
                        continue;
                    }
                    for &kind in &cfg.schemes {
                        progress(&format!("tile-size sweep: {kind}, {size}x{size}"));
                        cells.push(time_tile_cell(cfg, &exec, experiment, kind, size, size)?);
                    }
                }
            }
            Experiment::Image => {
                let (width, height) = cfg.edges;
                let tile_edge = cfg.tile.min(width).min(height);
                if width % tile_edge != 0 || height % tile_edge != 0 {
                    report.skipped.push(format!(
                        "image sweep: {width}x{height} is not a multiple of the {tile_edge} tile"
                    ));
                    continue;
                }
                let exec = Executor::new(max_threads);
                for &kind in &cfg.schemes {
                    progress(&format!("image sweep: {kind}, {width}x{height}"));
                    cells.push(time_image_cell(cfg, &exec, kind)?);
                }
            }
        }
    }

    for cell in cells {
        let mut s = cell.samples_ns_per_pel;
        s.sort_by(f64::total_cmp);
        report.records.push(BenchRecord {
            experiment: cell.experiment,
            scheme: cell.scheme,
            wavelet: cfg.wavelet.name().to_string(),
            threads: cell.threads,
            width: cell.width,
            height: cell.height,
            runs: s.len(),
            median_ns_per_pel: median(&s),
            min_ns_per_pel: *s.first().unwrap(),
            max_ns_per_pel: *s.last().unwrap(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelets::builtin;

    fn tiny_config() -> BenchConfig {
        let mut cfg = BenchConfig::new(builtin("cdf53").unwrap());
        cfg.runs = 3;
        cfg.warmup = 1;
        cfg.thread_list = vec![1, 2];
        cfg.size_list = vec![16];
        cfg.edges = (32, 32);
        cfg.tile = 16;
        cfg.schemes = vec![SchemeKind::SepLifting, SchemeKind::NsAdapted];
        cfg
    }

    #[test]
    fn median_is_order_statistic() {
        assert_eq!(median(&[1.0, 2.0, 9.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 10.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn tiny_bench_produces_complete_csv() {
        let cfg = tiny_config();
        let mut log = Vec::new();
        let report = run_bench(&cfg, &mut |m| log.push(m.to_string())).unwrap();
        // threads: 2 thread counts x 2 schemes; tile-size: 1 x 2; image: 2.
        assert_eq!(report.records.len(), 4 + 2 + 2);
        for r in &report.records {
            assert!(r.median_ns_per_pel.is_finite() && r.median_ns_per_pel > 0.0);
            assert!(r.min_ns_per_pel <= r.median_ns_per_pel);
            assert!(r.median_ns_per_pel <= r.max_ns_per_pel);
            assert_eq!(r.runs, 3);
        }
        let csv = report.to_csv();
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, CSV_HEADER);
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), report.records.len());
        for row in rows {
            assert_eq!(row.split(',').count(), 10);
        }
        assert!(!log.is_empty());
        let summary = report.speedup_summary();
        assert!(summary.contains("ns-adapted"));
        assert!(summary.contains("x sep-lifting"));
    }

    #[test]
    fn indivisible_image_is_skipped_not_failed() {
        let mut cfg = tiny_config();
        cfg.experiments = vec![Experiment::Image];
        cfg.edges = (24, 24); // not a multiple of the 16 tile
        let report = run_bench(&cfg, &mut |_| {}).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.skipped.len(), 1);
        assert!(report.to_csv().contains("# skipped"));
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = tiny_config();
        cfg.runs = 2;
        assert!(matches!(run_bench(&cfg, &mut |_| {}), Err(BenchError::BadConfig(_))));
        let mut cfg = tiny_config();
        cfg.size_list = vec![15];
        assert!(matches!(run_bench(&cfg, &mut |_| {}), Err(BenchError::BadConfig(_))));
        let mut cfg = tiny_config();
        cfg.thread_list = vec![];
        assert!(matches!(run_bench(&cfg, &mut |_| {}), Err(BenchError::BadConfig(_))));
    }

    #[test]
    fn self_check_passes_for_both_builtins() {
        // Both sides of the gate derive from the same wavelet, so it can
        // only fire on an engine defect; this pins the wiring.
        for name in ["cdf53", "cdf97"] {
            let mut cfg = tiny_config();
            cfg.wavelet = builtin(name).unwrap();
            cfg.experiments = vec![Experiment::TileSize];
            assert!(run_bench(&cfg, &mut |_| {}).is_ok());
        }
    }
}
