//! Self-contained correctness audit: every structural and numerical
//! invariant the crate promises, run as a named check list.
//!
//! Each check is independent and reports pass/fail with a one-line detail;
//! the CLI prints one line per check and exits nonzero if any failed. The
//! `negative_control` flag plants a sign error in one scheme before the
//! symbolic comparison, proving the audit actually detects defects instead
//! of rubber-stamping.

use crate::engine::{run_instrumented, Executor, ExtensionMode, QuadField};
use crate::oracle;
use crate::schemes::{
    build, count_ops, invert, verify_equivalence, Equivalence, Scheme, SchemeKind,
};
use crate::wavelets::WaveletSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reconstruction and cross-scheme agreement bound for f32 tiles.
pub const TOL_RECONSTRUCT: f64 = 1e-4;
/// Engine vs filter-bank reference bound (different evaluation orders).
pub const TOL_ORACLE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: true, detail: detail.into() }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: false, detail: detail.into() }
    }

    pub fn render_line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub wavelet: WaveletSpec,
    pub extension: ExtensionMode,
    pub threads: usize,
    pub seed: u64,
    /// Plant a sign error before the symbolic comparison; the run must
    /// then report a failure.
    pub negative_control: bool,
}

impl VerifyOptions {
    pub fn new(wavelet: WaveletSpec) -> Self {
        Self {
            wavelet,
            extension: ExtensionMode::Symmetric,
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            seed: 7,
            negative_control: false,
        }
    }
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

pub fn run_checks(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    vec![
        check_symbolic_equivalence(opts),
        check_step_counts(opts),
        check_determinants(opts),
        check_adapted_structure(opts),
        check_inverse_identity(opts),
        check_perfect_reconstruction(opts),
        check_cross_scheme(opts),
        check_oracle_equivalence(opts),
        check_determinism(opts),
        check_isolation(opts),
        check_one_dimensional_reconstruction(opts),
    ]
}

fn random_tile(wq: usize, hq: usize, ext: ExtensionMode, seed: u64) -> QuadField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tile = QuadField::new(wq, hq, ext);
    for v in tile.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    tile
}

fn max_abs_diff(a: &QuadField, b: &QuadField) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .fold(0.0, f64::max)
}

/// Largest absolute difference over quads at least `margin` away from every
/// tile edge; None if no such interior exists.
fn interior_max_diff(a: &QuadField, b: &QuadField, margin: usize) -> Option<f64> {
    let wq = a.width_quads();
    let hq = a.height_quads();
    if 2 * margin >= wq || 2 * margin >= hq {
        return None;
    }
    let mut max = 0.0f64;
    for n in margin..hq - margin {
        for m in margin..wq - margin {
            for c in 0..4 {
                max = max.max((a.get(m, n, c) as f64 - b.get(m, n, c) as f64).abs());
            }
        }
    }
    Some(max)
}

/// Quads a boundary effect can propagate into: per-step symbolic reach,
/// summed over steps (each step reads at most that many quads away).
fn chain_margin_quads(s: &Scheme) -> usize {
    let mut total = 0i32;
    for step in s.steps() {
        let mut reach = 0i32;
        for part in step.parts() {
            for r in 0..4 {
                for c in 0..4 {
                    for (&(a, b), _) in part.entry(r, c).terms() {
                        reach = reach.max(a.abs()).max(b.abs());
                    }
                }
            }
        }
        total += reach;
    }
    total as usize
}

/// Reach of the single-stage filters, in quads.
fn filter_margin_quads(w: &WaveletSpec) -> usize {
    let fb = oracle::filters_from_lifting(w);
    let reach = fb
        .lowpass
        .iter()
        .chain(&fb.highpass)
        .map(|&(d, _)| d.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    reach / 2 + 1
}

fn check_symbolic_equivalence(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "symbolic-equivalence";
    let w = &opts.wavelet;
    let reference = build(SchemeKind::SepLifting, w);
    for kind in [SchemeKind::SepConv, SchemeKind::NsLifting, SchemeKind::NsAdapted] {
        let mut other = build(kind, w);
        if opts.negative_control && kind == SchemeKind::NsLifting {
            // Flip one predict sign: the comparison below must notice.
            let part = &mut other.steps_mut()[0].parts_mut()[0];
            let cur = part.entry(1, 0).clone();
            part.set(1, 0, -&cur);
        }
        match verify_equivalence(&reference, &other) {
            Equivalence::Equal => {}
            Equivalence::Mismatch { row, col, left, right } => {
                let planted = if opts.negative_control { " (negative control active)" } else { "" };
                return CheckOutcome::fail(
                    NAME,
                    format!(
                        "{kind} differs from sep-lifting at ({row},{col}): {left} vs {right}{planted}"
                    ),
                );
            }
        }
    }
    CheckOutcome::pass(NAME, format!("four schemes share one transfer matrix ({})", w.name()))
}

fn check_step_counts(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "step-counts";
    let w = &opts.wavelet;
    let k = w.pairs().len();
    let scaling = usize::from(w.has_scaling());
    let expected = [
        (SchemeKind::SepLifting, 4 * k + scaling),
        (SchemeKind::SepConv, 2),
        (SchemeKind::NsLifting, 2 * k + scaling),
        (SchemeKind::NsAdapted, 2 * k + scaling),
    ];
    let mut got = Vec::new();
    for (kind, want) in expected {
        let ops = count_ops(&build(kind, w));
        if ops.steps != want {
            return CheckOutcome::fail(
                NAME,
                format!("{kind}: {} steps, expected {want}", ops.steps),
            );
        }
        got.push(format!("{kind}={}", ops.steps));
    }
    CheckOutcome::pass(NAME, got.join(" "))
}

fn check_determinants(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "determinants";
    for kind in SchemeKind::all() {
        let det = build(kind, &opts.wavelet).total_matrix().det();
        if !det.is_one() {
            return CheckOutcome::fail(NAME, format!("{kind}: total determinant is {det}, not 1"));
        }
    }
    CheckOutcome::pass(NAME, "every scheme has total determinant 1")
}

fn check_adapted_structure(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "adapted-structure";
    let adapted = build(SchemeKind::NsAdapted, &opts.wavelet);
    let ns = build(SchemeKind::NsLifting, &opts.wavelet);
    if adapted.steps().len() != ns.steps().len() {
        return CheckOutcome::fail(
            NAME,
            format!(
                "adapted has {} steps, non-separable lifting {}",
                adapted.steps().len(),
                ns.steps().len()
            ),
        );
    }
    let mut composite = 0;
    for (i, (a, b)) in adapted.steps().iter().zip(ns.steps()).enumerate() {
        if a.product() != b.product() {
            return CheckOutcome::fail(NAME, format!("step {i} product differs from ns-lifting"));
        }
        if a.parts().len() > 3 {
            return CheckOutcome::fail(
                NAME,
                format!("step {i} splits into {} parts, expected at most 3", a.parts().len()),
            );
        }
        for (pi, part) in a.parts().iter().enumerate().skip(1) {
            if !part.is_constant_only() {
                return CheckOutcome::fail(
                    NAME,
                    format!("step {i} part {pi} reads neighbor quads"),
                );
            }
        }
        composite += usize::from(a.is_composite());
    }
    CheckOutcome::pass(
        NAME,
        format!("{composite} composite steps, products match ns-lifting exactly"),
    )
}

fn check_inverse_identity(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "inverse-identity";
    for kind in SchemeKind::all() {
        let s = build(kind, &opts.wavelet);
        let inv = match invert(&s) {
            Ok(inv) => inv,
            Err(e) => return CheckOutcome::fail(NAME, format!("{kind}: {e}")),
        };
        let product = &inv.total_matrix() * &s.total_matrix();
        if !product.is_identity() {
            return CheckOutcome::fail(NAME, format!("{kind}: inverse * forward != identity"));
        }
    }
    CheckOutcome::pass(NAME, "inverse schemes compose to the identity symbolically")
}

fn check_perfect_reconstruction(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "perfect-reconstruction";
    let exec = Executor::new(opts.threads);
    let tile = random_tile(48, 48, opts.extension, opts.seed);
    let mut worst: f64 = 0.0;
    for kind in SchemeKind::all() {
        let s = build(kind, &opts.wavelet);
        let coeffs = match exec.forward(&tile, &s) {
            Ok(c) => c,
            Err(e) => return CheckOutcome::fail(NAME, format!("{kind}: {e}")),
        };
        let back = match exec.inverse(&coeffs, &s) {
            Ok(b) => b,
            Err(e) => return CheckOutcome::fail(NAME, format!("{kind}: {e}")),
        };
        let err = max_abs_diff(&tile, &back);

        if kind == SchemeKind::SepConv && opts.extension == ExtensionMode::ZeroPad {
            // Fused evaluation under zero fill is not sequential lifting;
            // its boundary genuinely fails to reconstruct. Require interior
            // exactness, and for the built-ins pin that the boundary
            // divergence is really there.
            let margin = chain_margin_quads(&s) * 2 + filter_margin_quads(&opts.wavelet);
            match interior_max_diff(&tile, &back, margin) {
                Some(ierr) if ierr <= TOL_RECONSTRUCT => {}
                Some(ierr) => {
                    return CheckOutcome::fail(
                        NAME,
                        format!("sep-conv zero-pad interior error {ierr:.2e} exceeds {TOL_RECONSTRUCT:.0e}"),
                    )
                }
                None => {
                    return CheckOutcome::fail(
                        NAME,
                        format!("margin {margin} leaves no interior to check"),
                    )
                }
            }
            let is_builtin = matches!(opts.wavelet.name(), "cdf53" | "cdf97");
            if is_builtin && err <= TOL_RECONSTRUCT {
                return CheckOutcome::fail(
                    NAME,
                    "sep-conv zero-pad boundary unexpectedly reconstructed; the fused-edge \
                     analysis says it must not",
                );
            }
            continue;
        }

        if err > TOL_RECONSTRUCT {
            return CheckOutcome::fail(
                NAME,
                format!("{kind} ({}): error {err:.2e} exceeds {TOL_RECONSTRUCT:.0e}", opts.extension),
            );
        }
        worst = worst.max(err);
    }
    let caveat = if opts.extension == ExtensionMode::ZeroPad {
        "; sep-conv checked interior-only (fused boundary is lossy by design)"
    } else {
        ""
    };
    CheckOutcome::pass(
        NAME,
        format!("max error {worst:.2e} on 96x96 ({}){caveat}", opts.extension),
    )
}

fn check_cross_scheme(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "cross-scheme";
    let exec = Executor::new(opts.threads);
    let tile = random_tile(48, 48, opts.extension, opts.seed ^ 1);
    let reference = match exec.forward(&tile, &build(SchemeKind::SepLifting, &opts.wavelet)) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    let full_conv =
        opts.extension == ExtensionMode::Symmetric && opts.wavelet.has_symmetric_stencils();
    let mut worst: f64 = 0.0;
    for kind in [SchemeKind::SepConv, SchemeKind::NsLifting, SchemeKind::NsAdapted] {
        let s = build(kind, &opts.wavelet);
        let got = match exec.forward(&tile, &s) {
            Ok(g) => g,
            Err(e) => return CheckOutcome::fail(NAME, format!("{kind}: {e}")),
        };
        let err = if kind != SchemeKind::SepConv || full_conv {
            max_abs_diff(&reference, &got)
        } else {
            let margin = chain_margin_quads(&s) + filter_margin_quads(&opts.wavelet);
            match interior_max_diff(&reference, &got, margin) {
                Some(e) => e,
                None => {
                    return CheckOutcome::fail(
                        NAME,
                        format!("margin {margin} leaves no interior to compare"),
                    )
                }
            }
        };
        if err > TOL_RECONSTRUCT {
            return CheckOutcome::fail(
                NAME,
                format!("{kind} deviates from sep-lifting by {err:.2e}"),
            );
        }
        worst = worst.max(err);
    }
    let scope = if full_conv { "full tile" } else { "lifting family full, sep-conv interior" };
    CheckOutcome::pass(NAME, format!("max deviation {worst:.2e} ({scope})"))
}

fn check_oracle_equivalence(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "oracle-equivalence";
    let width = 96;
    let height = 96;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 2);
    let px: Vec<f32> = (0..width * height).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let reference = oracle::direct_transform(&px, width, height, &opts.wavelet, opts.extension);
    let tile = match QuadField::from_pixels(&px, width, height, opts.extension) {
        Ok(t) => t,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    let exec = Executor::new(opts.threads);
    let full =
        opts.extension == ExtensionMode::Symmetric && opts.wavelet.has_symmetric_stencils();
    let fmargin = filter_margin_quads(&opts.wavelet);
    let mut worst: f64 = 0.0;
    for kind in SchemeKind::all() {
        let s = build(kind, &opts.wavelet);
        let got = match exec.forward(&tile, &s) {
            Ok(g) => g,
            Err(e) => return CheckOutcome::fail(NAME, format!("{kind}: {e}")),
        };
        let margin = if full { 0 } else { chain_margin_quads(&s) + fmargin };
        let wq = width / 2;
        let hq = height / 2;
        if 2 * margin >= wq {
            return CheckOutcome::fail(NAME, format!("margin {margin} leaves no interior"));
        }
        let mut err = 0.0f64;
        for n in margin..hq - margin {
            for m in margin..wq - margin {
                for c in 0..4 {
                    let e = (got.get(m, n, c) as f64 - reference[c][n * wq + m]).abs();
                    err = err.max(e);
                }
            }
        }
        if err > TOL_ORACLE {
            return CheckOutcome::fail(
                NAME,
                format!("{kind} deviates from the filter bank by {err:.2e}"),
            );
        }
        worst = worst.max(err);
    }
    let scope = if full { "full tile" } else { "interior" };
    CheckOutcome::pass(
        NAME,
        format!("max deviation {worst:.2e} from single-stage filters ({scope})"),
    )
}

fn check_determinism(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "determinism";
    let tile = random_tile(37, 29, opts.extension, opts.seed ^ 3);
    let mut counts = vec![1usize, 2, 3];
    if !counts.contains(&opts.threads) {
        counts.push(opts.threads);
    }
    for kind in SchemeKind::all() {
        let s = build(kind, &opts.wavelet);
        let baseline = match Executor::new(1).forward(&tile, &s) {
            Ok(b) => b,
            Err(e) => return CheckOutcome::fail(NAME, format!("{kind}: {e}")),
        };
        for &t in &counts[1..] {
            let got = match Executor::new(t).forward(&tile, &s) {
                Ok(g) => g,
                Err(e) => return CheckOutcome::fail(NAME, format!("{kind}/{t}: {e}")),
            };
            if baseline.data().iter().zip(got.data()).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return CheckOutcome::fail(
                    NAME,
                    format!("{kind}: {t} threads are not bit-identical to 1 thread"),
                );
            }
        }
    }
    CheckOutcome::pass(NAME, format!("bit-identical across thread counts {counts:?}"))
}

fn check_isolation(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "isolation";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 4);
    let mut traced_reads = 0usize;
    for round in 0..8 {
        let wq = rng.gen_range(1..=20);
        let hq = rng.gen_range(1..=20);
        let threads = rng.gen_range(1..=6);
        let tile = random_tile(wq, hq, opts.extension, rng.gen());
        let s = build(SchemeKind::NsAdapted, &opts.wavelet);
        let (out, report) = match run_instrumented(&tile, &s, threads) {
            Ok(r) => r,
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        };
        if report.cross_band_violations != 0 {
            return CheckOutcome::fail(
                NAME,
                format!(
                    "round {round}: {} cross-band in-step reads on {wq}x{hq}/{threads}t",
                    report.cross_band_violations
                ),
            );
        }
        let reference = match Executor::new(threads).forward(&tile, &s) {
            Ok(r) => r,
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        };
        if out.data().iter().zip(reference.data()).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return CheckOutcome::fail(
                NAME,
                format!("round {round}: instrumented result drifted from the executor"),
            );
        }
        traced_reads += report.in_step_reads;
    }
    if traced_reads == 0 {
        return CheckOutcome::fail(NAME, "tracer saw no in-step reads; instrumentation is dead");
    }
    CheckOutcome::pass(NAME, format!("{traced_reads} in-step reads traced, zero cross-band"))
}

fn check_one_dimensional_reconstruction(opts: &VerifyOptions) -> CheckOutcome {
    const NAME: &str = "wavelet-1d-reconstruction";
    let exec = Executor::new(1);
    for wq in [1usize, 2, 3, 5, 8, 16] {
        let tile = random_tile(wq, 1, opts.extension, opts.seed ^ (wq as u64) << 8);
        for kind in SchemeKind::all() {
            if kind == SchemeKind::SepConv && opts.extension == ExtensionMode::ZeroPad {
                continue; // boundary-lossy by design; covered above
            }
            let s = build(kind, &opts.wavelet);
            let coeffs = match exec.forward(&tile, &s) {
                Ok(c) => c,
                Err(e) => return CheckOutcome::fail(NAME, format!("{kind}/{wq}: {e}")),
            };
            let back = match exec.inverse(&coeffs, &s) {
                Ok(b) => b,
                Err(e) => return CheckOutcome::fail(NAME, format!("{kind}/{wq}: {e}")),
            };
            let err = max_abs_diff(&tile, &back);
            if err > TOL_RECONSTRUCT {
                return CheckOutcome::fail(
                    NAME,
                    format!("{kind} on a {wq}-quad row: error {err:.2e}"),
                );
            }
        }
    }
    CheckOutcome::pass(NAME, "row tiles down to a single quad reconstruct")
}
