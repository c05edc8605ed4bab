//! Numeric f32 executor for symbolic schemes.
//!
//! A tile is stored quad-interleaved: the four components (LL, HL, LH, HH)
//! of each 2x2 pixel block sit together, so every scheme step is a gather
//! over a small neighborhood of quads followed by four dot products. Steps
//! are double-buffered: step `i` reads only the buffer written by step
//! `i - 1`, which is what makes row-band parallelism race-free for part 0 of
//! every step; parts after the first touch only the in-flight values of the
//! quad being written, so they never cross a band boundary either.
//!
//! Determinism: each output quad is computed by exactly one worker, from a
//! buffer nobody mutates during the step, with a fixed term order - so the
//! result is bit-identical for every thread count and band layout.

use crate::poly2::rational_to_f64;
use crate::schemes::{self, Scheme, SchemeError, Step};
use std::fmt;
use std::ops::Range;
use std::sync::mpsc;
use std::sync::{Arc, Barrier};
use std::thread::JoinHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtensionMode {
    /// Whole-sample symmetric reflection at the pixel level (no boundary
    /// sample duplicated). Reflection preserves even/odd parity, so a quad
    /// read folds back onto a quad read of the same component.
    #[default]
    Symmetric,
    /// Out-of-range reads are zero, resolved independently at every step.
    ZeroPad,
}

impl fmt::Display for ExtensionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtensionMode::Symmetric => "symmetric",
            ExtensionMode::ZeroPad => "zero-pad",
        })
    }
}

impl std::str::FromStr for ExtensionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "symmetric" => Ok(ExtensionMode::Symmetric),
            "zero-pad" => Ok(ExtensionMode::ZeroPad),
            other => Err(format!("unknown extension mode '{other}' (symmetric, zero-pad)")),
        }
    }
}

#[derive(Debug)]
pub enum EngineError {
    BadInput(String),
    Scheme(SchemeError),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::BadInput(msg) => write!(f, "{msg}"),
            EngineError::Scheme(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EngineError {}

impl From<SchemeError> for EngineError {
    fn from(e: SchemeError) -> Self {
        EngineError::Scheme(e)
    }
}

fn bad(msg: impl Into<String>) -> EngineError {
    EngineError::BadInput(msg.into())
}

/// Interleaved coefficient tile: component `c` of quad `(m, n)` lives at
/// `((n * width_quads + m) * 4 + c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField {
    width_quads: usize,
    height_quads: usize,
    extension: ExtensionMode,
    data: Vec<f32>,
}

impl QuadField {
    pub fn new(width_quads: usize, height_quads: usize, extension: ExtensionMode) -> Self {
        assert!(width_quads > 0 && height_quads > 0, "empty tile");
        Self { width_quads, height_quads, extension, data: vec![0.0; width_quads * height_quads * 4] }
    }

    pub fn width_quads(&self) -> usize {
        self.width_quads
    }

    pub fn height_quads(&self) -> usize {
        self.height_quads
    }

    pub fn pixel_width(&self) -> usize {
        self.width_quads * 2
    }

    pub fn pixel_height(&self) -> usize {
        self.height_quads * 2
    }

    pub fn extension(&self) -> ExtensionMode {
        self.extension
    }

    pub fn set_extension(&mut self, mode: ExtensionMode) {
        self.extension = mode;
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, c: usize) -> f32 {
        self.data[(n * self.width_quads + m) * 4 + c]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, c: usize, v: f32) {
        self.data[(n * self.width_quads + m) * 4 + c] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Deinterleave a row-major pixel tile (even dimensions) into quads:
    /// component `c` comes from pixel `(2m + (c & 1), 2n + (c >> 1))`.
    pub fn from_pixels(
        pixels: &[f32],
        width: usize,
        height: usize,
        extension: ExtensionMode,
    ) -> Result<Self, EngineError> {
        if width == 0 || height == 0 {
            return Err(bad("pixel tile must be non-empty"));
        }
        if width % 2 != 0 || height % 2 != 0 {
            return Err(bad(format!("pixel tile must have even sides, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(bad(format!(
                "pixel buffer holds {} values, expected {}",
                pixels.len(),
                width * height
            )));
        }
        let wq = width / 2;
        let hq = height / 2;
        let mut tile = Self::new(wq, hq, extension);
        for n in 0..hq {
            for m in 0..wq {
                let base = (n * wq + m) * 4;
                tile.data[base] = pixels[(2 * n) * width + 2 * m];
                tile.data[base + 1] = pixels[(2 * n) * width + 2 * m + 1];
                tile.data[base + 2] = pixels[(2 * n + 1) * width + 2 * m];
                tile.data[base + 3] = pixels[(2 * n + 1) * width + 2 * m + 1];
            }
        }
        Ok(tile)
    }

    /// Inverse of `from_pixels`.
    pub fn to_pixels(&self) -> Vec<f32> {
        let width = self.pixel_width();
        let mut px = vec![0.0f32; width * self.pixel_height()];
        for n in 0..self.height_quads {
            for m in 0..self.width_quads {
                let base = (n * self.width_quads + m) * 4;
                px[(2 * n) * width + 2 * m] = self.data[base];
                px[(2 * n) * width + 2 * m + 1] = self.data[base + 1];
                px[(2 * n + 1) * width + 2 * m] = self.data[base + 2];
                px[(2 * n + 1) * width + 2 * m + 1] = self.data[base + 3];
            }
        }
        px
    }

    /// Four deinterleaved planes (LL, HL, LH, HH), each row-major
    /// `width_quads x height_quads`.
    pub fn to_mallat(&self) -> [Vec<f32>; 4] {
        let size = self.width_quads * self.height_quads;
        let mut planes = [vec![0.0f32; size], vec![0.0; size], vec![0.0; size], vec![0.0; size]];
        for i in 0..size {
            for c in 0..4 {
                planes[c][i] = self.data[i * 4 + c];
            }
        }
        planes
    }

    pub fn from_mallat(
        planes: &[Vec<f32>; 4],
        width_quads: usize,
        height_quads: usize,
        extension: ExtensionMode,
    ) -> Result<Self, EngineError> {
        if width_quads == 0 || height_quads == 0 {
            return Err(bad("empty tile"));
        }
        let size = width_quads * height_quads;
        for (c, p) in planes.iter().enumerate() {
            if p.len() != size {
                return Err(bad(format!(
                    "plane {c} holds {} values, expected {size}",
                    p.len()
                )));
            }
        }
        let mut tile = Self::new(width_quads, height_quads, extension);
        for i in 0..size {
            for c in 0..4 {
                tile.data[i * 4 + c] = planes[c][i];
            }
        }
        Ok(tile)
    }
}

/// Contiguous row bands, as even as possible: the first `height % count`
/// bands get one extra row. At most `min(threads, height_quads)` bands.
pub fn partition(height_quads: usize, threads: usize) -> Vec<Range<usize>> {
    assert!(threads >= 1, "at least one thread");
    let count = threads.min(height_quads);
    let base = height_quads / count;
    let extra = height_quads % count;
    let mut bands = Vec::with_capacity(count);
    let mut start = 0;
    for i in 0..count {
        let len = base + usize::from(i < extra);
        bands.push(start..start + len);
        start += len;
    }
    debug_assert_eq!(start, height_quads);
    bands
}

/// Fold a quad coordinate whose component has pixel parity `parity` in this
/// axis back into `[0, len)`, or None for a zero read.
#[inline]
fn resolve_axis(t: i64, len: usize, parity: i64, mode: ExtensionMode) -> Option<usize> {
    if t >= 0 && (t as usize) < len {
        return Some(t as usize);
    }
    match mode {
        ExtensionMode::ZeroPad => None,
        ExtensionMode::Symmetric => {
            let pixels = 2 * len as i64;
            let period = 2 * pixels - 2;
            let u = 2 * t + parity;
            let mut v = u.rem_euclid(period);
            if v >= pixels {
                v = period - v;
            }
            // Both the period and the reflection preserve pixel parity, so
            // v still belongs to the same component; its quad is v / 2.
            debug_assert_eq!(v % 2, parity);
            Some((v >> 1) as usize)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct GatherTerm {
    dx: i32,
    dy: i32,
    c: usize,
    w: f32,
}

/// One step lowered to numeric gather lists. `first` may reach into
/// neighbor quads (it reads the previous buffer); `tail` parts are constant
/// matrices applied to the in-flight quad values.
#[derive(Debug, Clone)]
pub(crate) struct CompiledStep {
    first: [Vec<GatherTerm>; 4],
    /// Same terms as `first`, with the in-bounds linear offset precomputed.
    first_fast: [Vec<(isize, f32)>; 4],
    tail: Vec<[Vec<(usize, f32)>; 4]>,
    dx_min: i32,
    dx_max: i32,
    dy_min: i32,
    dy_max: i32,
}

fn compile_step(step: &Step, width_quads: usize) -> CompiledStep {
    let part0 = &step.parts()[0];
    let mut first: [Vec<GatherTerm>; 4] = Default::default();
    let mut first_fast: [Vec<(isize, f32)>; 4] = Default::default();
    let (mut dx_min, mut dx_max, mut dy_min, mut dy_max) = (0i32, 0i32, 0i32, 0i32);
    for r in 0..4 {
        let mut terms = Vec::new();
        for c in 0..4 {
            for (&(a, b), coef) in part0.entry(r, c).terms() {
                terms.push(GatherTerm { dx: a, dy: b, c, w: rational_to_f64(coef) as f32 });
            }
        }
        // Fixed evaluation order: ascending (dy, dx, component). The fast
        // and folded paths walk the same list, so sums associate identically.
        terms.sort_by_key(|t| (t.dy, t.dx, t.c));
        for t in &terms {
            dx_min = dx_min.min(t.dx);
            dx_max = dx_max.max(t.dx);
            dy_min = dy_min.min(t.dy);
            dy_max = dy_max.max(t.dy);
        }
        first_fast[r] = terms
            .iter()
            .map(|t| {
                let off = (t.dy as isize * width_quads as isize + t.dx as isize) * 4 + t.c as isize;
                (off, t.w)
            })
            .collect();
        first[r] = terms;
    }
    let mut tail = Vec::new();
    for part in &step.parts()[1..] {
        let mut rows: [Vec<(usize, f32)>; 4] = Default::default();
        for (r, row) in rows.iter_mut().enumerate() {
            for c in 0..4 {
                let e = part.entry(r, c);
                for (&(a, b), coef) in e.terms() {
                    // Guaranteed by the Step shape rule; belt and braces here
                    // because the instrumented executor exists to catch it.
                    debug_assert!(a == 0 && b == 0, "non-constant tail part reached the engine");
                    let _ = (a, b);
                    row.push((c, rational_to_f64(coef) as f32));
                }
            }
        }
        tail.push(rows);
    }
    CompiledStep { first, first_fast, tail, dx_min, dx_max, dy_min, dy_max }
}

#[inline]
fn apply_tail(step: &CompiledStep, v: [f32; 4]) -> [f32; 4] {
    let mut cur = v;
    for part in &step.tail {
        let mut next = [0.0f32; 4];
        for r in 0..4 {
            let mut acc = 0.0f32;
            for &(c, w) in &part[r] {
                acc += w * cur[c];
            }
            next[r] = acc;
        }
        cur = next;
    }
    cur
}

/// Compute rows `rows` of one step.
///
/// SAFETY: `src` must be valid for `wq * hq * 4` reads, `dst` for writes to
/// every index of the quads in `rows`, no other thread may write `src` or
/// the `rows` region of `dst` during the call, and `src != dst`.
unsafe fn run_step_rows(
    step: &CompiledStep,
    src: *const f32,
    dst: *mut f32,
    wq: usize,
    hq: usize,
    ext: ExtensionMode,
    rows: Range<usize>,
) {
    // Column window where every horizontal reach stays in bounds.
    let m_lo = ((-step.dx_min).max(0) as usize).min(wq);
    let m_hi = wq.saturating_sub(step.dx_max.max(0) as usize).max(m_lo);

    for n in rows {
        let row_fast =
            n as i64 + step.dy_min as i64 >= 0 && n as i64 + (step.dy_max as i64) < hq as i64;
        let (lo, hi) = if row_fast { (m_lo, m_hi) } else { (0, 0) };
        for m in 0..lo {
            quad_folded(step, src, dst, wq, hq, ext, m, n);
        }
        for m in lo..hi {
            let base = ((n * wq + m) * 4) as isize;
            let mut v = [0.0f32; 4];
            for r in 0..4 {
                let mut acc = 0.0f32;
                for &(off, w) in &step.first_fast[r] {
                    acc += w * *src.offset(base + off);
                }
                v[r] = acc;
            }
            let v = apply_tail(step, v);
            let out = dst.offset(base);
            for (c, val) in v.into_iter().enumerate() {
                *out.add(c) = val;
            }
        }
        for m in hi.max(lo)..wq {
            quad_folded(step, src, dst, wq, hq, ext, m, n);
        }
    }
}

/// Boundary-path version of the inner quad computation: identical term
/// order, with each read resolved through the extension rule.
unsafe fn quad_folded(
    step: &CompiledStep,
    src: *const f32,
    dst: *mut f32,
    wq: usize,
    hq: usize,
    ext: ExtensionMode,
    m: usize,
    n: usize,
) {
    let mut v = [0.0f32; 4];
    for r in 0..4 {
        let mut acc = 0.0f32;
        for t in &step.first[r] {
            let x = resolve_axis(m as i64 + t.dx as i64, wq, (t.c & 1) as i64, ext);
            let y = resolve_axis(n as i64 + t.dy as i64, hq, (t.c >> 1) as i64, ext);
            if let (Some(x), Some(y)) = (x, y) {
                acc += t.w * *src.add((y * wq + x) * 4 + t.c);
            }
        }
        v[r] = acc;
    }
    let v = apply_tail(step, v);
    let out = dst.add((n * wq + m) * 4);
    for (c, val) in v.into_iter().enumerate() {
        *out.add(c) = val;
    }
}

/// A scheme compiled for a specific tile width, thread count, and band
/// layout. Plans are cheap and immutable; build one per (scheme, size).
#[derive(Debug, Clone)]
pub struct ExecPlan {
    steps: Arc<Vec<CompiledStep>>,
    threads: usize,
    width_quads: usize,
    height_quads: usize,
    bands: Vec<Range<usize>>,
}

impl ExecPlan {
    pub fn forward(
        scheme: &Scheme,
        threads: usize,
        width_quads: usize,
        height_quads: usize,
    ) -> Result<Self, EngineError> {
        if threads == 0 {
            return Err(bad("thread count must be at least 1"));
        }
        if width_quads == 0 || height_quads == 0 {
            return Err(bad("empty tile"));
        }
        let steps: Vec<CompiledStep> =
            scheme.steps().iter().map(|s| compile_step(s, width_quads)).collect();
        Ok(Self {
            steps: Arc::new(steps),
            threads,
            width_quads,
            height_quads,
            bands: partition(height_quads, threads),
        })
    }

    /// Plan for the exact inverse of `scheme`.
    pub fn inverse(
        scheme: &Scheme,
        threads: usize,
        width_quads: usize,
        height_quads: usize,
    ) -> Result<Self, EngineError> {
        let inv = schemes::invert(scheme)?;
        Self::forward(&inv, threads, width_quads, height_quads)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn bands(&self) -> &[Range<usize>] {
        &self.bands
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }
}

struct ConstPtr(*const f32);
struct MutPtr(*mut f32);
// SAFETY: the run protocol (disjoint bands, barrier between steps, main
// returns only after the final barrier) is what actually guards the memory;
// these wrappers just let the addresses cross thread boundaries.
unsafe impl Send for ConstPtr {}
unsafe impl Sync for ConstPtr {}
unsafe impl Send for MutPtr {}
unsafe impl Sync for MutPtr {}

struct RunState {
    steps: Arc<Vec<CompiledStep>>,
    wq: usize,
    hq: usize,
    ext: ExtensionMode,
    bands: Vec<Range<usize>>,
    src: ConstPtr,
    dst: MutPtr,
    scratch: MutPtr,
    barrier: Barrier,
}

impl RunState {
    /// Output buffer of step `i`, arranged so the last step lands in `dst`.
    fn out_ptr(&self, i: usize) -> *mut f32 {
        if (self.steps.len() - 1 - i) % 2 == 0 {
            self.dst.0
        } else {
            self.scratch.0
        }
    }

    fn src_ptr(&self, i: usize) -> *const f32 {
        if i == 0 {
            self.src.0
        } else {
            self.out_ptr(i - 1) as *const f32
        }
    }

    /// Worker body. Every participant calls this exactly once per run;
    /// participant `idx` owns band `idx` when one exists and otherwise only
    /// keeps the barriers balanced.
    fn participate(&self, idx: usize) {
        for i in 0..self.steps.len() {
            if let Some(band) = self.bands.get(idx) {
                // SAFETY: bands are disjoint and cover the tile; src is the
                // previous step's buffer which nobody writes during step i;
                // the barrier below orders step i's writes before step i+1's
                // reads.
                unsafe {
                    run_step_rows(
                        &self.steps[i],
                        self.src_ptr(i),
                        self.out_ptr(i),
                        self.wq,
                        self.hq,
                        self.ext,
                        band.clone(),
                    );
                }
            }
            self.barrier.wait();
        }
    }
}

enum Job {
    Run(Arc<RunState>),
    Stop,
}

/// Owns a persistent worker pool. Thread count 1 means fully inline serial
/// execution; otherwise `threads - 1` workers are spawned once and reused,
/// with the calling thread participating as band 0.
pub struct Executor {
    threads: usize,
    senders: Vec<mpsc::Sender<Job>>,
    handles: Vec<JoinHandle<()>>,
}

impl Executor {
    pub fn new(threads: usize) -> Self {
        let threads = threads.max(1);
        let mut senders = Vec::new();
        let mut handles = Vec::new();
        for idx in 1..threads {
            let (tx, rx) = mpsc::channel::<Job>();
            let handle = std::thread::Builder::new()
                .name(format!("dwt-worker-{idx}"))
                .spawn(move || {
                    while let Ok(job) = rx.recv() {
                        match job {
                            Job::Run(state) => state.participate(idx),
                            Job::Stop => break,
                        }
                    }
                })
                .expect("spawn worker thread");
            senders.push(tx);
            handles.push(handle);
        }
        Self { threads, senders, handles }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Allocation-free run: result lands in `dst`; `scratch` is the
    /// ping-pong partner and holds unspecified step output afterwards.
    pub fn run_into(
        &self,
        tile: &QuadField,
        plan: &ExecPlan,
        dst: &mut QuadField,
        scratch: &mut QuadField,
    ) -> Result<(), EngineError> {
        if tile.width_quads != plan.width_quads || tile.height_quads != plan.height_quads {
            return Err(bad(format!(
                "tile is {}x{} quads but the plan was built for {}x{}",
                tile.width_quads, tile.height_quads, plan.width_quads, plan.height_quads
            )));
        }
        for (name, buf) in [("dst", &*dst), ("scratch", &*scratch)] {
            if buf.width_quads != tile.width_quads || buf.height_quads != tile.height_quads {
                return Err(bad(format!("{name} buffer does not match the tile dimensions")));
            }
        }
        if plan.bands.len() > self.threads {
            return Err(bad(format!(
                "plan wants {} bands but the executor has {} threads",
                plan.bands.len(),
                self.threads
            )));
        }
        dst.extension = tile.extension;

        if plan.steps.is_empty() {
            dst.data.copy_from_slice(&tile.data);
            return Ok(());
        }

        if self.senders.is_empty() {
            // Inline serial path: same kernels, full row range per step.
            for i in 0..plan.steps.len() {
                let last_in_dst = (plan.steps.len() - 1 - i) % 2 == 0;
                let (src_ref, dst_ref): (&[f32], &mut [f32]) = if i == 0 {
                    (&tile.data, if last_in_dst { &mut dst.data } else { &mut scratch.data })
                } else if last_in_dst {
                    (&scratch.data, &mut dst.data)
                } else {
                    (&dst.data, &mut scratch.data)
                };
                // SAFETY: src and dst are distinct buffers of the right size;
                // single thread, full range.
                unsafe {
                    run_step_rows(
                        &plan.steps[i],
                        src_ref.as_ptr(),
                        dst_ref.as_mut_ptr(),
                        plan.width_quads,
                        plan.height_quads,
                        tile.extension,
                        0..plan.height_quads,
                    );
                }
            }
            return Ok(());
        }

        let state = Arc::new(RunState {
            steps: Arc::clone(&plan.steps),
            wq: plan.width_quads,
            hq: plan.height_quads,
            ext: tile.extension,
            bands: plan.bands.clone(),
            src: ConstPtr(tile.data.as_ptr()),
            dst: MutPtr(dst.data.as_mut_ptr()),
            scratch: MutPtr(scratch.data.as_mut_ptr()),
            barrier: Barrier::new(self.threads),
        });
        for tx in &self.senders {
            tx.send(Job::Run(Arc::clone(&state))).expect("worker alive");
        }
        state.participate(0);
        // The final barrier has passed: every band of the last step is
        // written and the workers no longer touch the buffers.
        Ok(())
    }

    pub fn run(&self, tile: &QuadField, plan: &ExecPlan) -> Result<QuadField, EngineError> {
        let mut dst = QuadField::new(tile.width_quads, tile.height_quads, tile.extension);
        let mut scratch = QuadField::new(tile.width_quads, tile.height_quads, tile.extension);
        self.run_into(tile, plan, &mut dst, &mut scratch)?;
        Ok(dst)
    }

    /// Convenience: plan + run in one call.
    pub fn forward(&self, tile: &QuadField, scheme: &Scheme) -> Result<QuadField, EngineError> {
        let plan = ExecPlan::forward(scheme, self.threads, tile.width_quads, tile.height_quads)?;
        self.run(tile, &plan)
    }

    /// Convenience: run the exact inverse of `scheme`.
    pub fn inverse(&self, tile: &QuadField, scheme: &Scheme) -> Result<QuadField, EngineError> {
        let plan = ExecPlan::inverse(scheme, self.threads, tile.width_quads, tile.height_quads)?;
        self.run(tile, &plan)
    }
}

impl Drop for Executor {
    fn drop(&mut self) {
        for tx in &self.senders {
            let _ = tx.send(Job::Stop);
        }
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

/// Apply a single step serially and return just the computed band rows
/// (length `rows.len() * width_quads * 4`). Unit-test entry point.
pub fn apply_step(tile: &QuadField, step: &Step, rows: Range<usize>) -> Vec<f32> {
    assert!(rows.end <= tile.height_quads);
    let compiled = compile_step(step, tile.width_quads);
    let mut full = vec![0.0f32; tile.data.len()];
    // SAFETY: single thread, distinct buffers, rows in range.
    unsafe {
        run_step_rows(
            &compiled,
            tile.data.as_ptr(),
            full.as_mut_ptr(),
            tile.width_quads,
            tile.height_quads,
            tile.extension,
            rows.clone(),
        );
    }
    full[rows.start * tile.width_quads * 4..rows.end * tile.width_quads * 4].to_vec()
}

/// What the in-step read tracer saw during an instrumented run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsolationReport {
    /// Reads performed by parts after the first (in-flight state reads).
    pub in_step_reads: usize,
    /// In-step reads whose target quad belongs to another band.
    pub cross_band_violations: usize,
}

/// Serial re-execution of a scheme that models in-place banded execution
/// and traces every in-flight read (tail parts read the live buffer instead
/// of per-quad registers). For any step satisfying the shape rule the
/// result is bit-identical to `Executor::run`; a step smuggling
/// neighborhood access into a tail part shows up as cross-band violations.
pub fn run_instrumented(
    tile: &QuadField,
    scheme: &Scheme,
    threads: usize,
) -> Result<(QuadField, IsolationReport), EngineError> {
    if threads == 0 {
        return Err(bad("thread count must be at least 1"));
    }
    let wq = tile.width_quads;
    let hq = tile.height_quads;
    let ext = tile.extension;
    let bands = partition(hq, threads);
    let mut band_of_row = vec![0usize; hq];
    for (b, band) in bands.iter().enumerate() {
        for n in band.clone() {
            band_of_row[n] = b;
        }
    }

    let mut report = IsolationReport { in_step_reads: 0, cross_band_violations: 0 };
    let mut live = tile.data.clone();

    for step in scheme.steps() {
        let snapshot = live.clone();
        // Term lists straight from the symbolic parts; tail offsets are kept
        // so a rule-breaking part actually exercises its neighbor reads.
        let lower = |part: &crate::schemes::PolyMatrix4| -> [Vec<GatherTerm>; 4] {
            let mut rows: [Vec<GatherTerm>; 4] = Default::default();
            for (r, row) in rows.iter_mut().enumerate() {
                for c in 0..4 {
                    for (&(a, b), coef) in part.entry(r, c).terms() {
                        row.push(GatherTerm { dx: a, dy: b, c, w: rational_to_f64(coef) as f32 });
                    }
                }
                row.sort_by_key(|t| (t.dy, t.dx, t.c));
            }
            rows
        };
        let parts: Vec<[Vec<GatherTerm>; 4]> = step.parts().iter().map(lower).collect();

        for (b, band) in bands.iter().enumerate() {
            for n in band.clone() {
                for m in 0..wq {
                    let mut v = [0.0f32; 4];
                    for r in 0..4 {
                        let mut acc = 0.0f32;
                        for t in &parts[0][r] {
                            let x = resolve_axis(m as i64 + t.dx as i64, wq, (t.c & 1) as i64, ext);
                            let y = resolve_axis(n as i64 + t.dy as i64, hq, (t.c >> 1) as i64, ext);
                            if let (Some(x), Some(y)) = (x, y) {
                                acc += t.w * snapshot[(y * wq + x) * 4 + t.c];
                            }
                        }
                        v[r] = acc;
                    }
                    for part in &parts[1..] {
                        let mut next = [0.0f32; 4];
                        for r in 0..4 {
                            let mut acc = 0.0f32;
                            for t in &part[r] {
                                report.in_step_reads += 1;
                                let value = if t.dx == 0 && t.dy == 0 {
                                    v[t.c]
                                } else {
                                    let x = resolve_axis(
                                        m as i64 + t.dx as i64,
                                        wq,
                                        (t.c & 1) as i64,
                                        ext,
                                    );
                                    let y = resolve_axis(
                                        n as i64 + t.dy as i64,
                                        hq,
                                        (t.c >> 1) as i64,
                                        ext,
                                    );
                                    match (x, y) {
                                        (Some(x), Some(y)) => {
                                            if band_of_row[y] != b {
                                                report.cross_band_violations += 1;
                                            }
                                            live[(y * wq + x) * 4 + t.c]
                                        }
                                        _ => 0.0,
                                    }
                                };
                                acc += t.w * value;
                            }
                            next[r] = acc;
                        }
                        v = next;
                    }
                    let base = (n * wq + m) * 4;
                    live[base..base + 4].copy_from_slice(&v);
                }
            }
        }
    }

    let mut out = QuadField::new(wq, hq, ext);
    out.data.copy_from_slice(&live);
    Ok((out, report))
}

/// Serial reference used by tests to pin executor results: same kernels,
/// thread count 1.
pub fn run_serial(tile: &QuadField, scheme: &Scheme) -> Result<QuadField, EngineError> {
    Executor::new(1).forward(tile, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{build, SchemeKind};
    use crate::wavelets::builtin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tile(wq: usize, hq: usize, ext: ExtensionMode, seed: u64) -> QuadField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tile = QuadField::new(wq, hq, ext);
        for v in tile.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        tile
    }

    #[test]
    fn pixel_roundtrip_and_layout() {
        let width = 6;
        let height = 4;
        let pixels: Vec<f32> = (0..width * height).map(|i| i as f32).collect();
        let tile = QuadField::from_pixels(&pixels, width, height, ExtensionMode::Symmetric).unwrap();
        assert_eq!(tile.width_quads(), 3);
        assert_eq!(tile.height_quads(), 2);
        // Quad (1, 1): pixels (2..4, 2..4) of the 6-wide image.
        assert_eq!(tile.get(1, 1, 0), (2 * width + 2) as f32);
        assert_eq!(tile.get(1, 1, 1), (2 * width + 3) as f32);
        assert_eq!(tile.get(1, 1, 2), (3 * width + 2) as f32);
        assert_eq!(tile.get(1, 1, 3), (3 * width + 3) as f32);
        assert_eq!(tile.to_pixels(), pixels);
    }

    #[test]
    fn pixel_input_validation() {
        assert!(QuadField::from_pixels(&[0.0; 6], 3, 2, ExtensionMode::Symmetric).is_err());
        assert!(QuadField::from_pixels(&[0.0; 8], 4, 4, ExtensionMode::Symmetric).is_err());
        assert!(QuadField::from_pixels(&[], 0, 0, ExtensionMode::Symmetric).is_err());
    }

    #[test]
    fn mallat_roundtrip() {
        let tile = random_tile(5, 3, ExtensionMode::ZeroPad, 3);
        let planes = tile.to_mallat();
        for c in 0..4 {
            assert_eq!(planes[c][1 * 5 + 2], tile.get(2, 1, c));
        }
        let back = QuadField::from_mallat(&planes, 5, 3, ExtensionMode::ZeroPad).unwrap();
        assert_eq!(back, tile);
        let bad = QuadField::from_mallat(&planes, 3, 5, ExtensionMode::ZeroPad);
        assert!(bad.is_ok()); // same area, different shape: accepted as data
        let mut short = planes.clone();
        short[2].pop();
        assert!(QuadField::from_mallat(&short, 5, 3, ExtensionMode::ZeroPad).is_err());
    }

    #[test]
    fn partition_is_contiguous_and_balanced() {
        assert_eq!(partition(10, 4), vec![0..3, 3..6, 6..8, 8..10]);
        assert_eq!(partition(4, 8), vec![0..1, 1..2, 2..3, 3..4]);
        assert_eq!(partition(7, 1), vec![0..7]);
        assert_eq!(partition(5, 3), vec![0..2, 2..4, 4..5]);
        for (h, t) in [(1usize, 7usize), (64, 3), (13, 13), (100, 7)] {
            let bands = partition(h, t);
            assert!(bands.len() <= t.min(h));
            assert_eq!(bands.first().unwrap().start, 0);
            assert_eq!(bands.last().unwrap().end, h);
            for w in bands.windows(2) {
                assert_eq!(w[0].end, w[1].start);
                assert!(w[0].len() >= w[1].len());
                assert!(w[0].len() - w[1].len() <= 1);
            }
        }
    }

    #[test]
    fn symmetric_quad_folds_preserve_parity() {
        // len = 4 quads (8 pixels), component parities 0 and 1.
        assert_eq!(resolve_axis(-1, 4, 0, ExtensionMode::Symmetric), Some(1));
        assert_eq!(resolve_axis(-1, 4, 1, ExtensionMode::Symmetric), Some(0));
        assert_eq!(resolve_axis(4, 4, 0, ExtensionMode::Symmetric), Some(3));
        assert_eq!(resolve_axis(4, 4, 1, ExtensionMode::Symmetric), Some(2));
        assert_eq!(resolve_axis(2, 4, 1, ExtensionMode::Symmetric), Some(2));
        assert_eq!(resolve_axis(-1, 4, 0, ExtensionMode::ZeroPad), None);
        assert_eq!(resolve_axis(1, 1, 1, ExtensionMode::Symmetric), Some(0));
    }

    #[test]
    fn single_step_matches_hand_lifting() {
        // Horizontal predict of cdf53 on a known row, symmetric extension.
        let w = builtin("cdf53").unwrap();
        let scheme = build(SchemeKind::SepLifting, &w);
        let step = &scheme.steps()[0];
        let mut tile = QuadField::new(3, 1, ExtensionMode::Symmetric);
        // Pixels: 1 5 2 4 9 7  -> quads (LL,HL): (1,5) (2,4) (9,7)
        for (m, (ll, hl)) in [(1.0f32, 5.0f32), (2.0, 4.0), (9.0, 7.0)].iter().enumerate() {
            tile.set(m, 0, 0, *ll);
            tile.set(m, 0, 1, *hl);
        }
        let rows = apply_step(&tile, step, 0..1);
        // HL'(m) = HL(m) - (LL(m) + LL(m+1)) / 2; at the right edge the
        // neighbor folds back to LL(2).
        let hl = |m: usize| rows[m * 4 + 1];
        assert_eq!(hl(0), 5.0 - 0.5 * (1.0 + 2.0));
        assert_eq!(hl(1), 4.0 - 0.5 * (2.0 + 9.0));
        assert_eq!(hl(2), 7.0 - 0.5 * (9.0 + 9.0));
        // LL rows pass through.
        assert_eq!(rows[0], 1.0);
        assert_eq!(rows[4], 2.0);
        // Zero-pad: the folded neighbor becomes zero instead.
        tile.set_extension(ExtensionMode::ZeroPad);
        let rows = apply_step(&tile, step, 0..1);
        assert_eq!(rows[2 * 4 + 1], 7.0 - 0.5 * 9.0);
    }

    #[test]
    fn all_schemes_agree_numerically_under_symmetry() {
        let tile = random_tile(16, 12, ExtensionMode::Symmetric, 21);
        for name in ["cdf53", "cdf97"] {
            let w = builtin(name).unwrap();
            let exec = Executor::new(1);
            let reference = exec.forward(&tile, &build(SchemeKind::SepLifting, &w)).unwrap();
            for kind in [SchemeKind::SepConv, SchemeKind::NsLifting, SchemeKind::NsAdapted] {
                let got = exec.forward(&tile, &build(kind, &w)).unwrap();
                for (a, b) in reference.data().iter().zip(got.data()) {
                    assert!((a - b).abs() < 1e-4, "{name} {kind}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn lifting_family_agrees_under_zero_pad() {
        let tile = random_tile(9, 7, ExtensionMode::ZeroPad, 22);
        let w = builtin("cdf97").unwrap();
        let exec = Executor::new(1);
        let reference = exec.forward(&tile, &build(SchemeKind::SepLifting, &w)).unwrap();
        for kind in [SchemeKind::NsLifting, SchemeKind::NsAdapted] {
            let got = exec.forward(&tile, &build(kind, &w)).unwrap();
            for (a, b) in reference.data().iter().zip(got.data()) {
                assert!((a - b).abs() < 1e-4, "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn perfect_reconstruction_small() {
        for ext in [ExtensionMode::Symmetric, ExtensionMode::ZeroPad] {
            let tile = random_tile(8, 8, ext, 23);
            for name in ["cdf53", "cdf97"] {
                let w = builtin(name).unwrap();
                for kind in [SchemeKind::SepLifting, SchemeKind::NsLifting, SchemeKind::NsAdapted] {
                    let s = build(kind, &w);
                    let exec = Executor::new(2);
                    let coeffs = exec.forward(&tile, &s).unwrap();
                    let back = exec.inverse(&coeffs, &s).unwrap();
                    for (a, b) in tile.data().iter().zip(back.data()) {
                        assert!((a - b).abs() < 1e-4, "{name} {kind} {ext}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn sep_conv_reconstructs_under_symmetry_only() {
        let w = builtin("cdf53").unwrap();
        let s = build(SchemeKind::SepConv, &w);
        let exec = Executor::new(1);

        let tile = random_tile(8, 8, ExtensionMode::Symmetric, 24);
        let back = exec.inverse(&exec.forward(&tile, &s).unwrap(), &s).unwrap();
        for (a, b) in tile.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-4);
        }

        // Fused single-matrix evaluation under zero fill is not sequential
        // lifting; its inverse misses at the boundary by design.
        let tile = random_tile(8, 8, ExtensionMode::ZeroPad, 24);
        let back = exec.inverse(&exec.forward(&tile, &s).unwrap(), &s).unwrap();
        let max = tile
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max > 1e-3, "expected boundary mismatch, max err {max}");
        // The interior, however, reconstructs exactly.
        for n in 2..6 {
            for m in 2..6 {
                for c in 0..4 {
                    assert!((tile.get(m, n, c) - back.get(m, n, c)).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn executor_is_bit_deterministic_across_thread_counts() {
        let tile = random_tile(33, 17, ExtensionMode::Symmetric, 25);
        let w = builtin("cdf97").unwrap();
        for kind in SchemeKind::all() {
            let s = build(kind, &w);
            let baseline = Executor::new(1).forward(&tile, &s).unwrap();
            for threads in [2usize, 3, 7, 16, 64] {
                let got = Executor::new(threads).forward(&tile, &s).unwrap();
                assert_eq!(
                    baseline.data(),
                    got.data(),
                    "{kind} with {threads} threads drifted"
                );
            }
        }
    }

    #[test]
    fn executor_reuse_and_run_into() {
        let w = builtin("cdf53").unwrap();
        let s = build(SchemeKind::NsAdapted, &w);
        let exec = Executor::new(3);
        let tile = random_tile(10, 10, ExtensionMode::Symmetric, 26);
        let plan = ExecPlan::forward(&s, 3, 10, 10).unwrap();
        let by_run = exec.run(&tile, &plan).unwrap();
        let mut dst = QuadField::new(10, 10, ExtensionMode::Symmetric);
        let mut scratch = QuadField::new(10, 10, ExtensionMode::Symmetric);
        exec.run_into(&tile, &plan, &mut dst, &mut scratch).unwrap();
        assert_eq!(by_run.data(), dst.data());
        // Reuse across runs keeps working (pool survives).
        let serial_plan = ExecPlan::forward(&s, 1, 10, 10).unwrap();
        for seed in 30..33 {
            let t = random_tile(10, 10, ExtensionMode::Symmetric, seed);
            let a = exec.run(&t, &plan).unwrap();
            let b = Executor::new(1).run(&t, &serial_plan).unwrap();
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn plan_and_buffer_validation() {
        let w = builtin("cdf53").unwrap();
        let s = build(SchemeKind::SepLifting, &w);
        let exec = Executor::new(2);
        let tile = random_tile(8, 8, ExtensionMode::Symmetric, 27);
        // Plan built for a different size.
        let plan = ExecPlan::forward(&s, 2, 4, 4).unwrap();
        assert!(exec.run(&tile, &plan).is_err());
        // Plan wants more bands than the executor has threads.
        let plan = ExecPlan::forward(&s, 8, 8, 8).unwrap();
        assert!(exec.run(&tile, &plan).is_err());
        // Mismatched output buffers.
        let plan = ExecPlan::forward(&s, 2, 8, 8).unwrap();
        let mut dst = QuadField::new(4, 8, ExtensionMode::Symmetric);
        let mut scratch = QuadField::new(8, 8, ExtensionMode::Symmetric);
        assert!(exec.run_into(&tile, &plan, &mut dst, &mut scratch).is_err());
        assert!(ExecPlan::forward(&s, 0, 8, 8).is_err());
    }

    #[test]
    fn instrumented_run_matches_executor_and_sees_no_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..20 {
            let wq = rng.gen_range(1..=24);
            let hq = rng.gen_range(1..=24);
            let threads = rng.gen_range(1..=8);
            let ext = if rng.gen_bool(0.5) { ExtensionMode::Symmetric } else { ExtensionMode::ZeroPad };
            let tile = random_tile(wq, hq, ext, rng.gen());
            let name = if rng.gen_bool(0.5) { "cdf53" } else { "cdf97" };
            let s = build(SchemeKind::NsAdapted, &builtin(name).unwrap());
            let (out, report) = run_instrumented(&tile, &s, threads).unwrap();
            assert_eq!(report.cross_band_violations, 0);
            assert!(report.in_step_reads > 0, "composite steps must exercise the tracer");
            let reference = Executor::new(threads).forward(&tile, &s).unwrap();
            assert_eq!(out.data(), reference.data(), "instrumented result drifted");
        }
    }

    #[test]
    fn instrumentation_catches_a_rule_breaking_step() {
        // Hand-build a step whose tail part reads the quad one row down:
        // exactly the hazard the shape rule forbids, and the only direction
        // that can cross a row band.
        use crate::poly2::{rat, LaurentPoly2};
        use crate::schemes::PolyMatrix4;
        let mut tail = PolyMatrix4::identity();
        tail.set(1, 0, LaurentPoly2::monomial(rat(1, 2), 0, 1));
        let step = Step::new_unchecked(vec![PolyMatrix4::identity(), tail]);
        let scheme = Scheme::from_steps_unchecked(
            SchemeKind::NsAdapted,
            &builtin("cdf53").unwrap(),
            vec![step],
        );
        let tile = random_tile(8, 8, ExtensionMode::Symmetric, 29);
        let (_, report) = run_instrumented(&tile, &scheme, 4).unwrap();
        assert!(report.cross_band_violations > 0, "neighbor read crossed bands undetected");
    }

    #[test]
    fn constant_image_stays_flat_through_cdf53() {
        // One vanishing moment: high-pass channels of a constant tile are
        // zero and the low-pass keeps the constant.
        let mut tile = QuadField::new(6, 6, ExtensionMode::Symmetric);
        for v in tile.data_mut() {
            *v = 0.625;
        }
        let w = builtin("cdf53").unwrap();
        for kind in SchemeKind::all() {
            let out = Executor::new(1).forward(&tile, &build(kind, &w)).unwrap();
            for n in 0..6 {
                for m in 0..6 {
                    assert!((out.get(m, n, 0) - 0.625).abs() < 1e-6, "{kind} LL");
                    for c in 1..4 {
                        assert!(out.get(m, n, c).abs() < 1e-6, "{kind} component {c}");
                    }
                }
            }
        }
    }
}
