//! Symbolic 4x4 transfer matrices over `LaurentPoly2` and the four execution
//! schemes built from a wavelet's lifting pairs.
//!
//! Component order everywhere is (LL, HL, LH, HH); component `c` sits at
//! pixel offset `(c & 1, c >> 1)` inside its 2x2 quad. A matrix acts on that
//! column vector, and a scheme is an ordered list of steps, each step an
//! ordered list of matrix parts. Parts after the first may only hold
//! constant entries: they are applied to in-flight values of the same quad,
//! so any neighborhood access would leak unsynchronized state between
//! worker bands.

use crate::poly2::LaurentPoly2;
use crate::wavelets::WaveletSpec;
use num_traits::One;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeError {
    /// Composite-step shape rule broken (empty part list, non-constant tail part).
    Shape(String),
    /// A part's symbolic determinant is not exactly one.
    NotUnitDeterminant { step: usize, part: usize, det: String },
    NotInvertible(String),
}

impl fmt::Display for SchemeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeError::Shape(msg) => write!(f, "malformed step: {msg}"),
            SchemeError::NotUnitDeterminant { step, part, det } => {
                write!(f, "step {step} part {part}: determinant {det} != 1")
            }
            SchemeError::NotInvertible(msg) => write!(f, "scheme not invertible: {msg}"),
        }
    }
}

impl std::error::Error for SchemeError {}

/// 4x4 matrix with Laurent-polynomial entries.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyMatrix4 {
    e: [[LaurentPoly2; 4]; 4],
}

impl PolyMatrix4 {
    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.e[i][i] = LaurentPoly2::one();
        }
        m
    }

    pub fn zero() -> Self {
        Self { e: Default::default() }
    }

    pub fn entry(&self, row: usize, col: usize) -> &LaurentPoly2 {
        &self.e[row][col]
    }

    pub fn set(&mut self, row: usize, col: usize, p: LaurentPoly2) {
        self.e[row][col] = p;
    }

    /// Used only by the verify negative control to inject a known defect.
    #[cfg(test)]
    pub(crate) fn entry_mut(&mut self, row: usize, col: usize) -> &mut LaurentPoly2 {
        &mut self.e[row][col]
    }

    pub fn is_identity(&self) -> bool {
        (0..4).all(|r| {
            (0..4).all(|c| {
                if r == c {
                    self.e[r][c].is_one()
                } else {
                    self.e[r][c].is_zero()
                }
            })
        })
    }

    pub fn is_constant_only(&self) -> bool {
        self.e.iter().flatten().all(LaurentPoly2::is_constant)
    }

    /// Row `r` passes its component through untouched.
    pub fn row_is_identity(&self, r: usize) -> bool {
        (0..4).all(|c| {
            if r == c {
                self.e[r][c].is_one()
            } else {
                self.e[r][c].is_zero()
            }
        })
    }

    fn det3(m: &[[&LaurentPoly2; 3]; 3]) -> LaurentPoly2 {
        let term = |a: &LaurentPoly2, b: &LaurentPoly2, c: &LaurentPoly2| &(a * b) * c;
        let mut acc = term(m[0][0], m[1][1], m[2][2]);
        acc = &acc + &term(m[0][1], m[1][2], m[2][0]);
        acc = &acc + &term(m[0][2], m[1][0], m[2][1]);
        acc = &acc - &term(m[0][2], m[1][1], m[2][0]);
        acc = &acc - &term(m[0][0], m[1][2], m[2][1]);
        acc = &acc - &term(m[0][1], m[1][0], m[2][2]);
        acc
    }

    fn minor(&self, row: usize, col: usize) -> LaurentPoly2 {
        let rows: Vec<usize> = (0..4).filter(|&r| r != row).collect();
        let cols: Vec<usize> = (0..4).filter(|&c| c != col).collect();
        let m = [
            [&self.e[rows[0]][cols[0]], &self.e[rows[0]][cols[1]], &self.e[rows[0]][cols[2]]],
            [&self.e[rows[1]][cols[0]], &self.e[rows[1]][cols[1]], &self.e[rows[1]][cols[2]]],
            [&self.e[rows[2]][cols[0]], &self.e[rows[2]][cols[1]], &self.e[rows[2]][cols[2]]],
        ];
        Self::det3(&m)
    }

    pub fn det(&self) -> LaurentPoly2 {
        let mut acc = LaurentPoly2::zero();
        for col in 0..4 {
            let m = &self.e[0][col] * &self.minor(0, col);
            if col % 2 == 0 {
                acc = &acc + &m;
            } else {
                acc = &acc - &m;
            }
        }
        acc
    }

    /// Exact inverse for matrices whose determinant is a nonzero constant
    /// (adjugate over the determinant). Every lifting factor in this crate
    /// has determinant exactly one, so this never divides in practice.
    pub fn inverse(&self) -> Result<PolyMatrix4, String> {
        let det = self.det();
        if det.is_zero() {
            return Err("determinant is zero".into());
        }
        if !det.is_constant() {
            return Err(format!("determinant {det} is not a constant"));
        }
        let inv_det = det.coeff(0, 0).recip();
        let mut out = Self::zero();
        for r in 0..4 {
            for c in 0..4 {
                // adj(r, c) = (-1)^(r+c) * minor(c, r)
                let mut m = self.minor(c, r).scaled(&inv_det);
                if (r + c) % 2 == 1 {
                    m = -&m;
                }
                out.e[r][c] = m;
            }
        }
        Ok(out)
    }

    pub fn render_rows(&self) -> Vec<String> {
        self.e
            .iter()
            .map(|row| {
                let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                format!("[ {} ]", cells.join(",  "))
            })
            .collect()
    }
}

impl std::ops::Mul for &PolyMatrix4 {
    type Output = PolyMatrix4;
    fn mul(self, rhs: &PolyMatrix4) -> PolyMatrix4 {
        let mut out = PolyMatrix4::zero();
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = LaurentPoly2::zero();
                for k in 0..4 {
                    if self.e[r][k].is_zero() || rhs.e[k][c].is_zero() {
                        continue;
                    }
                    acc = &acc + &(&self.e[r][k] * &rhs.e[k][c]);
                }
                out.e[r][c] = acc;
            }
        }
        out
    }
}

impl fmt::Debug for PolyMatrix4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PolyMatrix4 [")?;
        for row in self.render_rows() {
            writeln!(f, "  {row}")?;
        }
        write!(f, "]")
    }
}

/// One synchronization unit of a scheme. `parts[0]` reads the previous
/// buffer (neighbor quads allowed); `parts[1..]` chain on the in-flight
/// values of the quad being written and must therefore be constant-only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    parts: Vec<PolyMatrix4>,
}

impl Step {
    pub fn new(parts: Vec<PolyMatrix4>) -> Result<Self, SchemeError> {
        if parts.is_empty() {
            return Err(SchemeError::Shape("a step needs at least one part".into()));
        }
        for (pi, part) in parts.iter().enumerate() {
            if pi > 0 && !part.is_constant_only() {
                return Err(SchemeError::Shape(format!(
                    "part {pi} follows the first part but has neighborhood entries"
                )));
            }
            let det = part.det();
            if !det.is_one() {
                return Err(SchemeError::NotUnitDeterminant {
                    step: usize::MAX,
                    part: pi,
                    det: det.to_string(),
                });
            }
        }
        Ok(Self { parts })
    }

    /// Bypasses the shape rule. Only for tests that need a rule-breaking
    /// step to prove the instrumented executor catches it.
    #[cfg(test)]
    pub(crate) fn new_unchecked(parts: Vec<PolyMatrix4>) -> Self {
        Self { parts }
    }

    pub fn parts(&self) -> &[PolyMatrix4] {
        &self.parts
    }

    pub(crate) fn parts_mut(&mut self) -> &mut [PolyMatrix4] {
        &mut self.parts
    }

    pub fn is_composite(&self) -> bool {
        self.parts.len() > 1
    }

    /// Full effect of the step: parts multiplied with the later-applied
    /// factor on the left.
    pub fn product(&self) -> PolyMatrix4 {
        let mut acc = PolyMatrix4::identity();
        for p in &self.parts {
            acc = p * &acc;
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    SepLifting,
    SepConv,
    NsLifting,
    NsAdapted,
}

impl SchemeKind {
    pub fn all() -> [SchemeKind; 4] {
        [
            SchemeKind::SepLifting,
            SchemeKind::SepConv,
            SchemeKind::NsLifting,
            SchemeKind::NsAdapted,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::SepLifting => "sep-lifting",
            SchemeKind::SepConv => "sep-conv",
            SchemeKind::NsLifting => "ns-lifting",
            SchemeKind::NsAdapted => "ns-adapted",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sep-lifting" => Ok(SchemeKind::SepLifting),
            "sep-conv" => Ok(SchemeKind::SepConv),
            "ns-lifting" => Ok(SchemeKind::NsLifting),
            "ns-adapted" => Ok(SchemeKind::NsAdapted),
            other => Err(format!(
                "unknown scheme '{other}' (choices: sep-lifting, sep-conv, ns-lifting, ns-adapted)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    kind: SchemeKind,
    wavelet: WaveletSpec,
    steps: Vec<Step>,
    is_inverse: bool,
}

impl Scheme {
    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn wavelet(&self) -> &WaveletSpec {
        &self.wavelet
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub(crate) fn steps_mut(&mut self) -> &mut [Step] {
        &mut self.steps
    }

    pub fn is_inverse(&self) -> bool {
        self.is_inverse
    }

    /// Product of every step (later steps on the left): the full symbolic
    /// transfer matrix of the scheme.
    pub fn total_matrix(&self) -> PolyMatrix4 {
        let mut acc = PolyMatrix4::identity();
        for step in &self.steps {
            acc = &step.product() * &acc;
        }
        acc
    }

    #[cfg(test)]
    pub(crate) fn from_steps_unchecked(
        kind: SchemeKind,
        wavelet: &WaveletSpec,
        steps: Vec<Step>,
    ) -> Self {
        Self { kind, wavelet: wavelet.clone(), steps, is_inverse: false }
    }

    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "scheme {} / wavelet {}{}\n",
            self.kind,
            self.wavelet.name(),
            if self.is_inverse { " (inverse)" } else { "" }
        ));
        for (si, step) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "step {} ({} part{})\n",
                si,
                step.parts().len(),
                if step.parts().len() == 1 { "" } else { "s" }
            ));
            for (pi, part) in step.parts().iter().enumerate() {
                out.push_str(&format!("  part {pi}:\n"));
                for row in part.render_rows() {
                    out.push_str(&format!("    {row}\n"));
                }
            }
        }
        out
    }
}

// Elementary factors. Components: 0 = LL, 1 = HL, 2 = LH, 3 = HH.

fn h_predict(p: &LaurentPoly2) -> PolyMatrix4 {
    let mut m = PolyMatrix4::identity();
    m.set(1, 0, p.clone());
    m.set(3, 2, p.clone());
    m
}

fn v_predict(p: &LaurentPoly2) -> PolyMatrix4 {
    let pt = p.transpose();
    let mut m = PolyMatrix4::identity();
    m.set(2, 0, pt.clone());
    m.set(3, 1, pt);
    m
}

fn h_update(u: &LaurentPoly2) -> PolyMatrix4 {
    let mut m = PolyMatrix4::identity();
    m.set(0, 1, u.clone());
    m.set(2, 3, u.clone());
    m
}

fn v_update(u: &LaurentPoly2) -> PolyMatrix4 {
    let ut = u.transpose();
    let mut m = PolyMatrix4::identity();
    m.set(0, 2, ut.clone());
    m.set(1, 3, ut);
    m
}

/// Fused predict: the product of the horizontal and vertical predicts,
/// written out so the quadratic cross term is explicit.
fn ns_predict(p: &LaurentPoly2) -> PolyMatrix4 {
    let pt = p.transpose();
    let mut m = PolyMatrix4::identity();
    m.set(1, 0, p.clone());
    m.set(2, 0, pt.clone());
    m.set(3, 0, p * &pt);
    m.set(3, 1, pt);
    m.set(3, 2, p.clone());
    m
}

fn ns_update(u: &LaurentPoly2) -> PolyMatrix4 {
    let ut = u.transpose();
    let mut m = PolyMatrix4::identity();
    m.set(0, 1, u.clone());
    m.set(0, 2, ut.clone());
    m.set(0, 3, u * &ut);
    m.set(1, 3, ut);
    m.set(2, 3, u.clone());
    m
}

fn scale_h(w: &WaveletSpec) -> PolyMatrix4 {
    let mut m = PolyMatrix4::zero();
    let sl = LaurentPoly2::constant(w.scale_low().clone());
    let sh = LaurentPoly2::constant(w.scale_high().clone());
    m.set(0, 0, sl.clone());
    m.set(1, 1, sh.clone());
    m.set(2, 2, sl);
    m.set(3, 3, sh);
    m
}

fn scale_v(w: &WaveletSpec) -> PolyMatrix4 {
    let mut m = PolyMatrix4::zero();
    let sl = LaurentPoly2::constant(w.scale_low().clone());
    let sh = LaurentPoly2::constant(w.scale_high().clone());
    m.set(0, 0, sl.clone());
    m.set(1, 1, sl);
    m.set(2, 2, sh.clone());
    m.set(3, 3, sh);
    m
}

fn scaling_step(w: &WaveletSpec) -> Step {
    let m = &scale_v(w) * &scale_h(w);
    Step::new(vec![m]).expect("reciprocal scaling has unit determinant")
}

fn step1(m: PolyMatrix4) -> Step {
    Step::new(vec![m]).expect("elementary lifting factor is unit-triangular")
}

/// Build the requested scheme for a wavelet. All four produce the same
/// symbolic total matrix; they differ in step grouping and therefore in
/// synchronization count and arithmetic cost.
pub fn build(kind: SchemeKind, w: &WaveletSpec) -> Scheme {
    let steps = match kind {
        SchemeKind::SepLifting => {
            let mut steps = Vec::new();
            for pair in w.pairs() {
                steps.push(step1(h_predict(&pair.predict)));
                steps.push(step1(v_predict(&pair.predict)));
                steps.push(step1(h_update(&pair.update)));
                steps.push(step1(v_update(&pair.update)));
            }
            if w.has_scaling() {
                steps.push(scaling_step(w));
            }
            steps
        }
        SchemeKind::NsLifting => {
            let mut steps = Vec::new();
            for pair in w.pairs() {
                steps.push(step1(ns_predict(&pair.predict)));
                steps.push(step1(ns_update(&pair.update)));
            }
            if w.has_scaling() {
                steps.push(scaling_step(w));
            }
            steps
        }
        SchemeKind::NsAdapted => {
            let mut steps = Vec::new();
            for pair in w.pairs() {
                steps.push(adapted_step(&pair.predict, ns_predict, h_predict, v_predict));
                steps.push(adapted_step(&pair.update, ns_update, h_update, v_update));
            }
            if w.has_scaling() {
                steps.push(scaling_step(w));
            }
            steps
        }
        SchemeKind::SepConv => {
            let mut nh = PolyMatrix4::identity();
            let mut nv = PolyMatrix4::identity();
            for pair in w.pairs() {
                nh = &h_update(&pair.update) * &(&h_predict(&pair.predict) * &nh);
                nv = &v_update(&pair.update) * &(&v_predict(&pair.predict) * &nv);
            }
            if w.has_scaling() {
                nh = &scale_h(w) * &nh;
                nv = &scale_v(w) * &nv;
            }
            vec![
                Step::new(vec![nh]).expect("product of unit-determinant factors"),
                Step::new(vec![nv]).expect("product of unit-determinant factors"),
            ]
        }
    };
    Scheme { kind, wavelet: w.clone(), steps, is_inverse: false }
}

/// One adapted step: split the polynomial into its constant term and the
/// remainder, put all neighborhood access into a fused first part built from
/// the remainder, and chase it with constant horizontal + vertical parts
/// carrying the constant term. The product collapses back to the fused
/// matrix of the full polynomial, but the tail parts touch only the quad
/// being written.
fn adapted_step(
    poly: &LaurentPoly2,
    fused: fn(&LaurentPoly2) -> PolyMatrix4,
    constant_h: fn(&LaurentPoly2) -> PolyMatrix4,
    constant_v: fn(&LaurentPoly2) -> PolyMatrix4,
) -> Step {
    let (p0, p1) = poly.split_constant();
    let candidates = vec![fused(&p1), constant_h(&p0), constant_v(&p0)];
    let mut parts: Vec<PolyMatrix4> =
        candidates.into_iter().filter(|m| !m.is_identity()).collect();
    if parts.is_empty() {
        parts.push(PolyMatrix4::identity());
    }
    Step::new(parts).expect("adapted split keeps unit-triangular parts")
}

/// Symbolic comparison of two schemes' total matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equal,
    Mismatch { row: usize, col: usize, left: String, right: String },
}

pub fn verify_equivalence(a: &Scheme, b: &Scheme) -> Equivalence {
    let ta = a.total_matrix();
    let tb = b.total_matrix();
    for r in 0..4 {
        for c in 0..4 {
            if ta.entry(r, c) != tb.entry(r, c) {
                return Equivalence::Mismatch {
                    row: r,
                    col: c,
                    left: ta.entry(r, c).to_string(),
                    right: tb.entry(r, c).to_string(),
                };
            }
        }
    }
    Equivalence::Equal
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    /// Synchronization units (barriers between buffer swaps).
    pub steps: usize,
    /// Multiply-accumulates per 2x2 quad for one full forward transform.
    /// A diagonal term that passes the component through with weight one is
    /// free; every other term costs one MAC.
    pub macs_per_quad: usize,
    /// Components per quad that some step copies through untouched (identity
    /// rows of each step's total product, summed over steps).
    pub copies_per_quad: usize,
}

pub fn count_ops(s: &Scheme) -> OpCount {
    let mut macs = 0usize;
    let mut copies = 0usize;
    for step in s.steps() {
        for part in step.parts() {
            for r in 0..4 {
                for c in 0..4 {
                    let e = part.entry(r, c);
                    if e.is_zero() {
                        continue;
                    }
                    let mut n = e.term_count();
                    if r == c && e.coeff(0, 0).is_one() {
                        n -= 1;
                    }
                    macs += n;
                }
            }
        }
        let product = step.product();
        copies += (0..4).filter(|&r| product.row_is_identity(r)).count();
    }
    OpCount { steps: s.steps().len(), macs_per_quad: macs, copies_per_quad: copies }
}

/// Inverse scheme: steps in reverse order; within each step the parts keep
/// their order and are each inverted exactly. For every step shape this
/// crate builds, that shortcut yields the exact step inverse, and the
/// identity `inverse_step * step == I` is re-checked symbolically here so a
/// shape where the shortcut is wrong errors out instead of mis-inverting.
pub fn invert(s: &Scheme) -> Result<Scheme, SchemeError> {
    let mut inv_steps = Vec::with_capacity(s.steps.len());
    for (si, step) in s.steps.iter().enumerate().rev() {
        let mut parts = Vec::with_capacity(step.parts().len());
        for (pi, part) in step.parts().iter().enumerate() {
            let inv = part
                .inverse()
                .map_err(|e| SchemeError::NotInvertible(format!("step {si} part {pi}: {e}")))?;
            parts.push(inv);
        }
        let inv_step = Step::new(parts)?;
        if !(&inv_step.product() * &step.product()).is_identity() {
            return Err(SchemeError::NotInvertible(format!(
                "step {si}: part-wise inverse does not cancel the step"
            )));
        }
        inv_steps.push(inv_step);
    }
    Ok(Scheme {
        kind: s.kind,
        wavelet: s.wavelet.clone(),
        steps: inv_steps,
        is_inverse: !s.is_inverse,
    })
}
