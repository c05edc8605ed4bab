//! Wavelet descriptions in lifting form: a list of predict/update polynomial
//! pairs plus a reciprocal pair of channel scale factors.
//!
//! Polynomials here are univariate in `zm`; the schemes module turns them
//! into horizontal and vertical (transposed) matrix factors.

use crate::poly2::{rat, rat_int, LaurentPoly2, Rational};
use num_traits::One;
use rand::Rng;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftingPair {
    pub predict: LaurentPoly2,
    pub update: LaurentPoly2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveletSpec {
    name: String,
    pairs: Vec<LiftingPair>,
    scale_low: Rational,
    scale_high: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WaveletError {
    /// Structural rule broken (empty pair list, bivariate polynomial, zero scale, ...).
    Validation(String),
    /// Text-format problem, with 1-based line and column.
    Parse { line: usize, col: usize, msg: String },
    UnknownName { name: String },
}

impl fmt::Display for WaveletError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveletError::Validation(msg) => write!(f, "invalid wavelet: {msg}"),
            WaveletError::Parse { line, col, msg } => {
                write!(f, "wavelet config line {line}, column {col}: {msg}")
            }
            WaveletError::UnknownName { name } => {
                write!(f, "unknown wavelet '{name}' (built-ins: {})", builtin_names().join(", "))
            }
        }
    }
}

impl std::error::Error for WaveletError {}

impl WaveletSpec {
    /// Build with an explicit low-channel scale; the high-channel scale is its
    /// exact reciprocal, so the per-quad scaling matrix has determinant one.
    pub fn new(
        name: impl Into<String>,
        pairs: Vec<LiftingPair>,
        scale_low: Rational,
    ) -> Result<Self, WaveletError> {
        use num_traits::Zero;
        if scale_low.is_zero() {
            return Err(WaveletError::Validation("scale_low must be nonzero".into()));
        }
        let scale_high = scale_low.recip();
        Self::with_scales(name, pairs, scale_low, scale_high)
    }

    /// Build with both scales spelled out; their product must be exactly one.
    pub fn with_scales(
        name: impl Into<String>,
        pairs: Vec<LiftingPair>,
        scale_low: Rational,
        scale_high: Rational,
    ) -> Result<Self, WaveletError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(WaveletError::Validation("name must be non-empty".into()));
        }
        if pairs.is_empty() {
            return Err(WaveletError::Validation("at least one predict/update pair".into()));
        }
        for (i, pair) in pairs.iter().enumerate() {
            for (role, p) in [("predict", &pair.predict), ("update", &pair.update)] {
                if !p.is_horizontal() {
                    return Err(WaveletError::Validation(format!(
                        "{role}[{}] depends on zn; lifting polynomials are one-dimensional",
                        i + 1
                    )));
                }
            }
        }
        if !(&scale_low * &scale_high).is_one() {
            return Err(WaveletError::Validation(
                "scale_low * scale_high must equal 1 exactly".into(),
            ));
        }
        Ok(Self { name, pairs, scale_low, scale_high })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pairs(&self) -> &[LiftingPair] {
        &self.pairs
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn scale_low(&self) -> &Rational {
        &self.scale_low
    }

    pub fn scale_high(&self) -> &Rational {
        &self.scale_high
    }

    /// True when the final channel scaling is not the identity.
    pub fn has_scaling(&self) -> bool {
        !self.scale_low.is_one()
    }

    /// A predict polynomial writes at odd samples and reads even ones, so its
    /// pixel stencil is symmetric iff coefficients satisfy p[a] == p[1-a];
    /// update stencils are symmetric iff u[b] == u[-1-b]. Symmetric stencils
    /// are what make whole-sample-symmetric folding exact for fused
    /// (single-stage) evaluation orders as well as per-step ones.
    pub fn has_symmetric_stencils(&self) -> bool {
        self.pairs.iter().all(|pair| {
            let p = &pair.predict;
            let u = &pair.update;
            let ((pa0, pa1), _) = p.exponent_range();
            let ((ua0, ua1), _) = u.exponent_range();
            (pa0..=pa1).all(|a| p.coeff(a, 0) == p.coeff(1 - a, 0))
                && (ua0..=ua1).all(|b| u.coeff(b, 0) == u.coeff(-1 - b, 0))
        })
    }
}

pub fn builtin_names() -> Vec<&'static str> {
    vec!["cdf53", "cdf97"]
}

/// Look up a built-in wavelet by name.
pub fn builtin(name: &str) -> Result<WaveletSpec, WaveletError> {
    match name {
        "cdf53" => {
            let pairs = vec![LiftingPair {
                predict: LaurentPoly2::parse("-1/2 -1/2*zm").unwrap(),
                update: LaurentPoly2::parse("1/4 +1/4*zm^-1").unwrap(),
            }];
            WaveletSpec::new("cdf53", pairs, rat_int(1))
        }
        "cdf97" => {
            // Irrational lifting constants pinned to 15 decimal digits and
            // stored as exact rationals so symbolic identities stay exact.
            const D: i64 = 1_000_000_000_000_000;
            let alpha = rat(-1_586_134_342_059_924, D);
            let beta = rat(-52_980_118_572_961, D);
            let gamma = rat(882_911_075_530_934, D);
            let delta = rat(443_506_852_043_971, D);
            let zeta = rat(1_230_174_104_914_001, D);
            let two_tap = |c: &Rational, e: i32| {
                &LaurentPoly2::constant(c.clone())
                    + &LaurentPoly2::monomial(c.clone(), e, 0)
            };
            let pairs = vec![
                LiftingPair { predict: two_tap(&alpha, 1), update: two_tap(&beta, -1) },
                LiftingPair { predict: two_tap(&gamma, 1), update: two_tap(&delta, -1) },
            ];
            // Dividing the low channel by the lifting DC gain keeps flat
            // regions at their original level.
            WaveletSpec::new("cdf97", pairs, zeta.recip())
        }
        other => Err(WaveletError::UnknownName { name: other.to_string() }),
    }
}

/// Parse the text wavelet format:
///
/// ```text
/// # comment
/// name = my-wavelet
/// predict[1] = -1/2 - 1/2*zm
/// update[1]  = 1/4 + 1/4*zm^-1
/// scale_low  = 1
/// ```
///
/// Indices are 1-based and must be contiguous; `scale_high` may be given
/// explicitly but must be the exact reciprocal of `scale_low`.
pub fn load_custom(text: &str) -> Result<WaveletSpec, WaveletError> {
    let mut name: Option<String> = None;
    let mut scale_low: Option<Rational> = None;
    let mut scale_high: Option<Rational> = None;
    let mut predicts: Vec<(usize, LaurentPoly2)> = Vec::new();
    let mut updates: Vec<(usize, LaurentPoly2)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        let eq = body.find('=').ok_or(WaveletError::Parse {
            line,
            col: body.len(),
            msg: "expected 'key = value'".into(),
        })?;
        let key = body[..eq].trim();
        let value = &body[eq + 1..];
        let value_col = |pos: usize| eq + 2 + pos; // 1-based column of a byte within `value`
        let parse_poly = |value: &str| -> Result<LaurentPoly2, WaveletError> {
            LaurentPoly2::parse(value).map_err(|e| WaveletError::Parse {
                line,
                col: value_col(e.pos),
                msg: e.msg,
            })
        };
        let parse_scale = |value: &str| -> Result<Rational, WaveletError> {
            crate::poly2::parse_rational(value).map_err(|e| WaveletError::Parse {
                line,
                col: value_col(e.pos),
                msg: e.msg,
            })
        };
        let indexed = |key: &str, prefix: &str| -> Option<Result<usize, WaveletError>> {
            let rest = key.strip_prefix(prefix)?;
            let rest = rest.trim();
            let inner = rest.strip_prefix('[')?.strip_suffix(']')?;
            Some(inner.trim().parse::<usize>().map_err(|_| WaveletError::Parse {
                line,
                col: 1,
                msg: format!("bad index in '{key}'"),
            }))
        };

        if key == "name" {
            if name.is_some() {
                return Err(WaveletError::Parse { line, col: 1, msg: "duplicate 'name'".into() });
            }
            name = Some(value.trim().to_string());
        } else if key == "scale_low" {
            if scale_low.is_some() {
                return Err(WaveletError::Parse { line, col: 1, msg: "duplicate 'scale_low'".into() });
            }
            scale_low = Some(parse_scale(value)?);
        } else if key == "scale_high" {
            if scale_high.is_some() {
                return Err(WaveletError::Parse { line, col: 1, msg: "duplicate 'scale_high'".into() });
            }
            scale_high = Some(parse_scale(value)?);
        } else if let Some(idx) = indexed(key, "predict") {
            let idx = idx?;
            if idx == 0 {
                return Err(WaveletError::Parse { line, col: 1, msg: "indices are 1-based".into() });
            }
            if predicts.iter().any(|(i, _)| *i == idx) {
                return Err(WaveletError::Parse { line, col: 1, msg: format!("duplicate predict[{idx}]") });
            }
            predicts.push((idx, parse_poly(value)?));
        } else if let Some(idx) = indexed(key, "update") {
            let idx = idx?;
            if idx == 0 {
                return Err(WaveletError::Parse { line, col: 1, msg: "indices are 1-based".into() });
            }
            if updates.iter().any(|(i, _)| *i == idx) {
                return Err(WaveletError::Parse { line, col: 1, msg: format!("duplicate update[{idx}]") });
            }
            updates.push((idx, parse_poly(value)?));
        } else {
            return Err(WaveletError::Parse {
                line,
                col: 1,
                msg: format!("unknown key '{key}'"),
            });
        }
    }

    let k = predicts.len().max(updates.len());
    if k == 0 {
        return Err(WaveletError::Validation("no predict/update pairs defined".into()));
    }
    let mut pairs = Vec::with_capacity(k);
    for i in 1..=k {
        let p = predicts.iter().find(|(j, _)| *j == i).map(|(_, p)| p.clone());
        let u = updates.iter().find(|(j, _)| *j == i).map(|(_, u)| u.clone());
        match (p, u) {
            (Some(predict), Some(update)) => pairs.push(LiftingPair { predict, update }),
            (None, _) => {
                return Err(WaveletError::Validation(format!("missing predict[{i}]")));
            }
            (_, None) => {
                return Err(WaveletError::Validation(format!("missing update[{i}]")));
            }
        }
    }

    let name = name.unwrap_or_else(|| "custom".to_string());
    let scale_low = scale_low.unwrap_or_else(|| Rational::one());
    match scale_high {
        Some(sh) => WaveletSpec::with_scales(name, pairs, scale_low, sh),
        None => WaveletSpec::new(name, pairs, scale_low),
    }
}

/// Deterministic small random wavelet for property sweeps: up to `max_pairs`
/// lifting pairs whose polynomials carry 1..=`max_terms` nonzero terms with
/// exponents in [-2, 2], plus an occasional nontrivial scale.
pub fn random_wavelet<R: Rng>(rng: &mut R, max_pairs: usize, max_terms: usize) -> WaveletSpec {
    let poly = |rng: &mut R| {
        let n_terms = rng.gen_range(1..=max_terms);
        LaurentPoly2::from_terms((0..n_terms).map(|_| {
            let a = rng.gen_range(-2i32..=2);
            let mut num = 0i64;
            while num == 0 {
                num = rng.gen_range(-8i64..=8);
            }
            let den = rng.gen_range(1i64..=8);
            ((a, 0), rat(num, den))
        }))
    };
    let k = rng.gen_range(1..=max_pairs);
    let mut pairs = Vec::with_capacity(k);
    for _ in 0..k {
        // Re-roll the rare all-cancelled zero polynomial: a zero predict or
        // update is legal but makes the sweep less informative.
        let mut predict = poly(rng);
        while predict.is_zero() {
            predict = poly(rng);
        }
        let mut update = poly(rng);
        while update.is_zero() {
            update = poly(rng);
        }
        pairs.push(LiftingPair { predict, update });
    }
    let scale_low = if rng.gen_bool(0.5) {
        rat_int(1)
    } else {
        let mut num = 0i64;
        while num == 0 {
            num = rng.gen_range(-6i64..=6);
        }
        rat(num, rng.gen_range(1i64..=6))
    };
    WaveletSpec::new("random", pairs, scale_low).expect("generator respects the validation rules")
}
