//! Independent reference transform: classical filter-bank evaluation by
//! direct convolution, plus a textbook scalar lifting loop. Nothing here
//! shares indexing or kernel code with the engine; agreement between the two
//! is evidence, not tautology.

use crate::engine::ExtensionMode;
use crate::poly2::{rational_to_f64, LaurentPoly2};
use crate::wavelets::WaveletSpec;

/// Analysis filter pair as `(pixel offset, tap)` lists, offsets ascending.
/// Offsets are relative to the even (low) / odd (high) output site's own
/// even base: output `low[m]` sums `tap * x[2m + offset]`, and `high[m]`
/// sums `tap * x[2m + offset]` as well, so the high filter's unit tap sits
/// at offset 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub lowpass: Vec<(i32, f64)>,
    pub highpass: Vec<(i32, f64)>,
}

fn poly_taps(p: &LaurentPoly2) -> Vec<(i32, f64)> {
    p.terms().map(|(&(a, _), c)| (a, rational_to_f64(c))).collect()
}

/// Recombine a wavelet's lifting ladder into explicit analysis filters.
///
/// The ladder acts on phase vectors (even; odd): predict is [[1,0],[P,1]],
/// update is [[1,U],[0,1]], applied in listed order, then the rows are
/// scaled. Row entries are polynomials in the phase shift; interleaving
/// even and odd phases back into pixel offsets gives the filters.
pub fn filters_from_lifting(w: &WaveletSpec) -> FilterBank {
    let one = LaurentPoly2::one();
    let zero = LaurentPoly2::zero();
    // t = [[t00, t01], [t10, t11]]
    let mut t = [[one.clone(), zero.clone()], [zero, one]];
    let mul2 = |a: &[[LaurentPoly2; 2]; 2], b: &[[LaurentPoly2; 2]; 2]| {
        let mut out: [[LaurentPoly2; 2]; 2] = Default::default();
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] =
                    &(&a[r][0] * &b[0][c]) + &(&a[r][1] * &b[1][c]);
            }
        }
        out
    };
    for pair in w.pairs() {
        let predict = [
            [LaurentPoly2::one(), LaurentPoly2::zero()],
            [pair.predict.clone(), LaurentPoly2::one()],
        ];
        t = mul2(&predict, &t);
        let update = [
            [LaurentPoly2::one(), pair.update.clone()],
            [LaurentPoly2::zero(), LaurentPoly2::one()],
        ];
        t = mul2(&update, &t);
    }
    let sl = LaurentPoly2::constant(w.scale_low().clone());
    let sh = LaurentPoly2::constant(w.scale_high().clone());
    t[0][0] = &t[0][0] * &sl;
    t[0][1] = &t[0][1] * &sl;
    t[1][0] = &t[1][0] * &sh;
    t[1][1] = &t[1][1] * &sh;

    // Phase k of the even column maps to pixel offset 2k; phase k of the
    // odd column to 2k + 1.
    let interleave = |even: &LaurentPoly2, odd: &LaurentPoly2| {
        let mut taps: Vec<(i32, f64)> = poly_taps(even)
            .into_iter()
            .map(|(k, v)| (2 * k, v))
            .chain(poly_taps(odd).into_iter().map(|(k, v)| (2 * k + 1, v)))
            .collect();
        taps.sort_by_key(|&(d, _)| d);
        taps
    };
    FilterBank {
        lowpass: interleave(&t[0][0], &t[0][1]),
        highpass: interleave(&t[1][0], &t[1][1]),
    }
}

/// Resolve a pixel coordinate against a signal of `len` pixels.
fn extend(u: i64, len: usize, mode: ExtensionMode) -> Option<usize> {
    let n = len as i64;
    if (0..n).contains(&u) {
        return Some(u as usize);
    }
    match mode {
        ExtensionMode::ZeroPad => None,
        ExtensionMode::Symmetric => {
            // Whole-sample symmetry: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
            debug_assert!(n >= 1);
            if n == 1 {
                return Some(0);
            }
            let period = 2 * n - 2;
            let mut v = u.rem_euclid(period);
            if v >= n {
                v = period - v;
            }
            Some(v as usize)
        }
    }
}

fn read_2d(pixels: &[f32], width: usize, height: usize, x: i64, y: i64, mode: ExtensionMode) -> f64 {
    match (extend(x, width, mode), extend(y, height, mode)) {
        (Some(px), Some(py)) => pixels[py * width + px] as f64,
        _ => 0.0,
    }
}

/// Direct 2-D analysis: four coefficient planes (LL, HL, LH, HH), each
/// `width/2 x height/2`, computed by separable convolution of the analysis
/// filters over the extended pixel grid. `pixels` is row-major.
pub fn direct_transform(
    pixels: &[f32],
    width: usize,
    height: usize,
    w: &WaveletSpec,
    mode: ExtensionMode,
) -> [Vec<f64>; 4] {
    assert!(width % 2 == 0 && height % 2 == 0, "pixel tile must have even sides");
    assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
    let fb = filters_from_lifting(w);
    let mq = width / 2;
    let nq = height / 2;
    let mut planes: [Vec<f64>; 4] = [
        vec![0.0; mq * nq],
        vec![0.0; mq * nq],
        vec![0.0; mq * nq],
        vec![0.0; mq * nq],
    ];
    for c in 0..4 {
        let fh = if c & 1 == 0 { &fb.lowpass } else { &fb.highpass };
        let fv = if c >> 1 == 0 { &fb.lowpass } else { &fb.highpass };
        let plane = &mut planes[c];
        for n in 0..nq {
            for m in 0..mq {
                let mut acc = 0.0f64;
                for &(dy, wy) in fv {
                    for &(dx, wx) in fh {
                        let x = 2 * m as i64 + dx as i64;
                        let y = 2 * n as i64 + dy as i64;
                        acc += wy * wx * read_2d(pixels, width, height, x, y, mode);
                    }
                }
                plane[n * mq + m] = acc;
            }
        }
    }
    planes
}

/// Textbook 1-D lifting analysis in f64: split, predict, update, scale.
/// Out-of-range neighbor reads are resolved per step at the pixel level.
/// Returns `(low, high)`, each of length `signal.len() / 2`.
pub fn naive_lifting_1d(signal: &[f64], w: &WaveletSpec, mode: ExtensionMode) -> (Vec<f64>, Vec<f64>) {
    let len = signal.len();
    assert!(len % 2 == 0 && len > 0, "signal length must be even and positive");
    let half = len / 2;
    let mut s: Vec<f64> = (0..half).map(|i| signal[2 * i]).collect();
    let mut d: Vec<f64> = (0..half).map(|i| signal[2 * i + 1]).collect();

    // Read an even-position value (the s channel) at phase index j.
    let read_even = |s: &[f64], j: i64| -> f64 {
        match extend(2 * j, len, mode) {
            Some(u) => {
                debug_assert_eq!(u % 2, 0);
                s[u / 2]
            }
            None => 0.0,
        }
    };
    let read_odd = |d: &[f64], j: i64| -> f64 {
        match extend(2 * j + 1, len, mode) {
            Some(u) => {
                debug_assert_eq!(u % 2, 1);
                d[(u - 1) / 2]
            }
            None => 0.0,
        }
    };

    for pair in w.pairs() {
        let ptaps = poly_taps(&pair.predict);
        let utaps = poly_taps(&pair.update);
        let mut d2 = d.clone();
        for (i, out) in d2.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(a, tap) in &ptaps {
                acc += tap * read_even(&s, i as i64 + a as i64);
            }
            *out += acc;
        }
        d = d2;
        let mut s2 = s.clone();
        for (i, out) in s2.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(a, tap) in &utaps {
                acc += tap * read_odd(&d, i as i64 + a as i64);
            }
            *out += acc;
        }
        s = s2;
    }
    let sl = rational_to_f64(w.scale_low());
    let sh = rational_to_f64(w.scale_high());
    for v in &mut s {
        *v *= sl;
    }
    for v in &mut d {
        *v *= sh;
    }
    (s, d)
}

/// Exact unwind of `naive_lifting_1d`: unscale, then undo each pair in
/// reverse order with the same per-step boundary resolution.
pub fn naive_inverse_lifting_1d(
    low: &[f64],
    high: &[f64],
    w: &WaveletSpec,
    mode: ExtensionMode,
) -> Vec<f64> {
    assert_eq!(low.len(), high.len());
    let half = low.len();
    let len = half * 2;
    let sl = rational_to_f64(w.scale_low());
    let sh = rational_to_f64(w.scale_high());
    let mut s: Vec<f64> = low.iter().map(|v| v / sl).collect();
    let mut d: Vec<f64> = high.iter().map(|v| v / sh).collect();

    let read_even = |s: &[f64], j: i64| -> f64 {
        match extend(2 * j, len, mode) {
            Some(u) => s[u / 2],
            None => 0.0,
        }
    };
    let read_odd = |d: &[f64], j: i64| -> f64 {
        match extend(2 * j + 1, len, mode) {
            Some(u) => d[(u - 1) / 2],
            None => 0.0,
        }
    };

    for pair in w.pairs().iter().rev() {
        let ptaps = poly_taps(&pair.predict);
        let utaps = poly_taps(&pair.update);
        let mut s2 = s.clone();
        for (i, out) in s2.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(a, tap) in &utaps {
                acc += tap * read_odd(&d, i as i64 + a as i64);
            }
            *out -= acc;
        }
        s = s2;
        let mut d2 = d.clone();
        for (i, out) in d2.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(a, tap) in &ptaps {
                acc += tap * read_even(&s, i as i64 + a as i64);
            }
            *out -= acc;
        }
        d = d2;
    }

    let mut signal = vec![0.0; len];
    for i in 0..half {
        signal[2 * i] = s[i];
        signal[2 * i + 1] = d[i];
    }
    signal
}

/// Direct 1-D analysis by filter convolution; the comparison partner of
/// `naive_lifting_1d`.
pub fn direct_1d(signal: &[f64], fb: &FilterBank, mode: ExtensionMode) -> (Vec<f64>, Vec<f64>) {
    let len = signal.len();
    assert!(len % 2 == 0 && len > 0);
    let half = len / 2;
    let read = |u: i64| -> f64 {
        match extend(u, len, mode) {
            Some(i) => signal[i],
            None => 0.0,
        }
    };
    let apply = |taps: &[(i32, f64)]| -> Vec<f64> {
        (0..half)
            .map(|m| {
                taps.iter()
                    .map(|&(d, tap)| tap * read(2 * m as i64 + d as i64))
                    .sum()
            })
            .collect()
    };
    (apply(&fb.lowpass), apply(&fb.highpass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelets::builtin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cdf53_filters_are_the_classic_5_3_taps() {
        let fb = filters_from_lifting(&builtin("cdf53").unwrap());
        let low: Vec<(i32, f64)> =
            vec![(-2, -0.125), (-1, 0.25), (0, 0.75), (1, 0.25), (2, -0.125)];
        let high: Vec<(i32, f64)> = vec![(0, -0.5), (1, 1.0), (2, -0.5)];
        assert_eq!(fb.lowpass, low);
        assert_eq!(fb.highpass, high);
    }

    #[test]
    fn cdf97_filters_have_9_and_7_taps_and_unit_dc() {
        let fb = filters_from_lifting(&builtin("cdf97").unwrap());
        assert_eq!(fb.lowpass.len(), 9);
        assert_eq!(fb.highpass.len(), 7);
        // Low-pass DC gain is normalized to 1 by the reciprocal scaling.
        let dc: f64 = fb.lowpass.iter().map(|&(_, t)| t).sum();
        assert!(close(dc, 1.0, 1e-12), "dc = {dc}");
        // One vanishing moment: the high-pass rejects constants.
        let hp_dc: f64 = fb.highpass.iter().map(|&(_, t)| t).sum();
        assert!(close(hp_dc, 0.0, 1e-12), "hp dc = {hp_dc}");
        // Symmetric taps around their write sites (offset 0 for low, 1 for high).
        for &(d, t) in &fb.lowpass {
            let mirrored = fb.lowpass.iter().find(|&&(d2, _)| d2 == -d).unwrap().1;
            assert!(close(t, mirrored, 1e-15));
        }
        for &(d, t) in &fb.highpass {
            let mirrored = fb.highpass.iter().find(|&&(d2, _)| d2 == 2 - d).unwrap().1;
            assert!(close(t, mirrored, 1e-15));
        }
    }

    #[test]
    fn symmetric_extension_folds_pixels() {
        // len 8: ... x2 x1 | x0 x1 ... x7 | x6 x5 ...
        assert_eq!(extend(-1, 8, ExtensionMode::Symmetric), Some(1));
        assert_eq!(extend(-2, 8, ExtensionMode::Symmetric), Some(2));
        assert_eq!(extend(8, 8, ExtensionMode::Symmetric), Some(6));
        assert_eq!(extend(9, 8, ExtensionMode::Symmetric), Some(5));
        assert_eq!(extend(14, 8, ExtensionMode::Symmetric), Some(0));
        assert_eq!(extend(3, 8, ExtensionMode::Symmetric), Some(3));
        assert_eq!(extend(-1, 8, ExtensionMode::ZeroPad), None);
        assert_eq!(extend(8, 8, ExtensionMode::ZeroPad), None);
        // Degenerate one-pixel axis.
        assert_eq!(extend(5, 1, ExtensionMode::Symmetric), Some(0));
    }

    #[test]
    fn lifting_and_convolution_agree_exactly_under_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["cdf53", "cdf97"] {
            let w = builtin(name).unwrap();
            let fb = filters_from_lifting(&w);
            for len in [2usize, 4, 6, 16, 64] {
                let x: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
                let (ls, hs) = naive_lifting_1d(&x, &w, ExtensionMode::Symmetric);
                let (lc, hc) = direct_1d(&x, &fb, ExtensionMode::Symmetric);
                for i in 0..len / 2 {
                    assert!(close(ls[i], lc[i], 1e-12), "{name} len {len} low[{i}]");
                    assert!(close(hs[i], hc[i], 1e-12), "{name} len {len} high[{i}]");
                }
            }
        }
    }

    #[test]
    fn zero_pad_agreement_is_interior_only() {
        // Per-step zero resolution and one-stage convolution legitimately
        // differ near the edges; away from them both see no boundary at all.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = builtin("cdf53").unwrap();
        let fb = filters_from_lifting(&w);
        let len = 32;
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (ls, hs) = naive_lifting_1d(&x, &w, ExtensionMode::ZeroPad);
        let (lc, hc) = direct_1d(&x, &fb, ExtensionMode::ZeroPad);
        for i in 2..len / 2 - 2 {
            assert!(close(ls[i], lc[i], 1e-12));
            assert!(close(hs[i], hc[i], 1e-12));
        }
    }

    #[test]
    fn fused_zero_pad_differs_at_the_edge_by_construction() {
        // Frozen two-sample counterexample: sequential lifting keeps 7/8 of
        // the first sample in the low channel, the fused filter only 3/4.
        let w = builtin("cdf53").unwrap();
        let fb = filters_from_lifting(&w);
        let x = vec![1.0, 0.0];
        let (ls, _) = naive_lifting_1d(&x, &w, ExtensionMode::ZeroPad);
        let (lc, _) = direct_1d(&x, &fb, ExtensionMode::ZeroPad);
        assert!(close(ls[0], 0.875, 1e-15));
        assert!(close(lc[0], 0.75, 1e-15));
    }

    #[test]
    fn naive_lifting_reconstructs_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for name in ["cdf53", "cdf97"] {
            let w = builtin(name).unwrap();
            for mode in [ExtensionMode::Symmetric, ExtensionMode::ZeroPad] {
                for len in [2usize, 4, 10, 64] {
                    let x: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let (l, h) = naive_lifting_1d(&x, &w, mode);
                    let back = naive_inverse_lifting_1d(&l, &h, &w, mode);
                    for i in 0..len {
                        assert!(
                            close(back[i], x[i], 1e-12),
                            "{name} {mode:?} len {len} sample {i}: {} vs {}",
                            back[i],
                            x[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn direct_2d_is_separable_row_column_composition() {
        // The 2-D direct transform must equal 1-D filtering of rows then
        // columns; this pins the plane orientation (HL = horizontal high).
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let w = builtin("cdf53").unwrap();
        let fb = filters_from_lifting(&w);
        let (width, height) = (12usize, 8usize);
        let pixels: Vec<f32> = (0..width * height).map(|_| rng.gen_range(0.0..1.0)).collect();
        let planes = direct_transform(&pixels, width, height, &w, ExtensionMode::Symmetric);

        // Row pass in f64.
        let mut rows_low = vec![0.0f64; (width / 2) * height];
        let mut rows_high = vec![0.0f64; (width / 2) * height];
        for y in 0..height {
            let row: Vec<f64> = (0..width).map(|x| pixels[y * width + x] as f64).collect();
            let (l, h) = direct_1d(&row, &fb, ExtensionMode::Symmetric);
            for m in 0..width / 2 {
                rows_low[y * (width / 2) + m] = l[m];
                rows_high[y * (width / 2) + m] = h[m];
            }
        }
        // Column pass over each intermediate.
        for (c, source) in [(0usize, &rows_low), (1, &rows_high)] {
            for m in 0..width / 2 {
                let col: Vec<f64> = (0..height).map(|y| source[y * (width / 2) + m]).collect();
                let (l, h) = direct_1d(&col, &fb, ExtensionMode::Symmetric);
                for n in 0..height / 2 {
                    let got_ll = planes[c][n * (width / 2) + m];
                    let got_lh = planes[c + 2][n * (width / 2) + m];
                    assert!(close(l[n], got_ll, 1e-12));
                    assert!(close(h[n], got_lh, 1e-12));
                }
            }
        }
    }
}
