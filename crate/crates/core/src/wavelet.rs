//! Single-level Daubechies-4 analysis and the max-detail features.
//!
//! Boundary convention: periodic extension. For a record of `N` samples the
//! convolution index wraps modulo `N`, and both coefficient sequences have
//! `ceil(N / 2)` entries. For even `N` the transform is orthonormal, so the
//! coefficient energy equals the signal energy.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Channel, SignalSet};

/// Number of taps in the db4 filters.
pub const TAPS: usize = 8;

/// db4 scaling (lowpass) coefficients, Daubechies ordering.
#[allow(clippy::excessive_precision)]
const DB4_LOWPASS: [f64; TAPS] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.02798376941685985,
    -0.18703481171909309,
    0.03084138183556076,
    0.0328830116668852,
    -0.01059740178506903,
];

/// Analysis filter pair. `highpass[n] = (-1)^n * lowpass[TAPS - 1 - n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterPair {
    pub lowpass: [f64; TAPS],
    pub highpass: [f64; TAPS],
}

/// The db4 analysis filters.
pub fn db4_filters() -> FilterPair {
    let lowpass = DB4_LOWPASS;
    let mut highpass = [0.0; TAPS];
    for (n, g) in highpass.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *g = sign * lowpass[TAPS - 1 - n];
    }
    FilterPair { lowpass, highpass }
}

/// Level-1 decomposition of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub detail: Vec<f64>,
}

impl Decomposition {
    pub fn level(&self) -> usize {
        1
    }
}

/// Number of coefficients per band for a record of `len` samples.
pub fn coefficient_len(len: usize) -> usize {
    len.div_ceil(2)
}

/// Convolve-then-downsample with periodic extension:
/// `detail[k] = sum_j g[j] x[(2k - j) mod N]`, likewise for `approx` with `h`.
pub fn dwt_single_level(x: &[f64], filters: &FilterPair) -> Result<Decomposition> {
    let n = x.len();
    if n < TAPS {
        return Err(Error::SignalTooShort { len: n, min: TAPS });
    }
    let half = coefficient_len(n);
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    let (h, g) = (&filters.lowpass, &filters.highpass);

    // Outputs with 2k >= TAPS - 1 read a contiguous run of x and never wrap.
    let first_interior = (TAPS - 1).div_ceil(2);
    for k in 0..first_interior.min(half) {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..TAPS {
            let idx = (2 * k + n - j) % n;
            a += h[j] * x[idx];
            d += g[j] * x[idx];
        }
        approx[k] = a;
        detail[k] = d;
    }
    for k in first_interior..half {
        let base = 2 * k;
        let (mut a, mut d) = (0.0, 0.0);
        if base < n {
            let win = &x[base + 1 - TAPS..=base];
            for j in 0..TAPS {
                let v = win[TAPS - 1 - j];
                a += h[j] * v;
                d += g[j] * v;
            }
        } else {
            // odd N: the last output straddles the end of the record
            for j in 0..TAPS {
                let idx = (base - j) % n;
                a += h[j] * x[idx];
                d += g[j] * x[idx];
            }
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok(Decomposition { approx, detail })
}

/// Largest detail coefficient in magnitude.
pub fn max_abs_detail(d: &Decomposition) -> Result<f64> {
    if d.detail.is_empty() {
        return Err(Error::EmptyDecomposition);
    }
    Ok(d.detail.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// The four max-detail coefficients `(m, n, p, q)` of phases A, B, C and
/// ground G.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 4]);

impl FeatureVector {
    pub fn m(&self) -> f64 {
        self.0[0]
    }
    pub fn n(&self) -> f64 {
        self.0[1]
    }
    pub fn p(&self) -> f64 {
        self.0[2]
    }
    pub fn q(&self) -> f64 {
        self.0[3]
    }
    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Max-detail feature of a single record.
pub fn max_detail_feature(x: &[f64]) -> Result<f64> {
    let filters = db4_filters();
    max_abs_detail(&dwt_single_level(x, &filters)?)
}

/// Features of the four channels of `signals` over `window`.
pub fn extract_features(signals: &SignalSet, window: Range<usize>) -> Result<FeatureVector> {
    let len = signals.len();
    if window.start > window.end || window.end > len {
        return Err(Error::WindowOutOfBounds {
            start: window.start,
            end: window.end,
            len,
        });
    }
    let mut out = [0.0; 4];
    for (slot, ch) in out.iter_mut().zip(Channel::ALL) {
        *slot = max_detail_feature(&signals.channel(ch)[window.clone()])?;
    }
    Ok(FeatureVector(out))
}

/// Features from four equal-length channel slices (A, B, C, G).
pub fn features_from_slices(channels: [&[f64]; 4]) -> Result<FeatureVector> {
    let mut out = [0.0; 4];
    for (slot, x) in out.iter_mut().zip(channels) {
        *slot = max_detail_feature(x)?;
    }
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Extend `x` circularly by TAPS-1 samples on the left, run a textbook
    /// full linear convolution and keep the even-indexed outputs.
    fn oracle(x: &[f64], f: &[f64; TAPS]) -> Vec<f64> {
        let n = x.len();
        let pad = TAPS - 1;
        let ext: Vec<f64> = (0..n + pad).map(|i| x[(i + n - pad) % n]).collect();
        let full: Vec<f64> = (0..ext.len() + pad)
            .map(|m| {
                (0..TAPS)
                    .filter(|&j| m >= j && m - j < ext.len())
                    .map(|j| f[j] * ext[m - j])
                    .sum()
            })
            .collect();
        (0..coefficient_len(n)).map(|k| full[2 * k + pad]).collect()
    }

    fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn rejects_short_signals() {
        let f = db4_filters();
        assert!(matches!(
            dwt_single_level(&[1.0; 7], &f),
            Err(Error::SignalTooShort { len: 7, min: 8 })
        ));
        assert!(dwt_single_level(&[1.0; 8], &f).is_ok());
    }

    #[test]
    fn output_length_is_half_rounded_up() {
        let f = db4_filters();
        for len in [8, 9, 10, 63, 64, 501] {
            let d = dwt_single_level(&vec![0.5; len], &f).unwrap();
            assert_eq!(d.detail.len(), len.div_ceil(2));
            assert_eq!(d.approx.len(), len.div_ceil(2));
            assert_eq!(d.level(), 1);
        }
    }

    #[test]
    fn constant_has_no_detail() {
        let d = dwt_single_level(&[5.0; 64], &db4_filters()).unwrap();
        for v in &d.detail {
            assert!(v.abs() < 1e-12 * 5.0);
        }
    }

    #[test]
    fn ramp_interior_detail_vanishes() {
        let x: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let d = dwt_single_level(&x, &db4_filters()).unwrap();
        // k >= 4 reads x[2k-7..=2k] without wrapping
        for v in &d.detail[4..] {
            assert!(v.abs() < 1e-9 * 63.0, "{v}");
        }
    }

    #[test]
    fn cubic_interior_detail_vanishes() {
        let x: Vec<f64> = (0..128)
            .map(|i| {
                let t = i as f64 / 10.0;
                2.0 - 0.5 * t + 0.3 * t * t - 0.01 * t * t * t
            })
            .collect();
        let scale = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let d = dwt_single_level(&x, &db4_filters()).unwrap();
        for v in &d.detail[4..] {
            assert!(v.abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn matches_oracle_on_seeded_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = random_signal(&mut rng, 32);
        let f = db4_filters();
        let d = dwt_single_level(&x, &f).unwrap();
        for (a, b) in d.detail.iter().zip(oracle(&x, &f.highpass)) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in d.approx.iter().zip(oracle(&x, &f.lowpass)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_equivalence_many_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = db4_filters();
        for _ in 0..200 {
            let len = rng.random_range(8..=600);
            let x = random_signal(&mut rng, len);
            let d = dwt_single_level(&x, &f).unwrap();
            let od = oracle(&x, &f.highpass);
            let oa = oracle(&x, &f.lowpass);
            for k in 0..d.detail.len() {
                assert!((d.detail[k] - od[k]).abs() < 1e-12);
                assert!((d.approx[k] - oa[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn max_abs_detail_uses_magnitude() {
        let d = Decomposition {
            approx: vec![0.0; 3],
            detail: vec![0.0, -3.5, 2.0],
        };
        assert_eq!(max_abs_detail(&d).unwrap(), 3.5);
        let z = Decomposition {
            approx: vec![0.0; 3],
            detail: vec![0.0; 3],
        };
        assert_eq!(max_abs_detail(&z).unwrap(), 0.0);
        let e = Decomposition {
            approx: vec![],
            detail: vec![],
        };
        assert!(matches!(max_abs_detail(&e), Err(Error::EmptyDecomposition)));
    }

    #[test]
    fn features_of_constant_channels_are_zero() {
        let s = SignalSet::from_phases(1000.0, vec![3.0; 64], vec![3.0; 64], vec![3.0; 64]);
        // ground = 9 everywhere, still constant
        let f = extract_features(&s, 0..64).unwrap();
        for v in f.0 {
            assert!(v.abs() < 1e-12 * 9.0);
        }
    }

    #[test]
    fn step_on_a_only_leaves_b_and_c_equal() {
        let a: Vec<f64> = (0..64).map(|i| if i < 29 { 0.0 } else { 4.0 }).collect();
        let b: Vec<f64> = (0..64).map(|i| (i as f64 * 0.1).sin()).collect();
        let s = SignalSet::from_phases(1000.0, a, b.clone(), b);
        let f = extract_features(&s, 0..64).unwrap();
        assert!(f.m() > 0.0);
        assert!((f.n() - f.p()).abs() < 1e-12);
    }

    #[test]
    fn window_checks() {
        let s = SignalSet::from_phases(1000.0, vec![0.0; 20], vec![0.0; 20], vec![0.0; 20]);
        assert!(matches!(
            extract_features(&s, 10..30),
            Err(Error::WindowOutOfBounds { .. })
        ));
        assert!(matches!(
            extract_features(&s, 0..5),
            Err(Error::SignalTooShort { .. })
        ));
    }

    proptest! {
        #[test]
        fn energy_is_preserved(x in proptest::collection::vec(-100.0f64..100.0, 4..256usize)) {
            let mut x = x;
            if x.len() % 2 == 1 { x.pop(); }
            prop_assume!(x.len() >= TAPS);
            let d = dwt_single_level(&x, &db4_filters()).unwrap();
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let ec: f64 = d.approx.iter().chain(&d.detail).map(|v| v * v).sum();
            prop_assert!((ex - ec).abs() <= 1e-9 * ex.max(1e-300));
        }

        #[test]
        fn transform_is_linear(
            x in proptest::collection::vec(-10.0f64..10.0, 8..128usize),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let y: Vec<f64> = x.iter().rev().map(|v| v * 0.7 - 1.0).collect();
            let f = db4_filters();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let dc = dwt_single_level(&combo, &f).unwrap();
            let dx = dwt_single_level(&x, &f).unwrap();
            let dy = dwt_single_level(&y, &f).unwrap();
            for k in 0..dc.detail.len() {
                prop_assert!((dc.detail[k] - (a * dx.detail[k] + b * dy.detail[k])).abs() < 1e-12);
                prop_assert!((dc.approx[k] - (a * dx.approx[k] + b * dy.approx[k])).abs() < 1e-12);
            }
        }
    }
}
