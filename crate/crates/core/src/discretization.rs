//! Lattice windows `ε(c + ℤ) ∩ [a, b]` and the expansion parameters of an
//! ε-sequence.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance to an integer below which `x/ε − c` is treated as that integer.
const SNAP: f64 = 1e-12;

/// Number of windows (smallest ε) used by [`fit_expansion_params`].
pub const FIT_WINDOWS: usize = 6;
const MIN_WINDOWS: usize = 4;

/// Higher powers of ε fitted alongside `(p₁, p₂)` to absorb the remainder.
const EXTRA_TERMS: usize = 2;

/// `rem/ε²` must shrink by this factor per halving of ε.
const DECAY_PER_HALVING: f64 = 1.5;

/// Scaled remainders below this are treated as exactly zero.
const ZERO_REMAINDER: f64 = 1e-9;

/// The sites `k₁..=k₂` of `ε(c + ℤ)` inside `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: f64,
    pub k1: i64,
    pub k2: i64,
    pub n: i64,
}

impl LatticeWindow {
    /// Reference position `ε(c + k)` of site `k`.
    pub fn position(&self, k: i64) -> f64 {
        self.eps * (self.c + k as f64)
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.k1..=self.k2
    }

    /// `ε(c + k₁) − a`
    pub fn left_offset(&self) -> f64 {
        residual(self.eps, self.c + self.k1 as f64, self.a)
    }

    /// `b − ε(c + k₂)`
    pub fn right_offset(&self) -> f64 {
        -residual(self.eps, self.c + self.k2 as f64, self.b)
    }

    /// `1/(Nε) − 1/(b − a)`
    pub fn density_offset(&self) -> f64 {
        1.0 / (self.n as f64 * self.eps) - 1.0 / (self.b - self.a)
    }
}

/// `ε·s − x` with a single rounding.
fn residual(eps: f64, s: f64, x: f64) -> f64 {
    eps.mul_add(s, -x)
}

fn snapped(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= SNAP * x.abs().max(1.0)).then_some(r)
}

pub fn lattice_window(a: f64, b: f64, c: f64, eps: f64) -> Result<LatticeWindow> {
    if !(a < b) {
        return Err(Error::domain(format!("window needs a < b (got [{a}, {b}])")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("lattice spacing must be positive, got {eps}")));
    }
    let lo = a / eps - c;
    let hi = b / eps - c;
    let k1 = snapped(lo).unwrap_or_else(|| lo.ceil());
    let k2 = snapped(hi).unwrap_or_else(|| hi.floor());
    if k1.abs() > 9e15 || k2.abs() > 9e15 {
        return Err(Error::domain("lattice window too large for integer indices"));
    }
    // k2 = k1 − 1 (an empty window) is possible when b − a < ε
    let (k1, k2) = (k1 as i64, k2 as i64);
    Ok(LatticeWindow { a, b, c, eps, k1, k2, n: k2 - k1 + 1 })
}

/// The coefficients `(a₁, a₂, b₁, b₂, c₁, c₂)` of an ε-sequence:
///
/// `ε(c+k₁) − a = a₁ε + a₂ε² + o(ε²)`, `b − ε(c+k₂) = b₁ε + b₂ε² + o(ε²)` and
/// `1/(Nε) = 1/(b−a) + c₁ε + c₂ε² + o(ε²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ExpansionParams {
    /// Parameters on `[−1, 1]` with `c = 0`, determined by `(a₁, a₂)`.
    pub fn symmetric(a1: f64, a2: f64) -> Result<Self> {
        check_boundary_pair(a1, a2)?;
        Ok(Self {
            a1,
            a2,
            b1: a1,
            b2: a2,
            c1: a1 / 2.0 - 0.25,
            c2: a1 * a1 / 2.0 - a1 / 2.0 + a2 / 2.0 + 0.125,
        })
    }
}

fn check_boundary_pair(a1: f64, a2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a1) {
        return Err(Error::domain(format!("a1 must lie in [0, 1], got {a1}")));
    }
    if a1 == 1.0 && a2 > 0.0 {
        return Err(Error::domain(format!("a1 = 1 requires a2 <= 0, got {a2}")));
    }
    if a1 == 0.0 && a2 < 0.0 {
        return Err(Error::domain(format!("a1 = 0 requires a2 >= 0, got {a2}")));
    }
    Ok(())
}

/// `εₙ` for `n = 1..=n_max`, skipping nonpositive denominators.
pub fn make_epsilon_sequence(a1: f64, a2: f64, n_max: usize) -> Result<Vec<f64>> {
    check_boundary_pair(a1, a2)?;
    Ok((1..=n_max).filter_map(|n| epsilon_term(a1, a2, n)).collect())
}

/// The single term `εₙ` of [`make_epsilon_sequence`].
pub fn epsilon_term(a1: f64, a2: f64, n: usize) -> Option<f64> {
    let x = n as f64;
    let eps = if a1 == 1.0 && a2 == 0.0 {
        x * x / (x * x * x + x * x - 1.0)
    } else {
        let den = x * x + a1 * x + a2;
        if den <= 0.0 {
            return None;
        }
        x / den
    };
    (eps > 0.0 && eps.is_finite()).then_some(eps)
}

/// Fitted parameters with the scaled remainders `|rem(ε)|/ε²` of each
/// expansion at the smallest ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedParams {
    pub params: ExpansionParams,
    pub scaled_remainder: [f64; 3],
}

/// Least-squares fit of `r(ε) ≈ p₁ε + p₂ε² + p₃ε³ + p₄ε⁴` on rows weighted by `1/ε²`;
/// returns `(p₁, p₂)` and the scaled remainders `|r − p₁ε − p₂ε²|/ε²`.
fn fit_two_terms(eps: &[f64], r: &[f64]) -> (f64, f64, Vec<f64>) {
    let rows = eps.len();
    let mut a = DMatrix::from_fn(rows, EXTRA_TERMS + 2, |i, j| eps[i].powi(j as i32 + 1) / (eps[i] * eps[i]));
    let y = DVector::from_fn(rows, |i, _| r[i] / (eps[i] * eps[i]));
    // equilibrate columns; their magnitudes span 1/ε to ε
    let scale: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).unscale_mut(*s);
    }
    let coef = a
        .svd(true, true)
        .solve(&y, 1e-300)
        .unwrap_or_else(|_| DVector::zeros(EXTRA_TERMS + 2));
    let (p1, p2) = (coef[0] / scale[0], coef[1] / scale[1]);
    let rem = eps
        .iter()
        .zip(r)
        .map(|(&e, &v)| (v - p1 * e - p2 * e * e).abs() / (e * e))
        .collect();
    (p1, p2, rem)
}

/// Did the scaled remainder decay between the two smallest ε?
fn remainder_decays(eps: &[f64], rem: &[f64]) -> bool {
    let n = eps.len();
    let (e_prev, e_last) = (eps[n - 2], eps[n - 1]);
    let (r_prev, r_last) = (rem[n - 2], rem[n - 1]);
    if r_last <= ZERO_REMAINDER {
        return true;
    }
    let halvings = (e_prev / e_last).log2();
    halvings > 0.0 && r_prev / r_last >= DECAY_PER_HALVING.powf(halvings)
}

/// Fits the expansion parameters from a sequence of windows on a common
/// `(a, b, c)`, using the [`FIT_WINDOWS`] windows of smallest ε.
///
/// Cubic and quartic terms are fitted alongside `(p₁, p₂)` to absorb the
/// remainder; the sequence is rejected as having no limit when the scaled
/// remainder `|rem|/ε²` fails to shrink by 1.5× per halving of ε between the
/// two smallest spacings.
pub fn fit_expansion_params(windows: &[LatticeWindow]) -> Result<FittedParams> {
    if windows.len() < MIN_WINDOWS {
        return Err(Error::InsufficientData { needed: MIN_WINDOWS, got: windows.len() });
    }
    let w0 = windows[0];
    if windows.iter().any(|w| w.a != w0.a || w.b != w0.b || w.c != w0.c) {
        return Err(Error::domain("windows must share (a, b, c)"));
    }
    let mut sorted: Vec<LatticeWindow> = windows.to_vec();
    sorted.sort_by(|x, y| y.eps.total_cmp(&x.eps));
    sorted.dedup_by(|x, y| x.eps == y.eps);
    if sorted.len() < MIN_WINDOWS {
        return Err(Error::InsufficientData { needed: MIN_WINDOWS, got: sorted.len() });
    }
    let tail = &sorted[sorted.len().saturating_sub(FIT_WINDOWS)..];
    let eps: Vec<f64> = tail.iter().map(|w| w.eps).collect();

    let series: [Vec<f64>; 3] = [
        tail.iter().map(|w| w.left_offset()).collect(),
        tail.iter().map(|w| w.right_offset()).collect(),
        tail.iter().map(|w| w.density_offset()).collect(),
    ];
    let mut coef = [(0.0, 0.0); 3];
    let mut scaled = [0.0; 3];
    for (k, r) in series.iter().enumerate() {
        let (p1, p2, rem) = fit_two_terms(&eps, r);
        if !remainder_decays(&eps, &rem) {
            return Err(Error::NoLimit(format!(
                "{} expansion: scaled remainder {:e} -> {:e} does not decay",
                ["left offset", "right offset", "density"][k],
                rem[rem.len() - 2],
                rem[rem.len() - 1]
            )));
        }
        coef[k] = (p1, p2);
        scaled[k] = rem[rem.len() - 1];
    }
    Ok(FittedParams {
        params: ExpansionParams {
            a1: coef[0].0,
            a2: coef[0].1,
            b1: coef[1].0,
            b2: coef[1].1,
            c1: coef[2].0,
            c2: coef[2].1,
        },
        scaled_remainder: scaled,
    })
}

/// Constraints on the parameters of any ε-sequence on `[a, b]`; returns a
/// description of every violated one.
pub fn validate_params(params: &ExpansionParams, a: f64, b: f64) -> Vec<String> {
    let mut out = Vec::new();
    if !(a < b) {
        out.push(format!("window [{a}, {b}] is empty"));
        return out;
    }
    for (name, p1, p2) in [("a", params.a1, params.a2), ("b", params.b1, params.b2)] {
        if !(0.0..=1.0).contains(&p1) {
            out.push(format!("{name}1 = {p1} outside [0, 1]"));
        }
        if p1 == 1.0 && p2 > 0.0 {
            out.push(format!("{name}1 = 1 but {name}2 = {p2} > 0"));
        }
        if p1 == 0.0 && p2 < 0.0 {
            out.push(format!("{name}1 = 0 but {name}2 = {p2} < 0"));
        }
    }
    let l = b - a;
    let c1_max = 1.0 / (l * l);
    if params.c1.abs() > c1_max {
        out.push(format!("|c1| = {} exceeds 1/(b-a)^2 = {c1_max}", params.c1.abs()));
    }
    if params.c1 == c1_max && params.c2 > 1.0 / (l * l * l) {
        out.push(format!("c1 = 1/(b-a)^2 but c2 = {} > 1/(b-a)^3", params.c2));
    }
    if params.c1 == -c1_max && params.c2 < 1.0 / (l * l * l) {
        out.push(format!("c1 = -1/(b-a)^2 but c2 = {} < 1/(b-a)^3", params.c2));
    }
    out
}

/// Parameters of the half windows `[−1, 0]` and `[0, 1]` (both with `c = 0`)
/// induced by symmetric parameters on `[−1, 1]`.
pub fn split_params(params: &ExpansionParams) -> (ExpansionParams, ExpansionParams) {
    let c1 = 2.0 * params.c1 - 0.5;
    let c2 = -2.0 * params.c1 + 2.0 * params.c2 + 0.25;
    let left = ExpansionParams { a1: params.a1, a2: params.a2, b1: 0.0, b2: 0.0, c1, c2 };
    let right = ExpansionParams { a1: 0.0, a2: 0.0, b1: params.b1, b2: params.b2, c1, c2 };
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn windows(a: f64, b: f64, eps: &[f64]) -> Vec<LatticeWindow> {
        eps.iter().map(|&e| lattice_window(a, b, 0.0, e).unwrap()).collect()
    }

    fn doubling(a1: f64, a2: f64) -> Vec<f64> {
        (0..8).map(|k| epsilon_term(a1, a2, 50 << k).unwrap()).collect()
    }

    #[test]
    fn window_examples() {
        let w = lattice_window(-1.0, 1.0, 0.0, 0.3).unwrap();
        assert_eq!((w.k1, w.k2, w.n), (-3, 3, 7));
        let w = lattice_window(0.0, 1.0, 0.0, 0.25).unwrap();
        assert_eq!((w.k1, w.k2, w.n), (0, 4, 5));
        // 1/0.1 is 10.000000000000002 in floating point
        let w = lattice_window(-1.0, 1.0, 0.0, 0.1).unwrap();
        assert_eq!((w.k1, w.k2, w.n), (-10, 10, 21));
        assert!(lattice_window(1.0, 1.0, 0.0, 0.1).is_err());
        assert!(lattice_window(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn symmetric_window_is_symmetric() {
        for k in 1..500 {
            let eps = 1.0 / (k as f64 * 0.731 + 0.05);
            let w = lattice_window(-1.0, 1.0, 0.0, eps).unwrap();
            assert_eq!(w.k2, -w.k1);
            assert_eq!(w.n, 2 * w.k2 + 1);
        }
    }

    #[test]
    fn epsilon_sequence_examples() {
        let s = make_epsilon_sequence(0.5, 0.0, 10).unwrap();
        assert_eq!(s.len(), 10);
        assert_relative_eq!(s[9], 10.0 / 105.0, max_relative = 1e-15);
        let s = make_epsilon_sequence(1.0, 0.0, 10).unwrap();
        assert_relative_eq!(s[9], 100.0 / 1099.0, max_relative = 1e-15);
        assert!(make_epsilon_sequence(1.5, 0.0, 3).is_err());
        assert!(make_epsilon_sequence(0.0, -1.0, 3).is_err());
        assert!(make_epsilon_sequence(1.0, 1.0, 3).is_err());
        // n² − n/2 − 3/2 ≤ 0 at n = 1
        assert_eq!(make_epsilon_sequence(0.5, -2.0, 3).unwrap().len(), 2);
    }

    #[test]
    fn fit_recovers_half_offsets() {
        let fit = fit_expansion_params(&windows(-1.0, 1.0, &doubling(0.5, 0.0))).unwrap();
        let p = fit.params;
        assert!((p.a1 - 0.5).abs() < 1e-6 && p.a2.abs() < 1e-6);
        assert!((p.b1 - 0.5).abs() < 1e-6 && p.b2.abs() < 1e-6);
        assert!(p.c1.abs() < 1e-6 && p.c2.abs() < 1e-6);
        let sym = ExpansionParams::symmetric(0.5, 0.0).unwrap();
        assert_eq!((sym.c1, sym.c2), (0.0, 0.0));
    }

    #[test]
    fn fit_recovers_generic_pairs() {
        for (a1, a2) in [(0.3, 0.7), (0.0, 0.4), (1.0, -0.5), (1.0, 0.0), (0.8, -2.0)] {
            let fit = fit_expansion_params(&windows(-1.0, 1.0, &doubling(a1, a2))).unwrap();
            let sym = ExpansionParams::symmetric(a1, a2).unwrap();
            let p = fit.params;
            for (got, want) in [(p.a1, a1), (p.a2, a2), (p.b1, a1), (p.b2, a2), (p.c1, sym.c1), (p.c2, sym.c2)] {
                assert!((got - want).abs() < 1e-6, "({a1}, {a2}): {got} vs {want}");
            }
            assert!(validate_params(&p, -1.0, 1.0).is_empty() || a1 == 0.0 || a1 == 1.0);
        }
    }

    #[test]
    fn exact_division_sequence() {
        let eps: Vec<f64> = (0..8).map(|k| 2.0 / (40 << k) as f64).collect();
        let fit = fit_expansion_params(&windows(-1.0, 1.0, &eps)).unwrap();
        assert!(fit.params.a1.abs() < 1e-9 && fit.params.a2.abs() < 1e-6);
        assert!((fit.params.c1 + 0.25).abs() < 1e-6);
    }

    #[test]
    fn fit_errors() {
        let w = windows(-1.0, 1.0, &doubling(0.5, 0.0));
        assert!(matches!(fit_expansion_params(&w[..3]), Err(Error::InsufficientData { .. })));
        // offsets alternating between 0.2 and 0.7: no limit
        let eps: Vec<f64> = (0..8)
            .map(|k| {
                let n = (50 << k) as f64;
                1.0 / (n + if k % 2 == 0 { 0.2 } else { 0.7 })
            })
            .collect();
        assert!(matches!(fit_expansion_params(&windows(-1.0, 1.0, &eps)), Err(Error::NoLimit(_))));
    }

    #[test]
    fn validate_examples() {
        let ok = ExpansionParams { a1: 0.5, a2: 0.0, b1: 0.5, b2: 0.0, c1: 0.0, c2: 0.0 };
        assert!(validate_params(&ok, -1.0, 1.0).is_empty());
        let bad = ExpansionParams { a1: 1.5, ..ok };
        assert_eq!(validate_params(&bad, -1.0, 1.0).len(), 1);
        let bad = ExpansionParams { a1: 0.0, a2: -1.0, ..ok };
        assert_eq!(validate_params(&bad, -1.0, 1.0).len(), 1);
        let bad = ExpansionParams { c1: 0.3, ..ok };
        assert_eq!(validate_params(&bad, -1.0, 1.0).len(), 1);
    }

    #[test]
    fn split_examples() {
        let (l, r) = split_params(&ExpansionParams::symmetric(0.5, 0.0).unwrap());
        assert_eq!((l.c1, l.c2), (-0.5, 0.25));
        assert_eq!((l.b1, l.b2, r.a1, r.a2), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((r.c1, r.c2), (l.c1, l.c2));
        let (l, _) = split_params(&ExpansionParams::symmetric(1.0, 0.0).unwrap());
        assert_eq!(l.c1, 0.0);
    }

    #[test]
    fn split_matches_half_window_fits() {
        for (a1, a2) in [(0.5, 0.0), (0.3, 0.7), (1.0, -0.5)] {
            let eps = doubling(a1, a2);
            let (l, r) = split_params(&ExpansionParams::symmetric(a1, a2).unwrap());
            let fl = fit_expansion_params(&windows(-1.0, 0.0, &eps)).unwrap().params;
            let fr = fit_expansion_params(&windows(0.0, 1.0, &eps)).unwrap().params;
            for (x, y) in [(fl, l), (fr, r)] {
                for (got, want) in [(x.a1, y.a1), (x.a2, y.a2), (x.b1, y.b1), (x.b2, y.b2), (x.c1, y.c1), (x.c2, y.c2)] {
                    assert!((got - want).abs() < 1e-6, "({a1}, {a2}): {got} vs {want}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn window_count_matches_enumeration(
            a in -3.0..3.0f64,
            len in 0.05..4.0f64,
            c in -1.0..1.0f64,
            eps in 0.01..0.5f64,
        ) {
            let b = a + len;
            let w = lattice_window(a, b, c, eps).unwrap();
            let lo = (a / eps - c).floor() as i64 - 2;
            let hi = (b / eps - c).ceil() as i64 + 2;
            let brute = (lo..=hi)
                .filter(|&k| {
                    let x = eps * (c + k as f64);
                    x >= a - 1e-12 * a.abs().max(1.0) && x <= b + 1e-12 * b.abs().max(1.0)
                })
                .count() as i64;
            proptest::prop_assert_eq!(w.n, brute);
        }

        #[test]
        fn fitted_sequences_validate(a1 in 0.01..0.99f64, a2 in -1.0..1.0f64) {
            let fit = fit_expansion_params(&windows(-1.0, 1.0, &doubling(a1, a2))).unwrap();
            proptest::prop_assert!(validate_params(&fit.params, -1.0, 1.0).is_empty());
        }
    }
}
