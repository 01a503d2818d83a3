//! Continuum deformations and their lattice samples.
//!
//! A [`PiecewiseDeformation`] is a continuous, strictly increasing map on
//! `[a, b]`, polynomial on each piece. Lattice samples are returned as
//! [`DiscreteConfiguration`]s, whose scaled gaps `(u(x_{k+1}) − u(x_k))/ε` are
//! computed by polynomial divided differences so that they keep full relative
//! accuracy however small ε is.

use serde::{Deserialize, Serialize};

use crate::discretization::{lattice_window, LatticeWindow};
use crate::energy::DiscreteConfiguration;
use crate::error::{Error, Result};

/// Chebyshev sample points per piece for the monotonicity check.
const MONOTONE_SAMPLES: usize = 64;
const CONTINUITY_TOL: f64 = 1e-12;

/// Polynomial in the global coordinate, constant term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("polynomial needs finite coefficients"));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `p⁽ᵒʳᵈᵉʳ⁾(x)`
    pub fn derivative(&self, order: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate().skip(order).rev() {
            let falling: f64 = ((i - order + 1)..=i).map(|k| k as f64).product();
            acc = acc * x + c * falling;
        }
        acc
    }

    /// `(p(y) − p(x))/(y − x)`, without cancellation, via synthetic division by `t − x`.
    pub fn divided_difference(&self, x: f64, y: f64) -> f64 {
        let n = self.coeffs.len();
        if n < 2 {
            return 0.0;
        }
        // quotient coefficients, highest first, evaluated at y by Horner
        let mut b = self.coeffs[n - 1];
        let mut q = b;
        for k in (1..n - 1).rev() {
            b = self.coeffs[k] + x * b;
            q = q * y + b;
        }
        q
    }
}

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Auto,
}

/// Continuous, strictly increasing, piecewise polynomial map on
/// `[t₀, t_{n+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDeformation {
    breakpoints: Vec<f64>,
    pieces: Vec<Polynomial>,
}

fn chebyshev_nodes(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..MONOTONE_SAMPLES)
        .map(move |k| {
            let theta = std::f64::consts::PI * (2 * k + 1) as f64 / (2 * MONOTONE_SAMPLES) as f64;
            mid + half * theta.cos()
        })
        .chain([lo, hi])
}

impl PiecewiseDeformation {
    /// Checks ordering, continuity at interior breakpoints (to 1e−12) and
    /// `u' > 0` on Chebyshev samples of each piece. The last check samples,
    /// it does not prove.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Polynomial>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() != breakpoints.len() - 1 {
            return Err(Error::domain(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("breakpoints must be finite and strictly increasing"));
        }
        for (i, t) in breakpoints.iter().enumerate().skip(1).take(pieces.len() - 1) {
            let l = pieces[i - 1].eval(*t);
            let r = pieces[i].eval(*t);
            if (l - r).abs() > CONTINUITY_TOL * l.abs().max(r.abs()).max(1.0) {
                return Err(Error::domain(format!("jump of {} at breakpoint {t}", r - l)));
            }
        }
        for (i, p) in pieces.iter().enumerate() {
            let (lo, hi) = (breakpoints[i], breakpoints[i + 1]);
            if let Some(x) = chebyshev_nodes(lo, hi).find(|&x| !(p.derivative(1, x) > 0.0)) {
                return Err(Error::domain(format!("u' = {} <= 0 at x = {x}", p.derivative(1, x))));
            }
        }
        Ok(Self { breakpoints, pieces })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    pub fn interior_breakpoints(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    /// Index of the piece containing `x`, preferring the right piece at a breakpoint.
    fn piece_index(&self, x: f64) -> usize {
        let idx = self.breakpoints.partition_point(|t| *t <= x);
        idx.clamp(1, self.pieces.len()) - 1
    }

    /// `u⁽ᵒʳᵈᵉʳ⁾(x)`; at a breakpoint, derivatives need an explicit side.
    pub fn eval(&self, order: usize, x: f64, side: Side) -> Result<f64> {
        if order > 4 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(x >= self.start() && x <= self.end()) {
            return Err(Error::domain(format!(
                "x = {x} outside [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        let at_interior = self.interior_breakpoints().contains(&x);
        let idx = match side {
            Side::Auto if at_interior && order >= 1 => {
                return Err(Error::Ambiguous(format!(
                    "derivative of order {order} at breakpoint {x} needs a side"
                )))
            }
            Side::Left if x == self.start() => {
                return Err(Error::domain(format!("no piece to the left of {x}")))
            }
            Side::Right if x == self.end() => {
                return Err(Error::domain(format!("no piece to the right of {x}")))
            }
            Side::Left if self.breakpoints.contains(&x) => self.piece_index(x) - 1,
            Side::Auto if x == self.end() => self.pieces.len() - 1,
            _ => self.piece_index(x),
        };
        Ok(self.pieces[idx].derivative(order, x))
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(self.start(), self.end());
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Splits `[x, y]` at the breakpoints in between; returns each part as
    /// `(lo, hi, slope of u over [lo, hi])`.
    fn slope_pieces(&self, x: f64, y: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut lo = x;
        let mut idx = self.piece_index(x);
        loop {
            let hi = if idx + 1 < self.pieces.len() { y.min(self.breakpoints[idx + 1]) } else { y };
            if hi > lo {
                out.push((lo, hi, self.pieces[idx].divided_difference(lo, hi)));
            }
            if hi >= y || idx + 1 >= self.pieces.len() {
                break;
            }
            lo = hi;
            idx += 1;
        }
        out
    }

    /// `(u(ε(c+k+1)) − u(ε(c+k)))/ε`.
    fn scaled_gap(&self, eps: f64, s: f64) -> f64 {
        let x = eps * s;
        let y = eps * (s + 1.0);
        let parts = self.slope_pieces(x, y);
        if parts.len() == 1 {
            // (y − x)/ε is 1 up to the rounding of x and y
            return parts[0].2;
        }
        parts
            .iter()
            .map(|&(lo, hi, slope)| {
                let w_lo = if lo == x { s } else { lo / eps };
                let w_hi = if hi == y { s + 1.0 } else { hi / eps };
                slope * (w_hi - w_lo)
            })
            .sum()
    }
}

/// Evaluates `u⁽ᵒʳᵈᵉʳ⁾(x)`, see [`PiecewiseDeformation::eval`].
pub fn eval_deformation(u: &PiecewiseDeformation, order: usize, x: f64, side: Side) -> Result<f64> {
    u.eval(order, x, side)
}

fn check_inside(u: &PiecewiseDeformation, w: &LatticeWindow) -> Result<()> {
    if w.a < u.start() || w.b > u.end() {
        return Err(Error::domain(format!(
            "window [{}, {}] not inside [{}, {}]",
            w.a,
            w.b,
            u.start(),
            u.end()
        )));
    }
    Ok(())
}

/// `(k, u(ε(c+k)))` for `k = k₁..=k₂`.
pub fn sample_to_lattice(u: &PiecewiseDeformation, w: &LatticeWindow) -> Result<Vec<(i64, f64)>> {
    check_inside(u, w)?;
    Ok(w.sites().map(|k| (k, u.value(w.position(k)))).collect())
}

/// The restriction of `u` to the window, with accurate scaled gaps.
pub fn sample_configuration(u: &PiecewiseDeformation, w: &LatticeWindow) -> Result<DiscreteConfiguration> {
    check_inside(u, w)?;
    let values: Vec<f64> = w.sites().map(|k| u.value(w.position(k))).collect();
    let gaps: Vec<f64> = (w.k1..w.k2).map(|k| u.scaled_gap(w.eps, w.c + k as f64)).collect();
    DiscreteConfiguration::with_gaps(w.k1, values, gaps, w.eps)
}

/// Interior values `y(1/m) < … < y((m−1)/m)` of a twin profile; `y(0) = 0`
/// and `y(1) = 1` are implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteProfile {
    m: usize,
    values: Vec<f64>,
}

impl DiscreteProfile {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(format!("profile needs m >= 2, got {m}")));
        }
        if values.len() != m - 1 {
            return Err(Error::domain(format!("profile for m = {m} needs {} values", m - 1)));
        }
        let mut prev = 0.0;
        for &v in values.iter().chain(std::iter::once(&1.0)) {
            if !(v > prev) {
                return Err(Error::domain("profile values must increase strictly inside (0, 1)"));
            }
            prev = v;
        }
        Ok(Self { m, values })
    }

    /// `q_m = (1/m, …, (m−1)/m)`.
    pub fn equispaced(m: usize) -> Result<Self> {
        Self::new(m, (1..m).map(|j| j as f64 / m as f64).collect())
    }

    /// Normalises an arbitrary increasing profile `(y(0), …, y(1))` of `m + 1`
    /// values; affine images of the same profile give the same result.
    pub fn normalized(m: usize, raw: &[f64]) -> Result<Self> {
        if raw.len() != m + 1 {
            return Err(Error::domain(format!("need m + 1 = {} raw values", m + 1)));
        }
        let (y0, y1) = (raw[0], raw[m]);
        if !(y1 > y0) {
            return Err(Error::domain("raw profile must increase"));
        }
        Self::new(m, raw[1..m].iter().map(|y| (y - y0) / (y1 - y0)).collect())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `y(j/m)` for `0 ≤ j ≤ m`.
    pub fn at(&self, j: usize) -> f64 {
        match j {
            0 => 0.0,
            j if j == self.m => 1.0,
            j => self.values[j - 1],
        }
    }
}

/// A deformation on `[−1, 1]` (lattice `εℤ`) with a discrete twin profile on
/// the `m` lattice cells to the right of 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrotwinConfig {
    pub u: PiecewiseDeformation,
    pub profile: DiscreteProfile,
    pub eps: f64,
}

impl MicrotwinConfig {
    pub fn new(u: PiecewiseDeformation, profile: DiscreteProfile, eps: f64) -> Result<Self> {
        if u.start() != -1.0 || u.end() != 1.0 {
            return Err(Error::domain("microtwin deformation must live on [-1, 1]"));
        }
        if u.interior_breakpoints().iter().any(|t| *t != 0.0) {
            return Err(Error::domain("microtwin deformation may only break at 0"));
        }
        if !(eps > 0.0) {
            return Err(Error::domain(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { u, profile, eps })
    }

    pub fn window(&self) -> Result<LatticeWindow> {
        lattice_window(-1.0, 1.0, 0.0, self.eps)
    }

    fn check_inside(&self) -> Result<usize> {
        let m = self.profile.m();
        let reach = m as f64 * self.eps;
        if reach >= 1.0 {
            return Err(Error::InterfacesExitDomain(reach));
        }
        Ok(m)
    }
}

/// `u_ε` on `[−1, 1] ∩ εℤ`: `u` outside `(0, mε)` and the rescaled profile inside.
pub fn microtwin_lattice(cfg: &MicrotwinConfig) -> Result<Vec<(i64, f64)>> {
    let conf = microtwin_configuration(cfg)?;
    Ok(conf.sites().zip(conf.values().iter().copied()).collect())
}

/// As [`microtwin_lattice`], with accurate scaled gaps.
pub fn microtwin_configuration(cfg: &MicrotwinConfig) -> Result<DiscreteConfiguration> {
    let m = cfg.check_inside()?;
    let w = cfg.window()?;
    let base = sample_configuration(&cfg.u, &w)?;
    let eps = cfg.eps;
    let u0 = cfg.u.value(0.0);
    let um = cfg.u.value(m as f64 * eps);
    // (u(mε) − u(0))/ε; the slab [0, mε] lies in the piece to the right of 0
    let right = &cfg.u.pieces()[cfg.u.piece_index(0.0)];
    let rise = m as f64 * right.divided_difference(0.0, m as f64 * eps);
    let mut values = base.values().to_vec();
    let mut gaps = base.gaps().to_vec();
    let i0 = (0 - w.k1) as usize;
    let y = &cfg.profile;
    for j in 1..m {
        values[i0 + j] = (um - u0) * y.at(j) + u0;
    }
    for j in 0..m {
        gaps[i0 + j] = rise * (y.at(j + 1) - y.at(j));
    }
    DiscreteConfiguration::with_gaps(w.k1, values, gaps, eps)
}

/// Identity on `[a, b]`.
pub fn identity(a: f64, b: f64) -> Result<PiecewiseDeformation> {
    PiecewiseDeformation::new(vec![a, b], vec![Polynomial::new(vec![0.0, 1.0])?])
}

/// `x ↦ slope·x + beta·x²` on `[a, b]`.
pub fn quadratic(a: f64, b: f64, slope: f64, beta: f64) -> Result<PiecewiseDeformation> {
    PiecewiseDeformation::new(vec![a, b], vec![Polynomial::new(vec![0.0, slope, beta])?])
}

/// Two pieces on `[−1, 1]` meeting at 0 with one-sided slopes `p`, `q` and
/// second derivatives `curv_left`, `curv_right`; `u(0) = 0`.
pub fn two_slope(p: f64, curv_left: f64, q: f64, curv_right: f64) -> Result<PiecewiseDeformation> {
    PiecewiseDeformation::new(
        vec![-1.0, 0.0, 1.0],
        vec![
            Polynomial::new(vec![0.0, p, 0.5 * curv_left])?,
            Polynomial::new(vec![0.0, q, 0.5 * curv_right])?,
        ],
    )
}

/// Continuous piecewise-linear map with the given slopes between the breakpoints.
pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: &[f64]) -> Result<PiecewiseDeformation> {
    if slopes.len() + 1 != breakpoints.len() {
        return Err(Error::domain("need one slope per piece"));
    }
    let mut pieces = Vec::with_capacity(slopes.len());
    let mut value = 0.0;
    for (i, &s) in slopes.iter().enumerate() {
        let t = breakpoints[i];
        pieces.push(Polynomial::new(vec![value - s * t, s])?);
        value += s * (breakpoints[i + 1] - t);
    }
    PiecewiseDeformation::new(breakpoints, pieces)
}

/// Deformation as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationSpec {
    pub breakpoints: Vec<f64>,
    /// Per-piece coefficients in the global coordinate, constant term first.
    pub pieces: Vec<Vec<f64>>,
}

impl DeformationSpec {
    pub fn build(&self) -> Result<PiecewiseDeformation> {
        let pieces = self
            .pieces
            .iter()
            .map(|c| Polynomial::new(c.clone()))
            .collect::<Result<Vec<_>>>()?;
        PiecewiseDeformation::new(self.breakpoints.clone(), pieces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_basics() {
        let p = Polynomial::new(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 2.0 + 24.0);
        assert_eq!(p.derivative(1, 2.0), -2.0 + 2.0 + 36.0);
        assert_eq!(p.derivative(2, 2.0), 1.0 + 36.0);
        assert_eq!(p.derivative(3, 2.0), 18.0);
        assert_eq!(p.derivative(4, 2.0), 0.0);
        assert_eq!(p.degree(), 3);
        let dd = p.divided_difference(0.5, 2.0);
        assert_relative_eq!(dd, (p.eval(2.0) - p.eval(0.5)) / 1.5, max_relative = 1e-14);
        // tiny spacing: divided difference keeps full accuracy
        let (x, h) = (0.3, 1e-9);
        assert_relative_eq!(p.divided_difference(x, x + h), p.derivative(1, x) + 0.5 * h * p.derivative(2, x), max_relative = 1e-12);
    }

    #[test]
    fn eval_examples() {
        let id = identity(-1.0, 1.0).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(eval_deformation(&id, 1, x, Side::Auto).unwrap(), 1.0);
        }
        let u = piecewise_linear(vec![-1.0, 0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(u.eval(1, 0.0, Side::Left).unwrap(), 1.0);
        assert_eq!(u.eval(1, 0.0, Side::Right).unwrap(), 2.0);
        assert_eq!(u.eval(0, 0.0, Side::Left).unwrap(), u.eval(0, 0.0, Side::Right).unwrap());
        assert!(matches!(u.eval(1, 0.0, Side::Auto), Err(Error::Ambiguous(_))));
        assert!(u.eval(0, 0.0, Side::Auto).is_ok());
        assert!(u.eval(0, 1.5, Side::Auto).is_err());
        assert!(u.eval(1, -1.0, Side::Left).is_err());
        assert_eq!(u.eval(1, 1.0, Side::Auto).unwrap(), 2.0);
        assert_eq!(u.value(0.5), 2.0);
    }

    #[test]
    fn construction_checks() {
        let p = |c: Vec<f64>| Polynomial::new(c).unwrap();
        assert!(PiecewiseDeformation::new(vec![-1.0, 0.0, 1.0], vec![p(vec![0.0, 1.0]), p(vec![0.1, 1.0])]).is_err());
        assert!(PiecewiseDeformation::new(vec![-1.0, 1.0], vec![p(vec![0.0, -1.0])]).is_err());
        // u' = 1 − 3x² vanishes inside
        assert!(PiecewiseDeformation::new(vec![-1.0, 1.0], vec![p(vec![0.0, 1.0, 0.0, -1.0])]).is_err());
        assert!(PiecewiseDeformation::new(vec![1.0, -1.0], vec![p(vec![0.0, 1.0])]).is_err());
        assert!(two_slope(1.0, 0.06, 1.2, -0.08).is_ok());
    }

    #[test]
    fn sampling() {
        let id = identity(-1.0, 1.0).unwrap();
        let w = lattice_window(-1.0, 1.0, 0.0, 0.5).unwrap();
        let s = sample_to_lattice(&id, &w).unwrap();
        assert_eq!(s, vec![(-2, -1.0), (-1, -0.5), (0, 0.0), (1, 0.5), (2, 1.0)]);
        let conf = sample_configuration(&id, &w).unwrap();
        assert_eq!(conf.gaps(), &[1.0, 1.0, 1.0, 1.0]);
        let w = lattice_window(-2.0, 1.0, 0.0, 0.5).unwrap();
        assert!(sample_to_lattice(&id, &w).is_err());
    }

    #[test]
    fn gaps_across_breakpoints() {
        let u = piecewise_linear(vec![-1.0, 0.25, 1.0], &[1.0, 3.0]).unwrap();
        let w = lattice_window(-1.0, 1.0, 0.0, 0.1).unwrap();
        let conf = sample_configuration(&u, &w).unwrap();
        // cell [0.2, 0.3]: half at slope 1, half at slope 3
        let k = (2 - w.k1) as usize;
        assert_relative_eq!(conf.gaps()[k], 2.0, max_relative = 1e-12);
        for (i, g) in conf.gaps().iter().enumerate() {
            let naive = (conf.values()[i + 1] - conf.values()[i]) / w.eps;
            assert!((g - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn microtwin_examples() {
        let id = identity(-1.0, 1.0).unwrap();
        let w = lattice_window(-1.0, 1.0, 0.0, 0.1).unwrap();
        for m in 2..6 {
            let cfg = MicrotwinConfig::new(id.clone(), DiscreteProfile::equispaced(m).unwrap(), 0.1).unwrap();
            let twin = microtwin_lattice(&cfg).unwrap();
            let plain = sample_to_lattice(&id, &w).unwrap();
            for ((k, a), (l, b)) in twin.iter().zip(&plain) {
                assert_eq!(k, l);
                assert!((a - b).abs() < 1e-15);
            }
        }
        let cfg = MicrotwinConfig::new(id.clone(), DiscreteProfile::new(2, vec![0.3]).unwrap(), 0.1).unwrap();
        let twin = microtwin_lattice(&cfg).unwrap();
        let (k, v) = twin[(1 - w.k1) as usize];
        assert_eq!(k, 1);
        assert_relative_eq!(v, 0.06, max_relative = 1e-14);
        assert!(twin.windows(2).all(|p| p[0].1 < p[1].1));

        let cfg = MicrotwinConfig::new(id, DiscreteProfile::equispaced(10).unwrap(), 0.1).unwrap();
        assert!(matches!(microtwin_lattice(&cfg), Err(Error::InterfacesExitDomain(_))));
    }

    #[test]
    fn microtwin_gaps_match_values() {
        let u = two_slope(1.0, 0.06, 1.2, -0.08).unwrap();
        let y = DiscreteProfile::new(3, vec![0.3, 0.7]).unwrap();
        let cfg = MicrotwinConfig::new(u, y, 0.01).unwrap();
        let conf = microtwin_configuration(&cfg).unwrap();
        for (i, g) in conf.gaps().iter().enumerate() {
            let naive = (conf.values()[i + 1] - conf.values()[i]) / cfg.eps;
            assert!((g - naive).abs() < 1e-12, "{i}: {g} vs {naive}");
        }
    }

    #[test]
    fn profiles() {
        assert!(DiscreteProfile::new(3, vec![0.7, 0.3]).is_err());
        assert!(DiscreteProfile::new(3, vec![0.3, 1.0]).is_err());
        assert!(DiscreteProfile::new(1, vec![]).is_err());
        let y = DiscreteProfile::normalized(3, &[0.0, 0.3, 0.7, 1.0]).unwrap();
        let z = DiscreteProfile::normalized(3, &[5.0, 5.0 + 2.0 * 0.3, 5.0 + 2.0 * 0.7, 7.0]).unwrap();
        for (a, b) in y.values().iter().zip(z.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(y.at(0), 0.0);
        assert_eq!(y.at(3), 1.0);
    }

    #[test]
    fn spec_roundtrip() {
        let spec: DeformationSpec = toml::from_str("breakpoints = [-1.0, 0.0, 1.0]\npieces = [[0.0, 1.0], [0.0, 1.2]]").unwrap();
        let u = spec.build().unwrap();
        assert_eq!(u.eval(1, 0.5, Side::Auto).unwrap(), 1.2);
        assert!(toml::from_str::<DeformationSpec>("breakpoints = [0.0, 1.0]\npieces = [[0.0, 1.0]]\nextra = 1").is_err());
    }

    proptest::proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            c in proptest::collection::vec(-1.0..1.0f64, 2..7),
            x in -0.9..0.9f64,
        ) {
            let p = Polynomial::new(c).unwrap();
            for order in 0..3 {
                let h = 1e-5;
                let fd = (p.derivative(order, x + h) - p.derivative(order, x - h)) / (2.0 * h);
                let exact = p.derivative(order + 1, x);
                proptest::prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
            }
        }

        #[test]
        fn sampled_values_increase(beta in -0.4..0.4f64, eps in 0.001..0.3f64) {
            let u = quadratic(-1.0, 1.0, 1.0, beta).unwrap();
            let w = lattice_window(-1.0, 1.0, 0.0, eps).unwrap();
            let s = sample_to_lattice(&u, &w).unwrap();
            proptest::prop_assert_eq!(s.len() as i64, w.n);
            proptest::prop_assert!(s.windows(2).all(|p| p[0].1 < p[1].1));
        }
    }
}
