//! Continuum coefficients of the atomistic energy
//! `E_ε = E⁰ + εE¹ + ε²E² + o(ε²)`.
//!
//! * [`smooth_coefficients`]: smooth deformations on `[a, b]`.
//! * [`one_jump_coefficients`]: deformations on `[−1, 1]` whose derivative
//!   jumps at 0, together with the jump energy [`jump_term`] and its
//!   curvature [`jump_curvature`].
//! * [`k_terms`]: the first two terms of `E_ε(u_ε) − E_ε(u)` for a microtwin.
//! * [`cross_interface_decay`]: interaction of non-adjacent pieces.
//!
//! All series carry certified tails; the integrals use adaptive
//! Gauss–Kronrod quadrature with tolerance `tol/10`, whose error is an
//! estimate. The reported error of each coefficient adds both.

use serde::Serialize;

use crate::deformation::{DiscreteProfile, PiecewiseDeformation, Side};
use crate::discretization::{lattice_window, ExpansionParams};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::integrate;
use crate::series::{
    double_sum_jump, lattice_pair_sum, polynomial_weighted_sum, progression_sum, zeta_unchecked as zeta, SumResult,
    WeightGrowth,
};
use crate::summation::{self, Accumulator};

/// `(E⁰, E¹, E²)` with an error figure for each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub e0_error: f64,
    pub e1_error: f64,
    pub e2_error: f64,
}

impl ExpansionCoefficients {
    /// `E⁰ + εE¹ + ε²E²`
    pub fn predict(&self, eps: f64) -> f64 {
        self.e0 + eps * (self.e1 + eps * self.e2)
    }
}

/// Linear combination of certified values.
#[derive(Default)]
struct Combo {
    acc: Accumulator,
    err: f64,
}

impl Combo {
    fn add(&mut self, c: f64, r: SumResult) {
        self.acc.add(c * r.value);
        self.err += c.abs() * r.tail_bound;
    }

    fn add_exact(&mut self, c: f64, v: f64, err: f64) {
        self.acc.add(c * v);
        self.err += c.abs() * err;
    }

    fn value(&self) -> f64 {
        self.acc.value()
    }
}

/// `Σ_{j≥1} P(j) W⁽ᵈ⁾(tj)`.
fn wsum<P: Potential + ?Sized>(pot: &P, d: usize, poly: &[f64], t: f64, tol: f64) -> Result<SumResult> {
    polynomial_weighted_sum(pot, d, poly, t, tol)
}

/// `∫ Σ_j W(u'(x) j) dx` and `∫ Σ_j W''(u'(x) j) j⁴ u''(x)² dx` over `[lo, hi] ⊆` one piece.
fn piece_integrals<P: Potential + ?Sized>(
    u: &PiecewiseDeformation,
    piece: usize,
    lo: f64,
    hi: f64,
    pot: &P,
    tol: f64,
) -> Result<[(f64, f64); 2]> {
    let poly = &u.pieces()[piece];
    let series_tol = tol / 10.0 / (hi - lo).max(1.0);
    let e0 = integrate(
        |x| Ok(wsum(pot, 0, &[1.0], poly.derivative(1, x), series_tol)?.value),
        lo,
        hi,
        tol / 10.0,
    )?;
    let e2 = if poly.degree() >= 2 {
        integrate(
            |x| {
                let c = poly.derivative(2, x);
                if c == 0.0 {
                    return Ok(0.0);
                }
                let s = wsum(pot, 2, &[0.0, 0.0, 0.0, 0.0, 1.0], poly.derivative(1, x), series_tol / (c * c).max(1.0))?;
                Ok(s.value * c * c)
            },
            lo,
            hi,
            tol / 10.0,
        )?
    } else {
        crate::quadrature::Quadrature { value: 0.0, error_estimate: 0.0, panels: 0 }
    };
    let pad = series_tol * (hi - lo);
    Ok([(e0.value, e0.error_estimate + pad), (e2.value, e2.error_estimate + pad)])
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Coefficients for a deformation smooth on `[a, b]` along an ε-sequence
/// with parameters `params`.
pub fn smooth_coefficients<P: Potential + ?Sized>(
    u: &PiecewiseDeformation,
    pot: &P,
    params: &ExpansionParams,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<ExpansionCoefficients> {
    check_tol(tol)?;
    if !u.interior_breakpoints().is_empty() {
        return Err(Error::domain("smooth coefficients need a deformation without breakpoints"));
    }
    if a != u.start() || b != u.end() {
        return Err(Error::domain(format!(
            "deformation lives on [{}, {}], not [{a}, {b}]",
            u.start(),
            u.end()
        )));
    }
    let violations = crate::discretization::validate_params(params, a, b);
    if !violations.is_empty() {
        return Err(Error::domain(format!("invalid parameters: {}", violations.join("; "))));
    }
    let l = b - a;
    let p = params;
    let [(i0, i0_err), (i2, i2_err)] = piece_integrals(u, 0, a, b, pot, tol)?;
    let e0 = i0 / l;
    let e0_err = i0_err / l;

    let (ta, tb) = (u.eval(1, a, Side::Auto)?, u.eval(1, b, Side::Auto)?);
    let (ca, cb) = (u.eval(2, a, Side::Auto)?, u.eval(2, b, Side::Auto)?);
    let s = tol / 10.0;

    let mut e1 = Combo::default();
    e1.add_exact(p.c1 * l, e0, e0_err);
    e1.add(-0.5 / l, wsum(pot, 0, &[2.0 * p.a1 - 1.0, 1.0], ta, s)?);
    e1.add(-0.5 / l, wsum(pot, 0, &[2.0 * p.b1 - 1.0, 1.0], tb, s)?);

    let mut e2 = Combo::default();
    e2.add_exact(-1.0 / (24.0 * l), i2, i2_err);
    e2.add_exact(p.c2 * l, e0, e0_err);
    let wa = [p.c1 / 2.0 - p.a1 * p.c1 - p.a2 / l, -p.c1 / 2.0];
    let wb = [p.c1 / 2.0 - p.b1 * p.c1 - p.b2 / l, -p.c1 / 2.0];
    e2.add(1.0, wsum(pot, 0, &wa, ta, s)?);
    e2.add(1.0, wsum(pot, 0, &wb, tb, s)?);
    if ca != 0.0 {
        let da = [0.0, -1.0 / 12.0 + p.a1 / 2.0 - p.a1 * p.a1 / 2.0, 0.25 - p.a1 / 2.0, -1.0 / 6.0];
        e2.add(ca / l, wsum(pot, 1, &da, ta, s)?);
    }
    if cb != 0.0 {
        let db = [0.0, 1.0 / 12.0 - p.b1 / 2.0 + p.b1 * p.b1 / 2.0, -0.25 + p.b1 / 2.0, 1.0 / 6.0];
        e2.add(cb / l, wsum(pot, 1, &db, tb, s)?);
    }
    Ok(ExpansionCoefficients {
        e0,
        e1: e1.value(),
        e2: e2.value(),
        e0_error: e0_err,
        e1_error: e1.err,
        e2_error: e2.err,
    })
}

/// One-sided slopes and curvatures of a deformation at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterfaceData {
    pub slope_left: f64,
    pub slope_right: f64,
    pub curv_left: f64,
    pub curv_right: f64,
}

impl InterfaceData {
    pub fn at_zero(u: &PiecewiseDeformation) -> Result<Self> {
        Ok(Self {
            slope_left: u.eval(1, 0.0, Side::Left)?,
            slope_right: u.eval(1, 0.0, Side::Right)?,
            curv_left: u.eval(2, 0.0, Side::Left)?,
            curv_right: u.eval(2, 0.0, Side::Right)?,
        })
    }
}

fn check_jump_domain(u: &PiecewiseDeformation) -> Result<()> {
    if u.start() != -1.0 || u.end() != 1.0 {
        return Err(Error::domain("one-jump coefficients need a deformation on [-1, 1]"));
    }
    if u.interior_breakpoints().iter().any(|t| *t != 0.0) {
        return Err(Error::domain("the only admissible breakpoint is 0"));
    }
    Ok(())
}

/// `Σ_{i,j≥1} [c₊ j² − c₋ i²] W'(q j + p i)`.
fn curvature_pair_sum<P: Potential + ?Sized>(
    pot: &P,
    p: f64,
    q: f64,
    c_minus: f64,
    c_plus: f64,
    tol: f64,
) -> Result<SumResult> {
    if c_minus == 0.0 && c_plus == 0.0 {
        return Ok(SumResult { value: 0.0, truncation_index: 0, tail_bound: 0.0 });
    }
    // |c₊j² − c₋i²| ≤ max|c|·(i + j)² ≤ max|c|·(pi + qj)²/min(p, q)²
    let s = p.min(q);
    let growth = WeightGrowth::new(c_minus.abs().max(c_plus.abs()) / (s * s), 2.0);
    lattice_pair_sum(
        pot,
        1,
        p,
        q,
        1,
        |i, j| c_plus * (j * j) as f64 - c_minus * (i * i) as f64,
        growth,
        tol,
    )
}

/// Coefficients for a deformation on `[−1, 1]` (lattice `εℤ`) smooth on
/// `[−1, 0]` and `[0, 1]`, along a sequence with symmetric parameters `params`.
pub fn one_jump_coefficients<P: Potential + ?Sized>(
    u: &PiecewiseDeformation,
    pot: &P,
    params: &ExpansionParams,
    tol: f64,
) -> Result<ExpansionCoefficients> {
    check_tol(tol)?;
    check_jump_domain(u)?;
    let (a1, a2) = (params.a1, params.a2);
    let violations = crate::discretization::validate_params(params, -1.0, 1.0);
    if !violations.is_empty() {
        return Err(Error::domain(format!("invalid parameters: {}", violations.join("; "))));
    }
    let mut i0 = (0.0, 0.0);
    let mut i2 = (0.0, 0.0);
    for (lo, hi) in [(-1.0, 0.0), (0.0, 1.0)] {
        let piece = if lo < 0.0 { 0 } else { u.pieces().len() - 1 };
        let [(v0, r0), (v2, r2)] = piece_integrals(u, piece, lo, hi, pot, tol)?;
        i0 = (i0.0 + v0, i0.1 + r0);
        i2 = (i2.0 + v2, i2.1 + r2);
    }
    let e0 = 0.5 * i0.0;
    let e0_err = 0.5 * i0.1;

    let iface = InterfaceData::at_zero(u)?;
    let (tl, tr) = (u.eval(1, -1.0, Side::Auto)?, u.eval(1, 1.0, Side::Auto)?);
    let (cl, cr) = (u.eval(2, -1.0, Side::Auto)?, u.eval(2, 1.0, Side::Auto)?);
    let (p, q) = (iface.slope_left, iface.slope_right);
    let s = tol / 40.0;

    let jm = wsum(pot, 0, &[-1.0, 1.0], p, s)?;
    let jp = wsum(pot, 0, &[-1.0, 1.0], q, s)?;
    let dsum = double_sum_jump(pot, p, q, 1, s)?;

    let mut e1 = Combo::default();
    e1.add_exact(a1 - 0.5, e0, e0_err);
    for t in [tl, tr] {
        e1.add(-0.25, wsum(pot, 0, &[2.0 * a1 - 1.0, 1.0], t, s)?);
    }
    e1.add(-0.25, jm);
    e1.add(-0.25, jp);
    e1.add(0.5, dsum);

    let mut e2 = Combo::default();
    e2.add_exact(-1.0 / 48.0, i2.0, i2.1);
    e2.add_exact(0.25 - a1 + a2 + a1 * a1, e0, e0_err);
    for t in [tl, tr] {
        e2.add(0.5, wsum(pot, 0, &[-0.25 + a1 - a2 - a1 * a1, 0.25 - a1 / 2.0], t, s)?);
    }
    let outer = [0.0, 1.0 / 6.0 - a1 + a1 * a1, a1 - 0.5, 1.0 / 3.0];
    if cr != 0.0 {
        e2.add(0.25 * cr, wsum(pot, 1, &outer, tr, s)?);
    }
    if cl != 0.0 {
        e2.add(-0.25 * cl, wsum(pot, 1, &outer, tl, s)?);
    }
    e2.add(0.125 - a1 / 4.0, jm);
    e2.add(0.125 - a1 / 4.0, jp);
    // j = 1 term of the inner cubic is zero, so summing from j = 1 is harmless
    let inner = [0.0, 1.0 / 6.0, -0.5, 1.0 / 3.0];
    if iface.curv_left != 0.0 {
        e2.add(0.25 * iface.curv_left, wsum(pot, 1, &inner, p, s)?);
    }
    if iface.curv_right != 0.0 {
        e2.add(-0.25 * iface.curv_right, wsum(pot, 1, &inner, q, s)?);
    }
    e2.add(a1 / 2.0 - 0.25, dsum);
    // the slowest series (tail ~ K⁻³) gets its own share of the budget
    e2.add(0.25, curvature_pair_sum(pot, p, q, iface.curv_left, iface.curv_right, tol)?);

    Ok(ExpansionCoefficients {
        e0,
        e1: e1.value(),
        e2: e2.value(),
        e0_error: e0_err,
        e1_error: e1.err,
        e2_error: e2.err,
    })
}

/// `J(a, b) = −¼ Σ_{j≥2} (j−1)[W(aj) + W(bj)] + ½ Σ_{i,j≥1} W(bj + ai)`.
pub fn jump_term<P: Potential + ?Sized>(a: f64, b: f64, pot: &P, tol: f64) -> Result<SumResult> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("slopes must be positive (got {a}, {b})")));
    }
    let s = tol / 3.0;
    let mut c = Combo::default();
    c.add(-0.25, wsum(pot, 0, &[-1.0, 1.0], a, s)?);
    c.add(-0.25, wsum(pot, 0, &[-1.0, 1.0], b, s)?);
    let d = double_sum_jump(pot, a, b, 1, s)?;
    c.add(0.5, d);
    Ok(SumResult { value: c.value(), truncation_index: d.truncation_index, tail_bound: c.err })
}

/// `A(a) = (1/12) Σ_{j≥2} (j − j³) W''(aj)`.
pub fn jump_curvature<P: Potential + ?Sized>(a: f64, pot: &P, tol: f64) -> Result<SumResult> {
    if !(a > 0.0) {
        return Err(Error::domain(format!("slope must be positive, got {a}")));
    }
    Ok(wsum(pot, 2, &[0.0, 1.0, 0.0, -1.0], a, 12.0 * tol)?.scaled(1.0 / 12.0))
}

/// Root of [`jump_curvature`] in `[lo, hi]` by bisection.
pub fn jump_curvature_root<P: Potential + ?Sized>(pot: &P, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let f = |a: f64| jump_curvature(a, pot, 1e-15).map(|r| r.value);
    let (mut lo, mut hi) = (lo, hi);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracketing { lo, hi });
    }
    let lo_negative = flo < 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(26[ζ(11) − ζ(13)] / (7[ζ(5) − ζ(7)]))^{1/6}`: the slope (in units of σ)
/// above which `A > 0` for Lennard-Jones.
pub fn lj_jump_threshold() -> f64 {
    let num = 26.0 * (zeta(11.0) - zeta(13.0));
    let den = 7.0 * (zeta(5.0) - zeta(7.0));
    (num / den).powf(1.0 / 6.0)
}

/// `K₁` and `K₂` with the error of each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KTerms {
    pub k1: f64,
    pub k2: f64,
    pub k1_error: f64,
    pub k2_error: f64,
}

/// `Σ_{n≥0} w(n) W⁽ᵈ⁾(x₀ + n h)` with `w(n) = c₀ + c₂ n²`.
fn quadratic_progression<P: Potential + ?Sized>(
    pot: &P,
    d: usize,
    x0: f64,
    h: f64,
    c0: f64,
    c2: f64,
    tol: f64,
) -> Result<SumResult> {
    // |c₀ + c₂n²| ≤ (|c₀|/x₀² + |c₂|/h²) xₙ²
    let growth = if c2 == 0.0 {
        WeightGrowth::new(c0.abs(), 0.0)
    } else {
        WeightGrowth::new(c0.abs() / (x0 * x0) + c2.abs() / (h * h), 2.0)
    };
    if c0 == 0.0 && c2 == 0.0 {
        return Ok(SumResult { value: 0.0, truncation_index: 0, tail_bound: 0.0 });
    }
    progression_sum(pot, d, x0, h, |n| c0 + c2 * (n * n) as f64, growth, tol)
}

/// First two coefficients of `E_ε(u_ε) − E_ε(u) = εK₁ + ε²K₂ + o(ε²)` for a
/// microtwin with profile `y`, along a sequence with boundary offset `a₁`.
pub fn k_terms<P: Potential + ?Sized>(
    iface: &InterfaceData,
    profile: &DiscreteProfile,
    pot: &P,
    a1: f64,
    tol: f64,
) -> Result<KTerms> {
    check_tol(tol)?;
    let (a, b) = (iface.slope_left, iface.slope_right);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("slopes must be positive (got {a}, {b})")));
    }
    let (cm, cp) = (iface.curv_left, iface.curv_right);
    let m = profile.m();
    let mf = m as f64;
    let y = |j: usize| profile.at(j);
    let s = tol / (8.0 * mf * mf);

    let mut k1 = Combo::default();
    let mut k2 = Combo::default();
    for j in 1..m {
        let jf = j as f64;
        let x_twin = b * mf * y(j);
        k1.add(0.5, progression_sum(pot, 0, x_twin, a, |_| 1.0, WeightGrowth::UNIT, s)?);
        k1.add(-0.5, progression_sum(pot, 0, b * jf, a, |_| 1.0, WeightGrowth::UNIT, s)?);
        k2.add(0.25, quadratic_progression(pot, 1, x_twin, a, cp * mf * mf * y(j), -cm, s)?);
        k2.add(-0.25, quadratic_progression(pot, 1, b * jf, a, cp * jf * jf, -cm, s)?);
    }
    let mut inner1 = Accumulator::new();
    let mut inner2 = Accumulator::new();
    for i in 1..m.saturating_sub(1) {
        for j in i + 1..m {
            let dy = y(j) - y(i);
            inner1.add(pot.value(b * mf * dy));
            inner2.add(pot.derivative(1, b * mf * dy) * mf * mf * dy);
        }
    }
    k1.add_exact(0.5, inner1.value(), 0.0);
    k2.add_exact(0.25 * cp, inner2.value(), 0.0);
    for i in 1..m {
        let yi = y(i);
        let x0 = b * (mf - mf * yi);
        k1.add(0.5, progression_sum(pot, 0, x0, b, |_| 1.0, WeightGrowth::UNIT, s)?);
        if cp != 0.0 {
            // j = m + n; |j² − m² yᵢ| ≤ 2j² ≤ 2 xₙ²/(b(1 − yᵢ))²
            let growth = WeightGrowth::new(2.0 / (b * (1.0 - yi)).powi(2), 2.0);
            let r = progression_sum(
                pot,
                1,
                x0,
                b,
                |n| {
                    let j = (m + n) as f64;
                    j * j - mf * mf * yi
                },
                growth,
                s,
            )?;
            k2.add(0.25 * cp, r);
        }
    }
    k1.add(-0.5 * (mf - 1.0), wsum(pot, 0, &[1.0], b, s)?);
    if cp != 0.0 {
        k2.add(-0.25 * cp * (mf - 1.0), wsum(pot, 1, &[0.0, mf, 1.0], b, s)?);
    }
    let k1_value = k1.value();
    k2.add_exact(a1 - 0.5, k1_value, k1.err);
    Ok(KTerms { k1: k1_value, k2: k2.value(), k1_error: k1.err, k2_error: k2.err })
}

/// Result of [`cross_interface_decay`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Least-squares slope of `log |T(ε)|` against `log ε`.
    pub exponent: f64,
    /// `(ε, T(ε))` for each spacing.
    pub samples: Vec<(f64, f64)>,
}

/// `T(ε) = (1/N) Σ_p Σ_{q≥p+2} Σ_{i∈piece p} Σ_{j∈piece q} W((u(εj) − u(εi))/ε)`
/// on the lattice `εℤ`.
pub fn cross_interface_term<P: Potential + ?Sized>(u: &PiecewiseDeformation, pot: &P, eps: f64) -> Result<f64> {
    let bp = u.breakpoints();
    if bp.len() < 4 {
        return Err(Error::domain("cross-interface term needs at least two interior breakpoints"));
    }
    let whole = lattice_window(u.start(), u.end(), 0.0, eps)?;
    let pieces = (0..bp.len() - 1)
        .map(|p| {
            let w = lattice_window(bp[p], bp[p + 1], 0.0, eps)?;
            Ok(w.sites().map(|k| u.value(w.position(k))).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for p in 0..pieces.len() {
        for q in p + 2..pieces.len() {
            for &vi in &pieces[p] {
                rows.push(summation::sum(pieces[q].iter().map(|&vj| pot.value((vj - vi) / eps))));
            }
        }
    }
    Ok(summation::sum(rows) / whole.n as f64)
}

/// Fits the decay exponent of [`cross_interface_term`] over `eps_seq`.
pub fn cross_interface_decay<P: Potential + ?Sized>(
    u: &PiecewiseDeformation,
    pot: &P,
    eps_seq: &[f64],
) -> Result<DecayFit> {
    if eps_seq.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: eps_seq.len() });
    }
    let samples = eps_seq
        .iter()
        .map(|&e| cross_interface_term(u, pot, e).map(|t| (e, t)))
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|(_, t)| *t == 0.0) {
        return Err(Error::domain("cross-interface term vanished; cannot fit a power law"));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(e, t)| (e.ln(), t.abs().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(DecayFit { exponent: sxy / sxx, samples })
}

/// One row of a Taylor-residual check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorRow {
    pub eps: f64,
    pub energy: f64,
    pub predicted: f64,
    pub residual: f64,
    pub scaled_residual: f64,
}

impl TaylorRow {
    pub fn new(eps: f64, energy: f64, predicted: f64) -> Self {
        let residual = (energy - predicted).abs();
        Self { eps, energy, predicted, residual, scaled_residual: residual / (eps * eps) }
    }
}

/// Required decrease of `residual/ε²` per halving of ε.
pub const TAYLOR_DECAY_PER_HALVING: f64 = 1.5;

/// Does `residual/ε²` decrease by at least 1.5× per halving of ε over the
/// last three rows (ordered by decreasing ε)?
pub fn taylor_residual_decays(rows: &[TaylorRow]) -> bool {
    if rows.len() < 3 {
        return false;
    }
    rows[rows.len() - 3..].windows(2).all(|w| {
        let halvings = (w[0].eps / w[1].eps).log2();
        halvings > 0.0 && w[0].scaled_residual >= TAYLOR_DECAY_PER_HALVING.powf(halvings) * w[1].scaled_residual
    })
}
