//! Certified lattice sums.
//!
//! Every infinite sum is split into an explicitly evaluated head and a tail
//! bounded through the potential's decay envelope: for a decreasing bound `f`,
//! `Σ_{n≥M} f(n) ≤ f(M) + ∫_M^∞ f`. The returned [`SumResult`] carries that
//! bound; rounding error of the head is not part of it.
//!
//! Besides plain sums this module holds the operators `T_k f(t) = Σ_j j^k f(jt)`,
//! the exact inverse of `T₀` by Möbius inversion (with an independent Neumann
//! series route for validation), grid estimates of the weighted norms
//! `‖f‖_{p,q}`, and the Riemann zeta function on `(1, ∞)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{DecayEnvelope, Potential, MAX_ORDER};
use crate::summation::{self, Accumulator};

/// Hard cap on the number of evaluated terms in a single series.
const MAX_TERMS: usize = 2_000_000_000;

/// A truncated series with a bound on the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumResult {
    pub value: f64,
    /// Number of evaluated terms (or diagonals, for double sums).
    pub truncation_index: usize,
    pub tail_bound: f64,
}

impl SumResult {
    /// `[value − tail_bound, value + tail_bound]` contains the exact sum.
    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tail_bound
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { value: c * self.value, tail_bound: c.abs() * self.tail_bound, ..self }
    }
}

impl std::ops::Add for SumResult {
    type Output = SumResult;

    fn add(self, rhs: SumResult) -> SumResult {
        SumResult {
            value: self.value + rhs.value,
            truncation_index: self.truncation_index.max(rhs.truncation_index),
            tail_bound: self.tail_bound + rhs.tail_bound,
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(())
}

/// Polynomial growth of a weight: `|w| ≤ coef · x^degree` where `x` is the
/// argument handed to the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGrowth {
    pub coef: f64,
    pub degree: f64,
}

impl WeightGrowth {
    pub const UNIT: WeightGrowth = WeightGrowth { coef: 1.0, degree: 0.0 };

    pub fn new(coef: f64, degree: f64) -> Self {
        Self { coef, degree }
    }
}

/// Smallest `M` such that the tail of `Σ_n w(n) W⁽ᵈ⁾(x₀ + n h)` from `M` on is
/// certified below `tol`; returns `(M, tail bound)`.
fn progression_cutoff(
    env: &DecayEnvelope,
    order: usize,
    start: f64,
    step: f64,
    growth: WeightGrowth,
    tol: f64,
) -> Result<(usize, f64)> {
    let beta = env.alpha() + order as f64 - growth.degree;
    if beta <= 1.0 {
        return Err(Error::Divergence(format!(
            "decay exponent {beta} <= 1 (alpha {}, order {order}, weight degree {})",
            env.alpha(),
            growth.degree
        )));
    }
    let c = env.constant(order) * growth.coef;
    let bound = |n: usize| {
        let x = start + step * n as f64;
        c * (x.powf(-beta) + x.powf(1.0 - beta) / (step * (beta - 1.0)))
    };
    let n0 = if start >= env.onset() {
        0
    } else {
        ((env.onset() - start) / step).ceil() as usize
    };
    // Guard the onset against rounding in start + step * n.
    let mut lo = n0;
    while start + step * (lo as f64) < env.onset() {
        lo += 1;
    }
    if bound(lo) <= tol {
        return Ok((lo, bound(lo)));
    }
    let mut hi = lo.max(1);
    while bound(hi) > tol {
        if hi >= MAX_TERMS {
            return Err(Error::Tolerance {
                tol,
                detail: format!("series needs more than {MAX_TERMS} terms"),
            });
        }
        hi = (hi * 2).min(MAX_TERMS);
    }
    // bound(lo) > tol >= bound(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, bound(hi)))
}

/// `Σ_{n≥0} w(n) W⁽ᵒʳᵈᵉʳ⁾(start + n·step)` with `|w(n)| ≤ growth.coef · xₙ^growth.degree`.
///
/// The workhorse behind every one-dimensional series in the crate.
pub fn progression_sum<P, F>(
    pot: &P,
    order: usize,
    start: f64,
    step: f64,
    weight: F,
    growth: WeightGrowth,
    tol: f64,
) -> Result<SumResult>
where
    P: Potential + ?Sized,
    F: Fn(usize) -> f64,
{
    check_tol(tol)?;
    check_order(order)?;
    if !(start > 0.0 && step > 0.0) {
        return Err(Error::domain(format!(
            "progression must stay in t > 0 (start {start}, step {step})"
        )));
    }
    let (cut, tail) = progression_cutoff(pot.envelope(), order, start, step, growth, tol)?;
    let value = summation::sum((0..cut).map(|n| {
        let w = weight(n);
        if w == 0.0 {
            0.0
        } else {
            w * pot.derivative(order, start + step * n as f64)
        }
    }));
    Ok(SumResult { value, truncation_index: cut, tail_bound: tail })
}

/// `Σ_{j≥1} j^k W⁽ᵈ⁾(j t)`.
pub fn single_sum<P: Potential + ?Sized>(
    pot: &P,
    deriv_order: usize,
    power_k: u32,
    t: f64,
    tol: f64,
) -> Result<SumResult> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("single_sum needs t > 0, got {t}")));
    }
    let k = power_k as i32;
    progression_sum(
        pot,
        deriv_order,
        t,
        t,
        |n| ((n + 1) as f64).powi(k),
        WeightGrowth::new(t.powi(-k), k as f64),
        tol,
    )
}

/// `Σ_{j≥1} P(j) W⁽ᵈ⁾(j t)` for a polynomial `P` given by its coefficients
/// (constant term first).
pub fn polynomial_weighted_sum<P: Potential + ?Sized>(
    pot: &P,
    deriv_order: usize,
    poly: &[f64],
    t: f64,
    tol: f64,
) -> Result<SumResult> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("series needs t > 0, got {t}")));
    }
    let degree = poly.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    // |P(j)| ≤ (Σ|cᵢ|) j^deg for j ≥ 1, and j = x / t.
    let l1: f64 = poly.iter().map(|c| c.abs()).sum();
    let eval = |j: f64| poly.iter().rev().fold(0.0, |acc, c| acc * j + c);
    progression_sum(
        pot,
        deriv_order,
        t,
        t,
        |n| eval((n + 1) as f64),
        WeightGrowth::new(l1 * t.powi(-(degree as i32)), degree as f64),
        tol,
    )
}

/// Riemann zeta on `(1, ∞)` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::domain(format!("zeta needs s > 1, got {s}")));
    }
    Ok(zeta_unchecked(s))
}

/// B₂ₖ / (2k)! for k = 1..=10.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
];

pub(crate) fn zeta_unchecked(s: f64) -> f64 {
    const N: usize = 24;
    let n = N as f64;
    let head = summation::sum((1..N).rev().map(|j| (j as f64).powf(-s)));
    let mut acc = Accumulator::new();
    acc.add(head);
    acc.add(n.powf(1.0 - s) / (s - 1.0));
    acc.add(0.5 * n.powf(-s));
    // s (s+1) ⋯ (s+2k−2) N^(−s−2k+1)
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (k, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        acc.add(b * rising * power);
        let k = k as f64 + 1.0;
        rising *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
        power /= n * n;
    }
    acc.value()
}

/// The unique `s > 1` with `ζ(s) = y`, for `y > 1`.
pub fn zeta_inverse(y: f64) -> Result<f64> {
    if !(y > 1.0 && y.is_finite()) {
        return Err(Error::domain(format!("zeta_inverse needs y > 1, got {y}")));
    }
    // ζ is decreasing on (1, ∞) from +∞ to 1.
    let mut lo = 1.0 + 1e-12;
    let mut hi = 2.0;
    while zeta_unchecked(hi) > y {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zeta_unchecked(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Diagonals summed per parallel block in double sums.
const DIAGONAL_BLOCK: usize = 128;

/// `Σ_{i≥i₀} Σ_{j≥1} w(i,j) W⁽ᵒʳᵈᵉʳ⁾(b j + a i)` with `|w| ≤ coef · (ai+bj)^degree`.
///
/// Truncates on anti-diagonals `i + j ≤ K`; with `s = min(a, b)` the tail is
/// bounded by `C coef s^(−β) Σ_{k>K} k^(1−β)`, `β = α + order − degree > 2`.
/// Diagonal blocks are reduced in a fixed order, so the result does not
/// depend on the number of worker threads.
#[allow(clippy::too_many_arguments)]
pub fn lattice_pair_sum<P, F>(
    pot: &P,
    order: usize,
    a: f64,
    b: f64,
    i_start: usize,
    weight: F,
    growth: WeightGrowth,
    tol: f64,
) -> Result<SumResult>
where
    P: Potential + ?Sized,
    F: Fn(usize, usize) -> f64 + Sync,
{
    check_tol(tol)?;
    check_order(order)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("double sum needs a, b > 0 (got {a}, {b})")));
    }
    let env = pot.envelope();
    let beta = env.alpha() + order as f64 - growth.degree;
    if beta <= 2.0 {
        return Err(Error::Divergence(format!(
            "two-dimensional sum needs decay exponent > 2, got {beta}"
        )));
    }
    let s = a.min(b);
    let c = env.constant(order) * growth.coef * s.powf(-beta);
    let bound = |k: usize| {
        let x = (k + 1) as f64;
        c * (x.powf(1.0 - beta) + x.powf(2.0 - beta) / (beta - 2.0))
    };
    let mut lo = 1usize;
    while s * ((lo + 1) as f64) < env.onset() {
        lo += 1;
    }
    let cutoff = if bound(lo) <= tol {
        lo
    } else {
        let mut hi = lo;
        while bound(hi) > tol {
            if hi > 1 << 26 {
                return Err(Error::Tolerance {
                    tol,
                    detail: "double sum needs more than 2^26 diagonals".into(),
                });
            }
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if bound(mid) <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let first_diag = i_start + 1;
    let blocks: Vec<f64> = (first_diag..=cutoff)
        .step_by(DIAGONAL_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k0| {
            let mut acc = Accumulator::new();
            for k in k0..(k0 + DIAGONAL_BLOCK).min(cutoff + 1) {
                for i in i_start..k {
                    let j = k - i;
                    let w = weight(i, j);
                    if w != 0.0 {
                        acc.add(w * pot.derivative(order, b * j as f64 + a * i as f64));
                    }
                }
            }
            acc.value()
        })
        .collect();
    Ok(SumResult {
        value: summation::sum(blocks),
        truncation_index: cutoff,
        tail_bound: bound(cutoff),
    })
}

/// `Σ_{i≥i₀} Σ_{j≥1} W(b j + a i)` with `i₀ ∈ {0, 1}`.
pub fn double_sum_jump<P: Potential + ?Sized>(
    pot: &P,
    a: f64,
    b: f64,
    i_start: usize,
    tol: f64,
) -> Result<SumResult> {
    if i_start > 1 {
        return Err(Error::domain(format!("i_start must be 0 or 1, got {i_start}")));
    }
    lattice_pair_sum(pot, 0, a, b, i_start, |_, _| 1.0, WeightGrowth::UNIT, tol)
}

/// The image `T₀W = Σ_j W(j·)` of a potential, itself usable as a potential.
///
/// Derivatives are `(T₀W)⁽ⁱ⁾(t) = Σ_j jⁱ W⁽ⁱ⁾(jt)`, and the envelope of `W`
/// carries over with constants multiplied by `ζ(α)`.
pub struct T0Image<P> {
    inner: P,
    envelope: DecayEnvelope,
    tol: f64,
}

impl<P: Potential> T0Image<P> {
    /// `tol` is the absolute tail tolerance of every pointwise evaluation.
    pub fn new(inner: P, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        let env = inner.envelope();
        let z = zeta(env.alpha())?;
        let mut constants = *env.constants();
        for c in constants.iter_mut() {
            *c *= z;
        }
        let envelope = DecayEnvelope::per_order(constants, env.onset(), env.alpha())?;
        Ok(Self { inner, envelope, tol })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn eval(&self, order: usize, t: f64) -> Result<SumResult> {
        single_sum(&self.inner, order, order as u32, t, self.tol)
    }
}

impl<P: Potential> Potential for T0Image<P> {
    fn derivative(&self, order: usize, t: f64) -> f64 {
        self.eval(order, t).map(|r| r.value).unwrap_or(f64::NAN)
    }

    fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }
}

/// `(T₀f)(t) = Σ_j f(jt)` on each grid point, tails below `tol`.
pub fn apply_t0<P: Potential + ?Sized>(f: &P, t_grid: &[f64], tol: f64) -> Result<Vec<f64>> {
    t_grid
        .par_iter()
        .map(|&t| single_sum(f, 0, 0, t, tol).map(|r| r.value))
        .collect()
}

/// Möbius function on `1..=n` (index 0 unused) by a linear sieve.
pub fn mobius_table(n: usize) -> Vec<i8> {
    let mut mu = vec![0i8; n + 1];
    if n == 0 {
        return mu;
    }
    mu[1] = 1;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            let ip = i * p;
            if ip > n {
                break;
            }
            composite[ip] = true;
            if i % p == 0 {
                mu[ip] = 0;
                break;
            }
            mu[ip] = -mu[i];
        }
    }
    mu
}

/// `(T₀⁻¹g)(t) = Σ_{n≥1} μ(n) g(nt)`.
///
/// The tail is bounded by `Σ_{n≥M} |g(nt)|` through the envelope of `g`.
pub fn invert_t0<P: Potential + ?Sized>(g: &P, t: f64, tol: f64) -> Result<SumResult> {
    check_tol(tol)?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("invert_t0 needs t > 0, got {t}")));
    }
    let (cut, tail) = progression_cutoff(g.envelope(), 0, t, t, WeightGrowth::UNIT, tol)?;
    let mu = mobius_table(cut);
    let value = summation::sum((1..=cut).map(|n| {
        if mu[n] == 0 {
            0.0
        } else {
            mu[n] as f64 * g.value(n as f64 * t)
        }
    }));
    Ok(SumResult { value, truncation_index: cut, tail_bound: tail })
}

/// `T₀⁻¹g(t)` through the Neumann series `Σ_k (I − T₀)^k g`.
///
/// `(I − T₀)^k g(t) = (−1)^k Σ_{j₁..jₖ ≥ 2} g(j₁⋯jₖ t)`; grouping by the product
/// `n` the series becomes `Σ_n c(n) g(nt)` with coefficients built by repeated
/// Dirichlet convolution. The rearrangement is absolutely convergent only when
/// the contraction bound `ζ(α) − 1 < 1` holds; otherwise `Ok(None)` is
/// returned and a warning logged. The tail uses `|c(n)| ≤ H(n) < n^ρ`, with
/// `H` the ordered-factorisation count and `ρ = ζ⁻¹(2)`.
pub fn invert_t0_neumann<P: Potential + ?Sized>(
    g: &P,
    t: f64,
    tol: f64,
) -> Result<Option<SumResult>> {
    check_tol(tol)?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("invert_t0_neumann needs t > 0, got {t}")));
    }
    let env = g.envelope();
    let q = env.alpha();
    if zeta_unchecked(q) - 1.0 >= 1.0 {
        log::warn!("Neumann inversion skipped: contraction bound zeta({q}) - 1 >= 1");
        return Ok(None);
    }
    let rho = zeta_inverse(2.0)?;
    if q - rho <= 1.0 {
        log::warn!("Neumann inversion skipped: tail bound needs alpha > 1 + zeta^-1(2)");
        return Ok(None);
    }
    let growth = WeightGrowth::new(t.powf(-rho), rho);
    let (cut, tail) = progression_cutoff(env, 0, t, t, growth, tol)?;
    let cut = cut.max(1);

    // term_k(n) = (−1)^k · #{ordered factorisations of n into k factors ≥ 2}
    let mut coeff = vec![0.0f64; cut + 1];
    let mut term = vec![0.0f64; cut + 1];
    term[1] = 1.0;
    coeff[1] = 1.0;
    loop {
        let mut next = vec![0.0f64; cut + 1];
        let mut any = false;
        for q in 1..=cut {
            if term[q] == 0.0 {
                continue;
            }
            let mut d = 2;
            while d * q <= cut {
                next[d * q] -= term[q];
                any = true;
                d += 1;
            }
        }
        if !any {
            break;
        }
        for (c, x) in coeff.iter_mut().zip(&next) {
            *c += x;
        }
        term = next;
    }
    let value = summation::sum((1..=cut).map(|n| {
        if coeff[n] == 0.0 {
            0.0
        } else {
            coeff[n] * g.value(n as f64 * t)
        }
    }));
    Ok(Some(SumResult { value, truncation_index: cut, tail_bound: tail }))
}

/// Weights `(p, q)` of the space `𝒜_{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSpaceParams {
    pub p: f64,
    pub q: f64,
}

impl WeightedSpaceParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && q > 1.0) {
            return Err(Error::domain(format!("weights must exceed 1 (p = {p}, q = {q})")));
        }
        Ok(Self { p, q })
    }
}

/// Log-spaced grid on `[10⁻³, 10³]`, the grid of [`weighted_norm`].
pub fn norm_grid(grid_size: usize) -> Vec<f64> {
    let n = grid_size.max(2);
    (0..n).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / (n - 1) as f64)).collect()
}

/// Grid estimate of `‖f‖_{p,q} = max(sup_{t<1} t^p |f(t)|, sup_{t≥1} t^q |f(t)|)`.
///
/// The supremum is taken over [`norm_grid`], so the result is a lower bound
/// on the true norm.
pub fn weighted_norm(f: impl Fn(f64) -> f64, params: WeightedSpaceParams, grid_size: usize) -> f64 {
    weighted_norm_on(&norm_grid(grid_size), f, params)
}

/// As [`weighted_norm`], on a caller-supplied grid.
pub fn weighted_norm_on(grid: &[f64], f: impl Fn(f64) -> f64, params: WeightedSpaceParams) -> f64 {
    grid.iter()
        .map(|&t| {
            let w = if t < 1.0 { t.powf(params.p) } else { t.powf(params.q) };
            w * f(t).abs()
        })
        .fold(0.0, f64::max)
}

/// Coefficients of `(p₀ + p₁ε + p₂ε²)⁻¹ = q₀ + q₁ε + q₂ε² + O(ε³)`.
pub fn inverse_power_series(p0: f64, p1: f64, p2: f64) -> Result<(f64, f64, f64)> {
    if p0 == 0.0 {
        return Err(Error::domain("leading coefficient must be nonzero"));
    }
    Ok((1.0 / p0, -p1 / (p0 * p0), (p1 * p1 - p0 * p2) / (p0 * p0 * p0)))
}
