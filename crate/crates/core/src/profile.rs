//! The optimal-profile problem between two interfaces `m` lattice spacings apart.
//!
//! `F_m(a, b; x)` is twice the first-order interaction energy `K₁` of a
//! microtwin whose interior sites sit at `m·x_j` (in units of the right-hand
//! spacing) between slopes `a` (left) and `b` (right). It vanishes at the
//! equispaced chain `q_m` and, for equal slopes, `q_m` is critical.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{LennardJones, Potential};
use crate::series::{progression_sum, single_sum, SumResult, WeightGrowth};
use crate::summation::Accumulator;

pub use crate::deformation::DiscreteProfile as ProfileChain;

fn check_slopes(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("slopes must be positive (got {a}, {b})")));
    }
    Ok(())
}

fn unit_progression<P: Potential + ?Sized>(pot: &P, order: usize, start: f64, step: f64, tol: f64) -> Result<SumResult> {
    progression_sum(pot, order, start, step, |_| 1.0, WeightGrowth::UNIT, tol)
}

/// `F_m(a, b; x)` with certified tails.
///
/// ```text
/// F_m = Σ_{i≥0} Σ_{j=1}^{m−1} [W(bm x_j + ai) − W(bj + ai)] + Σ_{1≤i<j≤m−1} W(bm(x_j − x_i))
///     + Σ_{i=1}^{m−1} Σ_{j≥m} W(b(j − m x_i)) − (m−1) Σ_{j≥1} W(bj)
/// ```
pub fn f_m<P: Potential + ?Sized>(a: f64, b: f64, chain: &ProfileChain, pot: &P, tol: f64) -> Result<SumResult> {
    check_slopes(a, b)?;
    let m = chain.m();
    let mf = m as f64;
    let s = tol / (3 * m) as f64;
    let mut acc = Accumulator::new();
    let mut err = 0.0;
    let mut cut = 0;
    let mut add = |c: f64, r: SumResult| {
        acc.add(c * r.value);
        err += c.abs() * r.tail_bound;
        cut = cut.max(r.truncation_index);
    };
    for j in 1..m {
        let x = chain.at(j);
        add(1.0, unit_progression(pot, 0, b * mf * x, a, s)?);
        add(-1.0, unit_progression(pot, 0, b * j as f64, a, s)?);
        add(1.0, unit_progression(pot, 0, b * mf * (1.0 - x), b, s)?);
    }
    add(-(mf - 1.0), single_sum(pot, 0, 0, b, s)?);
    for i in 1..m {
        for j in i + 1..m {
            acc.add(pot.value(b * mf * (chain.at(j) - chain.at(i))));
        }
    }
    Ok(SumResult { value: acc.value(), truncation_index: cut, tail_bound: err })
}

/// `∂F_m/∂x_k` for `k = 1, …, m−1`.
pub fn f_m_gradient<P: Potential + ?Sized>(a: f64, b: f64, chain: &ProfileChain, pot: &P, tol: f64) -> Result<Vec<f64>> {
    check_slopes(a, b)?;
    let m = chain.m();
    let bm = b * m as f64;
    let s = tol / (2.0 * bm);
    (1..m)
        .map(|k| {
            let xk = chain.at(k);
            let mut acc = Accumulator::new();
            acc.add(unit_progression(pot, 1, bm * xk, a, s)?.value);
            acc.add(-unit_progression(pot, 1, bm * (1.0 - xk), b, s)?.value);
            for i in 1..m {
                if i < k {
                    acc.add(pot.derivative(1, bm * (xk - chain.at(i))));
                } else if i > k {
                    acc.add(-pot.derivative(1, bm * (chain.at(i) - xk)));
                }
            }
            Ok(bm * acc.value())
        })
        .collect()
}

/// Hessian of `F_m` in `x`.
pub fn f_m_hessian<P: Potential + ?Sized>(a: f64, b: f64, chain: &ProfileChain, pot: &P, tol: f64) -> Result<DMatrix<f64>> {
    check_slopes(a, b)?;
    let m = chain.m();
    let n = m - 1;
    let bm = b * m as f64;
    let s = tol / (2.0 * bm * bm);
    let mut h = DMatrix::zeros(n, n);
    for k in 1..m {
        let xk = chain.at(k);
        let mut diag = Accumulator::new();
        diag.add(unit_progression(pot, 2, bm * xk, a, s)?.value);
        diag.add(unit_progression(pot, 2, bm * (1.0 - xk), b, s)?.value);
        for l in 1..m {
            if l != k {
                let w2 = pot.derivative(2, bm * (xk - chain.at(l)).abs());
                diag.add(w2);
                h[(k - 1, l - 1)] = -bm * bm * w2;
            }
        }
        h[(k - 1, k - 1)] = bm * bm * diag.value();
    }
    Ok(h)
}

/// Hessian of `F_m(a, a; ·)` at `q_m`: `2a²m² Σ_j W''(aj)` on the diagonal,
/// `−a²m² W''(a|k−l|)` off it.
pub fn hessian_at_qm<P: Potential + ?Sized>(a: f64, m: usize, pot: &P, tol: f64) -> Result<DMatrix<f64>> {
    check_slopes(a, a)?;
    if m < 2 {
        return Err(Error::domain(format!("m must be at least 2, got {m}")));
    }
    let c = a * a * (m * m) as f64;
    let s2 = single_sum(pot, 2, 0, a, tol / (2.0 * c))?.value;
    Ok(DMatrix::from_fn(m - 1, m - 1, |k, l| {
        if k == l {
            2.0 * c * s2
        } else {
            -c * pot.derivative(2, a * k.abs_diff(l) as f64)
        }
    }))
}

fn min_eigenvalue(h: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h).eigenvalues.min()
}

/// Largest `a` (bisection to `tol`) for which the Hessian of `F_m(a, a; ·)` at
/// `q_m` is positive definite, searched in `[σ, 1.5σ]`.
pub fn critical_a(m: usize, pot: &LennardJones, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let sigma = pot.sigma();
    let series_tol = 1e-14;
    let lam = |a: f64| hessian_at_qm(a, m, pot, series_tol).map(min_eigenvalue);
    let (mut lo, mut hi) = (sigma, 1.5 * sigma);
    if !(lam(lo)? > 0.0 && lam(hi)? < 0.0) {
        return Err(Error::Bracketing { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if lam(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // exactly one eigenvalue crosses zero: the determinant changes sign too
    let det_lo = hessian_at_qm(lo, m, pot, series_tol)?.determinant();
    let det_hi = hessian_at_qm(hi, m, pot, series_tol)?.determinant();
    if !(det_lo > 0.0 && det_hi < 0.0) {
        return Err(Error::Ambiguous(format!(
            "m = {m}: determinant does not change sign across [{lo}, {hi}] ({det_lo:e}, {det_hi:e})"
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Result of [`minimize_f_m`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileMinimum {
    pub chain: ProfileChain,
    pub value: f64,
    pub gradient_norm: f64,
    /// Index of the winning start (0 is `q_m`).
    pub start: usize,
}

const BFGS_MAX_ITER: usize = 500;
const NEWTON_MAX_ITER: usize = 50;
const PERTURBATION_SEED: u64 = 0x6d69_6372_6f74_7769;

/// Chain from unconstrained coordinates: gaps are a softmax of `(z, 0)`.
fn chain_from_z(m: usize, z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let zmax = z.iter().copied().fold(0.0, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).chain(std::iter::once((-zmax).exp())).collect();
    let total: f64 = e.iter().sum();
    let gaps: Vec<f64> = e.iter().map(|v| v / total).collect();
    let mut x = Vec::with_capacity(m - 1);
    let mut acc = 0.0;
    for g in &gaps[..m - 1] {
        acc += g;
        x.push(acc);
    }
    (x, gaps)
}

fn z_from_chain(chain: &ProfileChain) -> DVector<f64> {
    let m = chain.m();
    let last = (1.0 - chain.at(m - 1)).ln();
    DVector::from_iterator(m - 1, (0..m - 1).map(|l| (chain.at(l + 1) - chain.at(l)).ln() - last))
}

struct Objective<'a, P: ?Sized> {
    a: f64,
    b: f64,
    m: usize,
    pot: &'a P,
    tol: f64,
}

impl<P: Potential + ?Sized> Objective<'_, P> {
    /// Value and z-gradient; `None` outside the admissible set.
    fn eval(&self, z: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let (x, gaps) = chain_from_z(self.m, z);
        let chain = ProfileChain::new(self.m, x.clone()).ok()?;
        let v = f_m(self.a, self.b, &chain, self.pot, self.tol).ok()?.value;
        let gx = f_m_gradient(self.a, self.b, &chain, self.pot, self.tol).ok()?;
        if !v.is_finite() || gx.iter().any(|g| !g.is_finite()) {
            return None;
        }
        // ∂x_k/∂z_r = g_r([r < k] − x_k)
        let weighted: f64 = x.iter().zip(&gx).map(|(xk, gk)| xk * gk).sum();
        let n = self.m - 1;
        let mut gz = DVector::zeros(n);
        let mut suffix = 0.0;
        for r in (0..n).rev() {
            suffix += gx[r];
            // k > r runs over x_{r+1}, …, x_{m−1}, i.e. gx[r..]
            gz[r] = gaps[r] * (suffix - weighted);
        }
        Some((v, gz))
    }
}

fn bfgs<P: Potential + ?Sized>(obj: &Objective<P>, z0: DVector<f64>, gtol: f64) -> Result<DVector<f64>> {
    let n = z0.len();
    let mut z = z0;
    let (mut f, mut g) = obj
        .eval(&z)
        .ok_or_else(|| Error::domain("starting chain is not admissible"))?;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for _ in 0..BFGS_MAX_ITER {
        if g.norm() < gtol {
            break;
        }
        let mut dir = -(&hinv * &g);
        if dir.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let zt = &z + step * &dir;
            if let Some((ft, gt)) = obj.eval(&zt) {
                if ft <= f + 1e-4 * step * slope {
                    accepted = Some((zt, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((zn, fn_, gn)) = accepted else { break };
        let sv = &zn - &z;
        let yv = &gn - &g;
        let sy = sv.dot(&yv);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &sv * yv.transpose();
            let right = &i - rho * &yv * sv.transpose();
            hinv = &left * &hinv * &right + rho * &sv * sv.transpose();
        }
        z = zn;
        f = fn_;
        g = gn;
    }
    Ok(z)
}

/// Newton steps in `x` with a backtracking guard; stops when the gradient is
/// below `gtol` or no step helps.
fn newton_polish<P: Potential + ?Sized>(
    a: f64,
    b: f64,
    chain: ProfileChain,
    pot: &P,
    tol: f64,
    gtol: f64,
) -> Result<(ProfileChain, f64, f64)> {
    let m = chain.m();
    let mut chain = chain;
    let mut g = DVector::from_vec(f_m_gradient(a, b, &chain, pot, tol)?);
    for _ in 0..NEWTON_MAX_ITER {
        if g.norm() < gtol {
            break;
        }
        let h = f_m_hessian(a, b, &chain, pot, tol)?;
        let Some(step) = h.cholesky().map(|c| c.solve(&(-&g))) else { break };
        let mut t = 1.0;
        let mut improved = None;
        for _ in 0..30 {
            let x: Vec<f64> = chain.values().iter().zip(step.iter()).map(|(x, d)| x + t * d).collect();
            if let Ok(c) = ProfileChain::new(m, x) {
                let gn = DVector::from_vec(f_m_gradient(a, b, &c, pot, tol)?);
                if gn.norm() < g.norm() {
                    improved = Some((c, gn));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((c, gn)) = improved else { break };
        chain = c;
        g = gn;
    }
    let value = f_m(a, b, &chain, pot, tol)?.value;
    Ok((chain, value, g.norm()))
}

/// Minimises `F_m(a, b; ·)` over increasing chains, starting from `q_m` and
/// `multistart_count − 1` random perturbations of it (fixed seed). Returns the
/// lowest stationary point whose gradient norm is below `tol`.
pub fn minimize_f_m<P: Potential + ?Sized>(
    a: f64,
    b: f64,
    m: usize,
    pot: &P,
    tol: f64,
    multistart_count: usize,
) -> Result<ProfileMinimum> {
    check_slopes(a, b)?;
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let qm = ProfileChain::equispaced(m)?;
    let series_tol = (tol * 1e-3).max(1e-15);
    let obj = Objective { a, b, m, pot, tol: series_tol };
    let mut rng = ChaCha8Rng::seed_from_u64(PERTURBATION_SEED);
    let radius = 0.1 / m as f64;
    let mut best: Option<ProfileMinimum> = None;
    let mut worst_gradient = 0.0f64;
    for start in 0..multistart_count.max(1) {
        let init = if start == 0 {
            qm.clone()
        } else {
            let x: Vec<f64> = (1..m).map(|k| k as f64 / m as f64 + rng.random_range(-radius..radius)).collect();
            ProfileChain::new(m, x)?
        };
        let z = bfgs(&obj, z_from_chain(&init), tol)?;
        let (x, _) = chain_from_z(m, &z);
        let Ok(chain) = ProfileChain::new(m, x) else { continue };
        let (chain, value, gnorm) = newton_polish(a, b, chain, pot, series_tol, tol)?;
        if gnorm >= tol {
            worst_gradient = worst_gradient.max(gnorm);
            log::debug!("start {start}: stopped with gradient norm {gnorm:e}");
            continue;
        }
        if best.as_ref().is_none_or(|b| value < b.value - 1e-14) {
            best = Some(ProfileMinimum { chain, value, gradient_norm: gnorm, start });
        }
    }
    best.ok_or_else(|| Error::Convergence {
        iterations: BFGS_MAX_ITER,
        detail: format!("no start reached gradient norm {tol:e} (best {worst_gradient:e})"),
    })
}

/// `a_σ = (1382/675675)^{1/6} π σ`, the minimiser of `t ↦ Σ_j W_σ(jt)`.
pub fn a_sigma(sigma: f64) -> f64 {
    crate::lj_elastic_minimizer() * sigma
}

/// ```text
/// G(a, σ, m) = Σ_{j=1}^{m−2} (−j³ + 2j² − 1) W_σ'(aj) − (m−1) Σ_{j≥m−1} (j−1)(2j−m) W_σ'(aj)
/// ```
pub fn g_function(a: f64, sigma: f64, m: usize, tol: f64) -> Result<SumResult> {
    if m < 2 {
        return Err(Error::domain(format!("m must be at least 2, got {m}")));
    }
    check_slopes(a, a)?;
    let pot = LennardJones::new(sigma)?;
    let mf = m as f64;
    let mut acc = Accumulator::new();
    for j in 1..m.saturating_sub(1) {
        let jf = j as f64;
        acc.add((-jf * jf * jf + 2.0 * jf * jf - 1.0) * pot.derivative(1, a * jf));
    }
    // 0 ≤ (j−1)(2j−m) ≤ 2j² = 2(x/a)² for j ≥ m−1
    let tail = progression_sum(
        &pot,
        1,
        a * (mf - 1.0),
        a,
        |n| {
            let j = (m - 1 + n) as f64;
            (j - 1.0) * (2.0 * j - mf)
        },
        WeightGrowth::new(2.0 / (a * a), 2.0),
        tol / (mf - 1.0),
    )?;
    acc.add(-(mf - 1.0) * tail.value);
    Ok(SumResult {
        value: acc.value(),
        truncation_index: tail.truncation_index,
        tail_bound: (mf - 1.0) * tail.tail_bound,
    })
}

/// Result of [`optimal_m`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalM {
    /// The `m` whose interaction `|σG(a_σ, σ, m)|` is smallest.
    pub m: usize,
    /// `(m, σG(a_σ, σ, m))` for `m = 2, …, m_max`.
    pub values: Vec<(usize, f64)>,
    /// Set when the selected `m` is `m_max`, so a larger range could change it.
    pub at_range_end: bool,
    /// The `m` with the most negative `σG`.
    pub signed_argmin: usize,
}

/// Scans `σG(a_σ, σ, m)` over `m = 2, …, m_max` and picks the `m` with the
/// weakest second-order interaction.
pub fn optimal_m(sigma: f64, m_max: usize, tol: f64) -> Result<OptimalM> {
    if m_max < 2 {
        return Err(Error::domain(format!("m_max must be at least 2, got {m_max}")));
    }
    let a = a_sigma(sigma);
    let values = (2..=m_max)
        .map(|m| g_function(a, sigma, m, tol / sigma).map(|g| (m, sigma * g.value)))
        .collect::<Result<Vec<_>>>()?;
    let pick = |key: fn(f64) -> f64| {
        values
            .iter()
            .fold(None::<(usize, f64)>, |best, &(m, v)| match best {
                Some((_, bv)) if key(bv) <= key(v) => best,
                _ => Some((m, v)),
            })
            .map(|(m, _)| m)
            .unwrap_or(2)
    };
    let m = pick(f64::abs);
    let signed_argmin = pick(|v| v);
    if m == m_max {
        log::warn!("optimal m is the end of the range {m_max}; the range may be too small");
    }
    Ok(OptimalM { m, values, at_range_end: m == m_max, signed_argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lj() -> LennardJones {
        LennardJones::new(1.0).unwrap()
    }

    #[test]
    fn vanishes_at_qm() {
        let p = lj();
        for m in 2..8 {
            let q = ProfileChain::equispaced(m).unwrap();
            for (a, b) in [(1.0, 1.0), (0.9, 1.3), (1.4, 1.05)] {
                let r = f_m(a, b, &q, &p, 1e-13).unwrap();
                assert!(r.value.abs() < 1e-12, "m={m} ({a},{b}): {}", r.value);
            }
        }
    }

    #[test]
    fn m2_sample_value_positive() {
        let c = ProfileChain::new(2, vec![0.45]).unwrap();
        let p = lj();
        assert!(f_m(1.1193, 1.1193, &c, &p, 1e-12).unwrap().value > 0.0);
        let g = f_m_gradient(1.1193, 1.1193, &ProfileChain::equispaced(2).unwrap(), &p, 1e-13).unwrap();
        assert!(g[0].abs() < 1e-11);
    }

    #[test]
    fn blows_up_at_boundary() {
        let p = lj();
        let near = ProfileChain::new(3, vec![1e-3, 0.5]).unwrap();
        assert!(f_m(1.1, 1.1, &near, &p, 1e-10).unwrap().value > 1e10);
        let merge = ProfileChain::new(3, vec![0.5, 0.5 + 1e-3]).unwrap();
        assert!(f_m(1.1, 1.1, &merge, &p, 1e-10).unwrap().value > 1e10);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let p = lj();
        let c = ProfileChain::new(4, vec![0.2, 0.55, 0.71]).unwrap();
        let (a, b) = (1.05, 1.2);
        let g = f_m_gradient(a, b, &c, &p, 1e-14).unwrap();
        let h = f_m_hessian(a, b, &c, &p, 1e-14).unwrap();
        let shift = |k: usize, d: f64| {
            let mut x = c.values().to_vec();
            x[k] += d;
            ProfileChain::new(4, x).unwrap()
        };
        let step = 1e-6;
        for k in 0..3 {
            let fd = (f_m(a, b, &shift(k, step), &p, 1e-15).unwrap().value - f_m(a, b, &shift(k, -step), &p, 1e-15).unwrap().value) / (2.0 * step);
            assert_relative_eq!(g[k], fd, max_relative = 1e-6);
            let gp = f_m_gradient(a, b, &shift(k, step), &p, 1e-15).unwrap();
            let gm = f_m_gradient(a, b, &shift(k, -step), &p, 1e-15).unwrap();
            for l in 0..3 {
                assert_relative_eq!(h[(l, k)], (gp[l] - gm[l]) / (2.0 * step), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn general_hessian_reduces_at_qm() {
        let p = lj();
        for m in [2, 3, 5] {
            let q = ProfileChain::equispaced(m).unwrap();
            let h = f_m_hessian(1.12, 1.12, &q, &p, 1e-14).unwrap();
            let hq = hessian_at_qm(1.12, m, &p, 1e-14).unwrap();
            assert!((h - hq).abs().max() < 1e-9);
        }
    }

    #[test]
    fn m2_critical_slope_closed_form() {
        let closed = (8.0f64 / 2079.0).powf(1.0 / 6.0) * std::f64::consts::PI;
        let a = critical_a(2, &lj(), 1e-12).unwrap();
        assert!((a - closed).abs() < 1e-9, "{a} vs {closed}");
        let a = critical_a(2, &LennardJones::new(2.0).unwrap(), 1e-12).unwrap();
        assert!((a - 2.0 * closed).abs() < 2e-9);
    }

    #[test]
    fn minimizer_equal_slopes_is_qm() {
        let p = lj();
        let a = a_sigma(1.0);
        for m in [2, 3] {
            let r = minimize_f_m(a, a, m, &p, 1e-9, 3).unwrap();
            for (x, q) in r.chain.values().iter().zip(ProfileChain::equispaced(m).unwrap().values()) {
                assert!((x - q).abs() < 1e-6);
            }
            assert!(r.value.abs() < 1e-10);
        }
    }

    #[test]
    fn unequal_slopes_move_the_minimizer() {
        let p = lj();
        let q = ProfileChain::equispaced(3).unwrap();
        let g = f_m_gradient(1.0, 1.2, &q, &p, 1e-13).unwrap();
        assert!(g.iter().any(|v| v.abs() > 1e-3));
        let r = minimize_f_m(1.0, 1.2, 3, &p, 1e-8, 3).unwrap();
        assert!(r.gradient_norm < 1e-8);
        assert!(r.value <= f_m(1.0, 1.2, &q, &p, 1e-13).unwrap().value);
    }

    #[test]
    fn g_values_and_sigma_invariance() {
        let g2 = g_function(a_sigma(1.0), 1.0, 2, 1e-13).unwrap().value;
        assert!((g2 + 0.0570514).abs() < 1e-6);
        let g6 = g_function(a_sigma(1.0), 1.0, 6, 1e-13).unwrap().value;
        assert!((g6 + 0.0452401).abs() < 1e-6);
        for sigma in [0.5, 2.0] {
            let s = sigma * g_function(a_sigma(sigma), sigma, 6, 1e-14).unwrap().value;
            assert!((s - g6).abs() < 1e-10);
        }
    }

    #[test]
    fn optimal_m_with_flag() {
        let r = optimal_m(1.0, 5, 1e-12).unwrap();
        assert_eq!(r.m, 5);
        assert!(r.at_range_end);
        assert_eq!(r.signed_argmin, 3);
        assert!(optimal_m(1.0, 1, 1e-12).is_err());
    }
}
