//! Brute-force atomistic energies
//! `E_ε = (1/2N) Σ_{i≠j} W((u(εj) − u(εi))/ε)`.
//!
//! Pair arguments are never formed as differences of positions: a
//! configuration stores its scaled gaps `(u_{k+1} − u_k)/ε` and the argument
//! of the pair `(i, j)` is the running sum of the gaps between them, built
//! with `j − i` ascending. This keeps the `ε²` part of the energy intact down
//! to `ε ≈ 10⁻⁴`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::summation::{self, Accumulator};

/// Values of a deformation on consecutive lattice sites `k₁..=k₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteConfiguration {
    k1: i64,
    values: Vec<f64>,
    gaps: Vec<f64>,
    eps: f64,
}

impl DiscreteConfiguration {
    /// Gaps taken as plain differences of `values`.
    pub fn new(k1: i64, values: Vec<f64>, eps: f64) -> Result<Self> {
        let gaps = values.windows(2).map(|w| (w[1] - w[0]) / eps).collect();
        Self::with_gaps(k1, values, gaps, eps)
    }

    /// `gaps[k]` is `(values[k+1] − values[k])/ε`, supplied to full precision.
    pub fn with_gaps(k1: i64, values: Vec<f64>, gaps: Vec<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain(format!("eps must be positive, got {eps}")));
        }
        if values.len() < 2 {
            return Err(Error::domain("a configuration needs at least 2 sites"));
        }
        if gaps.len() + 1 != values.len() {
            return Err(Error::domain("need one gap per pair of neighbouring sites"));
        }
        if let Some(k) = values.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::domain(format!(
                "values must increase strictly (sites {} and {})",
                k1 + k as i64,
                k1 + k as i64 + 1
            )));
        }
        if gaps.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::domain("scaled gaps must be positive"));
        }
        Ok(Self { k1, values, gaps, eps })
    }

    pub fn k1(&self) -> i64 {
        self.k1
    }

    pub fn k2(&self) -> i64 {
        self.k1 + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.k1..=self.k2()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The mirror image `x ↦ −x`, `u ↦ −u`.
    pub fn reversed(&self) -> Self {
        Self {
            k1: -self.k2(),
            values: self.values.iter().rev().map(|v| -v).collect(),
            gaps: self.gaps.iter().rev().copied().collect(),
            eps: self.eps,
        }
    }

    pub fn translated(&self, shift: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + shift).collect(), ..self.clone() }
    }
}

/// `Σ_{j>i} W(arg(i, j))` over one row, separations ascending.
fn row_sum<P: Potential + ?Sized>(pot: &P, gaps: &[f64], i: usize) -> f64 {
    let mut acc = Accumulator::new();
    let mut arg = 0.0;
    for g in &gaps[i..] {
        arg += g;
        acc.add(pot.value(arg));
    }
    acc.value()
}

/// `E_ε(u_ε) = (1/N) Σ_{i<j} W(arg(i, j))`, `O(N²)`.
///
/// Rows are summed in parallel and combined in site order, so the result is
/// the same for any number of threads.
pub fn atomistic_energy<P: Potential + ?Sized>(cfg: &DiscreteConfiguration, pot: &P) -> Result<f64> {
    let n = cfg.len();
    let rows: Vec<f64> = (0..n - 1).into_par_iter().map(|i| row_sum(pot, &cfg.gaps, i)).collect();
    Ok(summation::sum(rows) / n as f64)
}

/// `E_ε(a) − E_ε(b)` summed only over pairs with at least one changed site.
///
/// A site is changed when its value differs between the two configurations;
/// pairs of unchanged sites have equal arguments and cancel exactly.
pub fn energy_difference<P: Potential + ?Sized>(
    cfg_a: &DiscreteConfiguration,
    cfg_b: &DiscreteConfiguration,
    pot: &P,
) -> Result<f64> {
    if cfg_a.k1 != cfg_b.k1 || cfg_a.len() != cfg_b.len() {
        return Err(Error::MismatchedSites(format!(
            "{}..={} vs {}..={}",
            cfg_a.k1,
            cfg_a.k2(),
            cfg_b.k1,
            cfg_b.k2()
        )));
    }
    if cfg_a.eps != cfg_b.eps {
        return Err(Error::MismatchedSites(format!("eps {} vs {}", cfg_a.eps, cfg_b.eps)));
    }
    let n = cfg_a.len();
    let changed: Vec<bool> = cfg_a.values.iter().zip(&cfg_b.values).map(|(x, y)| x != y).collect();
    let sites: Vec<usize> = (0..n).filter(|&i| changed[i]).collect();
    let (ga, gb) = (&cfg_a.gaps, &cfg_b.gaps);
    let rows: Vec<f64> = sites
        .par_iter()
        .map(|&s| {
            let mut acc = Accumulator::new();
            let (mut xa, mut xb) = (0.0, 0.0);
            for p in s + 1..n {
                xa += ga[p - 1];
                xb += gb[p - 1];
                acc.add(pot.value(xa) - pot.value(xb));
            }
            let (mut xa, mut xb) = (0.0, 0.0);
            for p in (0..s).rev() {
                xa += ga[p];
                xb += gb[p];
                if !changed[p] {
                    acc.add(pot.value(xa) - pot.value(xb));
                }
            }
            acc.value()
        })
        .collect();
    Ok(summation::sum(rows) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::LennardJones;
    use approx::assert_relative_eq;

    fn lj() -> LennardJones {
        LennardJones::new(1.0).unwrap()
    }

    #[test]
    fn three_sites() {
        let cfg = DiscreteConfiguration::new(-1, vec![-1.0, 0.0, 1.0], 1.0).unwrap();
        let e = atomistic_energy(&cfg, &lj()).unwrap();
        let expected = (2f64.powi(-12) - 2f64.powi(-6)) / 3.0;
        assert_relative_eq!(e, expected, max_relative = 1e-15);
        assert!((e + 0.00512695).abs() < 1e-8);
    }

    #[test]
    fn two_sites() {
        let p = lj();
        let cfg = DiscreteConfiguration::new(0, vec![0.0, 0.03], 0.02).unwrap();
        assert_relative_eq!(atomistic_energy(&cfg, &p).unwrap(), p.value(1.5) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn invariances() {
        let p = lj();
        let vals: Vec<f64> = (0..40).map(|k| 0.1 * k as f64 + 0.002 * (k * k) as f64).collect();
        let cfg = DiscreteConfiguration::new(-20, vals, 0.1).unwrap();
        let e = atomistic_energy(&cfg, &p).unwrap();
        assert_relative_eq!(atomistic_energy(&cfg.translated(3.7), &p).unwrap(), e, max_relative = 1e-12);
        assert_relative_eq!(atomistic_energy(&cfg.reversed(), &p).unwrap(), e, max_relative = 1e-13);
        assert_eq!(energy_difference(&cfg, &cfg, &p).unwrap(), 0.0);
    }

    #[test]
    fn coincident_values_rejected() {
        assert!(DiscreteConfiguration::new(0, vec![0.0, 0.0, 1.0], 0.5).is_err());
        assert!(DiscreteConfiguration::new(0, vec![0.0], 0.5).is_err());
    }

    #[test]
    fn difference_matches_naive_subtraction() {
        let p = lj();
        let base: Vec<f64> = (0..60).map(|k| 1.1 * k as f64).collect();
        let mut moved = base.clone();
        moved[30] += 0.2;
        moved[31] += 0.1;
        let a = DiscreteConfiguration::new(0, moved, 1.0).unwrap();
        let b = DiscreteConfiguration::new(0, base, 1.0).unwrap();
        let d = energy_difference(&a, &b, &p).unwrap();
        let naive = atomistic_energy(&a, &p).unwrap() - atomistic_energy(&b, &p).unwrap();
        assert_relative_eq!(d, naive, max_relative = 1e-10);
        let c = DiscreteConfiguration::new(1, (0..60).map(|k| k as f64).collect(), 1.0).unwrap();
        assert!(matches!(energy_difference(&a, &c, &p), Err(Error::MismatchedSites(_))));
    }
}
