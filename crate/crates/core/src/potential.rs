//! Two-body potentials.
//!
//! A potential is an even function `W` of the pair distance; only `t > 0` is
//! ever evaluated. Every potential carries a [`DecayEnvelope`] bounding its
//! derivatives far from the origin, `|W⁽ⁱ⁾(t)| ≤ Cᵢ t^(−α−i)` for `t ≥ R`.
//! All series truncation in [`crate::series`] is driven by that envelope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order any formula in this crate consumes.
pub const MAX_ORDER: usize = 4;

/// Safety factor applied to numerically maximised envelope constants.
const ENVELOPE_SAFETY: f64 = 1.01;

/// Power-law bound on a potential and its first derivatives beyond an onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    /// `Cᵢ` for derivative orders `0..=MAX_ORDER`.
    constants: [f64; MAX_ORDER + 1],
    onset: f64,
    alpha: f64,
}

impl DecayEnvelope {
    /// Envelope with the same constant for every derivative order.
    pub fn uniform(c: f64, onset: f64, alpha: f64) -> Result<Self> {
        Self::per_order([c; MAX_ORDER + 1], onset, alpha)
    }

    pub fn per_order(constants: [f64; MAX_ORDER + 1], onset: f64, alpha: f64) -> Result<Self> {
        if !(onset > 0.0 && onset.is_finite()) {
            return Err(Error::domain(format!("envelope onset must be positive, got {onset}")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("envelope exponent must exceed 1, got {alpha}")));
        }
        if constants.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::domain("envelope constants must be finite and nonnegative"));
        }
        Ok(Self { constants, onset, alpha })
    }

    /// Maximises `|f(i, t)| t^(α+i)` over a log-spaced grid on `[onset, 10⁶ onset]`
    /// for each order and inflates the result by a small safety factor.
    pub fn fit(f: impl Fn(usize, f64) -> f64, onset: f64, alpha: f64) -> Result<Self> {
        const SAMPLES: usize = 4001;
        let mut constants = [0.0; MAX_ORDER + 1];
        for (order, c) in constants.iter_mut().enumerate() {
            let mut best: f64 = 0.0;
            for k in 0..SAMPLES {
                let t = onset * 10f64.powf(6.0 * k as f64 / (SAMPLES - 1) as f64);
                let scaled = f(order, t).abs() * t.powf(alpha + order as f64);
                best = best.max(scaled);
            }
            *c = best * ENVELOPE_SAFETY;
        }
        Self::per_order(constants, onset, alpha)
    }

    pub fn constant(&self, order: usize) -> f64 {
        self.constants[order.min(MAX_ORDER)]
    }

    pub fn constants(&self) -> &[f64; MAX_ORDER + 1] {
        &self.constants
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Cᵢ t^(−α−i)`, without checking that `t` is past the onset.
    #[inline]
    pub fn bound_unchecked(&self, order: usize, t: f64) -> f64 {
        self.constant(order) * t.powf(-self.alpha - order as f64)
    }

    /// Checks the envelope against `f` on `samples` log-spaced points in
    /// `[onset, 10⁴ onset]`; returns the first violating `(order, t)`.
    pub fn find_violation(
        &self,
        f: impl Fn(usize, f64) -> f64,
        max_order: usize,
        samples: usize,
    ) -> Option<(usize, f64)> {
        for order in 0..=max_order.min(MAX_ORDER) {
            for k in 0..samples {
                let t = self.onset * 10f64.powf(4.0 * k as f64 / (samples.max(2) - 1) as f64);
                if f(order, t).abs() > self.bound_unchecked(order, t) {
                    return Some((order, t));
                }
            }
        }
        None
    }
}

/// An even two-body interaction evaluated on `t > 0`.
pub trait Potential: Send + Sync {
    /// `W⁽ᵒʳᵈᵉʳ⁾(t)` for `t > 0` and `order ≤ MAX_ORDER`; arguments are not checked.
    fn derivative(&self, order: usize, t: f64) -> f64;

    fn envelope(&self) -> &DecayEnvelope;

    #[inline]
    fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    #[inline]
    fn derivative(&self, order: usize, t: f64) -> f64 {
        (**self).derivative(order, t)
    }

    fn envelope(&self) -> &DecayEnvelope {
        (**self).envelope()
    }
}

impl<P: Potential + ?Sized> Potential for Box<P> {
    #[inline]
    fn derivative(&self, order: usize, t: f64) -> f64 {
        (**self).derivative(order, t)
    }

    fn envelope(&self) -> &DecayEnvelope {
        (**self).envelope()
    }
}

/// Checked evaluation of `W⁽ᵒʳᵈᵉʳ⁾(t)`.
pub fn eval_potential<P: Potential + ?Sized>(p: &P, order: usize, t: f64) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("potential evaluated at t = {t} <= 0")));
    }
    Ok(p.derivative(order, t))
}

/// Upper bound `Cᵢ t^(−α−i)` on `|W⁽ⁱ⁾(t)|`, valid for `t ≥ R`.
pub fn envelope_bound<P: Potential + ?Sized>(p: &P, order: usize, t: f64) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let env = p.envelope();
    if !(t >= env.onset()) {
        return Err(Error::EnvelopeNotApplicable { t, onset: env.onset() });
    }
    Ok(env.bound_unchecked(order, t))
}

/// `W_σ(t) = (σ/t)¹² − (σ/t)⁶`.
#[derive(Debug, Clone, PartialEq)]
pub struct LennardJones {
    sigma: f64,
    envelope: DecayEnvelope,
}

/// Falling-factorial magnitudes `n (n+1) ⋯ (n+i−1)` for `n = 12` and `n = 6`.
const RISING_12: [f64; MAX_ORDER + 1] = [1.0, 12.0, 156.0, 2184.0, 32760.0];
const RISING_6: [f64; MAX_ORDER + 1] = [1.0, 6.0, 42.0, 336.0, 3024.0];

impl LennardJones {
    /// Lennard-Jones potential with a numerically fitted envelope
    /// (`α = 6`, `R = σ`).
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        let envelope = DecayEnvelope::fit(|i, t| lj_derivative(sigma, i, t), sigma, 6.0)?;
        Ok(Self { sigma, envelope })
    }

    /// Lennard-Jones potential with a caller-supplied envelope, spot-checked
    /// on a grid before it is accepted.
    pub fn with_envelope(sigma: f64, envelope: DecayEnvelope) -> Result<Self> {
        let lj = Self::new(sigma)?;
        if let Some((order, t)) =
            envelope.find_violation(|i, t| lj_derivative(sigma, i, t), MAX_ORDER, 1000)
        {
            return Err(Error::domain(format!(
                "envelope override violated at order {order}, t = {t}"
            )));
        }
        Ok(Self { envelope, ..lj })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

#[inline]
fn lj_derivative(sigma: f64, order: usize, t: f64) -> f64 {
    let s = sigma / t;
    let s6 = s * s * s * s * s * s;
    let base = RISING_12[order] * s6 * s6 - RISING_6[order] * s6;
    match order {
        0 => base,
        1 => -base / t,
        2 => base / (t * t),
        3 => -base / (t * t * t),
        _ => base / (t * t * t * t),
    }
}

impl Potential for LennardJones {
    #[inline]
    fn derivative(&self, order: usize, t: f64) -> f64 {
        lj_derivative(self.sigma, order, t)
    }

    fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }
}

type DerivativeFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// A potential given by a closure, for test functions and user-built
/// combinations. The envelope is taken on trust.
pub struct FnPotential {
    f: Box<DerivativeFn>,
    envelope: DecayEnvelope,
}

impl FnPotential {
    pub fn new(f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static, envelope: DecayEnvelope) -> Self {
        Self { f: Box::new(f), envelope }
    }
}

impl std::fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnPotential").field("envelope", &self.envelope).finish_non_exhaustive()
    }
}

impl Potential for FnPotential {
    #[inline]
    fn derivative(&self, order: usize, t: f64) -> f64 {
        (self.f)(order, t)
    }

    fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }
}

/// Envelope fields a config file may override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeOverride {
    pub c: Option<f64>,
    pub onset: Option<f64>,
    pub alpha: Option<f64>,
}

/// Potential description as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub envelope: Option<EnvelopeOverride>,
}

fn default_sigma() -> f64 {
    1.0
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self { kind: "lennard-jones".into(), sigma: 1.0, envelope: None }
    }
}

impl PotentialSpec {
    pub fn build(&self) -> Result<LennardJones> {
        match self.kind.as_str() {
            "lennard-jones" | "lj" => {
                let lj = LennardJones::new(self.sigma)?;
                match &self.envelope {
                    None => Ok(lj),
                    Some(o) => {
                        let base = lj.envelope();
                        let onset = o.onset.unwrap_or(base.onset());
                        let alpha = o.alpha.unwrap_or(base.alpha());
                        let env = match o.c {
                            Some(c) => DecayEnvelope::uniform(c, onset, alpha)?,
                            None => DecayEnvelope::per_order(*base.constants(), onset, alpha)?,
                        };
                        LennardJones::with_envelope(self.sigma, env)
                    }
                }
            }
            other => Err(Error::domain(format!("unknown potential kind `{other}`"))),
        }
    }
}
