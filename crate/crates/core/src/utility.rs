//! Alpha-fair utilities of hit rate and the capacity penalty.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Member of the alpha-fair family.
///
/// `AlphaFair(a)` evaluates `(h^{1-a} - 1)/(1 - a)` (log at `a = 1`). The
/// named members use their conventional forms: `Linear` is `h`, `Log` is
/// `log h`, `NegInverse` is `-1/h`. These differ from `AlphaFair(0)` and
/// `AlphaFair(2)` by additive constants only, so every argmax coincides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind<S> {
    AlphaFair(S),
    Log,
    Linear,
    NegInverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec<S> {
    pub kind: UtilityKind<S>,
    pub weight: S,
}

impl<S: Real> UtilitySpec<S> {
    pub fn new(kind: UtilityKind<S>, weight: S) -> Result<Self> {
        let spec = Self { kind, weight };
        spec.validate()?;
        Ok(spec)
    }

    pub fn log() -> Self {
        Self { kind: UtilityKind::Log, weight: S::one() }
    }

    pub fn linear() -> Self {
        Self { kind: UtilityKind::Linear, weight: S::one() }
    }

    pub fn neg_inverse() -> Self {
        Self { kind: UtilityKind::NegInverse, weight: S::one() }
    }

    pub fn alpha_fair(alpha: S) -> Self {
        Self { kind: UtilityKind::AlphaFair(alpha), weight: S::one() }
    }

    pub fn weighted(self, weight: S) -> Self {
        Self { weight, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= S::zero()) || !self.weight.is_finite() {
            return Err(Error::Invalid(format!("utility weight {} must be >= 0", self.weight)));
        }
        if let UtilityKind::AlphaFair(a) = self.kind {
            if !(a >= S::zero()) || !a.is_finite() {
                return Err(Error::Invalid(format!("alpha {a} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> S {
        match self.kind {
            UtilityKind::AlphaFair(a) => a,
            UtilityKind::Log => S::one(),
            UtilityKind::Linear => S::zero(),
            UtilityKind::NegInverse => S::lit(2.0),
        }
    }

    /// Strictly concave in `h` (every member except `alpha = 0`).
    pub fn is_strictly_concave(&self) -> bool {
        self.alpha() > S::zero()
    }

    fn check_domain(&self, h: S) -> Result<()> {
        let a = self.alpha();
        if !(h >= S::zero()) || !h.is_finite() {
            return Err(Error::Domain(format!("hit rate {h} must be finite and >= 0")));
        }
        if a >= S::one() && h == S::zero() {
            return Err(Error::Domain(format!("alpha = {a} utility undefined at zero hit rate")));
        }
        Ok(())
    }

    /// `w U(h)`.
    pub fn value(&self, h: S) -> Result<S> {
        self.check_domain(h)?;
        let u = match self.kind {
            UtilityKind::Linear => h,
            UtilityKind::Log => h.ln(),
            UtilityKind::NegInverse => -h.recip(),
            UtilityKind::AlphaFair(a) => {
                if a == S::one() {
                    h.ln()
                } else {
                    let e = S::one() - a;
                    // (h^e - 1)/e, accurate as e -> 0.
                    (e * h.ln()).exp_m1() / e
                }
            }
        };
        Ok(self.weight * u)
    }

    /// `w U'(h) = w h^{-alpha}`.
    pub fn derivative(&self, h: S) -> Result<S> {
        self.check_domain(h)?;
        let a = self.alpha();
        let d = match self.kind {
            UtilityKind::Linear => S::one(),
            UtilityKind::Log => h.recip(),
            UtilityKind::NegInverse => (h * h).recip(),
            UtilityKind::AlphaFair(_) => {
                if a == S::zero() {
                    S::one()
                } else {
                    h.powf(-a)
                }
            }
        };
        Ok(self.weight * d)
    }

    /// `w U''(h) = -alpha w h^{-alpha-1}`.
    pub fn second_derivative(&self, h: S) -> Result<S> {
        self.check_domain(h)?;
        let a = self.alpha();
        if a == S::zero() {
            return Ok(S::zero());
        }
        Ok(-a * self.weight * h.powf(-a - S::one()))
    }

    /// Inverse marginal: the `h` with `w U'(h) = m`, for `m > 0` and a strictly
    /// concave member.
    pub fn inverse_derivative(&self, m: S) -> Result<S> {
        let a = self.alpha();
        if !(a > S::zero()) || !(m > S::zero()) || !(self.weight > S::zero()) {
            return Err(Error::Domain(format!("no inverse marginal at {m} for alpha {a}")));
        }
        Ok((self.weight / m).powf(a.recip()))
    }
}

/// Convex, non-decreasing cost of capacity beyond the base size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind<S> {
    /// `P(x) = slope * x`.
    Linear { slope: S },
    /// `P(x) = slope * x + curvature * x^2 / 2`.
    Quadratic { slope: S, curvature: S },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec<S> {
    pub kind: PenaltyKind<S>,
    pub base_capacity: S,
}

impl<S: Real> PenaltySpec<S> {
    pub fn new(kind: PenaltyKind<S>, base_capacity: S) -> Result<Self> {
        let (slope, curvature) = match kind {
            PenaltyKind::Linear { slope } => (slope, S::zero()),
            PenaltyKind::Quadratic { slope, curvature } => (slope, curvature),
        };
        if !(slope >= S::zero()) || !(curvature >= S::zero()) {
            return Err(Error::Invalid("penalty slope and curvature must be >= 0".into()));
        }
        Ok(Self { kind, base_capacity })
    }

    /// `P(x)`, zero for `x <= 0`.
    pub fn value(&self, excess: S) -> S {
        if excess <= S::zero() {
            return S::zero();
        }
        match self.kind {
            PenaltyKind::Linear { slope } => slope * excess,
            PenaltyKind::Quadratic { slope, curvature } => slope * excess + curvature * excess * excess / S::lit(2.0),
        }
    }

    /// `P'(x)`, zero for `x <= 0`.
    pub fn derivative(&self, excess: S) -> S {
        if excess <= S::zero() {
            return S::zero();
        }
        match self.kind {
            PenaltyKind::Linear { slope } => slope,
            PenaltyKind::Quadratic { slope, curvature } => slope + curvature * excess,
        }
    }

    /// `eta = P'(0+)`.
    pub fn eta(&self) -> S {
        match self.kind {
            PenaltyKind::Linear { slope } | PenaltyKind::Quadratic { slope, .. } => slope,
        }
    }
}

/// `sum_k w_k U_k(h_k) - P(sum C - C_base)`; without a penalty the sizes
/// only need to be non-negative.
pub fn objective<S: Real>(specs: &[UtilitySpec<S>], hits: &[S], penalty: Option<&PenaltySpec<S>>, sizes: &[S]) -> Result<S> {
    if specs.len() != hits.len() {
        return Err(Error::Invalid(format!("{} utilities for {} hit rates", specs.len(), hits.len())));
    }
    if sizes.iter().any(|c| !(*c >= S::zero())) {
        return Err(Error::Invalid("partition sizes must be >= 0".into()));
    }
    let mut total = S::zero();
    for (spec, &h) in specs.iter().zip(hits) {
        total = total + spec.value(h)?;
    }
    if let Some(p) = penalty {
        let used = S::kahan_sum(sizes.iter().copied());
        total = total - p.value(used - p.base_capacity);
    }
    Ok(total)
}
