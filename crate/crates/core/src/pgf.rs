//! Offspring distributions with finite support and their probability
//! generating functions.
//!
//! A law is stored as the table `probs[k] = P(family size = k)`. The
//! generating function `G(x) = Σ probs[k] x^k` and its first two derivatives
//! are evaluated exactly as polynomials by Horner's rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported family size.
pub const MAX_FAMILY_SIZE: usize = 1 << 16;

/// Sums within this distance of 1 are silently renormalised.
const NORMALIZE_SLACK: f64 = 1e-9;

/// Clause of the offspring-law contract that a law fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// `G(0) = p_0` must vanish in strict mode.
    ExtinctionMass { p0: f64 },
    /// The mean must lie strictly above one.
    NotSupercritical { mean: f64 },
    /// A probability is outside `[0, 1]` or not finite.
    BadProbability { index: usize, value: f64 },
    /// Probabilities do not sum to one.
    BadTotal { total: f64 },
    /// No family sizes or more than [`MAX_FAMILY_SIZE`].
    BadSupport { len: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ExtinctionMass { p0 } => write!(f, "G(0) = {p0} but strict mode requires G(0) = 0"),
            Violation::NotSupercritical { mean } => write!(f, "mean G'(1) = {mean} must satisfy 1 < G'(1) < inf"),
            Violation::BadProbability { index, value } => {
                write!(f, "probability of family size {index} is {value}, outside [0, 1]")
            }
            Violation::BadTotal { total } => write!(f, "probabilities sum to {total}, not 1"),
            Violation::BadSupport { len } => {
                write!(f, "support of length {len} is empty or exceeds {}", MAX_FAMILY_SIZE + 1)
            }
        }
    }
}

/// Family-size distribution of a Galton–Watson process.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    mean: f64,
    /// `Some(m)` when every family has exactly `m` children.
    fixed: Option<usize>,
}

impl OffspringLaw {
    /// Every individual has exactly `m` children, so `G(x) = x^m`.
    pub fn deterministic(m: usize) -> Self {
        assert!(m <= MAX_FAMILY_SIZE, "family size {m} exceeds {MAX_FAMILY_SIZE}");
        let mut probs = vec![0.0; m + 1];
        probs[m] = 1.0;
        OffspringLaw { probs, mean: m as f64, fixed: Some(m) }
    }

    /// Builds a law from `probs[k] = P(X = k)`.
    ///
    /// Totals within `1e-9` of one are renormalised; anything further off is
    /// rejected. Supercriticality is not checked here; see [`validate`].
    ///
    /// [`validate`]: OffspringLaw::validate
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.len() > MAX_FAMILY_SIZE + 1 {
            return Err(Error::InvalidLaw(Violation::BadSupport { len: probs.len() }));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidLaw(Violation::BadProbability { index, value }));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() >= NORMALIZE_SLACK {
            return Err(Error::InvalidLaw(Violation::BadTotal { total }));
        }
        let mut probs: Vec<f64> = probs.into_iter().map(|v| v / total).collect();
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        let mean = probs.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        let fixed = probs
            .iter()
            .position(|&v| v == 1.0)
            .filter(|_| probs.iter().filter(|&&v| v > 0.0).count() == 1);
        Ok(OffspringLaw { probs, mean, fixed })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(X = k)`, zero outside the support.
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_family_size(&self) -> usize {
        self.probs.len() - 1
    }

    /// The common family size of a deterministic law.
    pub fn fixed_size(&self) -> Option<usize> {
        self.fixed
    }

    /// Checks the contract: mean in `(1, ∞)` and, in strict mode, `G(0) = 0`.
    pub fn validate(&self, strict: bool) -> std::result::Result<(), Violation> {
        let p0 = self.prob(0);
        if strict && p0 > 0.0 {
            return Err(Violation::ExtinctionMass { p0 });
        }
        if !(self.mean > 1.0 && self.mean.is_finite()) {
            return Err(Violation::NotSupercritical { mean: self.mean });
        }
        Ok(())
    }

    /// `validate` lifted into the crate error type.
    pub fn ensure_valid(&self, strict: bool) -> Result<()> {
        self.validate(strict).map_err(Error::InvalidLaw)
    }

    /// `G(x)`, `G'(x)` or `G''(x)` for `order` 0, 1 or 2.
    pub fn eval(&self, x: f64, order: u8) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("generating function argument {x} outside [0, 1]")));
        }
        if order > 2 {
            return Err(Error::domain(format!("derivative order {order} not supported (max 2)")));
        }
        Ok(self.horner(x, order))
    }

    /// Unchecked Horner evaluation. Callers guarantee `x ∈ [0, 1]`.
    pub(crate) fn horner(&self, x: f64, order: u8) -> f64 {
        let order = order as usize;
        let mut acc = 0.0;
        for k in (order..self.probs.len()).rev() {
            let falling = match order {
                0 => 1.0,
                1 => k as f64,
                _ => (k * (k - 1)) as f64,
            };
            acc = acc * x + self.probs[k] * falling;
        }
        acc
    }

    pub(crate) fn g(&self, x: f64) -> f64 {
        self.horner(x, 0)
    }

    pub(crate) fn g1(&self, x: f64) -> f64 {
        self.horner(x, 1)
    }

    /// Draws a family size from a uniform variate `u ∈ [0, 1)`.
    pub(crate) fn sample_with(&self, u: f64) -> usize {
        if let Some(m) = self.fixed {
            return m;
        }
        let mut acc = 0.0;
        for (k, &v) in self.probs.iter().enumerate() {
            acc += v;
            if u < acc {
                return k;
            }
        }
        self.max_family_size()
    }
}

/// Serialised form: `{"kind":"deterministic","m":2}` or
/// `{"kind":"table","probs":[0,0.4,0.6]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Deterministic { m: usize },
    Table { probs: Vec<f64> },
}

impl LawSpec {
    pub fn build(&self) -> Result<OffspringLaw> {
        match self {
            LawSpec::Deterministic { m } => {
                if *m > MAX_FAMILY_SIZE {
                    return Err(Error::InvalidLaw(Violation::BadSupport { len: m + 1 }));
                }
                Ok(OffspringLaw::deterministic(*m))
            }
            LawSpec::Table { probs } => OffspringLaw::from_probs(probs.clone()),
        }
    }
}

impl From<&OffspringLaw> for LawSpec {
    fn from(law: &OffspringLaw) -> Self {
        match law.fixed_size() {
            Some(m) => LawSpec::Deterministic { m },
            None => LawSpec::Table { probs: law.probs.clone() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> OffspringLaw {
        OffspringLaw::from_probs(vec![0.0, 0.4, 0.6]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let bin = OffspringLaw::deterministic(2);
        assert_eq!(bin.eval(0.5, 0).unwrap(), 0.25);
        assert_eq!(bin.eval(1.0, 1).unwrap(), 2.0);
        assert!((mixed().eval(0.5, 0).unwrap() - 0.35).abs() < 1e-15);
        assert_eq!(bin.eval(0.3, 2).unwrap(), 2.0);
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let bin = OffspringLaw::deterministic(2);
        assert!(matches!(bin.eval(1.5, 0), Err(Error::Domain(_))));
        assert!(matches!(bin.eval(-0.1, 0), Err(Error::Domain(_))));
        assert!(matches!(bin.eval(0.5, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn validate_examples() {
        assert_eq!(OffspringLaw::deterministic(3).validate(true), Ok(()));
        let critical = OffspringLaw::from_probs(vec![0.0, 1.0]).unwrap();
        assert!(matches!(critical.validate(true), Err(Violation::NotSupercritical { .. })));
        let leaky = OffspringLaw::from_probs(vec![0.1, 0.0, 0.9]).unwrap();
        assert!(matches!(leaky.validate(true), Err(Violation::ExtinctionMass { .. })));
        assert_eq!(leaky.validate(false), Ok(()));
    }

    #[test]
    fn normalisation_slack() {
        let law = OffspringLaw::from_probs(vec![0.0, 0.4, 0.6 + 5e-10]).unwrap();
        assert!((law.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(
            OffspringLaw::from_probs(vec![0.0, 0.4, 0.7]),
            Err(Error::InvalidLaw(Violation::BadTotal { .. }))
        ));
        assert!(OffspringLaw::from_probs(vec![0.0, -0.1, 1.1]).is_err());
        assert!(OffspringLaw::from_probs(vec![]).is_err());
    }

    #[test]
    fn deterministic_derivative_exact() {
        for m in 2..9 {
            let law = OffspringLaw::deterministic(m);
            for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                assert_eq!(law.eval(x, 1).unwrap(), m as f64 * x.powi(m as i32 - 1));
            }
        }
    }

    #[test]
    fn json_forms() {
        let spec: LawSpec = serde_json::from_str(r#"{"kind":"deterministic","m":2}"#).unwrap();
        assert_eq!(spec.build().unwrap(), OffspringLaw::deterministic(2));
        let spec: LawSpec = serde_json::from_str(r#"{"kind":"table","probs":[0,0.4,0.6]}"#).unwrap();
        assert_eq!(spec.build().unwrap(), mixed());
        assert_eq!(LawSpec::from(&mixed()), spec);
    }

    #[test]
    fn sampling_inverts_cdf() {
        let law = mixed();
        assert_eq!(law.sample_with(0.0), 1);
        assert_eq!(law.sample_with(0.399), 1);
        assert_eq!(law.sample_with(0.4), 2);
        assert_eq!(law.sample_with(0.999_999), 2);
        assert_eq!(OffspringLaw::deterministic(3).sample_with(0.1), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn law() -> impl Strategy<Value = OffspringLaw> {
            proptest::collection::vec(0.0f64..1.0, 2..8).prop_filter_map("supercritical", |mut w| {
                w[0] = 0.0;
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return None;
                }
                let law = OffspringLaw::from_probs(w.iter().map(|v| v / total).collect()).ok()?;
                law.validate(true).ok().map(|_| law)
            })
        }

        proptest! {
            #[test]
            fn g_of_one_is_one(law in law()) {
                prop_assert!((law.eval(1.0, 0).unwrap() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn g_is_monotone_and_convex(law in law()) {
                let h = 1.0 / 64.0;
                let vals: Vec<f64> = (0..=64).map(|i| law.eval(i as f64 * h, 0).unwrap()).collect();
                for w in vals.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-15);
                }
                for w in vals.windows(3) {
                    prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-10);
                }
            }
        }
    }
}
