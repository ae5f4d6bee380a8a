//! Finite-support distributions over non-deterministic terms.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{one, Rational};
use crate::terms::NTerm;

/// Unnormalized non-negative weights. Zero entries are never stored.
pub type Weights = BTreeMap<NTerm, Rational>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DistrError {
    #[error("weight {0} is not positive")]
    NonPositiveWeight(Rational),
    #[error("weights sum to {0}, not 1")]
    BadTotal(Rational),
    #[error("mixture coefficient {0} is negative")]
    NegativeCoefficient(Rational),
    #[error("mixture coefficients sum to {0}, not 1")]
    BadCoefficientSum(Rational),
    #[error("the two mixtures do not denote the same distribution")]
    UnequalMixtures,
    #[error("empty mixture")]
    EmptyMixture,
}

/// A probability distribution with finite support, stored canonically.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Distribution {
    weights: Weights,
}

impl Distribution {
    pub fn dirac(e: NTerm) -> Self {
        let mut weights = Weights::new();
        weights.insert(e, one());
        Distribution { weights }
    }

    /// Builds a distribution, merging repeated terms.
    pub fn from_weights<I>(entries: I) -> Result<Self, DistrError>
    where
        I: IntoIterator<Item = (NTerm, Rational)>,
    {
        let mut weights = Weights::new();
        for (e, w) in entries {
            if !w.is_positive() {
                return Err(DistrError::NonPositiveWeight(w));
            }
            *weights.entry(e).or_insert_with(Rational::zero) += w;
        }
        let total: Rational = weights.values().sum();
        if !total.is_one() {
            return Err(DistrError::BadTotal(total));
        }
        Ok(Distribution { weights })
    }

    /// Rescales non-negative weights to total one. `None` when the total is zero.
    pub fn normalize(weights: &Weights) -> Option<Self> {
        let total: Rational = weights.values().sum();
        if !total.is_positive() {
            return None;
        }
        let weights = weights
            .iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|(e, w)| (e.clone(), w / &total))
            .collect();
        Some(Distribution { weights })
    }

    pub(crate) fn from_weights_unchecked(weights: Weights) -> Self {
        debug_assert!(weights.values().all(|w| w.is_positive()));
        debug_assert!(weights.values().sum::<Rational>().is_one());
        Distribution { weights }
    }

    pub fn get(&self, e: &NTerm) -> Rational {
        self.weights.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn weight(&self, e: &NTerm) -> Option<&Rational> {
        self.weights.get(e)
    }

    pub fn contains(&self, e: &NTerm) -> bool {
        self.weights.contains_key(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NTerm, &Rational)> {
        self.weights.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &NTerm> {
        self.weights.keys()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn as_dirac(&self) -> Option<&NTerm> {
        if self.weights.len() == 1 {
            self.weights.keys().next()
        } else {
            None
        }
    }

    /// `self ⊕r other`, i.e. `r * self + (1 - r) * other`.
    pub fn mix_with(&self, r: &Rational, other: &Distribution) -> Distribution {
        let mut w = Weights::new();
        add_scaled(&mut w, self, r);
        add_scaled(&mut w, other, &(one() - r));
        Distribution::from_weights_unchecked(w)
    }
}

/// `acc += scale * d`, keeping zero entries out.
pub fn add_scaled(acc: &mut Weights, d: &Distribution, scale: &Rational) {
    if scale.is_zero() {
        return;
    }
    for (e, w) in d.iter() {
        add_weight(acc, e, &(w * scale));
    }
}

pub fn add_weight(acc: &mut Weights, e: &NTerm, w: &Rational) {
    if w.is_zero() {
        return;
    }
    let entry = acc.entry(e.clone()).or_insert_with(Rational::zero);
    *entry += w;
    if entry.is_zero() {
        acc.remove(e);
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (e, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", w, e)?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn dirac(e: NTerm) -> Distribution {
    Distribution::dirac(e)
}

/// A convex combination `⊕ p_i · μ_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mixture {
    parts: Vec<(Rational, Distribution)>,
}

impl Mixture {
    pub fn new(parts: Vec<(Rational, Distribution)>) -> Result<Self, DistrError> {
        if parts.is_empty() {
            return Err(DistrError::EmptyMixture);
        }
        for (p, _) in &parts {
            if p.is_negative() {
                return Err(DistrError::NegativeCoefficient(p.clone()));
            }
        }
        let total: Rational = parts.iter().map(|(p, _)| p).sum();
        if !total.is_one() {
            return Err(DistrError::BadCoefficientSum(total));
        }
        Ok(Mixture { parts })
    }

    /// Splits a distribution into its Dirac points.
    pub fn points(mu: &Distribution) -> Self {
        Mixture { parts: mu.iter().map(|(e, w)| (w.clone(), Distribution::dirac(e.clone()))).collect() }
    }

    pub fn parts(&self) -> &[(Rational, Distribution)] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

pub fn mix(m: &Mixture) -> Distribution {
    let mut w = Weights::new();
    for (p, d) in &m.parts {
        add_scaled(&mut w, d, p);
    }
    Distribution::from_weights_unchecked(w)
}

/// Chebyshev distance `sup_x |μ(x) − ν(x)|`.
pub fn distance(mu: &Distribution, nu: &Distribution) -> Rational {
    let mut best = Rational::zero();
    for e in mu.support().chain(nu.support()) {
        let d = (mu.get(e) - nu.get(e)).abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// `r[i][j]` and `rho[i][j]` with the marginal identities of the joint splitting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointDecomposition {
    pub r: Vec<Vec<Rational>>,
    pub rho: Vec<Vec<Distribution>>,
}

/// Common refinement of two presentations of the same distribution.
///
/// With `ξ = mix(left) = mix(right)`:
/// `r_ij = Σ_x p_i μ_i(x) q_j ν_j(x) / ξ(x)` and
/// `ρ_ij(x) = p_i μ_i(x) q_j ν_j(x) / (r_ij ξ(x))`; `ρ_ij = δ(0)` when `r_ij = 0`.
pub fn joint_decompose(left: &Mixture, right: &Mixture) -> Result<JointDecomposition, DistrError> {
    let xi = mix(left);
    if xi != mix(right) {
        return Err(DistrError::UnequalMixtures);
    }
    let mut r = Vec::with_capacity(left.len());
    let mut rho = Vec::with_capacity(left.len());
    for (p, mu) in &left.parts {
        let mut row_r = Vec::with_capacity(right.len());
        let mut row_rho = Vec::with_capacity(right.len());
        for (q, nu) in &right.parts {
            let mut w = Weights::new();
            for (x, mx) in mu.iter() {
                let nx = nu.get(x);
                if nx.is_zero() {
                    continue;
                }
                let v = p * mx * q * nx / xi.get(x);
                add_weight(&mut w, x, &v);
            }
            let rij: Rational = w.values().sum();
            let d = if rij.is_zero() {
                Distribution::dirac(NTerm::Nil)
            } else {
                Distribution::normalize(&w).expect("positive total")
            };
            row_r.push(rij);
            row_rho.push(d);
        }
        r.push(row_r);
        rho.push(row_rho);
    }
    Ok(JointDecomposition { r, rho })
}

/// Splits `μ_i = (1 − r) μ ⊕ r μ'` with the largest possible share of `μ`.
pub fn limit_residual(mu_i: &Distribution, mu: &Distribution) -> (Rational, Distribution) {
    let min_ratio = mu
        .iter()
        .map(|(x, w)| mu_i.get(x) / w)
        .min()
        .expect("distributions have non-empty support");
    let min_ratio = if min_ratio > one() { one() } else { min_ratio };
    let r = one() - &min_ratio;
    if r.is_zero() {
        return (r, mu.clone());
    }
    let mut w = Weights::new();
    for (x, v) in mu_i.iter() {
        add_weight(&mut w, x, v);
    }
    for (x, v) in mu.iter() {
        add_weight(&mut w, x, &-(v * &min_ratio));
    }
    let residual = w.into_iter().map(|(x, v)| (x, v / &r)).collect();
    (r, Distribution::from_weights_unchecked(residual))
}
