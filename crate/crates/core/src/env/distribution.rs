use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms closer than this are treated as the same return value.
pub const MERGE_TOL: f64 = 1e-12;

/// A finite-support distribution over returns.
///
/// `support` is strictly increasing and `probs` sums to one; atoms with zero
/// mass are dropped on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteReturnDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

/// Sorts `(value, prob)` atoms, drops zero mass, and merges values within `tol`.
pub(crate) fn normalize_atoms(mut atoms: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    atoms.retain(|&(_, p)| p > 0.0);
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    let mut anchor = f64::NEG_INFINITY;
    for (v, p) in atoms {
        match out.last_mut() {
            Some(last) if v - anchor <= tol => last.1 += p,
            _ => {
                anchor = v;
                out.push((v, p));
            }
        }
    }
    out
}

impl DiscreteReturnDistribution {
    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let atoms = normalize_atoms(atoms, MERGE_TOL);
        if atoms.is_empty() {
            return Err(Error::Empty("distribution"));
        }
        let (support, probs) = atoms.into_iter().unzip();
        Ok(Self { support, probs })
    }

    pub fn point(value: f64) -> Self {
        Self {
            support: vec![value],
            probs: vec![1.0],
        }
    }

    /// Empirical distribution placing mass `1/n` on every sample.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("sample"));
        }
        let w = 1.0 / samples.len() as f64;
        Self::from_atoms(samples.iter().map(|&x| (x, w)).collect())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms().map(|(v, p)| p * (v - m) * (v - m)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms().take_while(|&(v, _)| v <= x).map(|(_, p)| p).sum()
    }

    /// Generalized inverse CDF: the smallest support value with `F(x) >= tau`.
    pub fn quantile(&self, tau: f64) -> f64 {
        let mut acc = 0.0;
        for (v, p) in self.atoms() {
            acc += p;
            if acc >= tau - 1e-12 {
                return v;
            }
        }
        *self.support.last().expect("non-empty")
    }

    /// Quantile values at the midpoint levels `(2j - 1) / (2n)`, `j = 1..=n`.
    pub fn midpoint_quantiles(&self, n: usize) -> Vec<f64> {
        midpoint_taus(n).into_iter().map(|t| self.quantile(t)).collect()
    }
}

/// Midpoint quantile levels `(2j - 1) / (2n)`.
pub fn midpoint_taus(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (2 * j - 1) as f64 / (2 * n) as f64).collect()
}
