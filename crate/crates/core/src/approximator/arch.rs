use std::fmt;
use std::str::FromStr;

use crate::approximator::nn::Activation;
use crate::error::{Error, Result};

/// How the critic scalar and the quantile vector enter the distillation net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionMethod {
    /// `f(v * q)`, the scalar broadcast over the quantiles.
    Hadamard,
    /// `f([v; q])`.
    Concat,
    /// `f((v + mean(q)) / 2)`.
    Average,
    /// `v + f(sum_a pi(a|s) zbar_a - v)`.
    WeightedDiff,
    /// `f(v * W q + b)` with a learned `N x h` interaction.
    Bilinear,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 5] = [
        FusionMethod::Hadamard,
        FusionMethod::Concat,
        FusionMethod::Average,
        FusionMethod::WeightedDiff,
        FusionMethod::Bilinear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::Hadamard => "hadamard",
            FusionMethod::Concat => "concat",
            FusionMethod::Average => "average",
            FusionMethod::WeightedDiff => "weighted-diff",
            FusionMethod::Bilinear => "bilinear",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Width of the first dense layer of the distillation net.
    pub fn input_width(self, n_quantiles: usize, hidden: usize) -> usize {
        match self {
            FusionMethod::Hadamard => n_quantiles,
            FusionMethod::Concat => n_quantiles + 1,
            FusionMethod::Average | FusionMethod::WeightedDiff => 1,
            FusionMethod::Bilinear => hidden,
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == key || (key == "weighteddiff" && *m == FusionMethod::WeightedDiff))
            .ok_or_else(|| Error::Config(format!("unknown fusion method '{s}'")))
    }
}

/// Network shapes shared by every parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    /// Hidden widths of the dense torso used by both the actor-critic and the IQN.
    pub torso_widths: Vec<usize>,
    pub activation: Activation,
    /// Number of cosine features `cos(pi i tau)`, `i = 0..n_cos`.
    pub n_cos: usize,
    /// Midpoint quantiles fed to the distillation net.
    pub n_quantiles: usize,
    pub fusion: FusionMethod,
    pub distill_hidden: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            torso_widths: vec![64, 64],
            activation: Activation::Tanh,
            n_cos: 64,
            n_quantiles: 32,
            fusion: FusionMethod::Hadamard,
            distill_hidden: 64,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.torso_widths.is_empty() || self.torso_widths.contains(&0) {
            return Err(Error::Config("torso widths must be non-empty and >= 1".into()));
        }
        if self.n_cos == 0 || self.distill_hidden == 0 {
            return Err(Error::Config("n_cos and distill_hidden must be >= 1".into()));
        }
        if self.n_quantiles < 2 {
            return Err(Error::Config("n_quantiles must be >= 2".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        *self.torso_widths.last().expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_fusion_names() {
        for m in FusionMethod::ALL {
            assert_eq!(m.as_str().parse::<FusionMethod>().unwrap(), m);
            assert_eq!(FusionMethod::from_code(m.code()), Some(m));
        }
        assert_eq!("weighted_diff".parse::<FusionMethod>().unwrap(), FusionMethod::WeightedDiff);
        assert!("sum".parse::<FusionMethod>().is_err());
    }

    #[test]
    fn input_widths() {
        assert_eq!(FusionMethod::Hadamard.input_width(32, 64), 32);
        assert_eq!(FusionMethod::Concat.input_width(32, 64), 33);
        assert_eq!(FusionMethod::Average.input_width(32, 64), 1);
        assert_eq!(FusionMethod::Bilinear.input_width(32, 64), 64);
    }

    #[test]
    fn rejects_degenerate_shapes() {
        let bad = ArchConfig {
            n_quantiles: 1,
            ..ArchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ArchConfig {
            torso_widths: vec![64, 0],
            ..ArchConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
