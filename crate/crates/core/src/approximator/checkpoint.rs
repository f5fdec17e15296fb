//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size   field
//! 0       8      magic  b"PGRBCKPT"
//! 8       4      format version (u32, currently 1)
//! 12      1      agent kind      (0 ppo, 1 iqn, 2 pg-rainbow, 3 disjoint)
//! 13      1      fusion method   (0 hadamard, 1 concat, 2 average, 3 weighted-diff, 4 bilinear)
//! 14      1      torso activation (0 tanh, 1 relu)
//! 15      1      reserved, 0
//! 16      4      obs_dim
//! 20      4      n_actions
//! 24      4      n_cos
//! 28      4      n_quantiles
//! 32      4      distill_hidden
//! 36      4      number of torso layers L
//! 40      4*L    torso widths
//! then four parameter groups in the order theta, phi, phi_target, psi:
//!         4      tag  b"THET" | b"PHI_" | b"PHIT" | b"PSI_"
//!         8      count n (u64)
//!         8*n    f64 values, tensors concatenated in layer order
//!                (each dense layer: weight [out x in] row-major, then bias)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::agent::AgentKind;
use crate::approximator::arch::{ArchConfig, FusionMethod};
use crate::approximator::nn::{Activation, ParamSet};
use crate::approximator::params::{init_params, AgentParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PGRBCKPT";
pub const FORMAT_VERSION: u32 = 1;
const TAGS: [&[u8; 4]; 4] = [b"THET", b"PHI_", b"PHIT", b"PSI_"];

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: AgentKind,
    pub arch: ArchConfig,
    pub params: AgentParams,
}

fn u32_le(x: usize) -> [u8; 4] {
    u32::try_from(x).expect("fits in u32").to_le_bytes()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let a = &self.arch;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.push(a.fusion.code());
        out.push(match a.activation {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        });
        out.push(0);
        for x in [
            self.params.obs_dim(),
            self.params.n_actions(),
            a.n_cos,
            a.n_quantiles,
            a.distill_hidden,
            a.torso_widths.len(),
        ] {
            out.extend_from_slice(&u32_le(x));
        }
        for &w in &a.torso_widths {
            out.extend_from_slice(&u32_le(w));
        }
        let p = &self.params;
        let groups = [p.theta.flat(), p.phi.flat(), p.phi_target.flat(), p.psi.flat()];
        for (tag, values) in TAGS.iter().zip(groups) {
            out.extend_from_slice(*tag);
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let mut flags = [0u8; 4];
        read_exact(&mut r, &mut flags)?;
        let kind = AgentKind::from_code(flags[0]).ok_or_else(|| Error::Checkpoint("bad agent kind".into()))?;
        let fusion = FusionMethod::from_code(flags[1]).ok_or_else(|| Error::Checkpoint("bad fusion".into()))?;
        let activation = match flags[2] {
            0 => Activation::Tanh,
            1 => Activation::Relu,
            _ => return Err(Error::Checkpoint("bad activation".into())),
        };
        let obs_dim = read_u32(&mut r)? as usize;
        let n_actions = read_u32(&mut r)? as usize;
        let n_cos = read_u32(&mut r)? as usize;
        let n_quantiles = read_u32(&mut r)? as usize;
        let distill_hidden = read_u32(&mut r)? as usize;
        let n_layers = read_u32(&mut r)? as usize;
        if n_layers > 64 {
            return Err(Error::Checkpoint("implausible torso depth".into()));
        }
        let torso_widths = (0..n_layers)
            .map(|_| read_u32(&mut r).map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = ArchConfig {
            torso_widths,
            activation,
            n_cos,
            n_quantiles,
            fusion,
            distill_hidden,
        };
        let mut params = init_params(0, &arch, obs_dim, n_actions)?;
        for (i, tag) in TAGS.iter().enumerate() {
            let mut got = [0u8; 4];
            read_exact(&mut r, &mut got)?;
            if &got != *tag {
                return Err(Error::Checkpoint(format!(
                    "expected group {}",
                    String::from_utf8_lossy(*tag)
                )));
            }
            let mut n = [0u8; 8];
            read_exact(&mut r, &mut n)?;
            let n = u64::from_le_bytes(n) as usize;
            if r.len() < n.saturating_mul(8) {
                return Err(Error::Checkpoint("truncated parameter group".into()));
            }
            let values: Vec<f64> = r[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            r = &r[n * 8..];
            let expected = match i {
                0 => set_group(&mut params.theta, &values),
                1 => set_group(&mut params.phi, &values),
                2 => set_group(&mut params.phi_target, &values),
                _ => set_group(&mut params.psi, &values),
            };
            if expected != n {
                return Err(Error::Checkpoint(format!(
                    "group {} has {n} values, architecture needs {expected}",
                    String::from_utf8_lossy(*tag)
                )));
            }
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { kind, arch, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Writes `values` into `p` when the length matches; returns the expected length.
fn set_group<P: ParamSet>(p: &mut P, values: &[f64]) -> usize {
    let n = p.num_params();
    if n == values.len() {
        p.set_flat(values);
    }
    n
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Checkpoint("unexpected end of data".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
