//! Network persistence as JSON with bit-exact real values.
//!
//! JSON numbers round-trip poorly across writers, so every real is stored as a
//! decimal string with 17 significant digits, which is enough for IEEE double
//! round trips including the sign of zero. Non-finite values are rejected on
//! save and on load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Activation, Basis, ReluNet};

/// Current on-disk schema version.
pub const FORMAT_VERSION: u32 = 1;

/// Encode a real as a decimal string that parses back to the same bits.
fn encode_real(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::validation(format!("cannot serialize non-finite value {v}")));
    }
    Ok(format!("{v:.16e}"))
}

/// Parse a real stored by [`encode_real`].
fn decode_real(s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|e| Error::validation(format!("bad real literal {s:?}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::validation(format!("non-finite real literal {s:?}")));
    }
    Ok(v)
}

fn encode_reals(vs: &[f64]) -> Result<Vec<String>> {
    vs.iter().map(|&v| encode_real(v)).collect()
}

fn decode_reals(ss: &[String]) -> Result<Vec<f64>> {
    ss.iter().map(|s| decode_real(s)).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ActivationDto {
    Relu,
    LeakyRelu { slope: String },
}

#[derive(Serialize, Deserialize)]
struct BasisDto {
    dir: u16,
    loc: String,
}

/// On-disk form of [`ReluNet`].
#[derive(Serialize, Deserialize)]
pub struct NetworkFile {
    format_version: u32,
    dim: usize,
    domain: Vec<[String; 2]>,
    activation: ActivationDto,
    directions: Vec<Vec<i8>>,
    basis: Vec<BasisDto>,
    theta: Vec<String>,
    alpha: String,
    gamma: String,
    initial_multiset: Vec<String>,
}

impl NetworkFile {
    /// Capture a network for writing.
    pub fn from_net(net: &ReluNet) -> Result<NetworkFile> {
        let activation = match net.activation {
            Activation::Relu => ActivationDto::Relu,
            Activation::LeakyRelu { slope } => {
                ActivationDto::LeakyRelu { slope: encode_real(slope)? }
            }
        };
        Ok(NetworkFile {
            format_version: FORMAT_VERSION,
            dim: net.dim,
            domain: net
                .domain
                .iter()
                .map(|&(lo, hi)| Ok([encode_real(lo)?, encode_real(hi)?]))
                .collect::<Result<_>>()?,
            activation,
            directions: net.directions.clone(),
            basis: net
                .basis
                .iter()
                .map(|b| Ok(BasisDto { dir: b.dir, loc: encode_real(b.loc)? }))
                .collect::<Result<_>>()?,
            theta: encode_reals(&net.theta)?,
            alpha: encode_real(net.alpha)?,
            gamma: encode_real(net.gamma)?,
            initial_multiset: encode_reals(&net.initial_multiset)?,
        })
    }

    /// Reconstruct the network, validating the schema.
    pub fn into_net(self) -> Result<ReluNet> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported network format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.basis.len() != self.theta.len() {
            return Err(Error::validation("basis and theta lengths differ"));
        }
        if self.theta.len() != self.initial_multiset.len() {
            return Err(Error::validation("theta and initial multiset lengths differ"));
        }
        if self.domain.len() != self.dim {
            return Err(Error::validation("domain entries must match dim"));
        }
        for d in &self.directions {
            if d.len() != self.dim {
                return Err(Error::validation("direction vector length must match dim"));
            }
            if d.iter().any(|c| !matches!(c, -1 | 0 | 1)) {
                return Err(Error::validation("direction components must be in {-1, 0, 1}"));
            }
        }
        let activation = match self.activation {
            ActivationDto::Relu => Activation::Relu,
            ActivationDto::LeakyRelu { slope } => {
                Activation::LeakyRelu { slope: decode_real(&slope)? }
            }
        };
        let n_dirs = self.directions.len();
        let basis = self
            .basis
            .into_iter()
            .map(|b| {
                if (b.dir as usize) >= n_dirs {
                    return Err(Error::validation(format!(
                        "basis direction index {} out of range ({} directions)",
                        b.dir, n_dirs
                    )));
                }
                Ok(Basis { dir: b.dir, loc: decode_real(&b.loc)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let domain = self
            .domain
            .iter()
            .map(|[lo, hi]| {
                let lo = decode_real(lo)?;
                let hi = decode_real(hi)?;
                if !(lo < hi) {
                    return Err(Error::validation(format!("empty domain [{lo}, {hi}]")));
                }
                Ok((lo, hi))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReluNet {
            dim: self.dim,
            domain,
            activation,
            directions: self.directions,
            basis,
            theta: decode_reals(&self.theta)?,
            alpha: decode_real(&self.alpha)?,
            gamma: decode_real(&self.gamma)?,
            initial_multiset: decode_reals(&self.initial_multiset)?,
        })
    }
}

/// Serialize a network to pretty-printed JSON.
pub fn to_json_string(net: &ReluNet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&NetworkFile::from_net(net)?)?)
}

/// Deserialize a network from JSON.
pub fn from_json_str(s: &str) -> Result<ReluNet> {
    let file: NetworkFile = serde_json::from_str(s)?;
    file.into_net()
}

/// Write a network to `path` as JSON.
pub fn save(net: &ReluNet, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_json_string(net)?)?;
    Ok(())
}

/// Read a network from `path`.
pub fn load(path: &std::path::Path) -> Result<ReluNet> {
    from_json_str(&std::fs::read_to_string(path)?)
}
