//! Maps between vibrational basis states and computational-basis indices.
//!
//! All encodings put mode 1 in the most significant position, and inside a
//! mode block the first site is the most significant digit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::model::BasisState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingKind {
    /// Fixed-width unsigned binary per mode.
    Binary,
    /// One-hot: one qubit per level, exactly one excited per mode.
    Direct,
    /// One `(vmax+1)`-level qudit per mode.
    Qudit,
}

impl EncodingKind {
    pub const ALL: [Self; 3] = [Self::Binary, Self::Direct, Self::Qudit];

    pub fn name(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::Direct => "direct",
            Self::Qudit => "qudit",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Self::Binary),
            "direct" | "unary" | "onehot" | "one-hot" => Ok(Self::Direct),
            "qudit" => Ok(Self::Qudit),
            _ => invalid(format!("unknown encoding {s:?} (binary|direct|qudit)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodingScheme {
    pub kind: EncodingKind,
    pub vmax: usize,
    pub n_modes: usize,
}

impl EncodingScheme {
    pub fn new(kind: EncodingKind, n_modes: usize, vmax: usize) -> Result<Self> {
        if n_modes == 0 {
            return invalid("an encoding needs at least one mode");
        }
        if vmax == 0 {
            return invalid(format!(
                "vmax = 0 leaves a single level per mode (site dimension 1); \
                 the {kind} encoding needs vmax >= 1"
            ));
        }
        Ok(Self {
            kind,
            vmax,
            n_modes,
        })
    }

    pub fn levels(&self) -> usize {
        self.vmax + 1
    }

    /// Local dimension `d` of one site.
    pub fn site_dim(&self) -> usize {
        match self.kind {
            EncodingKind::Binary | EncodingKind::Direct => 2,
            EncodingKind::Qudit => self.levels(),
        }
    }

    /// Sites per mode: ⌈log₂(vmax+1)⌉, vmax+1 or 1.
    pub fn sites_per_mode(&self) -> usize {
        match self.kind {
            EncodingKind::Binary => {
                let n = self.levels();
                (usize::BITS - (n - 1).leading_zeros()) as usize
            }
            EncodingKind::Direct => self.levels(),
            EncodingKind::Qudit => 1,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_modes * self.sites_per_mode()
    }

    /// Dimension of one mode block, `d^sites_per_mode`.
    pub fn block_dim(&self) -> usize {
        self.site_dim().pow(self.sites_per_mode() as u32)
    }

    /// Full register dimension `d^n_sites`, or `None` on overflow.
    pub fn full_dim(&self) -> Option<usize> {
        self.block_dim().checked_pow(self.n_modes as u32)
    }

    /// Number of encoded vibrational states, `(vmax+1)^M`.
    pub fn encoded_dim(&self) -> Option<usize> {
        self.levels().checked_pow(self.n_modes as u32)
    }

    /// Index of level `v` inside one mode block.
    pub fn encode_level(&self, v: usize) -> usize {
        debug_assert!(v <= self.vmax);
        match self.kind {
            EncodingKind::Binary | EncodingKind::Qudit => v,
            EncodingKind::Direct => 1 << (self.sites_per_mode() - 1 - v),
        }
    }

    /// Inverse of [`encode_level`](Self::encode_level).
    pub fn decode_level(&self, code: usize) -> Option<usize> {
        match self.kind {
            EncodingKind::Binary | EncodingKind::Qudit => (code <= self.vmax).then_some(code),
            EncodingKind::Direct => {
                if code.count_ones() != 1 || code >= self.block_dim() {
                    return None;
                }
                Some(self.sites_per_mode() - 1 - code.trailing_zeros() as usize)
            }
        }
    }
}

impl fmt::Display for EncodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (M={}, vmax={}, {} sites of d={})",
            self.kind,
            self.n_modes,
            self.vmax,
            self.n_sites(),
            self.site_dim()
        )
    }
}

/// Computational-basis index of a vibrational basis state.
pub fn encode_state(v: &BasisState, scheme: &EncodingScheme) -> Result<usize> {
    v.validate(scheme.n_modes, scheme.vmax)?;
    let block = scheme.block_dim();
    Ok(v.quanta()
        .iter()
        .fold(0, |acc, &q| acc * block + scheme.encode_level(q)))
}

/// Basis state encoded by `idx`, or `None` if `idx` is outside the encoded
/// subspace (or outside the register).
pub fn decode_index(idx: usize, scheme: &EncodingScheme) -> Option<BasisState> {
    if scheme.full_dim().is_some_and(|d| idx >= d) {
        return None;
    }
    let block = scheme.block_dim();
    let mut rest = idx;
    let mut v = vec![0; scheme.n_modes];
    for slot in v.iter_mut().rev() {
        *slot = scheme.decode_level(rest % block)?;
        rest /= block;
    }
    Some(BasisState::new(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeResources {
    pub encoding: EncodingKind,
    pub n_sites: usize,
    pub d: usize,
    /// `(vmax+1)^M / d^n_sites`.
    pub encoded_fraction: f64,
}

pub fn scheme_resources(scheme: &EncodingScheme) -> SchemeResources {
    let per_mode = scheme.levels() as f64 / scheme.block_dim() as f64;
    SchemeResources {
        encoding: scheme.kind,
        n_sites: scheme.n_sites(),
        d: scheme.site_dim(),
        encoded_fraction: per_mode.powi(scheme.n_modes as i32),
    }
}
