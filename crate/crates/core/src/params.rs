//! Parameter sets, the constraint validator and named presets.
//!
//! Presets are sized for desk-scale verification only. They are NOT secure
//! parameterizations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trapdoor::{bound_gs, slack};
use crate::zq::Modulus;

/// Declared constant `C` in `s_R < C sqrt(m)` for sign matrices and
/// `s_{R_ID} < C ell sqrt(m)`. Measured spectral norms of `m x m` sign
/// matrices sit just above `2 sqrt(m)` at small `m`.
pub const SPECTRAL_FACTOR: f64 = 2.2;

/// Declared constant `K` in `q >= K sigma m^{3/2}`.
pub const MARGIN_K: f64 = 5.0;

pub const PRESET_NAMES: [&str; 2] = ["toy", "small"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    /// Bits of the ciphertext tag `c5`.
    pub lambda: usize,
    pub n: usize,
    pub m: usize,
    pub q: u64,
    /// Message length in bits.
    pub t: usize,
    /// Identity length.
    pub ell: usize,
    pub sigma: f64,
    pub alpha: f64,
    /// Identity-query bound used by `q > 2 Q`.
    pub q_bound: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    WellFormed,
    /// `m > 6 n ceil(log2 q)`
    TrapGenWidth,
    /// `sigma` large enough for left/right (basis) sampling
    SamplingSigma,
    /// `q > 2 sqrt(n) / alpha`
    LweModulus,
    /// `q > 2 Q`
    QueryBound,
    /// `q >= K sigma m^{3/2}` and `alpha < 1 / (sigma ell m slack(m))`
    DecryptionMargin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.constraint, self.detail)
    }
}

impl ParamSet {
    pub fn modulus(&self) -> Result<Modulus> {
        Modulus::new(self.q)
    }

    /// Fails with every violated constraint listed.
    pub fn validated(self) -> Result<Self> {
        let v = validate_params(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Err(Error::InvalidParams(list.join("; ")))
        }
    }

    /// Fixed 72-byte encoding: every field as 64-bit little-endian, reals as
    /// IEEE-754 binary64.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(72);
        for x in [self.lambda as u64, self.n as u64, self.m as u64, self.q, self.t as u64, self.ell as u64] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&self.sigma.to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&self.q_bound.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 72 {
            return Err(Error::LengthMismatch {
                what: "parameter block",
                expected: 72,
                got: bytes.len(),
            });
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
        let size = |i: usize| usize::try_from(word(i)).map_err(|_| Error::Format("parameter out of range".into()));
        Ok(ParamSet {
            lambda: size(0)?,
            n: size(1)?,
            m: size(2)?,
            q: word(3),
            t: size(4)?,
            ell: size(5)?,
            sigma: f64::from_bits(word(6)),
            alpha: f64::from_bits(word(7)),
            q_bound: word(8),
        })
    }

    /// Element counts of the public parameters, `(ell + 3) m n + n t`.
    pub fn public_params_elements(&self) -> usize {
        (self.ell + 3) * self.m * self.n + self.n * self.t
    }

    pub fn master_key_elements(&self) -> usize {
        2 * self.m * self.m
    }

    /// Two `2m x 2m` bases.
    pub fn secret_key_elements(&self) -> usize {
        8 * self.m * self.m
    }

    /// Residues in a ciphertext: `m^2 + 2t + 6m` (plus `lambda` tag bits).
    pub fn ciphertext_residues(&self) -> usize {
        self.m * self.m + 2 * self.t + 6 * self.m
    }

    /// Sampling parameter for preimages drawn with an extracted basis whose
    /// Gram-Schmidt norm is `key_gs_norm`: `max(sigma, ||E~|| slack(3m))`.
    pub fn delegated_sigma(&self, key_gs_norm: f64) -> f64 {
        self.sigma.max(key_gs_norm * slack(3 * self.m))
    }
}

/// Every violated constraint (empty means valid).
pub fn validate_params(p: &ParamSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |constraint, detail: String| out.push(Violation { constraint, detail });

    let mut shape_ok = true;
    for (name, v) in [("lambda", p.lambda), ("n", p.n), ("m", p.m), ("t", p.t), ("ell", p.ell)] {
        if v == 0 {
            push(Constraint::WellFormed, format!("{name} must be positive"));
            shape_ok = false;
        }
    }
    if !(p.sigma.is_finite() && p.sigma > 0.0) {
        push(Constraint::WellFormed, format!("sigma = {} must be positive", p.sigma));
        shape_ok = false;
    }
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        push(Constraint::WellFormed, format!("alpha = {} must lie in (0, 1)", p.alpha));
        shape_ok = false;
    }
    let q = match Modulus::new(p.q) {
        Ok(q) => q,
        Err(_) => {
            push(Constraint::WellFormed, format!("q = {} is not an odd prime below 2^63", p.q));
            return out;
        }
    };
    if !shape_ok {
        return out;
    }

    let qf = p.q as f64;
    let m = p.m as f64;
    let width = 6 * p.n * q.bits();
    if p.m <= width {
        push(Constraint::TrapGenWidth, format!("m = {} <= 6 n ceil(log2 q) = {width}", p.m));
    }

    let gs = bound_gs(p.n, q);
    let left = gs * slack(2 * p.m);
    let right = gs * SPECTRAL_FACTOR * p.ell as f64 * m.sqrt() * slack(p.m);
    let need = left.max(right);
    if p.sigma <= need {
        push(Constraint::SamplingSigma, format!("sigma = {} <= {need:.1}", p.sigma));
    }

    let lwe = 2.0 * (p.n as f64).sqrt() / p.alpha;
    if qf <= lwe {
        push(Constraint::LweModulus, format!("q = {} <= 2 sqrt(n) / alpha = {lwe:.1}", p.q));
    }

    if p.q as u128 <= 2 * p.q_bound as u128 {
        push(Constraint::QueryBound, format!("q = {} <= 2 Q = {}", p.q, 2 * p.q_bound as u128));
    }

    let margin_q = MARGIN_K * p.sigma * m.powf(1.5);
    if qf < margin_q {
        push(Constraint::DecryptionMargin, format!("q = {} < K sigma m^1.5 = {margin_q:.3e}", p.q));
    }
    let alpha_max = 1.0 / (p.sigma * p.ell as f64 * m * slack(p.m));
    if p.alpha >= alpha_max {
        push(
            Constraint::DecryptionMargin,
            format!("alpha = {:e} >= 1 / (sigma ell m slack(m)) = {alpha_max:e}", p.alpha),
        );
    }
    out
}

/// Named parameter sets.
pub fn preset(name: &str) -> Result<ParamSet> {
    match name {
        "toy" => Ok(ParamSet {
            lambda: 128,
            n: 2,
            m: 481,
            q: 1_099_511_627_689,
            t: 64,
            ell: 8,
            sigma: 64_000.0,
            alpha: 1.0e-11,
            q_bound: 1 << 20,
        }),
        "small" => Ok(ParamSet {
            lambda: 128,
            n: 4,
            m: 1057,
            q: 17_592_186_044_399,
            t: 64,
            ell: 8,
            sigma: 175_000.0,
            alpha: 4.5e-13,
            q_bound: 1 << 20,
        }),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}
