//! Authorization trapdoors and equality tests.
//!
//! A type-1 trapdoor is the second key basis and lets its holder test every
//! ciphertext of the identity. A type-2 trapdoor is a single preimage matrix
//! bound to one ciphertext. Type 3 mixes the two.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hash::BitString;
use crate::scheme::{sample_tagged, unmask, verified, Ciphertext, Identity, KeyHalf, PublicParams, SamplerCache, UserSecretKey};
use crate::zq::IntMatrix;

/// Basis trapdoor: `E'_ID` together with its identity.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapdoorT1 {
    pub id: Identity,
    pub e_prime: IntMatrix,
    sampler: SamplerCache,
}

/// Ciphertext trapdoor: `e'` with `(F'_ID | A R) e' = U`, plus the tag of the
/// ciphertext it was drawn for.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapdoorT2 {
    pub id: Identity,
    pub ct_binding: BitString,
    pub e_prime: IntMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrapdoorT3 {
    Basis(TrapdoorT1),
    Ciphertext(TrapdoorT2),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestOutcome {
    Equal,
    NotEqual,
    /// A ciphertext failed its integrity check or a trapdoor did not match.
    Reject,
}

impl TrapdoorT1 {
    pub fn new(id: Identity, e_prime: IntMatrix) -> Self {
        TrapdoorT1 { id, e_prime, sampler: SamplerCache::default() }
    }
}

pub fn td1(sk: &UserSecretKey) -> TrapdoorT1 {
    TrapdoorT1::new(sk.id.clone(), sk.e_prime.clone())
}

/// `None` when the ciphertext fails its integrity check.
pub fn td2<R: Rng + ?Sized>(pp: &PublicParams, sk: &UserSecretKey, ct: &Ciphertext, rng: &mut R) -> Result<Option<TrapdoorT2>> {
    if !verified(pp, ct)? {
        return Ok(None);
    }
    let e_prime = sk.sample_left(pp, KeyHalf::Prime, &ct.r, rng)?;
    Ok(Some(TrapdoorT2 { id: sk.id.clone(), ct_binding: ct.c5.clone(), e_prime }))
}

pub fn td3_basis(sk: &UserSecretKey) -> TrapdoorT3 {
    TrapdoorT3::Basis(td1(sk))
}

pub fn td3_ct<R: Rng + ?Sized>(pp: &PublicParams, sk: &UserSecretKey, ct: &Ciphertext, rng: &mut R) -> Result<Option<TrapdoorT3>> {
    Ok(td2(pp, sk, ct, rng)?.map(TrapdoorT3::Ciphertext))
}

/// `decode(c2 - e'^T c4)` with a fresh `e'` drawn from the basis trapdoor.
pub fn digest_from_basis<R: Rng + ?Sized>(pp: &PublicParams, td: &TrapdoorT1, ct: &Ciphertext, rng: &mut R) -> Result<Option<BitString>> {
    if !verified(pp, ct)? {
        return Ok(None);
    }
    let sampler = td.sampler.get(pp, &td.id, KeyHalf::Prime, &td.e_prime)?;
    let e_prime = sample_tagged(pp, sampler, &ct.r, rng)?;
    Ok(Some(unmask(&ct.c2, &e_prime, &ct.c4)?))
}

/// `decode(c2 - e'^T c4)` for the ciphertext the trapdoor is bound to.
pub fn digest_from_e(pp: &PublicParams, td: &TrapdoorT2, ct: &Ciphertext) -> Result<Option<BitString>> {
    let p = &pp.params;
    if td.e_prime.rows() != 3 * p.m || td.e_prime.cols() != p.t {
        return Err(Error::DimensionMismatch {
            op: "digest_from_e",
            left_rows: 3 * p.m,
            left_cols: p.t,
            right_rows: td.e_prime.rows(),
            right_cols: td.e_prime.cols(),
        });
    }
    if !verified(pp, ct)? || ct.c5 != td.ct_binding {
        return Ok(None);
    }
    Ok(Some(unmask(&ct.c2, &td.e_prime, &ct.c4)?))
}

fn compare(h_i: Option<BitString>, h_j: Option<BitString>) -> TestOutcome {
    match (h_i, h_j) {
        (Some(a), Some(b)) if a == b => TestOutcome::Equal,
        (Some(_), Some(_)) => TestOutcome::NotEqual,
        _ => TestOutcome::Reject,
    }
}

pub fn test1<R: Rng + ?Sized>(
    pp: &PublicParams,
    td_i: &TrapdoorT1,
    td_j: &TrapdoorT1,
    ct_i: &Ciphertext,
    ct_j: &Ciphertext,
    rng: &mut R,
) -> Result<TestOutcome> {
    let h_i = digest_from_basis(pp, td_i, ct_i, rng)?;
    let h_j = digest_from_basis(pp, td_j, ct_j, rng)?;
    Ok(compare(h_i, h_j))
}

pub fn test2(pp: &PublicParams, td_i: &TrapdoorT2, td_j: &TrapdoorT2, ct_i: &Ciphertext, ct_j: &Ciphertext) -> Result<TestOutcome> {
    Ok(compare(digest_from_e(pp, td_i, ct_i)?, digest_from_e(pp, td_j, ct_j)?))
}

fn digest_from_t3<R: Rng + ?Sized>(pp: &PublicParams, td: &TrapdoorT3, ct: &Ciphertext, rng: &mut R) -> Result<Option<BitString>> {
    match td {
        TrapdoorT3::Basis(t) => digest_from_basis(pp, t, ct, rng),
        TrapdoorT3::Ciphertext(t) => digest_from_e(pp, t, ct),
    }
}

/// Accepts any combination of basis and ciphertext trapdoors.
pub fn test3<R: Rng + ?Sized>(
    pp: &PublicParams,
    td_i: &TrapdoorT3,
    td_j: &TrapdoorT3,
    ct_i: &Ciphertext,
    ct_j: &Ciphertext,
    rng: &mut R,
) -> Result<TestOutcome> {
    let h_i = digest_from_t3(pp, td_i, ct_i, rng)?;
    let h_j = digest_from_t3(pp, td_j, ct_j, rng)?;
    Ok(compare(h_i, h_j))
}
