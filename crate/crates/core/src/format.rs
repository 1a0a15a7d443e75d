//! Binary artifact format.
//!
//! Every file starts with a fixed header:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `IBFA` |
//! | 2     | format version, little-endian |
//! | 1     | artifact kind |
//! | 32    | SHA3-256 of the 72-byte parameter encoding |
//! | 72    | the parameter set ([`ParamSet::encode`]) |
//!
//! Ciphertext files add the plaintext length in bytes as one `u64` after the
//! parameters. The payload follows, all integers little-endian: residues as
//! `u64`, signed matrices as two's-complement `i64`, matrices row-major, bit
//! strings as `ceil(len / 8)` bytes packed LSB-first.

use sha3::{Digest, Sha3_256};

use crate::authz::{TrapdoorT1, TrapdoorT2, TrapdoorT3};
use crate::error::{Error, LoadError, Result};
use crate::hash::BitString;
use crate::params::ParamSet;
use crate::scheme::{Ciphertext, Identity, MasterSecretKey, PublicParams, UserSecretKey};
use crate::zq::{IntMatrix, Modulus, ZqMatrix, ZqVector};

pub const MAGIC: [u8; 4] = *b"IBFA";
pub const VERSION: u16 = 1;
/// Bytes before the payload (ciphertexts carry 8 more).
pub const HEADER_LEN: usize = 4 + 2 + 1 + 32 + 72;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    PublicParams = 1,
    MasterKey = 2,
    SecretKey = 3,
    Ciphertext = 4,
    Td1 = 5,
    Td2 = 6,
    Td3 = 7,
}

impl Kind {
    fn from_byte(b: u8) -> std::result::Result<Kind, LoadError> {
        Ok(match b {
            1 => Kind::PublicParams,
            2 => Kind::MasterKey,
            3 => Kind::SecretKey,
            4 => Kind::Ciphertext,
            5 => Kind::Td1,
            6 => Kind::Td2,
            7 => Kind::Td3,
            other => return Err(LoadError::UnknownKind(other)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::PublicParams => "public parameters",
            Kind::MasterKey => "master key",
            Kind::SecretKey => "secret key",
            Kind::Ciphertext => "ciphertext",
            Kind::Td1 => "type-1 trapdoor",
            Kind::Td2 => "type-2 trapdoor",
            Kind::Td3 => "type-3 trapdoor",
        }
    }
}

pub fn fingerprint(params: &ParamSet) -> [u8; 32] {
    Sha3_256::digest(params.encode()).into()
}

/// A ciphertext plus the byte length of the plaintext it was made from.
#[derive(Clone, Debug, PartialEq)]
pub struct CiphertextFile {
    pub ct: Ciphertext,
    pub message_len: u64,
}

/// Objects that can be stored as artifact files.
pub trait Artifact: Sized {
    const KIND: Kind;
    fn write_payload(&self, params: &ParamSet, out: &mut Writer);
    fn read_payload(params: &ParamSet, r: &mut Reader<'_>) -> Result<Self>;
}

pub struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn residues(&mut self, xs: &[u64]) {
        xs.iter().for_each(|&x| self.u64(x));
    }

    fn ints(&mut self, xs: &[i64]) {
        xs.iter().for_each(|&x| self.0.extend_from_slice(&x.to_le_bytes()));
    }

    fn bits(&mut self, b: &BitString) {
        self.0.extend_from_slice(b.as_bytes());
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(LoadError::Truncated { needed: n - self.buf.len() }.into());
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u64s(&mut self, n: usize) -> Result<Vec<u64>> {
        let raw = self.take(8 * n)?;
        Ok(raw.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn zq_matrix(&mut self, rows: usize, cols: usize, q: Modulus) -> Result<ZqMatrix> {
        ZqMatrix::from_vec(rows, cols, q, self.u64s(rows * cols)?).map_err(malformed)
    }

    fn zq_vector(&mut self, len: usize, q: Modulus) -> Result<ZqVector> {
        ZqVector::from_vec(q, self.u64s(len)?).map_err(malformed)
    }

    fn int_matrix(&mut self, rows: usize, cols: usize) -> Result<IntMatrix> {
        let data = self.u64s(rows * cols)?.into_iter().map(|x| x as i64).collect();
        IntMatrix::from_vec(rows, cols, data).map_err(malformed)
    }

    fn bits(&mut self, len: usize) -> Result<BitString> {
        BitString::from_bytes(self.take(len.div_ceil(8))?, len).map_err(malformed)
    }

    fn identity(&mut self, ell: usize) -> Result<Identity> {
        let signs = self.u64s(ell)?.into_iter().map(|x| x as i64).collect();
        Identity::new(signs, ell).map_err(malformed)
    }
}

fn malformed(e: Error) -> Error {
    LoadError::Malformed(e.to_string()).into()
}

fn write_identity(out: &mut Writer, id: &Identity) {
    out.ints(id.signs());
}

impl Artifact for PublicParams {
    const KIND: Kind = Kind::PublicParams;

    fn write_payload(&self, _: &ParamSet, out: &mut Writer) {
        out.residues(self.a.data());
        out.residues(self.a_prime.data());
        for a_i in &self.a_list {
            out.residues(a_i.data());
        }
        out.residues(self.b.data());
        out.residues(self.u.data());
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        let q = p.modulus().map_err(malformed)?;
        let a = r.zq_matrix(p.n, p.m, q)?;
        let a_prime = r.zq_matrix(p.n, p.m, q)?;
        let a_list = (0..p.ell).map(|_| r.zq_matrix(p.n, p.m, q)).collect::<Result<_>>()?;
        let b = r.zq_matrix(p.n, p.m, q)?;
        let u = r.zq_matrix(p.n, p.t, q)?;
        Ok(PublicParams { params: p.clone(), a, a_prime, a_list, b, u })
    }
}

impl Artifact for MasterSecretKey {
    const KIND: Kind = Kind::MasterKey;

    fn write_payload(&self, _: &ParamSet, out: &mut Writer) {
        out.ints(self.t_a.data());
        out.ints(self.t_a_prime.data());
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        Ok(MasterSecretKey { t_a: r.int_matrix(p.m, p.m)?, t_a_prime: r.int_matrix(p.m, p.m)? })
    }
}

impl Artifact for UserSecretKey {
    const KIND: Kind = Kind::SecretKey;

    fn write_payload(&self, _: &ParamSet, out: &mut Writer) {
        write_identity(out, &self.id);
        out.ints(self.e.data());
        out.ints(self.e_prime.data());
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        let id = r.identity(p.ell)?;
        let e = r.int_matrix(2 * p.m, 2 * p.m)?;
        let e_prime = r.int_matrix(2 * p.m, 2 * p.m)?;
        Ok(UserSecretKey::new(id, e, e_prime))
    }
}

impl Artifact for CiphertextFile {
    const KIND: Kind = Kind::Ciphertext;

    fn write_payload(&self, _: &ParamSet, out: &mut Writer) {
        let ct = &self.ct;
        out.u64(self.message_len);
        out.ints(ct.r.data());
        for c in [&ct.c1, &ct.c2, &ct.c3, &ct.c4] {
            out.residues(c.as_slice());
        }
        out.bits(&ct.c5);
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        let q = p.modulus().map_err(malformed)?;
        let message_len = r.u64()?;
        if message_len.saturating_mul(8) > p.t as u64 {
            return Err(LoadError::Malformed(format!("message length {message_len} exceeds {} bits", p.t)).into());
        }
        let ct = Ciphertext {
            r: r.int_matrix(p.m, p.m)?,
            c1: r.zq_vector(p.t, q)?,
            c2: r.zq_vector(p.t, q)?,
            c3: r.zq_vector(3 * p.m, q)?,
            c4: r.zq_vector(3 * p.m, q)?,
            c5: r.bits(p.lambda)?,
        };
        Ok(CiphertextFile { ct, message_len })
    }
}

impl Artifact for TrapdoorT1 {
    const KIND: Kind = Kind::Td1;

    fn write_payload(&self, _: &ParamSet, out: &mut Writer) {
        write_identity(out, &self.id);
        out.ints(self.e_prime.data());
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        let id = r.identity(p.ell)?;
        Ok(TrapdoorT1::new(id, r.int_matrix(2 * p.m, 2 * p.m)?))
    }
}

impl Artifact for TrapdoorT2 {
    const KIND: Kind = Kind::Td2;

    fn write_payload(&self, _: &ParamSet, out: &mut Writer) {
        write_identity(out, &self.id);
        out.bits(&self.ct_binding);
        out.ints(self.e_prime.data());
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        let id = r.identity(p.ell)?;
        let ct_binding = r.bits(p.lambda)?;
        let e_prime = r.int_matrix(3 * p.m, p.t)?;
        Ok(TrapdoorT2 { id, ct_binding, e_prime })
    }
}

impl Artifact for TrapdoorT3 {
    const KIND: Kind = Kind::Td3;

    fn write_payload(&self, p: &ParamSet, out: &mut Writer) {
        match self {
            TrapdoorT3::Basis(t) => {
                out.0.push(1);
                t.write_payload(p, out);
            }
            TrapdoorT3::Ciphertext(t) => {
                out.0.push(2);
                t.write_payload(p, out);
            }
        }
    }

    fn read_payload(p: &ParamSet, r: &mut Reader<'_>) -> Result<Self> {
        match r.take(1)?[0] {
            1 => Ok(TrapdoorT3::Basis(TrapdoorT1::read_payload(p, r)?)),
            2 => Ok(TrapdoorT3::Ciphertext(TrapdoorT2::read_payload(p, r)?)),
            other => Err(LoadError::Malformed(format!("unknown type-3 variant {other}")).into()),
        }
    }
}

pub fn encode<T: Artifact>(params: &ParamSet, obj: &T) -> Vec<u8> {
    let mut out = Writer(Vec::with_capacity(HEADER_LEN));
    out.0.extend_from_slice(&MAGIC);
    out.0.extend_from_slice(&VERSION.to_le_bytes());
    out.0.push(T::KIND as u8);
    out.0.extend_from_slice(&fingerprint(params));
    out.0.extend_from_slice(&params.encode());
    obj.write_payload(params, &mut out);
    out.0
}

/// Reads the header only: the kind and the embedded parameters.
pub fn peek(bytes: &[u8]) -> Result<(Kind, ParamSet)> {
    let mut r = Reader { buf: bytes };
    read_header(&mut r)
}

fn read_header(r: &mut Reader<'_>) -> Result<(Kind, ParamSet)> {
    if r.take(4).map_err(|_| LoadError::BadMagic)? != MAGIC {
        return Err(LoadError::BadMagic.into());
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(LoadError::UnsupportedVersion(version).into());
    }
    let kind = Kind::from_byte(r.take(1)?[0])?;
    let fp: [u8; 32] = r.take(32)?.try_into().unwrap();
    let params = ParamSet::decode(r.take(72)?).map_err(malformed)?;
    if fingerprint(&params) != fp {
        return Err(LoadError::FingerprintMismatch.into());
    }
    Ok((kind, params))
}

pub fn decode<T: Artifact>(bytes: &[u8]) -> Result<(ParamSet, T)> {
    let mut r = Reader { buf: bytes };
    let (kind, params) = read_header(&mut r)?;
    if kind != T::KIND {
        return Err(LoadError::WrongKind { expected: T::KIND.name(), found: kind.name() }.into());
    }
    let obj = T::read_payload(&params, &mut r)?;
    if !r.buf.is_empty() {
        return Err(LoadError::TrailingBytes(r.buf.len()).into());
    }
    Ok((params, obj))
}

/// Like [`decode`] but also requires the embedded parameters to equal `expected`.
pub fn decode_with<T: Artifact>(bytes: &[u8], expected: &ParamSet) -> Result<T> {
    let (params, obj) = decode::<T>(bytes)?;
    if fingerprint(&params) != fingerprint(expected) {
        return Err(LoadError::ParamsMismatch.into());
    }
    Ok(obj)
}
