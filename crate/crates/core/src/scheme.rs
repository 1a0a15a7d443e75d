//! Setup, key extraction, encryption and decryption.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hash::{canonical_ct_bytes, hash_h, hash_h_prime, BitString, CtShape};
use crate::params::ParamSet;
use crate::sampler::{psi_bar_sampler, sample_bounded_matrix, sample_sign_matrix, sample_uniform_zq};
use crate::trapdoor::{trap_gen, PreimageSampler};
use crate::zq::{IntMatrix, Modulus, ZqMatrix, ZqVector};

const SETUP_ATTEMPTS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct PublicParams {
    pub params: ParamSet,
    pub a: ZqMatrix,
    pub a_prime: ZqMatrix,
    /// One matrix per identity position.
    pub a_list: Vec<ZqMatrix>,
    pub b: ZqMatrix,
    pub u: ZqMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterSecretKey {
    pub t_a: IntMatrix,
    pub t_a_prime: IntMatrix,
}

/// An identity as a vector of signs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Identity(Vec<i64>);

/// Which of the two identity matrices: `(A | A_ID)` or `(A' | A_ID)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyHalf {
    Primary,
    Prime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserSecretKey {
    pub id: Identity,
    pub e: IntMatrix,
    pub e_prime: IntMatrix,
    samplers: [SamplerCache; 2],
}

/// Lazily built preimage sampler for one `(F, E)` pair. Ignored by equality.
#[derive(Clone, Debug, Default)]
pub(crate) struct SamplerCache(OnceLock<PreimageSampler>);

impl PartialEq for SamplerCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl SamplerCache {
    pub(crate) fn get(&self, pp: &PublicParams, id: &Identity, which: KeyHalf, basis: &IntMatrix) -> Result<&PreimageSampler> {
        if let Some(s) = self.0.get() {
            return Ok(s);
        }
        let s = PreimageSampler::new(&compute_f(pp, id, which)?, basis)?;
        Ok(self.0.get_or_init(|| s))
    }
}

/// `E` with `(F | A R) E = U (mod q)`, drawn with the key-dependent parameter
/// `max(sigma, ||E~|| slack(3m))`.
pub(crate) fn sample_tagged<R: Rng + ?Sized>(pp: &PublicParams, sampler: &PreimageSampler, r: &IntMatrix, rng: &mut R) -> Result<IntMatrix> {
    let ar = pp.a.mul_int(r)?;
    let sigma = pp.params.delegated_sigma(sampler.gs_norm());
    sampler.sample_left(&ar, &pp.u, sigma, rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    /// Per-ciphertext tag matrix with entries in `[-ell, ell]`.
    pub r: IntMatrix,
    pub c1: ZqVector,
    pub c2: ZqVector,
    pub c3: ZqVector,
    pub c4: ZqVector,
    pub c5: BitString,
}

/// All randomness consumed by one encryption.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptionRandomness {
    pub s1: ZqVector,
    pub s2: ZqVector,
    pub x1: Vec<i64>,
    pub x2: Vec<i64>,
    pub y1: Vec<i64>,
    pub y2: Vec<i64>,
    pub r_list: Vec<IntMatrix>,
    pub r: IntMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message(BitString);

impl Identity {
    pub fn new(signs: Vec<i64>, ell: usize) -> Result<Self> {
        if signs.len() != ell || signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidIdentity { expected: ell });
        }
        Ok(Identity(signs))
    }

    /// Hashes a name to `ell` bits and maps bit `b` to `2b - 1`.
    pub fn from_name(name: &str, ell: usize) -> Self {
        let bits = hash_h(name.as_bytes(), ell);
        Identity(bits.iter().map(|b| if b { 1 } else { -1 }).collect())
    }

    pub fn random<R: Rng + ?Sized>(ell: usize, rng: &mut R) -> Self {
        Identity((0..ell).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn signs(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Message {
    pub fn new(bits: BitString, t: usize) -> Result<Self> {
        if bits.len() != t {
            return Err(Error::InvalidMessage { expected: t, got: bits.len() });
        }
        Ok(Message(bits))
    }

    pub fn random<R: Rng + ?Sized>(t: usize, rng: &mut R) -> Self {
        let bits: Vec<bool> = (0..t).map(|_| rng.random()).collect();
        Message(BitString::from_bits(&bits))
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }

    /// `H(m)` as a `t`-bit string.
    pub fn digest(&self) -> BitString {
        hash_h(self.0.as_bytes(), self.0.len())
    }
}

impl PublicParams {
    pub fn modulus(&self) -> Modulus {
        self.a.modulus()
    }

    /// Residues held by the public parameters.
    pub fn element_count(&self) -> usize {
        let count = |m: &ZqMatrix| m.rows() * m.cols();
        count(&self.a) + count(&self.a_prime) + self.a_list.iter().map(count).sum::<usize>() + count(&self.b) + count(&self.u)
    }

    fn check_identity(&self, id: &Identity) -> Result<()> {
        if id.len() != self.params.ell {
            return Err(Error::InvalidIdentity { expected: self.params.ell });
        }
        Ok(())
    }

    /// `A_ID = B + sum_i id_i A_i`
    pub fn identity_matrix(&self, id: &Identity) -> Result<ZqMatrix> {
        self.check_identity(id)?;
        let mut acc = self.b.clone();
        for (a_i, &s) in self.a_list.iter().zip(id.signs()) {
            acc = if s == 1 { acc.add(a_i)? } else { acc.sub(a_i)? };
        }
        Ok(acc)
    }

    pub fn shape(&self) -> CtShape {
        let p = &self.params;
        CtShape { q: self.modulus(), n: p.n, m: p.m, t: p.t, ell: p.ell }
    }

    fn check_consistent(&self) -> Result<()> {
        let p = &self.params;
        let q = p.modulus()?;
        let ok = |m: &ZqMatrix, cols: usize| m.rows() == p.n && m.cols() == cols && m.modulus() == q;
        if !(ok(&self.a, p.m)
            && ok(&self.a_prime, p.m)
            && ok(&self.b, p.m)
            && ok(&self.u, p.t)
            && self.a_list.len() == p.ell
            && self.a_list.iter().all(|a| ok(a, p.m)))
        {
            return Err(Error::Format("public parameters do not match their parameter set".into()));
        }
        Ok(())
    }
}

/// `(A | A_ID)` or `(A' | A_ID)`.
pub fn compute_f(pp: &PublicParams, id: &Identity, which: KeyHalf) -> Result<ZqMatrix> {
    let left = match which {
        KeyHalf::Primary => &pp.a,
        KeyHalf::Prime => &pp.a_prime,
    };
    ZqMatrix::concat_cols(&[left, &pp.identity_matrix(id)?])
}

pub fn setup<R: Rng + ?Sized>(params: &ParamSet, rng: &mut R) -> Result<(PublicParams, MasterSecretKey)> {
    let params = params.clone().validated()?;
    let q = params.modulus()?;
    let full_rank_pair = |rng: &mut R| -> Result<_> {
        for _ in 0..SETUP_ATTEMPTS {
            let pair = trap_gen(q, params.n, params.m, rng)?;
            if pair.a.rank() == params.n {
                return Ok(pair);
            }
        }
        Err(Error::SamplingFailed(SETUP_ATTEMPTS))
    };
    let main = full_rank_pair(rng)?;
    let prime = full_rank_pair(rng)?;
    let a_list = (0..params.ell).map(|_| sample_uniform_zq(params.n, params.m, q, rng)).collect();
    let b = sample_uniform_zq(params.n, params.m, q, rng);
    let u = sample_uniform_zq(params.n, params.t, q, rng);
    let pp = PublicParams { params, a: main.a, a_prime: prime.a, a_list, b, u };
    let msk = MasterSecretKey { t_a: main.basis, t_a_prime: prime.basis };
    Ok((pp, msk))
}

impl MasterSecretKey {
    pub fn element_count(&self) -> usize {
        self.t_a.data().len() + self.t_a_prime.data().len()
    }

    /// Builds the Gaussian samplers once for many extractions.
    pub fn extractor(&self, pp: &PublicParams) -> Result<Extractor> {
        pp.check_consistent()?;
        Ok(Extractor {
            main: PreimageSampler::new(&pp.a, &self.t_a)?,
            prime: PreimageSampler::new(&pp.a_prime, &self.t_a_prime)?,
        })
    }
}

/// Key-extraction state derived from `(PP, MSK)`.
#[derive(Clone, Debug)]
pub struct Extractor {
    main: PreimageSampler,
    prime: PreimageSampler,
}

impl Extractor {
    pub fn extract<R: Rng + ?Sized>(&self, pp: &PublicParams, id: &Identity, rng: &mut R) -> Result<UserSecretKey> {
        let a_id = pp.identity_matrix(id)?;
        let sigma = pp.params.sigma;
        let e = self.main.sample_basis_left(&a_id, sigma, rng)?;
        let e_prime = self.prime.sample_basis_left(&a_id, sigma, rng)?;
        Ok(UserSecretKey::new(id.clone(), e, e_prime))
    }
}

pub fn extract<R: Rng + ?Sized>(pp: &PublicParams, msk: &MasterSecretKey, id: &Identity, rng: &mut R) -> Result<UserSecretKey> {
    msk.extractor(pp)?.extract(pp, id, rng)
}

impl UserSecretKey {
    pub fn new(id: Identity, e: IntMatrix, e_prime: IntMatrix) -> Self {
        UserSecretKey { id, e, e_prime, samplers: Default::default() }
    }

    pub fn element_count(&self) -> usize {
        self.e.data().len() + self.e_prime.data().len()
    }

    pub fn basis(&self, which: KeyHalf) -> &IntMatrix {
        match which {
            KeyHalf::Primary => &self.e,
            KeyHalf::Prime => &self.e_prime,
        }
    }

    /// Cached preimage sampler for `F_ID` (or `F'_ID`) with this key's basis.
    pub(crate) fn sampler(&self, pp: &PublicParams, which: KeyHalf) -> Result<&PreimageSampler> {
        self.samplers[which as usize].get(pp, &self.id, which, self.basis(which))
    }

    /// Gaussian parameter for preimages drawn with this key.
    pub fn sigma(&self, pp: &PublicParams, which: KeyHalf) -> Result<f64> {
        Ok(pp.params.delegated_sigma(self.sampler(pp, which)?.gs_norm()))
    }

    /// `E` with `(F | A R) E = U (mod q)`.
    pub fn sample_left<R: Rng + ?Sized>(&self, pp: &PublicParams, which: KeyHalf, r: &IntMatrix, rng: &mut R) -> Result<IntMatrix> {
        sample_tagged(pp, self.sampler(pp, which)?, r, rng)
    }
}

impl EncryptionRandomness {
    pub fn sample<R: Rng + ?Sized>(pp: &PublicParams, rng: &mut R) -> Result<Self> {
        let p = &pp.params;
        let q = pp.modulus();
        let noise = psi_bar_sampler(p.alpha, q)?;
        let mut s = || ZqVector::from_vec(q, (0..p.n).map(|_| rng.random_range(0..q.value())).collect());
        let s1 = s()?;
        let s2 = s()?;
        let x1 = noise.sample_vec(p.t, rng);
        let x2 = noise.sample_vec(p.t, rng);
        let r_list = (0..p.ell).map(|_| sample_sign_matrix(p.m, rng)).collect();
        let r = sample_bounded_matrix(p.ell, p.m, rng);
        let y1 = noise.sample_vec(p.m, rng);
        let y2 = noise.sample_vec(p.m, rng);
        Ok(EncryptionRandomness { s1, s2, x1, x2, y1, y2, r_list, r })
    }

    /// Same secrets and matrices with every noise term set to zero.
    pub fn without_noise(mut self) -> Self {
        for v in [&mut self.x1, &mut self.x2, &mut self.y1, &mut self.y2] {
            v.iter_mut().for_each(|x| *x = 0);
        }
        self
    }

    /// `R_ID = sum_i id_i R_i`
    pub fn r_id(&self, id: &Identity) -> Result<IntMatrix> {
        let m = self.r.rows();
        let mut acc = IntMatrix::zeros(m, m);
        for (r_i, &s) in self.r_list.iter().zip(id.signs()) {
            acc = acc.add(&r_i.scale(s))?;
        }
        Ok(acc)
    }
}

impl Ciphertext {
    /// Residues in `(R, c1, c2, c3, c4)`.
    pub fn residue_count(&self) -> usize {
        self.r.data().len() + self.c1.len() + self.c2.len() + self.c3.len() + self.c4.len()
    }

    pub fn canonical_bytes(&self, pp: &PublicParams) -> Result<Vec<u8>> {
        canonical_ct_bytes(pp.shape(), &self.r, &self.c1, &self.c2, &self.c3, &self.c4)
    }

    /// `H'(R || c1 || c2 || c3 || c4)`
    pub fn tag(&self, pp: &PublicParams) -> Result<BitString> {
        Ok(hash_h_prime(&self.canonical_bytes(pp)?, pp.params.lambda))
    }

    /// Recomputes `c5`. Dimension faults are errors, a mismatch is `false`.
    pub fn verify(&self, pp: &PublicParams) -> Result<bool> {
        let ell = pp.params.ell as i64;
        if self.r.data().iter().any(|x| x.abs() > ell) {
            return Ok(false);
        }
        Ok(self.tag(pp)? == self.c5)
    }
}

fn noisy_product(f: &ZqMatrix, s: &ZqVector, noise: &[i64]) -> Result<ZqVector> {
    f.transpose_mul_vec(s)?.add(&ZqVector::from_i64(s.modulus(), noise))
}

fn encode_bits(bits: &BitString, q: Modulus) -> Vec<i64> {
    bits.iter().map(|b| if b { q.half() as i64 } else { 0 }).collect()
}

pub fn encrypt<R: Rng + ?Sized>(pp: &PublicParams, id: &Identity, msg: &Message, rng: &mut R) -> Result<Ciphertext> {
    let coins = EncryptionRandomness::sample(pp, rng)?;
    encrypt_with_randomness(pp, id, msg, &coins)
}

/// Deterministic encryption with explicit coins.
pub fn encrypt_with_randomness(pp: &PublicParams, id: &Identity, msg: &Message, coins: &EncryptionRandomness) -> Result<Ciphertext> {
    let p = &pp.params;
    let q = pp.modulus();
    if msg.bits().len() != p.t {
        return Err(Error::InvalidMessage { expected: p.t, got: msg.bits().len() });
    }
    pp.check_identity(id)?;
    for (what, len, want) in [
        ("x1", coins.x1.len(), p.t),
        ("x2", coins.x2.len(), p.t),
        ("y1", coins.y1.len(), p.m),
        ("y2", coins.y2.len(), p.m),
        ("s1", coins.s1.len(), p.n),
        ("s2", coins.s2.len(), p.n),
        ("R_i", coins.r_list.len(), p.ell),
    ] {
        if len != want {
            return Err(Error::LengthMismatch { what, expected: want, got: len });
        }
    }

    let plus = |a: &[i64], b: Vec<i64>| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<i64>>();
    let c1 = noisy_product(&pp.u, &coins.s1, &plus(&coins.x1, encode_bits(msg.bits(), q)))?;
    let c2 = noisy_product(&pp.u, &coins.s2, &plus(&coins.x2, encode_bits(&msg.digest(), q)))?;

    let r_id = coins.r_id(id)?;
    let ar = pp.a.mul_int(&coins.r)?;
    let tail = |y: &[i64]| -> Result<Vec<i64>> {
        let mut v = y.to_vec();
        v.extend(r_id.transpose().mul_vec(y)?);
        v.extend(coins.r.transpose().mul_vec(y)?);
        Ok(v)
    };
    let f1 = ZqMatrix::concat_cols(&[&compute_f(pp, id, KeyHalf::Primary)?, &ar])?;
    let f2 = ZqMatrix::concat_cols(&[&compute_f(pp, id, KeyHalf::Prime)?, &ar])?;
    let c3 = noisy_product(&f1, &coins.s1, &tail(&coins.y1)?)?;
    let c4 = noisy_product(&f2, &coins.s2, &tail(&coins.y2)?)?;

    let mut ct = Ciphertext { r: coins.r.clone(), c1, c2, c3, c4, c5: BitString::zeros(p.lambda) };
    ct.c5 = ct.tag(pp)?;
    Ok(ct)
}

/// Bit `i` is 1 iff `|w_i - floor(q/2)| < floor(q/4)` on representatives in `[0, q)`.
pub fn decode_bits(w: &ZqVector) -> BitString {
    let q = w.modulus();
    let half = q.half() as i128;
    let quarter = q.quarter() as i128;
    let bits: Vec<bool> = w.as_slice().iter().map(|&x| (x as i128 - half).abs() < quarter).collect();
    BitString::from_bits(&bits)
}

/// `decode(c - E^T c')`
pub(crate) fn unmask(c: &ZqVector, e: &IntMatrix, c_long: &ZqVector) -> Result<BitString> {
    Ok(decode_bits(&c.sub(&e.transpose_mul_zq(c_long)?)?))
}

fn check_shape(pp: &PublicParams, ct: &Ciphertext) -> Result<()> {
    let p = &pp.params;
    if ct.c5.len() != p.lambda {
        return Err(Error::LengthMismatch { what: "c5", expected: p.lambda, got: ct.c5.len() });
    }
    // the remaining dimensions are checked by the canonical encoding
    ct.canonical_bytes(pp).map(|_| ())
}

/// `None` is the rejection symbol: a failed tag check or a digest mismatch.
pub fn decrypt<R: Rng + ?Sized>(pp: &PublicParams, sk: &UserSecretKey, ct: &Ciphertext, rng: &mut R) -> Result<Option<Message>> {
    check_shape(pp, ct)?;
    if !ct.verify(pp)? {
        return Ok(None);
    }
    let e = sk.sample_left(pp, KeyHalf::Primary, &ct.r, rng)?;
    let m = unmask(&ct.c1, &e, &ct.c3)?;
    let e_prime = sk.sample_left(pp, KeyHalf::Prime, &ct.r, rng)?;
    let h = unmask(&ct.c2, &e_prime, &ct.c4)?;
    let msg = Message(m);
    Ok((h == msg.digest()).then_some(msg))
}

pub(crate) fn verified(pp: &PublicParams, ct: &Ciphertext) -> Result<bool> {
    check_shape(pp, ct)?;
    ct.verify(pp)
}
