//! The hashes `H: {0,1}* -> {0,1}^t` and `H': {0,1}* -> {0,1}^lambda`, both
//! SHAKE256 with a domain-separation prefix, and the canonical byte encoding
//! of a ciphertext body that `H'` is applied to.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::error::{Error, Result};
use crate::zq::{IntMatrix, Modulus, ZqVector};

const DOMAIN_H: &[u8] = b"IBEETFA-H";
const DOMAIN_H_PRIME: &[u8] = b"IBEETFA-Hp";

/// Fixed-length bit string, packed LSB-first into bytes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitString {
    len: usize,
    bytes: Vec<u8>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Takes the first `len` bits of `bytes`; any bits past `len` must be zero.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                what: "bit string bytes",
                expected: len.div_ceil(8),
                got: bytes.len(),
            });
        }
        let s = BitString {
            len,
            bytes: bytes.to_vec(),
        };
        if len % 8 != 0 && bytes[len / 8] >> (len % 8) != 0 {
            return Err(Error::Format("bit string has nonzero padding bits".into()));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        if bit {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }
}

fn xof(domain: &[u8], input: &[u8], bits: usize) -> BitString {
    let mut h = Shake256::default();
    h.update(&(domain.len() as u64).to_le_bytes());
    h.update(domain);
    h.update(input);
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    h.finalize_xof().read(&mut bytes);
    if bits % 8 != 0 {
        let last = bytes.len() - 1;
        bytes[last] &= (1u8 << (bits % 8)) - 1;
    }
    BitString { len: bits, bytes }
}

/// `H(input)` truncated to `t` bits.
pub fn hash_h(input: &[u8], t: usize) -> BitString {
    assert!(t >= 1, "hash output length must be positive");
    xof(DOMAIN_H, input, t)
}

/// `H'(input)` truncated to `lambda` bits.
pub fn hash_h_prime(input: &[u8], lambda: usize) -> BitString {
    assert!(lambda >= 1, "hash output length must be positive");
    xof(DOMAIN_H_PRIME, input, lambda)
}

/// Dimensions that frame the canonical ciphertext encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CtShape {
    pub q: Modulus,
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub ell: usize,
}

/// `R || c1 || c2 || c3 || c4` as bytes: a header `(q, n, m, t, ell)` then
/// every entry as a 64-bit little-endian residue mod q (`R` row-major).
///
/// The length is always `8 (5 + m^2 + 2t + 6m)`.
pub fn canonical_ct_bytes(
    shape: CtShape,
    r: &IntMatrix,
    c1: &ZqVector,
    c2: &ZqVector,
    c3: &ZqVector,
    c4: &ZqVector,
) -> Result<Vec<u8>> {
    let CtShape { q, n, m, t, ell } = shape;
    if r.rows() != m || r.cols() != m {
        return Err(Error::DimensionMismatch {
            op: "canonical_ct_bytes",
            left_rows: m,
            left_cols: m,
            right_rows: r.rows(),
            right_cols: r.cols(),
        });
    }
    for (what, v, len) in [("c1", c1, t), ("c2", c2, t), ("c3", c3, 3 * m), ("c4", c4, 3 * m)] {
        if v.len() != len {
            return Err(Error::LengthMismatch {
                what,
                expected: len,
                got: v.len(),
            });
        }
        if v.modulus() != q {
            return Err(Error::ModulusMismatch(q.value(), v.modulus().value()));
        }
    }
    let mut out = Vec::with_capacity(8 * (5 + m * m + 2 * t + 6 * m));
    for h in [q.value(), n as u64, m as u64, t as u64, ell as u64] {
        out.extend_from_slice(&h.to_le_bytes());
    }
    for &x in r.data() {
        out.extend_from_slice(&q.reduce_i64(x).to_le_bytes());
    }
    for v in [c1, c2, c3, c4] {
        for &x in v.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    #[test]
    fn hash_lengths_and_determinism() {
        assert_eq!(hash_h(b"abc", 8).len(), 8);
        assert_eq!(hash_h(b"abc", 8).as_bytes().len(), 1);
        assert_eq!(hash_h(b"abc", 13).as_bytes().len(), 2);
        assert_eq!(hash_h(b"abc", 13).as_bytes()[1] >> 5, 0);
        assert_eq!(hash_h(b"abc", 64), hash_h(b"abc", 64));
        assert_eq!(hash_h_prime(b"abc", 128), hash_h_prime(b"abc", 128));
        assert_eq!(hash_h_prime(b"abc", 8).len(), 8);
        // domain separation
        assert_ne!(hash_h(b"abc", 128), hash_h_prime(b"abc", 128));
    }

    #[test]
    fn no_collisions_on_random_inputs() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let mut seen_h = HashSet::new();
        let mut seen_hp = HashSet::new();
        for _ in 0..10_000 {
            let input: [u8; 32] = rng.random();
            assert!(seen_h.insert(hash_h(&input, 64)));
            assert!(seen_hp.insert(hash_h_prime(&input, 64)));
        }
    }

    #[test]
    fn monobit_frequency() {
        let mut ones = 0;
        let mut total = 0;
        for i in 0u32..4000 {
            let h = hash_h(&i.to_le_bytes(), 256);
            ones += h.count_ones();
            total += 256;
        }
        let f = ones as f64 / total as f64;
        assert!((f - 0.5).abs() < 0.01, "ones frequency {f}");
    }

    #[test]
    fn bitstring_roundtrip_and_padding() {
        let bits = [true, false, true, true, false, false, false, false, true, true];
        let s = BitString::from_bits(&bits);
        assert_eq!(s.iter().collect::<Vec<_>>(), bits);
        assert_eq!(BitString::from_bytes(s.as_bytes(), 10).unwrap(), s);
        assert!(BitString::from_bytes(&[0, 0xff], 10).is_err());
        assert!(BitString::from_bytes(&[0], 10).is_err());
    }

    fn sample_ct(seed: u64) -> (CtShape, IntMatrix, [ZqVector; 4]) {
        let q = Modulus::new(4093).unwrap();
        let (m, t) = (5, 3);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let r = IntMatrix::from_fn(m, m, |_, _| rng.random_range(-2..=2));
        let mut v = |len| ZqVector::from_vec(q, (0..len).map(|_| rng.random_range(0..4093)).collect()).unwrap();
        let cs = [v(t), v(t), v(3 * m), v(3 * m)];
        (CtShape { q, n: 2, m, t, ell: 2 }, r, cs)
    }

    #[test]
    fn canonical_bytes_layout() {
        let (shape, r, [c1, c2, c3, c4]) = sample_ct(2);
        let bytes = canonical_ct_bytes(shape, &r, &c1, &c2, &c3, &c4).unwrap();
        let (m, t) = (shape.m, shape.t);
        assert_eq!(bytes.len(), 8 * (5 + m * m + 2 * t + 6 * m));
        assert_eq!(&bytes[..8], &4093u64.to_le_bytes());
        // R[0][0] re-encoded mod q
        let r00 = u64::from_le_bytes(bytes[40..48].try_into().unwrap());
        assert_eq!(r00, shape.q.reduce_i64(r.get(0, 0)));
        assert_eq!(bytes, canonical_ct_bytes(shape, &r, &c1, &c2, &c3, &c4).unwrap());
        assert!(canonical_ct_bytes(shape, &r, &c3, &c2, &c1, &c4).is_err());
    }

    #[test]
    fn canonical_bytes_injective_under_perturbation() {
        let (shape, r, [c1, c2, c3, c4]) = sample_ct(3);
        let base = canonical_ct_bytes(shape, &r, &c1, &c2, &c3, &c4).unwrap();
        let q = shape.q;
        for i in 0..c3.len() {
            let mut d = c3.clone().into_vec();
            d[i] = q.add(d[i], 1);
            let c3p = ZqVector::from_vec(q, d).unwrap();
            assert_ne!(base, canonical_ct_bytes(shape, &r, &c1, &c2, &c3p, &c4).unwrap());
        }
        for i in 0..r.data().len() {
            let mut d = r.data().to_vec();
            d[i] += 1;
            let rp = IntMatrix::from_vec(r.rows(), r.cols(), d).unwrap();
            assert_ne!(base, canonical_ct_bytes(shape, &rp, &c1, &c2, &c3, &c4).unwrap());
        }
    }
}
