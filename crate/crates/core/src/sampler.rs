//! Randomness: the seedable source, discrete Gaussians over `Z` and over
//! arbitrary lattices, the rounded-Gaussian LWE noise and uniform matrices.
//!
//! Gaussian weights use `rho_{sigma,c}(x) = exp(-pi |x - c|^2 / sigma^2)`, so
//! the per-coordinate standard deviation is `sigma / sqrt(2 pi)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::zq::{dot, GramSchmidt, IntMatrix, Modulus, ZqMatrix};

/// Samples further than this many `sigma` from the center are rejected.
pub const TAIL_CUT: f64 = 12.0;

/// Seedable deterministic generator (ChaCha20).
#[derive(Clone, Debug)]
pub struct RandomSource(ChaCha20Rng);

impl RandomSource {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        RandomSource(ChaCha20Rng::from_seed(seed))
    }

    pub fn seed_from_u64(seed: u64) -> Self {
        RandomSource(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Seed from a byte string of at most 32 bytes, zero-padded.
    pub fn from_seed_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() > 32 {
            return Err(Error::LengthMismatch {
                what: "seed bytes",
                expected: 32,
                got: bytes.len(),
            });
        }
        let mut seed = [0u8; 32];
        seed[..bytes.len()].copy_from_slice(bytes);
        Ok(Self::from_seed(seed))
    }

    pub fn from_os_rng() -> Self {
        RandomSource(ChaCha20Rng::from_os_rng())
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Unnormalized discrete Gaussian weight `exp(-pi (x - c)^2 / sigma^2)`.
pub fn rho(sigma: f64, center: f64, x: f64) -> f64 {
    (-std::f64::consts::PI * (x - center).powi(2) / (sigma * sigma)).exp()
}

/// One draw from `D_{Z, sigma, center}`.
pub fn sample_z_gaussian<R: Rng + ?Sized>(sigma: f64, center: f64, rng: &mut R) -> Result<i64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    if !center.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite gaussian center {center}")));
    }
    Ok(sample_z(sigma, center, rng))
}

/// Rejection sampling against a bilateral geometric envelope `r^{|x - c|}`.
///
/// With `a = pi / sigma^2` and any `kappa` the bound
/// `-a d^2 <= a kappa^2 - 2 a kappa |d|` gives acceptance probability
/// `exp(-a (|d| - kappa)^2)` for a candidate at distance `d` from the center.
/// `kappa` is `sigma / sqrt(2 pi)`, raised to the distance of the nearest
/// integer when that is larger (tiny `sigma`, off-integer center).
pub(crate) fn sample_z<R: Rng + ?Sized>(sigma: f64, center: f64, rng: &mut R) -> i64 {
    let a = std::f64::consts::PI / (sigma * sigma);
    let up = center.ceil();
    // distances from the center to the nearest integer on each side
    let d_up = up - center;
    let d_down = 1.0 - d_up;
    let tau = (sigma / (2.0 * std::f64::consts::PI).sqrt()).max(d_up.min(d_down));
    let ln_r = -2.0 * a * tau;
    let cut = (TAIL_CUT * sigma).max(1.0);
    // P(up side) = r^{d_up} / (r^{d_up} + r^{d_down})
    let p_up = 1.0 / (1.0 + (ln_r * (d_down - d_up)).exp());

    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let j = (u.ln() / ln_r).floor();
        let (x, d) = if rng.random::<f64>() < p_up {
            (up + j, d_up + j)
        } else {
            (up - 1.0 - j, d_down + j)
        };
        if d > cut {
            continue;
        }
        let accept = (-a * (d - tau).powi(2)).exp();
        if rng.random::<f64>() < accept {
            return x as i64;
        }
    }
}

/// Randomized nearest-plane sampler over a fixed basis.
///
/// The Gram-Schmidt data is computed once; each draw costs `O(d^2)`.
#[derive(Clone, Debug)]
pub struct LatticeSampler {
    columns: Vec<Vec<i64>>,
    col_max: Vec<u64>,
    gs: GramSchmidt,
}

impl LatticeSampler {
    pub fn new(basis: &IntMatrix) -> Result<Self> {
        if basis.rows() != basis.cols() {
            return Err(Error::DimensionMismatch {
                op: "lattice_sampler",
                left_rows: basis.rows(),
                left_cols: basis.cols(),
                right_rows: basis.cols(),
                right_cols: basis.cols(),
            });
        }
        let gs = GramSchmidt::new(basis)?;
        let columns = basis.columns();
        let col_max = columns.iter().map(|c| c.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)).collect();
        Ok(LatticeSampler { columns, col_max, gs })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn gs_norm(&self) -> f64 {
        self.gs.max_norm()
    }

    /// `<center, b~_i> / ||b~_i||^2` for every `i`, skipping zero coordinates
    /// of sparse centers.
    fn coefficients(&self, center: &[f64]) -> Vec<f64> {
        let support: Vec<usize> = (0..center.len()).filter(|&j| center[j] != 0.0).collect();
        let sparse = support.len() * 4 < center.len();
        self.gs
            .ortho
            .iter()
            .zip(&self.gs.sq_norms)
            .map(|(o, &sq)| {
                let num = if sparse { support.iter().map(|&j| center[j] * o[j]).sum() } else { dot(center, o) };
                num / sq
            })
            .collect()
    }

    /// `B z`, in `i64` when the entries provably fit.
    fn combine(&self, z: &[i64]) -> Vec<i64> {
        let d = self.dim();
        let bound: u128 = z.iter().zip(&self.col_max).map(|(&zi, &c)| zi.unsigned_abs() as u128 * c as u128).sum();
        if bound < i64::MAX as u128 {
            let mut v = vec![0i64; d];
            for (col, &zi) in self.columns.iter().zip(z) {
                if zi != 0 {
                    v.iter_mut().zip(col).for_each(|(x, &b)| *x += zi * b);
                }
            }
            return v;
        }
        let mut v = vec![0i128; d];
        for (col, &zi) in self.columns.iter().zip(z) {
            if zi != 0 {
                v.iter_mut().zip(col).for_each(|(x, &b)| *x += zi as i128 * b as i128);
            }
        }
        v.into_iter()
            .map(|x| i64::try_from(x).expect("lattice point overflows i64"))
            .collect()
    }

    /// A lattice point distributed close to `D_{L(B), sigma, center}`.
    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, center: &[f64], rng: &mut R) -> Vec<i64> {
        assert_eq!(center.len(), self.dim());
        let d = self.dim();
        let mut coef = self.coefficients(center);
        let mut z = vec![0i64; d];
        for i in (0..d).rev() {
            let s = sigma / self.gs.sq_norms[i].sqrt();
            let zi = sample_z(s, coef[i], rng);
            z[i] = zi;
            if zi != 0 {
                let zf = zi as f64;
                for (c, &m) in coef[..i].iter_mut().zip(&self.gs.mu[i]) {
                    *c -= zf * m;
                }
            }
        }
        self.combine(&z)
    }

    /// Babai's nearest-plane lattice point for `center` (no randomization).
    pub fn nearest_plane(&self, center: &[f64]) -> Vec<i64> {
        let d = self.dim();
        let mut coef = self.coefficients(center);
        let mut z = vec![0i64; d];
        for i in (0..d).rev() {
            let zi = coef[i].round();
            z[i] = zi as i64;
            if zi != 0.0 {
                for (c, &m) in coef[..i].iter_mut().zip(&self.gs.mu[i]) {
                    *c -= zi * m;
                }
            }
        }
        self.combine(&z)
    }
}

/// One draw from `D_{L(basis), sigma, center}` by randomized nearest plane.
pub fn sample_d_lattice<R: Rng + ?Sized>(
    basis: &IntMatrix,
    sigma: f64,
    center: &[f64],
    rng: &mut R,
) -> Result<Vec<i64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    if center.len() != basis.rows() {
        return Err(Error::LengthMismatch {
            what: "lattice center",
            expected: basis.rows(),
            got: center.len(),
        });
    }
    Ok(LatticeSampler::new(basis)?.sample(sigma, center, rng))
}

/// The LWE noise `round(q X) mod q` with `X ~ N(0, alpha / sqrt(2 pi))`.
pub fn sample_psi_bar<R: Rng + ?Sized>(alpha: f64, q: Modulus, rng: &mut R) -> Result<u64> {
    Ok(q.reduce_i64(psi_bar_sampler(alpha, q)?.sample_centered(rng)))
}

/// Reusable `Psi_bar_alpha` sampler.
#[derive(Clone, Copy, Debug)]
pub struct PsiBar {
    normal: Normal<f64>,
    q: Modulus,
}

pub fn psi_bar_sampler(alpha: f64, q: Modulus) -> Result<PsiBar> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let std = alpha / (2.0 * std::f64::consts::PI).sqrt();
    let normal = Normal::new(0.0, std).map_err(|_| Error::InvalidAlpha(alpha))?;
    Ok(PsiBar { normal, q })
}

impl PsiBar {
    /// The rounded value before reduction mod q.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        (self.q.value() as f64 * self.normal.sample(rng)).round() as i64
    }

    pub fn sample_vec<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<i64> {
        (0..len).map(|_| self.sample_centered(rng)).collect()
    }
}

/// `m x m` matrix with i.i.d. uniform entries in `{-1, +1}`.
pub fn sample_sign_matrix<R: Rng + ?Sized>(m: usize, rng: &mut R) -> IntMatrix {
    IntMatrix::from_fn(m, m, |_, _| if rng.random::<bool>() { 1 } else { -1 })
}

/// `m x m` matrix with i.i.d. uniform entries in `[-ell, ell]`.
pub fn sample_bounded_matrix<R: Rng + ?Sized>(ell: usize, m: usize, rng: &mut R) -> IntMatrix {
    let ell = ell as i64;
    IntMatrix::from_fn(m, m, |_, _| rng.random_range(-ell..=ell))
}

pub fn sample_uniform_zq<R: Rng + ?Sized>(rows: usize, cols: usize, q: Modulus, rng: &mut R) -> ZqMatrix {
    ZqMatrix::from_fn(rows, cols, q, |_, _| rng.random_range(0..q.value()))
}

/// Vector of i.i.d. `D_{Z, sigma}` draws.
pub fn sample_z_vec<R: Rng + ?Sized>(len: usize, sigma: f64, rng: &mut R) -> Vec<i64> {
    (0..len).map(|_| sample_z(sigma, 0.0, rng)).collect()
}
