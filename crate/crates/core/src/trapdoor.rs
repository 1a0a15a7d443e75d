//! Trapdoor generation and Gaussian sampling with a short basis.
//!
//! [`trap_gen`] builds `A = [A_bar | G - A_bar R_bar]` with the base-2 gadget
//! `G` and completes the gadget trapdoor `R_bar` to an explicit basis of
//! `Lambda_q^perp(A)`. The preimage samplers follow the usual pattern: solve
//! `A t = u (mod q)` for any particular `t`, then subtract a lattice point
//! drawn near `t` by randomized nearest plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::sampler::{sample_uniform_zq, sample_z_vec, LatticeSampler};
use crate::zq::{IntMatrix, LinearSolver, Modulus, RankTracker, ZqMatrix, ZqVector};

/// Prime used by the greedy full-rank extraction.
const EXTRACTION_PRIME: u64 = 2_147_483_647;

/// Extra preimages drawn beyond the target dimension on each basis attempt.
const BASIS_OVERSAMPLE: usize = 16;

const BASIS_ATTEMPTS: usize = 8;

const POWER_ITERATIONS: usize = 50;

/// Fresh gadget trapdoors tried before [`trap_gen`] gives up on the bound.
const TRAPGEN_ATTEMPTS: usize = 64;

/// Declared constant in `||S~|| <= GS_BOUND_FACTOR * sqrt(n ceil(log2 q))`.
pub const GS_BOUND_FACTOR: f64 = 4.5;

/// Concrete stand-in for the `omega(sqrt(log dim))` smoothing slack:
/// `ceil(sqrt(log2 dim)) + 1`.
pub fn slack(dim: usize) -> f64 {
    (dim.max(2) as f64).log2().sqrt().ceil() + 1.0
}

/// Smallest width accepted by [`trap_gen`]: `6 n ceil(log2 q)`.
pub fn min_width(n: usize, q: Modulus) -> usize {
    6 * n * q.bits()
}

/// Upper bound on the Gram-Schmidt norm of [`trap_gen`] bases.
pub fn bound_gs(n: usize, q: Modulus) -> f64 {
    GS_BOUND_FACTOR * ((n * q.bits()) as f64).sqrt()
}

/// `A` together with a basis `S` of `Lambda_q^perp(A)`.
#[derive(Clone, Debug)]
pub struct TrapdoorPair {
    pub a: ZqMatrix,
    pub basis: IntMatrix,
    pub gs_norm: f64,
}

/// Generates `A in Z_q^{n x m}` with a short basis of its q-ary kernel lattice.
pub fn trap_gen<R: Rng + ?Sized>(q: Modulus, n: usize, m: usize, rng: &mut R) -> Result<TrapdoorPair> {
    let required = min_width(n, q);
    if n == 0 || m < required {
        return Err(Error::WidthTooSmall { m, required });
    }
    let bound = bound_gs(n, q);
    for _ in 0..TRAPGEN_ATTEMPTS {
        let pair = gadget_trapdoor(q, n, m, rng)?;
        if pair.gs_norm <= bound {
            return Ok(pair);
        }
    }
    Err(Error::SamplingFailed(TRAPGEN_ATTEMPTS))
}

fn gadget_trapdoor<R: Rng + ?Sized>(q: Modulus, n: usize, m: usize, rng: &mut R) -> Result<TrapdoorPair> {
    let k = q.bits();
    let w = n * k;
    let m_bar = m - w;

    let a_bar = sample_uniform_zq(n, m_bar, q, rng);
    // entries in {-1, 0, 1} with probabilities 1/4, 1/2, 1/4
    let r_bar = IntMatrix::from_fn(m_bar, w, |_, _| match rng.random_range(0..4u8) {
        0 => -1,
        3 => 1,
        _ => 0,
    });
    let gadget = ZqMatrix::from_fn(n, w, q, |r, c| if c / k == r { 1 << (c % k) } else { 0 });
    let a_right = gadget.sub(&a_bar.mul_int(&r_bar)?)?;
    let a = ZqMatrix::concat_cols(&[&a_bar, &a_right])?;

    // S_G: block diagonal, each block the basis of Lambda^perp(g) for g = (1, 2, ..., 2^{k-1})
    let q_bits: Vec<i64> = (0..k).map(|i| ((q.value() >> i) & 1) as i64).collect();
    let s_g = IntMatrix::from_fn(w, w, |r, c| {
        let (br, bc) = (r / k, c / k);
        if br != bc {
            return 0;
        }
        let (i, j) = (r % k, c % k);
        if j == k - 1 {
            q_bits[i]
        } else if i == j {
            2
        } else if i == j + 1 {
            -1
        } else {
            0
        }
    });
    // W: bit decomposition of -A_bar, so G W = -A_bar (mod q)
    let wmat = IntMatrix::from_fn(w, m_bar, |r, c| {
        let v = q.neg(a_bar.get(r / k, c));
        ((v >> (r % k)) & 1) as i64
    });
    // S = [[R_bar S_G, I + R_bar W], [S_G, W]]; the S_G-derived columns come
    // first so their Gram-Schmidt vectors absorb the large part.
    let top_left = r_bar.mul(&s_g)?;
    let top_right = IntMatrix::identity(m_bar).add(&r_bar.mul(&wmat)?)?;
    let basis = IntMatrix::block(&top_left, &top_right, &s_g, &wmat)?;
    let gs_norm = crate::zq::gram_schmidt_norm(&basis)?;
    Ok(TrapdoorPair { a, basis, gs_norm })
}

/// Largest singular value of `r`, estimated by power iteration on `r^T r`
/// from a fixed-seed start vector.
pub fn spectral_norm(r: &IntMatrix) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..r.cols()).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let rx: Vec<f64> = (0..r.rows())
            .map(|i| r.row(i).iter().zip(&x).map(|(&a, &b)| a as f64 * b).sum())
            .collect();
        estimate = rx.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = (0..r.cols())
            .map(|j| (0..r.rows()).map(|i| r.get(i, j) as f64 * rx[i]).sum())
            .collect();
    }
    estimate
}

fn check_sigma(sigma: f64, required: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    if sigma < required {
        return Err(Error::SigmaTooSmall { sigma, required });
    }
    Ok(())
}

/// Gaussian preimage sampler for a fixed `(A, T)` with `A T = 0 (mod q)`.
#[derive(Clone, Debug)]
pub struct PreimageSampler {
    a: ZqMatrix,
    solver: LinearSolver,
    lattice: LatticeSampler,
}

impl PreimageSampler {
    pub fn new(a: &ZqMatrix, basis: &IntMatrix) -> Result<Self> {
        if basis.rows() != a.cols() || basis.cols() != a.cols() {
            return Err(Error::DimensionMismatch {
                op: "preimage_sampler",
                left_rows: a.rows(),
                left_cols: a.cols(),
                right_rows: basis.rows(),
                right_cols: basis.cols(),
            });
        }
        if !a.mul_int(basis)?.is_zero() {
            return Err(Error::InvalidParams("basis is not in the kernel lattice of A".into()));
        }
        Ok(PreimageSampler {
            a: a.clone(),
            solver: a.solver(),
            lattice: LatticeSampler::new(basis)?,
        })
    }

    pub fn matrix(&self) -> &ZqMatrix {
        &self.a
    }

    pub fn gs_norm(&self) -> f64 {
        self.lattice.gs_norm()
    }

    /// `e` with `A e = u (mod q)`, checking `sigma >= ||T~|| slack(m)`.
    pub fn sample<R: Rng + ?Sized>(&self, u: &ZqVector, sigma: f64, rng: &mut R) -> Result<Vec<i64>> {
        check_sigma(sigma, self.gs_norm() * slack(self.a.cols()))?;
        self.sample_unchecked(u, sigma, rng)
    }

    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, u: &ZqVector, sigma: f64, rng: &mut R) -> Result<Vec<i64>> {
        let t = self.solver.solve(u)?.ok_or(Error::NoPreimage)?.center_rep();
        let center: Vec<f64> = t.iter().map(|&x| x as f64).collect();
        let v = self.lattice.sample(sigma, &center, rng);
        Ok(t.iter().zip(&v).map(|(a, b)| a - b).collect())
    }

    /// `(A | M) E = U (mod q)`, column by column: the `M` part is drawn from
    /// `D_{Z^{m1}, sigma}` and the `A` part is a preimage of the residual.
    pub fn sample_left<R: Rng + ?Sized>(&self, m: &ZqMatrix, u: &ZqMatrix, sigma: f64, rng: &mut R) -> Result<IntMatrix> {
        if m.rows() != self.a.rows() || u.rows() != self.a.rows() {
            return Err(Error::DimensionMismatch {
                op: "sample_left",
                left_rows: m.rows(),
                left_cols: m.cols(),
                right_rows: u.rows(),
                right_cols: u.cols(),
            });
        }
        let total = self.a.cols() + m.cols();
        check_sigma(sigma, self.gs_norm() * slack(total))?;
        let columns = (0..u.cols())
            .map(|j| self.left_column(m, &u.column(j), sigma, rng))
            .collect::<Result<Vec<_>>>()?;
        IntMatrix::from_columns(total, &columns)
    }

    fn left_column<R: Rng + ?Sized>(&self, m: &ZqMatrix, u: &ZqVector, sigma: f64, rng: &mut R) -> Result<Vec<i64>> {
        let e2 = sample_z_vec(m.cols(), sigma, rng);
        let residual = u.sub(&m.mul_int_vec(&e2)?)?;
        let mut e = self.sample_unchecked(&residual, sigma, rng)?;
        e.extend(e2);
        Ok(e)
    }

    /// A short full-rank set of vectors in `Lambda_q^perp(A | M)`.
    pub fn sample_basis_left<R: Rng + ?Sized>(&self, m: &ZqMatrix, sigma: f64, rng: &mut R) -> Result<IntMatrix> {
        if m.rows() != self.a.rows() {
            return Err(Error::DimensionMismatch {
                op: "sample_basis_left",
                left_rows: self.a.rows(),
                left_cols: self.a.cols(),
                right_rows: m.rows(),
                right_cols: m.cols(),
            });
        }
        let total = self.a.cols() + m.cols();
        check_sigma(sigma, self.gs_norm() * slack(total))?;
        let zero = ZqVector::zeros(self.a.rows(), self.a.modulus());
        greedy_basis(total, rng, |rng| self.left_column(m, &zero, sigma, rng))
    }
}

/// Draws kernel vectors until a full-rank subset exists, keeping the shortest
/// candidates first.
fn greedy_basis<R: Rng + ?Sized>(
    dim: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> Result<Vec<i64>>,
) -> Result<IntMatrix> {
    let mut tracker = RankTracker::new(dim, EXTRACTION_PRIME);
    let mut chosen: Vec<Vec<i64>> = Vec::with_capacity(dim);
    for _ in 0..BASIS_ATTEMPTS {
        let batch = if chosen.is_empty() { dim + BASIS_OVERSAMPLE } else { BASIS_OVERSAMPLE.max(dim - chosen.len()) };
        let mut candidates = (0..batch).map(|_| draw(rng)).collect::<Result<Vec<_>>>()?;
        candidates.sort_by_key(|v| v.iter().map(|&x| x as i128 * x as i128).sum::<i128>());
        for v in candidates {
            if tracker.insert(&v) {
                chosen.push(v);
                if chosen.len() == dim {
                    return IntMatrix::from_columns(dim, &chosen);
                }
            }
        }
    }
    Err(Error::SamplingFailed(BASIS_ATTEMPTS))
}

/// `e` with `A e = u (mod q)` distributed close to `D_{Lambda^u_q(A), sigma}`.
pub fn sample_pre<R: Rng + ?Sized>(a: &ZqMatrix, t: &IntMatrix, u: &ZqVector, sigma: f64, rng: &mut R) -> Result<Vec<i64>> {
    PreimageSampler::new(a, t)?.sample(u, sigma, rng)
}

/// `E` with `(A | M) E = U (mod q)` using a basis `T_A` of `Lambda^perp_q(A)`.
pub fn sample_left<R: Rng + ?Sized>(
    a: &ZqMatrix,
    m: &ZqMatrix,
    t_a: &IntMatrix,
    u: &ZqMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<IntMatrix> {
    PreimageSampler::new(a, t_a)?.sample_left(m, u, sigma, rng)
}

/// Full-rank short vectors of `Lambda^perp_q(A | M)` using `T_A`.
pub fn sample_basis_left<R: Rng + ?Sized>(
    a: &ZqMatrix,
    m: &ZqMatrix,
    t_a: &IntMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<IntMatrix> {
    PreimageSampler::new(a, t_a)?.sample_basis_left(m, sigma, rng)
}

/// Sampler for `F2 = (A | A R + B)` driven by a basis `T_B` of `Lambda^perp_q(B)`.
#[derive(Clone, Debug)]
pub struct RightSampler {
    inner: PreimageSampler,
    sigma_floor: f64,
}

impl RightSampler {
    pub fn new(a: &ZqMatrix, b: &ZqMatrix, r: &IntMatrix, t_b: &IntMatrix) -> Result<Self> {
        let (n, k, m) = (a.rows(), a.cols(), b.cols());
        if b.rows() != n || r.rows() != k || r.cols() != m || t_b.rows() != m || t_b.cols() != m {
            return Err(Error::DimensionMismatch {
                op: "sample_right",
                left_rows: r.rows(),
                left_cols: r.cols(),
                right_rows: t_b.rows(),
                right_cols: t_b.cols(),
            });
        }
        let q = a.modulus();
        let b_sampler = PreimageSampler::new(b, t_b)?;
        if b_sampler.solver.rank() != n {
            return Err(Error::RankDeficient);
        }
        // w_j: B w_j = -a_j, shortened modulo Lambda^perp(B) by nearest plane
        let mut w_cols = Vec::with_capacity(k);
        for j in 0..k {
            let target = ZqVector::from_vec(q, vec![0; n])?.sub(&a.column(j))?;
            let t = b_sampler.solver.solve(&target)?.ok_or(Error::NoPreimage)?.center_rep();
            let center: Vec<f64> = t.iter().map(|&x| x as f64).collect();
            let v = b_sampler.lattice.nearest_plane(&center);
            w_cols.push(t.iter().zip(&v).map(|(x, y)| x - y).collect::<Vec<i64>>());
        }
        // columns (-R b_i; b_i) for b_i in T_B, then (e_j - R w_j; w_j)
        let mut columns = Vec::with_capacity(k + m);
        for i in 0..m {
            let bi = t_b.column(i);
            let mut col: Vec<i64> = r.mul_vec(&bi)?.into_iter().map(|x| -x).collect();
            col.extend(bi);
            columns.push(col);
        }
        for (j, wj) in w_cols.into_iter().enumerate() {
            let mut col: Vec<i64> = r.mul_vec(&wj)?.into_iter().map(|x| -x).collect();
            col[j] += 1;
            col.extend(wj);
            columns.push(col);
        }
        let basis = IntMatrix::from_columns(k + m, &columns)?;
        let f2 = ZqMatrix::concat_cols(&[a, &a.mul_int(r)?.add(b)?])?;
        let sigma_floor = b_sampler.gs_norm() * spectral_norm(r) * slack(m);
        Ok(RightSampler {
            inner: PreimageSampler::new(&f2, &basis)?,
            sigma_floor,
        })
    }

    /// `(A | A R + B)`
    pub fn matrix(&self) -> &ZqMatrix {
        self.inner.matrix()
    }

    /// `||T_B~|| s_R slack(m)`
    pub fn required_sigma(&self) -> f64 {
        self.sigma_floor
    }

    pub fn sample<R: Rng + ?Sized>(&self, u: &ZqMatrix, sigma: f64, rng: &mut R) -> Result<IntMatrix> {
        check_sigma(sigma, self.sigma_floor)?;
        let dim = self.inner.a.cols();
        let columns = (0..u.cols())
            .map(|j| self.inner.sample_unchecked(&u.column(j), sigma, rng))
            .collect::<Result<Vec<_>>>()?;
        IntMatrix::from_columns(dim, &columns)
    }

    pub fn sample_basis<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<IntMatrix> {
        check_sigma(sigma, self.sigma_floor)?;
        let a = &self.inner.a;
        let zero = ZqVector::zeros(a.rows(), a.modulus());
        greedy_basis(a.cols(), rng, |rng| self.inner.sample_unchecked(&zero, sigma, rng))
    }
}

/// `E` with `(A | A R + B) E = U (mod q)` using a basis `T_B` of `Lambda^perp_q(B)`.
pub fn sample_right<R: Rng + ?Sized>(
    a: &ZqMatrix,
    b: &ZqMatrix,
    r: &IntMatrix,
    t_b: &IntMatrix,
    u: &ZqMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<IntMatrix> {
    RightSampler::new(a, b, r, t_b)?.sample(u, sigma, rng)
}

pub fn sample_basis_right<R: Rng + ?Sized>(
    a: &ZqMatrix,
    b: &ZqMatrix,
    r: &IntMatrix,
    t_b: &IntMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<IntMatrix> {
    RightSampler::new(a, b, r, t_b)?.sample_basis(sigma, rng)
}
