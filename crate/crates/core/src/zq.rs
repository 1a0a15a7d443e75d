//! Exact arithmetic over `Z_q` and over small signed integers.
//!
//! Residues are always stored in `[0, q)`. The centered view in `(-q/2, q/2]`
//! is produced on demand by [`Modulus::center`] and [`ZqMatrix::center_rep`].

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

/// Two 32-bit primes used for nonsingularity checks of integer matrices.
/// Products of residues fit in a `u64`.
const RANK_PRIMES: [u64; 2] = [2_147_483_647, 4_294_967_291];

/// Above this dimension Gram-Schmidt norms are computed in `f64`.
pub const EXACT_GS_MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Modulus(u64);

impl Modulus {
    pub fn new(q: u64) -> Result<Self> {
        if q < 3 || q % 2 == 0 || q >= 1 << 63 || !is_prime(q) {
            return Err(Error::InvalidModulus(q));
        }
        Ok(Modulus(q))
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    /// `ceil(log2 q)`, the gadget length.
    pub fn bits(self) -> usize {
        (64 - (self.0 - 1).leading_zeros()) as usize
    }

    /// `floor(q / 2)`
    #[inline]
    pub fn half(self) -> u64 {
        self.0 / 2
    }

    /// `floor(q / 4)`
    #[inline]
    pub fn quarter(self) -> u64 {
        self.0 / 4
    }

    #[inline]
    pub fn reduce_i64(self, x: i64) -> u64 {
        x.rem_euclid(self.0 as i64) as u64
    }

    #[inline]
    pub fn reduce_i128(self, x: i128) -> u64 {
        x.rem_euclid(self.0 as i128) as u64
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.0 - b
        }
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.0 as u128) as u64
    }

    pub fn pow(self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(self, a: u64) -> Option<u64> {
        (a % self.0 != 0).then(|| self.pow(a, self.0 - 2))
    }

    /// Unique representative of `r` in `(-q/2, q/2]`.
    #[inline]
    pub fn center(self, r: u64) -> i64 {
        if r <= self.half() {
            r as i64
        } else {
            r as i64 - self.0 as i64
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn dim_err(op: &'static str, l: (usize, usize), r: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        op,
        left_rows: l.0,
        left_cols: l.1,
        right_rows: r.0,
        right_cols: r.1,
    }
}

/// Dense row-major matrix over `Z_q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZqMatrix {
    rows: usize,
    cols: usize,
    q: Modulus,
    data: Vec<u64>,
}

impl ZqMatrix {
    pub fn zeros(rows: usize, cols: usize, q: Modulus) -> Self {
        ZqMatrix {
            rows,
            cols,
            q,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, q: Modulus, data: Vec<u64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(&value) = data.iter().find(|&&x| x >= q.value()) {
            return Err(Error::EntryOutOfRange {
                value,
                q: q.value(),
            });
        }
        Ok(ZqMatrix { rows, cols, q, data })
    }

    pub fn from_fn(rows: usize, cols: usize, q: Modulus, mut f: impl FnMut(usize, usize) -> u64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c) % q.value());
            }
        }
        ZqMatrix { rows, cols, q, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> Modulus {
        self.q
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> ZqVector {
        ZqVector {
            q: self.q,
            data: (0..self.rows).map(|r| self.get(r, c)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn transpose(&self) -> ZqMatrix {
        ZqMatrix::from_fn(self.cols, self.rows, self.q, |r, c| self.get(c, r))
    }

    fn check_modulus(&self, other: Modulus) -> Result<()> {
        if self.q != other {
            return Err(Error::ModulusMismatch(self.q.value(), other.value()));
        }
        Ok(())
    }

    /// Exact product reduced mod q.
    pub fn mul(&self, rhs: &ZqMatrix) -> Result<ZqMatrix> {
        self.check_modulus(rhs.q)?;
        if self.cols != rhs.rows {
            return Err(dim_err("mat_mul", (self.rows, self.cols), (rhs.rows, rhs.cols)));
        }
        let q = self.q.value();
        let mut out = Vec::with_capacity(self.rows * rhs.cols);
        let mut acc = vec![0u128; rhs.cols];
        for r in 0..self.rows {
            acc.iter_mut().for_each(|x| *x = 0);
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let a = a as u128;
                for (x, &b) in acc.iter_mut().zip(rhs.row(k)) {
                    // products are < 2^126, so one pending product never overflows
                    *x += a * b as u128;
                    if *x >= 1 << 127 {
                        *x %= q as u128;
                    }
                }
            }
            out.extend(acc.iter().map(|&x| (x % q as u128) as u64));
        }
        Ok(ZqMatrix {
            rows: self.rows,
            cols: rhs.cols,
            q: self.q,
            data: out,
        })
    }

    /// Product with an integer matrix, reduced mod q.
    pub fn mul_int(&self, rhs: &IntMatrix) -> Result<ZqMatrix> {
        if self.cols != rhs.rows {
            return Err(dim_err("mat_mul", (self.rows, self.cols), (rhs.rows, rhs.cols)));
        }
        self.mul(&rhs.to_zq(self.q))
    }

    pub fn mul_vec(&self, v: &ZqVector) -> Result<ZqVector> {
        self.check_modulus(v.q)?;
        if self.cols != v.len() {
            return Err(dim_err("mat_vec", (self.rows, self.cols), (v.len(), 1)));
        }
        let data = (0..self.rows).map(|r| dot_mod(self.q, self.row(r), &v.data)).collect();
        Ok(ZqVector { q: self.q, data })
    }

    /// `self * v` for a signed integer vector.
    pub fn mul_int_vec(&self, v: &[i64]) -> Result<ZqVector> {
        if self.cols != v.len() {
            return Err(dim_err("mat_vec", (self.rows, self.cols), (v.len(), 1)));
        }
        let reduced: Vec<u64> = v.iter().map(|&x| self.q.reduce_i64(x)).collect();
        let data = (0..self.rows).map(|r| dot_mod(self.q, self.row(r), &reduced)).collect();
        Ok(ZqVector { q: self.q, data })
    }

    /// `selfᵀ * v`
    pub fn transpose_mul_vec(&self, v: &ZqVector) -> Result<ZqVector> {
        self.check_modulus(v.q)?;
        if self.rows != v.len() {
            return Err(dim_err("mat_t_vec", (self.cols, self.rows), (v.len(), 1)));
        }
        let q = self.q.value() as u128;
        let mut acc = vec![0u128; self.cols];
        for (r, &s) in v.data.iter().enumerate() {
            if s == 0 {
                continue;
            }
            for (x, &a) in acc.iter_mut().zip(self.row(r)) {
                *x += s as u128 * a as u128;
                if *x >= 1 << 127 {
                    *x %= q;
                }
            }
        }
        Ok(ZqVector {
            q: self.q,
            data: acc.into_iter().map(|x| (x % q) as u64).collect(),
        })
    }

    pub fn add(&self, rhs: &ZqMatrix) -> Result<ZqMatrix> {
        self.check_modulus(rhs.q)?;
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(dim_err("mat_add", (self.rows, self.cols), (rhs.rows, rhs.cols)));
        }
        let q = self.q;
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| q.add(a, b)).collect();
        Ok(ZqMatrix { data, ..*self })
    }

    pub fn sub(&self, rhs: &ZqMatrix) -> Result<ZqMatrix> {
        self.check_modulus(rhs.q)?;
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(dim_err("mat_sub", (self.rows, self.cols), (rhs.rows, rhs.cols)));
        }
        let q = self.q;
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| q.sub(a, b)).collect();
        Ok(ZqMatrix { data, ..*self })
    }

    pub fn neg(&self) -> ZqMatrix {
        let q = self.q;
        ZqMatrix {
            data: self.data.iter().map(|&a| q.neg(a)).collect(),
            ..*self
        }
    }

    /// Column-wise concatenation `(P_1 | P_2 | ...)`.
    pub fn concat_cols(parts: &[&ZqMatrix]) -> Result<ZqMatrix> {
        let first = parts.first().ok_or(Error::LengthMismatch {
            what: "concat_cols parts",
            expected: 1,
            got: 0,
        })?;
        let rows = first.rows;
        for p in parts {
            first.check_modulus(p.q)?;
            if p.rows != rows {
                return Err(dim_err("concat_cols", (rows, first.cols), (p.rows, p.cols)));
            }
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(r));
            }
        }
        Ok(ZqMatrix {
            rows,
            cols,
            q: first.q,
            data,
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> ZqMatrix {
        ZqMatrix::from_fn(self.rows, end - start, self.q, |r, c| self.get(r, start + c))
    }

    pub fn center_rep(&self) -> IntMatrix {
        let q = self.q;
        IntMatrix::from_vec(self.rows, self.cols, self.data.iter().map(|&x| q.center(x)).collect())
            .expect("dimensions preserved")
    }

    pub fn rank(&self) -> usize {
        self.solver().rank()
    }

    /// Row-reduces the matrix once so that many right-hand sides can be solved.
    pub fn solver(&self) -> LinearSolver {
        LinearSolver::new(self)
    }
}

fn dot_mod(q: Modulus, a: &[u64], b: &[u64]) -> u64 {
    let mut acc = 0u128;
    for (&x, &y) in a.iter().zip(b) {
        acc += x as u128 * y as u128;
        if acc >= 1 << 127 {
            acc %= q.value() as u128;
        }
    }
    (acc % q.value() as u128) as u64
}

/// Particular solutions of `A x = u (mod q)` from a precomputed reduced row echelon form.
#[derive(Clone, Debug)]
pub struct LinearSolver {
    q: Modulus,
    rows: usize,
    cols: usize,
    /// `transform * A` is in reduced row echelon form.
    transform: ZqMatrix,
    pivots: Vec<usize>,
}

impl LinearSolver {
    fn new(a: &ZqMatrix) -> Self {
        let q = a.q;
        let (rows, cols) = (a.rows, a.cols);
        let mut m = a.data.clone();
        let mut t = vec![0u64; rows * rows];
        for i in 0..rows {
            t[i * rows + i] = 1;
        }
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| m[i * cols + c] != 0) else {
                continue;
            };
            if p != r {
                for j in 0..cols {
                    m.swap(p * cols + j, r * cols + j);
                }
                for j in 0..rows {
                    t.swap(p * rows + j, r * rows + j);
                }
            }
            let inv = q.inv(m[r * cols + c]).expect("nonzero pivot");
            for j in 0..cols {
                m[r * cols + j] = q.mul(m[r * cols + j], inv);
            }
            for j in 0..rows {
                t[r * rows + j] = q.mul(t[r * rows + j], inv);
            }
            for i in 0..rows {
                let f = m[i * cols + c];
                if i == r || f == 0 {
                    continue;
                }
                for j in 0..cols {
                    let v = q.mul(f, m[r * cols + j]);
                    m[i * cols + j] = q.sub(m[i * cols + j], v);
                }
                for j in 0..rows {
                    let v = q.mul(f, t[r * rows + j]);
                    t[i * rows + j] = q.sub(t[i * rows + j], v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        LinearSolver {
            q,
            rows,
            cols,
            transform: ZqMatrix {
                rows,
                cols: rows,
                q,
                data: t,
            },
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Some `x` in `[0, q)^cols` with `A x = u`, or `None` if `u` is outside the image.
    pub fn solve(&self, u: &ZqVector) -> Result<Option<ZqVector>> {
        if u.len() != self.rows {
            return Err(dim_err("solve", (self.rows, self.cols), (u.len(), 1)));
        }
        let reduced = self.transform.mul_vec(u)?;
        if reduced.data[self.rank()..].iter().any(|&x| x != 0) {
            return Ok(None);
        }
        let mut x = vec![0u64; self.cols];
        for (i, &p) in self.pivots.iter().enumerate() {
            x[p] = reduced.data[i];
        }
        Ok(Some(ZqVector { q: self.q, data: x }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZqVector {
    q: Modulus,
    data: Vec<u64>,
}

impl ZqVector {
    pub fn zeros(dim: usize, q: Modulus) -> Self {
        ZqVector {
            q,
            data: vec![0; dim],
        }
    }

    pub fn from_vec(q: Modulus, data: Vec<u64>) -> Result<Self> {
        if let Some(&value) = data.iter().find(|&&x| x >= q.value()) {
            return Err(Error::EntryOutOfRange {
                value,
                q: q.value(),
            });
        }
        Ok(ZqVector { q, data })
    }

    pub fn from_i64(q: Modulus, v: &[i64]) -> Self {
        ZqVector {
            q,
            data: v.iter().map(|&x| q.reduce_i64(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn modulus(&self) -> Modulus {
        self.q
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        self.data[i]
    }

    pub fn add(&self, rhs: &ZqVector) -> Result<ZqVector> {
        self.zip_with(rhs, "vec_add", |q, a, b| q.add(a, b))
    }

    pub fn sub(&self, rhs: &ZqVector) -> Result<ZqVector> {
        self.zip_with(rhs, "vec_sub", |q, a, b| q.sub(a, b))
    }

    fn zip_with(&self, rhs: &ZqVector, op: &'static str, f: impl Fn(Modulus, u64, u64) -> u64) -> Result<ZqVector> {
        if self.q != rhs.q {
            return Err(Error::ModulusMismatch(self.q.value(), rhs.q.value()));
        }
        if self.len() != rhs.len() {
            return Err(dim_err(op, (self.len(), 1), (rhs.len(), 1)));
        }
        Ok(ZqVector {
            q: self.q,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(self.q, a, b)).collect(),
        })
    }

    /// Inner product with a signed integer vector, mod q.
    pub fn dot_i64(&self, v: &[i64]) -> Result<u64> {
        if self.len() != v.len() {
            return Err(dim_err("dot", (self.len(), 1), (v.len(), 1)));
        }
        let mut acc = 0i128;
        for (&a, &b) in self.data.iter().zip(v) {
            acc += self.q.center(a) as i128 * b as i128;
            if acc.unsigned_abs() >= 1 << 125 {
                acc = acc.rem_euclid(self.q.value() as i128);
            }
        }
        Ok(self.q.reduce_i128(acc))
    }

    pub fn concat(parts: &[&ZqVector]) -> ZqVector {
        ZqVector {
            q: parts[0].q,
            data: parts.iter().flat_map(|p| p.data.iter().copied()).collect(),
        }
    }

    pub fn center_rep(&self) -> Vec<i64> {
        self.data.iter().map(|&x| self.q.center(x)).collect()
    }
}

/// Dense row-major matrix of signed integers with a tracked max-abs bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
    max_abs: u64,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
            max_abs: 0,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, dim, |r, c| (r == c) as i64)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        let max_abs = data.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        Ok(IntMatrix {
            rows,
            cols,
            data,
            max_abs,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_vec(rows, cols, data).expect("length matches")
    }

    /// Builds a `dim x columns.len()` matrix from column vectors.
    pub fn from_columns(dim: usize, columns: &[Vec<i64>]) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != dim) {
            return Err(Error::LengthMismatch {
                what: "column",
                expected: dim,
                got: c.len(),
            });
        }
        Ok(Self::from_fn(dim, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn max_abs(&self) -> u64 {
        self.max_abs
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<i64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<i64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        IntMatrix {
            rows: self.cols,
            cols: self.rows,
            data: (0..self.cols)
                .flat_map(|c| (0..self.rows).map(move |r| (r, c)))
                .map(|(r, c)| self.get(r, c))
                .collect(),
            max_abs: self.max_abs,
        }
    }

    pub fn to_zq(&self, q: Modulus) -> ZqMatrix {
        ZqMatrix {
            rows: self.rows,
            cols: self.cols,
            q,
            data: self.data.iter().map(|&x| q.reduce_i64(x)).collect(),
        }
    }

    /// Exact integer product. Panics on `i64` overflow of a result entry.
    pub fn mul(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != rhs.rows {
            return Err(dim_err("int_mul", (self.rows, self.cols), (rhs.rows, rhs.cols)));
        }
        let mut out = Vec::with_capacity(self.rows * rhs.cols);
        let mut acc = vec![0i128; rhs.cols];
        for r in 0..self.rows {
            acc.iter_mut().for_each(|x| *x = 0);
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0 {
                    continue;
                }
                for (x, &b) in acc.iter_mut().zip(rhs.row(k)) {
                    *x += a as i128 * b as i128;
                }
            }
            out.extend(acc.iter().map(|&x| i64::try_from(x).expect("integer product overflows i64")));
        }
        IntMatrix::from_vec(self.rows, rhs.cols, out)
    }

    /// `self * v` exactly.
    pub fn mul_vec(&self, v: &[i64]) -> Result<Vec<i64>> {
        if self.cols != v.len() {
            return Err(dim_err("int_mat_vec", (self.rows, self.cols), (v.len(), 1)));
        }
        Ok((0..self.rows)
            .map(|r| {
                let s: i128 = self.row(r).iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum();
                i64::try_from(s).expect("integer product overflows i64")
            })
            .collect())
    }

    /// `selfᵀ * v` over `Z_q`.
    pub fn transpose_mul_zq(&self, v: &ZqVector) -> Result<ZqVector> {
        if self.rows != v.len() {
            return Err(dim_err("int_mat_t_vec", (self.cols, self.rows), (v.len(), 1)));
        }
        let q = v.modulus();
        let centered = v.center_rep();
        let mut acc = vec![0i128; self.cols];
        for (r, &s) in centered.iter().enumerate() {
            if s == 0 {
                continue;
            }
            for (x, &a) in acc.iter_mut().zip(self.row(r)) {
                *x += s as i128 * a as i128;
            }
        }
        Ok(ZqVector {
            q,
            data: acc.into_iter().map(|x| q.reduce_i128(x)).collect(),
        })
    }

    pub fn add(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(dim_err("int_add", (self.rows, self.cols), (rhs.rows, rhs.cols)));
        }
        IntMatrix::from_vec(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, k: i64) -> IntMatrix {
        IntMatrix::from_vec(self.rows, self.cols, self.data.iter().map(|&a| a * k).collect()).expect("same shape")
    }

    /// Block matrix `[[tl, tr], [bl, br]]`.
    pub fn block(tl: &IntMatrix, tr: &IntMatrix, bl: &IntMatrix, br: &IntMatrix) -> Result<IntMatrix> {
        if tl.rows != tr.rows || bl.rows != br.rows || tl.cols != bl.cols || tr.cols != br.cols {
            return Err(dim_err("block", (tl.rows, tl.cols), (br.rows, br.cols)));
        }
        let (rows, cols) = (tl.rows + bl.rows, tl.cols + tr.cols);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..tl.rows {
            data.extend_from_slice(tl.row(r));
            data.extend_from_slice(tr.row(r));
        }
        for r in 0..bl.rows {
            data.extend_from_slice(bl.row(r));
            data.extend_from_slice(br.row(r));
        }
        IntMatrix::from_vec(rows, cols, data)
    }

    /// Largest Euclidean column length.
    pub fn max_column_norm(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| (self.get(r, c) as f64).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Square and nonsingular over the rationals.
    pub fn is_nonsingular(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        if RANK_PRIMES.iter().any(|&p| rank_mod_prime(self, p) == self.rows) {
            return true;
        }
        // Full rank mod some prime is a certificate; without one, decide exactly when affordable.
        self.rows <= EXACT_GS_MAX_DIM && !bareiss_determinant(self).is_zero()
    }
}

/// Rank of an integer matrix modulo a prime `p < 2^32`.
pub fn rank_mod_prime(m: &IntMatrix, p: u64) -> usize {
    let mut tracker = RankTracker::new(m.rows, p);
    (0..m.cols).filter(|&c| tracker.insert(&m.column(c))).count()
}

/// Incremental echelon form mod a prime `p < 2^32`: tells whether a new
/// integer vector increases the rank of the vectors inserted so far.
#[derive(Clone, Debug)]
pub struct RankTracker {
    p: u64,
    dim: usize,
    rows: Vec<(usize, Vec<u32>)>,
}

impl RankTracker {
    pub fn new(dim: usize, p: u64) -> Self {
        assert!(p < 1 << 32);
        RankTracker {
            p,
            dim,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn insert(&mut self, v: &[i64]) -> bool {
        assert_eq!(v.len(), self.dim);
        if self.rows.len() == self.dim {
            return false;
        }
        let p = self.p;
        let mut w: Vec<u32> = v.iter().map(|&x| x.rem_euclid(p as i64) as u32).collect();
        for (pivot, row) in &self.rows {
            let f = w[*pivot] as u64;
            if f == 0 {
                continue;
            }
            let nf = p - f;
            // stored rows are zero before their pivot
            let (w_tail, r_tail) = (&mut w[*pivot..], &row[*pivot..]);
            if p == MERSENNE_31 {
                for (x, &r) in w_tail.iter_mut().zip(r_tail) {
                    *x = reduce_m31(*x as u64 + nf * r as u64);
                }
            } else {
                for (x, &r) in w_tail.iter_mut().zip(r_tail) {
                    *x = ((*x as u64 + nf * r as u64) % p) as u32;
                }
            }
        }
        let Some(pivot) = w.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = pow_mod_u64(w[pivot] as u64, p - 2, p);
        w.iter_mut().for_each(|x| *x = (*x as u64 * inv % p) as u32);
        self.rows.push((pivot, w));
        true
    }
}

const MERSENNE_31: u64 = (1 << 31) - 1;

/// `x mod (2^31 - 1)` for `x < 2^63`.
#[inline]
fn reduce_m31(x: u64) -> u32 {
    let y = (x & MERSENNE_31) + (x >> 31);
    let y = (y & MERSENNE_31) + (y >> 31);
    (if y >= MERSENNE_31 { y - MERSENNE_31 } else { y }) as u32
}

fn pow_mod_u64(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    acc
}

/// Determinant by fraction-free elimination.
fn bareiss_determinant(m: &IntMatrix) -> BigInt {
    let n = m.rows;
    let mut a: Vec<Vec<BigInt>> = (0..n).map(|r| m.row(r).iter().map(|&x| BigInt::from(x)).collect()).collect();
    bareiss_pivots(&mut a).pop().unwrap_or_else(|| BigInt::from(1))
}

/// Bareiss elimination with row pivoting. The last pivot is the determinant;
/// a zero is pushed and elimination stops if the matrix is singular.
fn bareiss_pivots(a: &mut [Vec<BigInt>]) -> Vec<BigInt> {
    let n = a.len();
    let mut prev = BigInt::from(1);
    let mut minors = Vec::with_capacity(n);
    let mut sign = 1i32;
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => {
                    minors.push(BigInt::zero());
                    return minors;
                }
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
        minors.push(if sign < 0 { -prev.clone() } else { prev.clone() });
    }
    minors
}

/// True iff `F * S = 0 (mod q)` and `S` is nonsingular over the rationals.
pub fn check_nullspace_basis(f: &ZqMatrix, s: &IntMatrix) -> Result<bool> {
    if s.rows != s.cols {
        return Err(dim_err("check_nullspace_basis", (f.rows, f.cols), (s.rows, s.cols)));
    }
    Ok(f.mul_int(s)?.is_zero() && s.is_nonsingular())
}

/// Floating-point Gram-Schmidt data of a column basis: the orthogonalized
/// vectors, their squared lengths and the lower-triangular coefficients
/// `mu[i][j] = <b_i, b~_j> / <b~_j, b~_j>` for `j < i`.
#[derive(Clone, Debug)]
pub struct GramSchmidt {
    pub ortho: Vec<Vec<f64>>,
    pub sq_norms: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
}

impl GramSchmidt {
    /// Modified Gram-Schmidt over the columns of `basis`.
    pub fn new(basis: &IntMatrix) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..basis.cols)
            .map(|c| (0..basis.rows).map(|r| basis.get(r, c) as f64).collect())
            .collect();
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
        let mut sq_norms = Vec::with_capacity(cols.len());
        let mut mu = Vec::with_capacity(cols.len());
        for b in &cols {
            let b_sq: f64 = b.iter().map(|x| x * x).sum();
            let mut v = b.clone();
            let mut row = Vec::with_capacity(ortho.len());
            for (o, &o_sq) in ortho.iter().zip(&sq_norms) {
                let coef = dot(&v, o) / o_sq;
                row.push(coef);
                if coef != 0.0 {
                    v.iter_mut().zip(o).for_each(|(x, y)| *x -= coef * y);
                }
            }
            let v_sq: f64 = v.iter().map(|x| x * x).sum();
            if b_sq == 0.0 || v_sq <= b_sq * 1e-24 {
                return Err(Error::RankDeficient);
            }
            ortho.push(v);
            sq_norms.push(v_sq);
            mu.push(row);
        }
        Ok(GramSchmidt { ortho, sq_norms, mu })
    }

    pub fn max_norm(&self) -> f64 {
        self.sq_norms.iter().copied().fold(0.0, f64::max).sqrt()
    }
}

/// Dot product with four independent accumulators (vectorizes).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `max_i ||b~_i||` over the Gram-Schmidt orthogonalization of the columns.
///
/// Up to [`EXACT_GS_MAX_DIM`] columns the squared lengths are computed exactly
/// as ratios of Gram determinants `D_i / D_{i-1}`; beyond that in `f64`.
pub fn gram_schmidt_norm(s: &IntMatrix) -> Result<f64> {
    if s.cols == 0 {
        return Ok(0.0);
    }
    if s.cols > EXACT_GS_MAX_DIM {
        return Ok(GramSchmidt::new(s)?.max_norm());
    }
    let cols = s.columns();
    let mut gram: Vec<Vec<BigInt>> = cols
        .iter()
        .map(|a| {
            cols.iter()
                .map(|b| a.iter().zip(b).map(|(&x, &y)| BigInt::from(x as i128 * y as i128)).sum())
                .collect()
        })
        .collect();
    let minors = leading_minors_no_pivot(&mut gram);
    if minors.len() < cols.len() || minors.iter().any(|d| !d.is_positive()) {
        return Err(Error::RankDeficient);
    }
    let mut best = num_rational::BigRational::zero();
    let mut prev = BigInt::from(1);
    for d in minors {
        let ratio = num_rational::BigRational::new(d.clone(), prev);
        if ratio > best {
            best = ratio;
        }
        prev = d;
    }
    let (num, den) = (best.numer(), best.denom());
    Ok((big_to_f64(num) / big_to_f64(den)).sqrt())
}

fn leading_minors_no_pivot(a: &mut [Vec<BigInt>]) -> Vec<BigInt> {
    let n = a.len();
    let mut prev = BigInt::from(1);
    let mut minors = Vec::with_capacity(n);
    for k in 0..n {
        if a[k][k].is_zero() {
            return minors;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
        minors.push(prev.clone());
    }
    minors
}

fn big_to_f64(x: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(v: u64) -> Modulus {
        Modulus::new(v).unwrap()
    }

    fn zq(rows: usize, cols: usize, m: Modulus, data: &[u64]) -> ZqMatrix {
        ZqMatrix::from_vec(rows, cols, m, data.to_vec()).unwrap()
    }

    #[test]
    fn modulus_validation() {
        assert!(Modulus::new(7).is_ok());
        assert!(Modulus::new(4093).is_ok());
        assert!(Modulus::new(2).is_err());
        assert!(Modulus::new(9).is_err());
        assert!(Modulus::new(1).is_err());
        assert!(Modulus::new((1 << 61) - 1).is_ok());
        assert_eq!(q(4093).bits(), 12);
        assert_eq!(q(7).bits(), 3);
    }

    #[test]
    fn mat_mul_examples() {
        let m = q(7);
        let a = zq(2, 2, m, &[1, 2, 3, 4]);
        let id = zq(2, 2, m, &[1, 0, 0, 1]);
        assert_eq!(a.mul(&id).unwrap(), a);
        assert_eq!(zq(1, 1, m, &[3]).mul(&zq(1, 1, m, &[5])).unwrap().data(), &[1]);
        assert!(matches!(
            a.mul(&zq(3, 1, m, &[1, 2, 3])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn schoolbook(a: &ZqMatrix, b: &ZqMatrix) -> Vec<u64> {
        let q = a.modulus().value() as u128;
        let mut out = vec![];
        for r in 0..a.rows() {
            for c in 0..b.cols() {
                let mut s = 0u128;
                for k in 0..a.cols() {
                    s = (s + a.get(r, k) as u128 * b.get(k, c) as u128) % q;
                }
                out.push(s as u64);
            }
        }
        out
    }

    #[test]
    fn mat_mul_matches_schoolbook_at_large_modulus() {
        use rand::{Rng, SeedableRng};
        let m = q((1 << 61) - 1);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = ZqMatrix::from_fn(4, 4, m, |_, _| rng.random_range(0..m.value()));
            let b = ZqMatrix::from_fn(4, 4, m, |_, _| rng.random_range(0..m.value()));
            assert_eq!(a.mul(&b).unwrap().data(), schoolbook(&a, &b).as_slice());
        }
    }

    #[test]
    fn concat_cols_examples() {
        let m = q(7);
        let a = zq(2, 2, m, &[1, 2, 3, 4]);
        let b = zq(2, 2, m, &[5, 6, 0, 1]);
        let c = ZqMatrix::concat_cols(&[&a, &b]).unwrap();
        assert_eq!((c.rows(), c.cols()), (2, 4));
        assert_eq!(c.column_block(0, 2), a);
        assert_eq!(c.column_block(2, 4), b);
        let f = zq(2, 1, m, &[1, 1]);
        assert_eq!(ZqMatrix::concat_cols(&[&a, &b, &f]).unwrap().cols(), 5);
        assert_eq!(ZqMatrix::concat_cols(&[&a]).unwrap(), a);
        assert!(ZqMatrix::concat_cols(&[&a, &zq(1, 1, m, &[1])]).is_err());
    }

    #[test]
    fn center_rep_examples() {
        assert_eq!(q(7).center(6), -1);
        assert_eq!(q(7).center(3), 3);
        assert_eq!(q(4093).center(2047), -2046);
        assert_eq!(q(4093).center(2046), 2046);
    }

    #[test]
    fn nullspace_basis_examples() {
        let m = q(7);
        let f = zq(1, 2, m, &[1, 1]);
        let s = IntMatrix::from_vec(2, 2, vec![6, 0, 1, 7]).unwrap();
        assert!(check_nullspace_basis(&f, &s).unwrap());
        let f2 = zq(1, 2, m, &[1, 0]);
        assert!(!check_nullspace_basis(&f2, &IntMatrix::identity(2)).unwrap());
        // singular but in the kernel
        let sing = IntMatrix::from_vec(2, 2, vec![6, 6, 1, 1]).unwrap();
        assert!(!check_nullspace_basis(&f, &sing).unwrap());
        assert!(check_nullspace_basis(&zq(1, 3, m, &[1, 1, 1]), &IntMatrix::identity(2)).is_err());
    }

    #[test]
    fn gram_schmidt_examples() {
        assert_eq!(gram_schmidt_norm(&IntMatrix::identity(3)).unwrap(), 1.0);
        let d = IntMatrix::from_vec(2, 2, vec![2, 0, 0, 3]).unwrap();
        assert_eq!(gram_schmidt_norm(&d).unwrap(), 3.0);
        let u = IntMatrix::from_vec(2, 2, vec![1, 1, 0, 1]).unwrap();
        assert_eq!(gram_schmidt_norm(&u).unwrap(), 1.0);
        let sing = IntMatrix::from_vec(2, 2, vec![1, 2, 2, 4]).unwrap();
        assert_eq!(gram_schmidt_norm(&sing), Err(Error::RankDeficient));
    }

    #[test]
    fn exact_and_float_gram_schmidt_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        for dim in [3, 10, 40] {
            let m = IntMatrix::from_fn(dim, dim, |r, c| rng.random_range(-20..=20) + if r == c { 50 } else { 0 });
            let exact = gram_schmidt_norm(&m).unwrap();
            let float = GramSchmidt::new(&m).unwrap().max_norm();
            assert!((exact - float).abs() < 1e-9 * exact, "{exact} vs {float}");
        }
    }

    #[test]
    fn solver_finds_preimages() {
        use rand::{Rng, SeedableRng};
        let m = q(4093);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let a = ZqMatrix::from_fn(3, 8, m, |_, _| rng.random_range(0..4093));
        let solver = a.solver();
        assert_eq!(solver.rank(), 3);
        for _ in 0..20 {
            let u = ZqVector::from_vec(m, (0..3).map(|_| rng.random_range(0..4093)).collect()).unwrap();
            let x = solver.solve(&u).unwrap().unwrap();
            assert_eq!(a.mul_vec(&x).unwrap(), u);
        }
        // rank-deficient: second row = 2 * first row
        let d = ZqMatrix::from_fn(2, 3, m, |r, c| (c as u64 + 1) * (r as u64 + 1));
        let s = d.solver();
        assert_eq!(s.rank(), 1);
        assert!(s.solve(&ZqVector::from_vec(m, vec![1, 1]).unwrap()).unwrap().is_none());
        assert!(s.solve(&ZqVector::from_vec(m, vec![1, 2]).unwrap()).unwrap().is_some());
    }

    #[test]
    fn int_matrix_tracks_max_abs() {
        let m = IntMatrix::from_vec(2, 2, vec![3, -7, 0, 2]).unwrap();
        assert_eq!(m.max_abs(), 7);
        assert_eq!(m.transpose().max_abs(), 7);
        assert_eq!(m.scale(-2).max_abs(), 14);
        assert_eq!(m.mul(&m).unwrap().max_abs(), m.mul(&m).unwrap().data().iter().map(|x| x.unsigned_abs()).max().unwrap());
    }

    fn small_matrix(dim: usize) -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::vec(0u64..4093, dim * dim)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn mat_mul_associative_and_distributive(
            dim in 1usize..=8,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let m = q(4093);
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let mut gen = || ZqMatrix::from_fn(dim, dim, m, |_, _| rng.random_range(0..4093));
            let (a, b, c) = (gen(), gen(), gen());
            prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
            prop_assert_eq!(a.mul(&b.add(&c).unwrap()).unwrap(), a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap());
        }

        #[test]
        fn center_rep_is_congruent_and_small(qi in 0usize..3, r in any::<u64>()) {
            let m = q([7, 4093, 1_099_511_627_791][qi]);
            let r = r % m.value();
            let c = m.center(r);
            prop_assert_eq!(m.reduce_i64(c), r);
            prop_assert!(c.unsigned_abs() <= m.value() / 2);
        }

        #[test]
        fn nullspace_check_implies_zero_product(data in small_matrix(2), f in proptest::collection::vec(0u64..4093, 2)) {
            let m = q(4093);
            let s = IntMatrix::from_vec(2, 2, data.iter().map(|&x| x as i64 - 2046).collect()).unwrap();
            let f = ZqMatrix::from_vec(1, 2, m, f).unwrap();
            if check_nullspace_basis(&f, &s).unwrap() {
                prop_assert!(f.mul_int(&s).unwrap().is_zero());
            }
        }

        #[test]
        fn gs_norm_bounded_by_max_column(data in proptest::collection::vec(-30i64..=30, 16)) {
            let s = IntMatrix::from_vec(4, 4, data).unwrap();
            if let Ok(gs) = gram_schmidt_norm(&s) {
                prop_assert!(gs <= s.max_column_norm() * (1.0 + 1e-12));
            }
        }
    }
}
