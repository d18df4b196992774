//! Small dense complex linear algebra used by the simulators and the gate compiler.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::ops::{Index, IndexMut, Mul};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Serde adapter writing complex numbers as `{"re": .., "im": ..}`.
pub mod cjson {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        re: f64,
        #[serde(default)]
        im: f64,
    }

    pub fn serialize<S: Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
        Repr { re: c.re, im: c.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(C64::new(r.re, r.im))
    }
}

/// Row-major square or rectangular complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn sub(&self, other: &CMat) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Largest entry modulus; a cheap stand-in for a norm in tolerance checks.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral norm via power iteration on `A^† A`.
    pub fn op_norm(&self) -> f64 {
        if self.data.iter().all(|x| x.norm() == 0.0) {
            return 0.0;
        }
        let g = self.adjoint() * self.clone();
        let n = g.cols;
        let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + 0.1 * i as f64, 0.3)).collect();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let w = g.apply(&v);
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|x| x / nw).collect();
            if (nw - lambda).abs() <= 1e-15 * nw {
                lambda = nw;
                break;
            }
            lambda = nw;
        }
        lambda.sqrt()
    }

    /// `‖U U† − I‖` measured entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.clone() * self.adjoint();
        p.sub(&CMat::identity(self.rows)).max_abs()
    }

    pub fn kron(&self, other: &CMat) -> CMat {
        let mut m = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        m[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        m
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        &self * &rhs
    }
}

impl Mul<&CMat> for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows);
        let mut m = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    m.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        m
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Completes the orthonormal columns in `cols` to a basis of `C^n`, scanning
/// the standard basis in index order (modified Gram–Schmidt, two passes).
pub fn complete_basis(mut cols: Vec<Vec<C64>>, n: usize) -> Vec<Vec<C64>> {
    let mut e = 0;
    while cols.len() < n && e < n {
        let mut v = vec![ZERO; n];
        v[e] = ONE;
        e += 1;
        for _ in 0..2 {
            for c in &cols {
                let p = inner(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            cols.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    cols
}

/// Builds the matrix whose `j`-th column is `cols[j]`.
pub fn from_columns(cols: &[Vec<C64>]) -> CMat {
    let n = cols[0].len();
    let mut m = CMat::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m[(i, j)] = *x;
        }
    }
    m
}

/// Haar-random unitary via QR of a complex Ginibre matrix with phase fixing.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        for _ in 0..2 {
            for c in &cols {
                let p = inner(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        cols.push(v.into_iter().map(|x| x / nv).collect());
    }
    from_columns(&cols)
}

/// Haar-random real orthogonal matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.sample(StandardNormal), 0.0)).collect();
        for _ in 0..2 {
            for c in &cols {
                let p = inner(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        cols.push(v.into_iter().map(|x| x / nv).collect());
    }
    from_columns(&cols)
}

/// Ceiling of `log2(n)` with `ceil_log2(1) = 0`.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..7 {
            assert!(haar_unitary(n, &mut rng).unitarity_defect() < 1e-12);
            assert!(haar_orthogonal(n, &mut rng).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn completion_extends_a_column() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![C64::new(s, 0.0), ZERO, C64::new(0.0, s), ZERO];
        let cols = complete_basis(vec![v.clone()], 4);
        let m = from_columns(&cols);
        assert!(m.unitarity_defect() < 1e-12);
        assert_eq!(m.column(0), v);
    }

    #[test]
    fn op_norm_of_diagonal() {
        let mut m = CMat::identity(3);
        m[(1, 1)] = C64::new(0.0, -2.5);
        assert!((m.op_norm() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn log2_ceiling() {
        assert_eq!(
            [1, 2, 3, 4, 5, 8, 9].map(ceil_log2),
            [0, 1, 2, 2, 3, 3, 4]
        );
    }
}
