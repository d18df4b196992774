//! Factorisation of a unitary into two-level unitaries by Givens elimination.

use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::{Error, Result};

/// A unitary acting as `block` on basis vectors `i < j` and as the identity
/// elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLevel {
    pub i: usize,
    pub j: usize,
    pub block: [[C64; 2]; 2],
}

impl TwoLevel {
    pub fn to_matrix(&self, dim: usize) -> CMat {
        let mut m = CMat::identity(dim);
        let (i, j) = (self.i, self.j);
        m[(i, i)] = self.block[0][0];
        m[(i, j)] = self.block[0][1];
        m[(j, i)] = self.block[1][0];
        m[(j, j)] = self.block[1][1];
        m
    }

    fn adjoint(&self) -> TwoLevel {
        let b = self.block;
        TwoLevel { i: self.i, j: self.j, block: [[b[0][0].conj(), b[1][0].conj()], [b[0][1].conj(), b[1][1].conj()]] }
    }

    /// Left-multiplies `m` in place.
    fn apply_left(&self, m: &mut CMat) {
        let (i, j) = (self.i, self.j);
        for c in 0..m.cols {
            let (a, b) = (m[(i, c)], m[(j, c)]);
            m[(i, c)] = self.block[0][0] * a + self.block[0][1] * b;
            m[(j, c)] = self.block[1][0] * a + self.block[1][1] * b;
        }
    }
}

/// Returns factors whose in-order product is `u`. At most `d(d-1)/2`
/// factors; the identity yields none.
pub fn two_level_decompose(u: &CMat, tol: f64) -> Result<Vec<TwoLevel>> {
    if u.rows != u.cols {
        return Err(Error::NotUnitary(f64::INFINITY));
    }
    let defect = u.unitarity_defect();
    if defect > tol {
        return Err(Error::NotUnitary(defect));
    }
    let d = u.rows;
    if let Some(single) = as_two_level(u) {
        return Ok(single.into_iter().collect());
    }
    let mut w = u.clone();
    let mut factors = Vec::new();
    for c in 0..d.saturating_sub(2) {
        let mut touched = false;
        for r in c + 1..d {
            let (a, b) = (w[(c, c)], w[(r, c)]);
            if b.norm() < 1e-15 {
                continue;
            }
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let f = TwoLevel { i: c, j: r, block: [[a.conj() / n, b.conj() / n], [b / n, -a / n]] };
            f.apply_left(&mut w);
            factors.push(f);
            touched = true;
        }
        let a = w[(c, c)];
        if !touched && (a - ONE).norm() > 1e-15 {
            // Phase-only column: move the phase onto the last row.
            let f = TwoLevel { i: c, j: d - 1, block: [[a.conj(), ZERO], [ZERO, a]] };
            f.apply_left(&mut w);
            factors.push(f);
        }
    }
    let mut out: Vec<TwoLevel> = factors.iter().map(TwoLevel::adjoint).collect();
    if d >= 2 {
        let last = TwoLevel {
            i: d - 2,
            j: d - 1,
            block: [[w[(d - 2, d - 2)], w[(d - 2, d - 1)]], [w[(d - 1, d - 2)], w[(d - 1, d - 1)]]],
        };
        if last.to_matrix(d).sub(&CMat::identity(d)).max_abs() > 1e-15 {
            out.push(last);
        }
    } else if (w[(0, 0)] - ONE).norm() > 1e-15 {
        return Err(Error::Invalid("1x1 phase is not a two-level unitary".into()));
    }
    Ok(out)
}

/// `Some(None)` for the identity, `Some(Some(f))` if `u` is already two-level.
fn as_two_level(u: &CMat) -> Option<Option<TwoLevel>> {
    let d = u.rows;
    let mut off: Vec<usize> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let e = if i == j { u[(i, j)] - ONE } else { u[(i, j)] };
            if e.norm() > 1e-15 {
                for k in [i, j] {
                    if !off.contains(&k) {
                        off.push(k);
                    }
                }
            }
        }
    }
    off.sort();
    match off.len() {
        0 => Some(None),
        2 => {
            let (i, j) = (off[0], off[1]);
            Some(Some(TwoLevel { i, j, block: [[u[(i, i)], u[(i, j)]], [u[(j, i)], u[(j, j)]]] }))
        }
        1 if d >= 2 => {
            let i = off[0];
            let j = if i + 1 < d { i + 1 } else { i - 1 };
            let (i, j) = (i.min(j), i.max(j));
            Some(Some(TwoLevel { i, j, block: [[u[(i, i)], u[(i, j)]], [u[(j, i)], u[(j, j)]]] }))
        }
        _ => None,
    }
}

pub fn product(factors: &[TwoLevel], dim: usize) -> CMat {
    let mut m = CMat::identity(dim);
    for f in factors.iter().rev() {
        f.apply_left(&mut m);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_needs_nothing() {
        assert!(two_level_decompose(&CMat::identity(4), 1e-12).unwrap().is_empty());
    }

    #[test]
    fn two_level_input_is_returned_whole() {
        let mut u = CMat::identity(4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        u[(1, 1)] = C64::new(s, 0.0);
        u[(1, 3)] = C64::new(0.0, s);
        u[(3, 1)] = C64::new(0.0, s);
        u[(3, 3)] = C64::new(s, 0.0);
        let f = two_level_decompose(&u, 1e-12).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].to_matrix(4), u);
    }

    #[test]
    fn random_unitaries_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [2, 3, 4, 8, 16] {
            for _ in 0..4 {
                let u = haar_unitary(d, &mut rng);
                let f = two_level_decompose(&u, 1e-10).unwrap();
                assert!(f.len() <= d * (d - 1) / 2, "{} factors for d={d}", f.len());
                // Oracle: dense product of the dense factor matrices.
                let mut m = CMat::identity(d);
                for x in &f {
                    m = &m * &x.to_matrix(d);
                }
                assert!(m.sub(&u).max_abs() <= 1e-10);
                assert!(product(&f, d).sub(&u).max_abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_phases() {
        let mut u = CMat::identity(3);
        u[(0, 0)] = C64::from_polar(1.0, 0.4);
        u[(2, 2)] = C64::from_polar(1.0, -0.4);
        u[(1, 1)] = C64::from_polar(1.0, 1.1);
        let f = two_level_decompose(&u, 1e-12).unwrap();
        assert!(f.len() <= 3);
        assert!(product(&f, 3).sub(&u).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let mut u = CMat::identity(2);
        u[(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(two_level_decompose(&u, 1e-9), Err(Error::NotUnitary(_))));
    }
}
