//! Seeded sampling helpers. Every randomized check in the crate draws from
//! a ChaCha8 stream keyed by a `u64` seed, so reports are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{norm2, Matrix};
use crate::scalar::Scalar;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform<T: Scalar>(&mut self, lo: f64, hi: f64) -> T {
        T::of(self.0.gen_range(lo..hi))
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal<T: Scalar>(&mut self) -> T {
        let u1: f64 = self.0.gen_range(f64::EPSILON..1.0);
        let u2: f64 = self.0.gen::<f64>();
        T::of((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
    }

    pub fn index(&mut self, upper: usize) -> usize {
        self.0.gen_range(0..upper)
    }

    pub fn vector<T: Scalar>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn uniform_vector<T: Scalar>(&mut self, n: usize, lo: f64, hi: f64) -> Vec<T> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }

    /// Random direction with unit Euclidean norm.
    pub fn unit_vector<T: Scalar>(&mut self, n: usize) -> Vec<T> {
        loop {
            let v: Vec<T> = self.vector(n);
            let nv = norm2(&v);
            if nv > T::of(1e-8) {
                return v.into_iter().map(|x| x / nv).collect();
            }
        }
    }

    pub fn matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }

    /// Random symmetric positive definite matrix `BᵀB + n·I` scaled to O(1).
    pub fn spd_matrix<T: Scalar>(&mut self, n: usize) -> Matrix<T> {
        let b: Matrix<T> = self.matrix(n, n);
        let mut m = b.transpose().matmul(&b).expect("square product");
        let shift = T::of(n as f64);
        for i in 0..n {
            m[(i, i)] = m[(i, i)] + shift;
        }
        m.scale(T::one() / shift)
    }

    /// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
    pub fn orthogonal_matrix<T: Scalar>(&mut self, n: usize) -> Matrix<T> {
        loop {
            let g: Matrix<T> = self.matrix(n, n);
            let mut cols: Vec<Vec<T>> = Vec::with_capacity(n);
            let mut ok = true;
            for mut c in g.columns() {
                for q in &cols {
                    let d = crate::linalg::dot(&c, q);
                    crate::linalg::axpy(-d, q, &mut c);
                }
                let nc = norm2(&c);
                if nc < T::of(1e-6) {
                    ok = false;
                    break;
                }
                cols.push(c.into_iter().map(|x| x / nc).collect());
            }
            if ok {
                return Matrix::from_columns(n, &cols).expect("square basis");
            }
        }
    }
}
