//! Numeric kernels: Bessel J0, Hermitian eigendecomposition, correlated
//! Gaussian coloring and reproducible random streams.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, Complex64, Error, Result};

/// Power series below this argument.
const SERIES_LIMIT: f64 = 8.0;
/// Hankel asymptotic expansion at and above this argument.
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Zeroth-order Bessel function of the first kind.
///
/// Power series below |x| = 8, normalized backward recurrence up to 25 and
/// the Hankel expansion beyond (smallest term ~ e^{-2x}).
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0 of non-finite {x}")));
    }
    let x = x.abs();
    Ok(if x < SERIES_LIMIT {
        j0_series(x)
    } else if x < ASYMPTOTIC_LIMIT {
        j0_miller(x)
    } else {
        j0_asymptotic(x)
    })
}

fn j0_asymptotic(x: f64) -> f64 {
    // |a_k| / x^k for nu = 0, summed with alternating signs into P and Q.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut k = 1usize;
    loop {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * k as f64 * x);
        if next >= term || next < 1e-18 {
            break;
        }
        term = next;
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k.is_multiple_of(2) {
            p += sign * term;
        } else {
            q -= sign * term;
        }
        k += 1;
    }
    let chi = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    let mut k = 1.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) || k < 3.0 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    sum
}

// J_{n-1} = (2n/x) J_n - J_{n+1}, normalized by J0 + 2 sum J_{2k} = 1.
fn j0_miller(x: f64) -> f64 {
    let mut start = (x + 60.0 + 4.0 * x.sqrt()) as usize;
    start += start % 2;
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    let mut norm = 0.0_f64;
    for n in (1..=start).rev() {
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{n-1}
        if (n - 1) % 2 == 0 && n > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
        }
    }
    cur / (norm + cur)
}

/// Square complex matrix whose entries satisfy `m[i][j] == conj(m[j][i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Checks the Hermitian property to 1e-12 (scaled by the largest entry
    /// when that exceeds one).
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
        let tol = 1e-12 * scale;
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if !(d <= tol) {
                    return Err(Error::Contract(format!(
                        "matrix not Hermitian at ({i},{j}): asymmetry {d:e}"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Hermitian part `(m + m^H)/2`, which is always valid.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        assert!(m.is_square(), "hermitian part of a non-square matrix");
        Self((m + m.adjoint()) * Complex64::new(0.5, 0.0))
    }

    pub fn from_real_symmetric(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    /// `U diag(f(λ)) U^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(j).scale_mut(s);
        }
        &scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|l| l)
    }
}

pub fn hermitian_eig(m: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Linear map `L` with `L L^H = J` for a correlation matrix `J`.
///
/// Returns the principal square root `U Λ^{1/2} U^H`, eigenvalues floored at
/// zero. Unlike the bare factor `Λ^{1/2} U^H` this varies continuously with
/// `J`, so a fixed white draw stays coherent as element positions move.
pub fn coloring_operator(j: &HermitianMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(j)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Real symmetric specialization of [`coloring_operator`], used by the
/// channel synthesizer for the (real) Jakes correlation.
pub fn real_coloring_operator(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, j[(0, 0)].max(0.0).sqrt());
    }
    let eig = SymmetricEigen::new(j.clone());
    let mut scaled = eig.eigenvectors.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(c).scale_mut(l.max(0.0).sqrt());
    }
    &scaled * eig.eigenvectors.transpose()
}

/// Reproducible random stream.
///
/// Backed by ChaCha8. Substreams are keyed by hashing `(key, index)`, so
/// every Monte Carlo trial owns an independent stream whatever the worker
/// schedule.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent child stream; does not advance `self`.
    pub fn substream(&self, index: u64) -> Self {
        Self::new(splitmix64(self.key ^ splitmix64(index.wrapping_add(1))))
    }

    pub fn seed(&self) -> u64 {
        self.key
    }

    /// Number of 32-bit words consumed so far.
    pub fn draws(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Circularly symmetric complex Gaussian with unit variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// i.i.d. CN(0, 1) matrix, filled column by column.
pub fn complex_gaussian(rng: &mut RngStream, rows: usize, cols: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = rng.complex_normal();
        }
    }
    m
}
