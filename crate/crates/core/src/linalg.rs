//! Small dense linear-algebra helpers shared across modules: the matrix
//! exponential of skew-symmetric generators, its directional (Frechet)
//! derivative, Kronecker utilities and polynomial least squares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest entry magnitude of a complex matrix.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// exp(A) for small real matrices by scaling and squaring with a Taylor
/// series; adequate to machine precision for the gate generators used here.
pub fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.amax() * n as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = (&term * &scaled) / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Eigendecomposition of a real skew-symmetric matrix B through the Hermitian
/// matrix iB, cached for repeated Frechet derivatives.
pub struct SkewExp {
    q: DMatrix<Complex64>,
    /// eigenvalues of B (purely imaginary)
    beta: Vec<Complex64>,
    /// exp(beta_i)
    exp_beta: Vec<Complex64>,
}

impl SkewExp {
    pub fn new(b: &DMatrix<f64>) -> Self {
        let n = b.nrows();
        // iB is Hermitian
        let herm = DMatrix::from_fn(n, n, |r, c| Complex64::new(0.0, b[(r, c)]));
        let eig = nalgebra::SymmetricEigen::new(herm);
        let beta: Vec<Complex64> = eig
            .eigenvalues
            .iter()
            .map(|&l| Complex64::new(0.0, -l))
            .collect();
        let exp_beta: Vec<Complex64> = beta.iter().map(|b| b.exp()).collect();
        Self { q: eig.eigenvectors, beta, exp_beta }
    }

    /// exp(B) reconstructed from the eigenbasis (real up to rounding).
    pub fn exp(&self) -> DMatrix<f64> {
        let n = self.q.nrows();
        let diag = DMatrix::from_fn(n, n, |r, c| {
            if r == c { self.exp_beta[r] } else { Complex64::new(0.0, 0.0) }
        });
        let full = &self.q * diag * self.q.adjoint();
        full.map(|v| v.re)
    }

    /// Frechet derivative of exp at B in direction E (Daleckii-Krein formula
    /// in the eigenbasis of the normal matrix B).
    pub fn frechet(&self, direction: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.q.nrows();
        let e_c = direction.map(|v| Complex64::new(v, 0.0));
        let mut inner = self.q.adjoint() * e_c * &self.q;
        for r in 0..n {
            for c in 0..n {
                let (br, bc) = (self.beta[r], self.beta[c]);
                let phi = if (br - bc).norm() < 1e-12 {
                    self.exp_beta[r]
                } else {
                    (self.exp_beta[r] - self.exp_beta[c]) / (br - bc)
                };
                inner[(r, c)] *= phi;
            }
        }
        (&self.q * inner * self.q.adjoint()).map(|v| v.re)
    }
}

/// Kronecker product with qubit-0-least-significant ordering: the row index
/// of the result is `row(a) + a_dim * row(b)`, i.e. `a` occupies the low bits.
pub fn kron_low_high(low: &DMatrix<Complex64>, high: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (lr, lc) = (low.nrows(), low.ncols());
    let (hr, hc) = (high.nrows(), high.ncols());
    DMatrix::from_fn(lr * hr, lc * hc, |r, c| {
        low[(r % lr, c % lc)] * high[(r / lr, c / lc)]
    })
}

/// Nearest Kronecker factorization of a 4x4 matrix `w ~ high (x) low` where
/// `low` acts on matrix-index bit 0. Exact when `w` is a tensor product.
/// Returns (low, high).
pub fn kron_factor_2x2(w: &DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    // Rearrange w into a 4x4 matrix R with R[(hi_r*2+hi_c),(lo_r*2+lo_c)] =
    // w[(hi_r*2+lo_r ... )] adapted to low-bit-first indexing; then a rank-1
    // decomposition of R gives the factors.
    let mut r = DMatrix::<Complex64>::zeros(4, 4);
    for hi_r in 0..2 {
        for hi_c in 0..2 {
            for lo_r in 0..2 {
                for lo_c in 0..2 {
                    let row = lo_r + 2 * hi_r;
                    let col = lo_c + 2 * hi_c;
                    r[(hi_r * 2 + hi_c, lo_r * 2 + lo_c)] = w[(row, col)];
                }
            }
        }
    }
    // Pivot-based rank-1 extraction: exact when w is a tensor product, which
    // callers verify by recomposition.
    let mut pivot = (0usize, 0usize);
    let mut mag = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            if r[(a, b)].norm() > mag {
                mag = r[(a, b)].norm();
                pivot = (a, b);
            }
        }
    }
    let (pa, pb) = pivot;
    let mut h_vec = [Complex64::new(0.0, 0.0); 4];
    let mut l_vec = [Complex64::new(0.0, 0.0); 4];
    for a in 0..4 {
        h_vec[a] = r[(a, pb)] / r[(pa, pb)];
    }
    for b in 0..4 {
        l_vec[b] = r[(pa, b)];
    }
    let h_norm = h_vec.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let l_norm = l_vec.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let gamma = (l_norm / h_norm.max(1e-300)).sqrt();
    let mut high = DMatrix::<Complex64>::zeros(2, 2);
    let mut low = DMatrix::<Complex64>::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            high[(i, j)] = h_vec[i * 2 + j] * gamma;
            low[(i, j)] = l_vec[i * 2 + j] / gamma;
        }
    }
    (low, high)
}

/// Max-norm distance between two matrices up to a global phase.
pub fn distance_up_to_phase(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    // align by the phase of the largest entry of a
    let mut best = (0usize, 0usize);
    let mut mag = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            if a[(r, c)].norm() > mag {
                mag = a[(r, c)].norm();
                best = (r, c);
            }
        }
    }
    if mag < 1e-300 || b[best].norm() < 1e-300 {
        return max_abs(&(a - b));
    }
    let phase = a[best] / a[best].norm() * (b[best] / b[best].norm()).conj();
    max_abs(&(a - b.map(|v| v * phase)))
}

/// Least-squares polynomial fit of the given degree. Returns coefficients in
/// ascending powers; `coefficients[0]` is the intercept.
pub struct PolyFit {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
}

pub fn polyfit(points: &[(f64, f64)], degree: usize) -> Result<PolyFit> {
    if points.len() < degree + 1 {
        return Err(Error::InvalidParams(format!(
            "need at least {} points for degree {degree}, got {}",
            degree + 1,
            points.len()
        )));
    }
    let rows = points.len();
    let design = DMatrix::from_fn(rows, degree + 1, |r, c| points[r].0.powi(c as i32));
    let rhs = DVector::from_fn(rows, |r, _| points[r].1);
    let svd = design.clone().svd(true, true);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * svd.singular_values[0].max(1e-300))
        .count();
    if rank < degree + 1 {
        return Err(Error::InvalidParams(
            "rank-deficient design matrix (degenerate abscissas)".into(),
        ));
    }
    let solution = svd.solve(&rhs, 1e-14).map_err(|e| Error::Convergence(e.to_string()))?;
    let residual_norm = (&design * &solution - &rhs).norm();
    Ok(PolyFit { coefficients: solution.iter().cloned().collect(), residual_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn expm_of_single_generator_is_a_givens_rotation() {
        let theta = 0.83;
        let mut a = DMatrix::<f64>::zeros(4, 4);
        a[(0, 1)] = theta;
        a[(1, 0)] = -theta;
        let u = expm_real(&a);
        assert_abs_diff_eq!(u[(0, 0)], theta.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(0, 1)], theta.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)], -theta.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(2, 2)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_route_matches_taylor_route() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut b = DMatrix::<f64>::zeros(8, 8);
            for r in 0..8 {
                for c in (r + 1)..8 {
                    let v = rng.gen_range(-2.0..2.0);
                    b[(r, c)] = v;
                    b[(c, r)] = -v;
                }
            }
            let taylor = expm_real(&b);
            let eigen = SkewExp::new(&b).exp();
            assert!((&taylor - &eigen).amax() < 1e-11);
        }
    }

    #[test]
    fn frechet_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let skew = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut b = DMatrix::<f64>::zeros(4, 4);
            for r in 0..4 {
                for c in (r + 1)..4 {
                    let v = rng.gen_range(-1.5..1.5);
                    b[(r, c)] = v;
                    b[(c, r)] = -v;
                }
            }
            b
        };
        for _ in 0..10 {
            let b = skew(&mut rng);
            let e = skew(&mut rng);
            let exp = SkewExp::new(&b);
            let analytic = exp.frechet(&e);
            let h = 1e-6;
            let fd = (expm_real(&(&b + &e * h)) - expm_real(&(&b - &e * h))) / (2.0 * h);
            assert!((&analytic - &fd).amax() < 1e-8);
        }
    }

    #[test]
    fn kron_factor_recovers_tensor_products() {
        let a = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.6, 0.1),
            Complex64::new(-0.3, 0.2),
            Complex64::new(0.8, -0.4),
            Complex64::new(0.1, 0.9),
        ]);
        let b = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, -0.5),
            Complex64::new(-0.2, 0.3),
            Complex64::new(0.7, 0.1),
        ]);
        let w = kron_low_high(&a, &b);
        let (low, high) = kron_factor_2x2(&w);
        let rebuilt = kron_low_high(&low, &high);
        assert!(max_abs(&(&w - &rebuilt)) < 1e-12);
    }

    #[test]
    fn polyfit_recovers_exact_cubic_and_flags_degenerate_designs() {
        let coef = [0.3, -1.1, 0.0, 2.5];
        let points: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let t = -1.0 + 0.3 * i as f64;
                (t, coef[0] + coef[1] * t + coef[2] * t * t + coef[3] * t * t * t)
            })
            .collect();
        let fit = polyfit(&points, 3).unwrap();
        for (got, want) in fit.coefficients.iter().zip(coef.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
        assert!(fit.residual_norm < 1e-10);

        let degenerate = vec![(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)];
        assert!(polyfit(&degenerate, 1).is_err());
    }
}
