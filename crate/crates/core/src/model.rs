//! Lattice Schwinger model in spin form.
//!
//! Builds the dimensionless Hamiltonian
//!
//! ```text
//! W = x * sum_n (s+_n s-_{n+1} + h.c.)
//!   + mu/2 * sum_n (1 + (-1)^n Z_n)
//!   + sum_n (l + 1/2 sum_{k<=n} ((-1)^k + Z_k))^2
//! ```
//!
//! plus the charge penalty `lambda * (sum_n Z_n)^2`, together with the
//! observables used for spectroscopy. Qubit 0 is the least significant bit of
//! the basis index and `|0>` has Z-eigenvalue +1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliSum};

/// Physical and lattice configuration.
///
/// `x = 1/(g a)^2`, `mass_lat = m_lat/g`, `bg_field = theta/(2 pi)` and
/// `penalty_strength` is the coefficient of the charge penalty.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LatticeParams {
    pub n_sites: usize,
    pub x: f64,
    pub mass_lat: f64,
    pub bg_field: f64,
    pub penalty_strength: f64,
}

impl LatticeParams {
    pub fn new(n_sites: usize, x: f64, mass_lat: f64, bg_field: f64, penalty_strength: f64) -> Result<Self> {
        let p = Self { n_sites, x, mass_lat, bg_field, penalty_strength };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || self.n_sites % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "n_sites must be even and >= 2, got {}",
                self.n_sites
            )));
        }
        if self.n_sites > 64 {
            return Err(Error::InvalidParams("n_sites exceeds 64".into()));
        }
        for (name, v) in [
            ("x", self.x),
            ("mass_lat", self.mass_lat),
            ("bg_field", self.bg_field),
            ("penalty_strength", self.penalty_strength),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if self.x < 0.0 {
            return Err(Error::InvalidParams("x must be nonnegative".into()));
        }
        if self.penalty_strength < 0.0 {
            return Err(Error::InvalidParams("penalty_strength must be nonnegative".into()));
        }
        Ok(())
    }

    /// mu = 2 * (m_lat/g) * sqrt(x).
    pub fn mu(&self) -> f64 {
        2.0 * self.mass_lat * self.x.sqrt()
    }

    pub fn with_mass(mut self, mass_lat: f64) -> Self {
        self.mass_lat = mass_lat;
        self
    }

    pub fn with_penalty(mut self, penalty_strength: f64) -> Self {
        self.penalty_strength = penalty_strength;
        self
    }
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Link operator L_n = l + 1/2 sum_{k<=n} ((-1)^k + Z_k) as a Pauli sum.
fn link_operator(params: &LatticeParams, n: usize) -> Result<PauliSum> {
    let mut sum = PauliSum::new(params.n_sites);
    let mut constant = params.bg_field;
    for k in 0..=n {
        constant += 0.5 * if k % 2 == 0 { 1.0 } else { -1.0 };
        sum.push(re(0.5), &[(k, PauliAxis::Z)])?;
    }
    sum.push(re(constant), &[])?;
    Ok(sum.normalized())
}

/// Total charge operator sum_n Z_n (twice the physical total charge).
fn total_charge_operator(n_sites: usize) -> Result<PauliSum> {
    let mut q = PauliSum::new(n_sites);
    for k in 0..n_sites {
        q.push(re(1.0), &[(k, PauliAxis::Z)])?;
    }
    Ok(q)
}

/// The dimensionless Hamiltonian W, plus the charge penalty when
/// `penalty_strength > 0`. All squared terms are expanded symbolically and
/// merged into canonical strings.
pub fn build_hamiltonian(params: &LatticeParams) -> Result<PauliSum> {
    params.validate()?;
    let n = params.n_sites;
    let mut w = PauliSum::new(n);

    // Hopping: s+ s- + s- s+ = (XX + YY)/2 on each bond.
    for k in 0..n - 1 {
        w.push(re(0.5 * params.x), &[(k, PauliAxis::X), (k + 1, PauliAxis::X)])?;
        w.push(re(0.5 * params.x), &[(k, PauliAxis::Y), (k + 1, PauliAxis::Y)])?;
    }

    // Mass: mu/2 sum (1 + (-1)^n Z_n); the constant mu N / 2 is kept.
    let half_mu = 0.5 * params.mu();
    w.push(re(half_mu * n as f64), &[])?;
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        w.push(re(half_mu * sign), &[(k, PauliAxis::Z)])?;
    }

    // Electric: sum over links of L_n^2.
    let mut w = w.normalized();
    for link in 0..n - 1 {
        let l_op = link_operator(params, link)?;
        w = w.add(&l_op.product(&l_op)?)?;
    }

    // Charge penalty.
    if params.penalty_strength > 0.0 {
        let q = total_charge_operator(n)?;
        w = w.add(&q.product(&q)?.scaled(re(params.penalty_strength)))?;
    }
    Ok(w)
}

/// The charge penalty lambda (sum Z)^2 alone.
pub fn build_penalty(n_sites: usize, lambda: f64) -> Result<PauliSum> {
    let q = total_charge_operator(n_sites)?;
    Ok(q.product(&q)?.scaled(re(lambda)))
}

/// Pseudomomentum O_p = x/2 sum_n (X_n Z_{n+1} Y_{n+2} - Y_n Z_{n+1} X_{n+2}).
fn momentum_operator(params: &LatticeParams) -> Result<PauliSum> {
    let n = params.n_sites;
    let mut op = PauliSum::new(n);
    for k in 0..n.saturating_sub(2) {
        op.push(
            re(0.5 * params.x),
            &[(k, PauliAxis::X), (k + 1, PauliAxis::Z), (k + 2, PauliAxis::Y)],
        )?;
        op.push(
            re(-0.5 * params.x),
            &[(k, PauliAxis::Y), (k + 1, PauliAxis::Z), (k + 2, PauliAxis::X)],
        )?;
    }
    Ok(op.normalized())
}

/// The spin transformation S_R: cyclic shift by one site followed by the
/// particle-hole spin flip. Basis states map to basis states, so the operator
/// is kept as a permutation instead of a dense matrix.
#[derive(Clone, Debug)]
pub struct SpinShift {
    n_qubits: usize,
}

impl SpinShift {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Image of basis state `b` under S_R.
    pub fn permute(&self, b: u64) -> u64 {
        let n = self.n_qubits;
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        // shift site k -> k+1 (cyclic), then flip every site
        let shifted = ((b << 1) | (b >> (n - 1))) & full;
        shifted ^ full
    }

    /// <psi| S_R |psi>.
    pub fn expectation(&self, amplitudes: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, amp) in amplitudes.iter().enumerate() {
            acc += amplitudes[self.permute(b as u64) as usize].conj() * amp;
        }
        acc
    }

    /// Dense matrix form, for small registers.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for b in 0..dim as u64 {
            m[(self.permute(b) as usize, b as usize)] = Complex64::new(1.0, 0.0);
        }
        m
    }
}

/// Observable kinds for [`build_observable`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ObservableKind {
    MomentumSq,
    SpinTransform,
    ChiralCondensate,
    LinkField(usize),
    Efd(usize),
    TotalCharge,
    TotalChargeSq,
}

/// A built observable: either a Pauli sum or the S_R permutation operator.
#[derive(Clone, Debug)]
pub enum Observable {
    Pauli(PauliSum),
    Shift(SpinShift),
}

impl Observable {
    pub fn as_pauli(&self) -> Option<&PauliSum> {
        match self {
            Observable::Pauli(p) => Some(p),
            Observable::Shift(_) => None,
        }
    }
}

pub fn build_observable(kind: ObservableKind, params: &LatticeParams) -> Result<Observable> {
    params.validate()?;
    let n = params.n_sites;
    match kind {
        ObservableKind::MomentumSq => {
            let op = momentum_operator(params)?;
            Ok(Observable::Pauli(op.product(&op)?))
        }
        ObservableKind::SpinTransform => Ok(Observable::Shift(SpinShift::new(n))),
        ObservableKind::ChiralCondensate => {
            let scale = params.x.sqrt() / (2.0 * n as f64);
            let mut op = PauliSum::new(n);
            for k in 0..n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                op.push(re(scale * sign), &[])?;
                op.push(re(scale * sign), &[(k, PauliAxis::Z)])?;
            }
            Ok(Observable::Pauli(op.normalized()))
        }
        ObservableKind::LinkField(link) => {
            if link > n - 2 {
                return Err(Error::InvalidParams(format!(
                    "link index {link} out of range 0..={}",
                    n - 2
                )));
            }
            Ok(Observable::Pauli(link_operator(params, link)?))
        }
        ObservableKind::Efd(r) => {
            if r < 1 || r > n / 2 {
                return Err(Error::InvalidParams(format!("efd radius {r} out of range 1..={}", n / 2)));
            }
            let mut sum = PauliSum::new(n);
            for k in 0..r {
                sum = sum.add(&link_operator(params, n / 2 - k - 1)?)?;
                sum = sum.add(&link_operator(params, n / 2 + k)?)?;
            }
            Ok(Observable::Pauli(sum.scaled(re(1.0 / (2.0 * r as f64)))))
        }
        ObservableKind::TotalCharge => Ok(Observable::Pauli(total_charge_operator(n)?)),
        ObservableKind::TotalChargeSq => {
            let q = total_charge_operator(n)?;
            Ok(Observable::Pauli(q.product(&q)?))
        }
    }
}

/// Basis pattern of the staggered vacuum: even sites carry z = -1 (bit
/// set), odd sites z = +1. Zero total charge by construction.
pub fn staggered_vacuum_pattern(n_sites: usize) -> u64 {
    let mut p = 0u64;
    for k in (0..n_sites).step_by(2) {
        p |= 1 << k;
    }
    p
}

/// Branch label from the phase of <S_R>.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchLabel {
    Scalar,
    Vector,
}

pub const PHASE_FLOOR: f64 = 1e-6;

/// Classify by |arg| < pi/2; magnitudes below the floor are undetermined.
pub fn phase_classify(sr_expectation: Complex64) -> Result<BranchLabel> {
    phase_classify_with_floor(sr_expectation, PHASE_FLOOR)
}

pub fn phase_classify_with_floor(sr_expectation: Complex64, floor: f64) -> Result<BranchLabel> {
    let magnitude = sr_expectation.norm();
    if magnitude <= floor {
        return Err(Error::PhaseUndetermined { magnitude, floor });
    }
    if sr_expectation.arg().abs() < std::f64::consts::FRAC_PI_2 {
        Ok(BranchLabel::Scalar)
    } else {
        Ok(BranchLabel::Vector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    pub(crate) fn table2_params() -> LatticeParams {
        LatticeParams::new(4, 0.16, 0.333, 0.5, 0.0).unwrap()
    }

    /// Dense W built from the unexpanded definition, as an independent oracle.
    fn dense_w_oracle(p: &LatticeParams) -> DMatrix<Complex64> {
        let n = p.n_sites;
        let dim = 1usize << n;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let z = |b: usize, k: usize| if (b >> k) & 1 == 0 { 1.0 } else { -1.0 };
        for b in 0..dim {
            let mut diag = 0.0;
            for k in 0..n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                diag += 0.5 * p.mu() * (1.0 + sign * z(b, k));
            }
            for link in 0..n - 1 {
                let mut l = p.bg_field;
                for k in 0..=link {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    l += 0.5 * (sign + z(b, k));
                }
                diag += l * l;
            }
            if p.penalty_strength > 0.0 {
                let q: f64 = (0..n).map(|k| z(b, k)).sum();
                diag += p.penalty_strength * q * q;
            }
            m[(b, b)] = Complex64::new(diag, 0.0);
            // hopping flips adjacent 01 <-> 10
            for k in 0..n - 1 {
                if ((b >> k) & 1) != ((b >> (k + 1)) & 1) {
                    let t = b ^ (1 << k) ^ (1 << (k + 1));
                    m[(t, b)] += Complex64::new(p.x, 0.0);
                }
            }
        }
        m
    }

    #[test]
    fn expanded_hamiltonian_matches_unexpanded_dense_oracle() {
        for (n, x, mass, l, lam) in [
            (4, 0.16, 0.333, 0.5, 0.0),
            (4, 0.64, 0.125, 0.0, 4.0),
            (6, 0.64, 0.125, 0.125, 6.0),
            (6, 1.0, -0.2, 0.08, 0.0),
        ] {
            let p = LatticeParams::new(n, x, mass, l, lam).unwrap();
            let w = build_hamiltonian(&p).unwrap();
            let dense = w.to_dense();
            let oracle = dense_w_oracle(&p);
            let diff = crate::linalg::max_abs(&(&dense - &oracle));
            assert!(diff < 1e-12, "n={n}: max deviation {diff}");
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_with_real_coefficients() {
        let p = LatticeParams::new(8, 0.64, 0.125, 0.0, 8.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        assert!(w.is_hermitian());
        for t in w.terms() {
            assert!(t.coefficient.im.abs() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_commutes_with_total_charge() {
        for n in [4usize, 6, 8] {
            let p = LatticeParams::new(n, 0.8, 0.3, 0.25, 1.5).unwrap();
            let w = build_hamiltonian(&p).unwrap();
            let q = total_charge_operator(n).unwrap();
            let comm = w.commutator(&q).unwrap();
            assert!(comm.is_empty(), "commutator nonzero for n={n}: {} terms", comm.terms().len());
        }
    }

    #[test]
    fn x_zero_diagonal_energy_of_flipped_pair_is_l_squared() {
        // N=2, x=0: sigma0^z=-1, sigma1^z=+1 zeroes the mass term and the
        // single link contributes l^2.
        let l = 0.37;
        let p = LatticeParams::new(2, 0.0, 0.7, l, 0.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        let dense = w.to_dense();
        // qubit 0 flipped -> basis index 1
        assert_abs_diff_eq!(dense[(1, 1)].re, l * l, epsilon = 1e-12);
    }

    #[test]
    fn penalty_is_positive_semidefinite_and_vanishes_on_zero_charge() {
        let q2 = build_penalty(4, 2.0).unwrap().to_dense();
        let eig = nalgebra::SymmetricEigen::new(q2);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12);
        // zero-charge basis state 0b0101 has two up, two down
        let dense = build_penalty(4, 2.0).unwrap().to_dense();
        assert_abs_diff_eq!(dense[(0b0101, 0b0101)].re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_odd_or_tiny_lattices_and_nonfinite_parameters() {
        assert!(LatticeParams::new(3, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LatticeParams::new(0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LatticeParams::new(4, f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(LatticeParams::new(4, 1.0, 0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn spin_shift_is_unitary() {
        let sr = SpinShift::new(6);
        let m = sr.to_matrix();
        let prod = &m * m.adjoint();
        let id = DMatrix::<Complex64>::identity(64, 64);
        assert!(crate::linalg::max_abs(&(prod - id)) < 1e-12);
    }

    #[test]
    fn total_charge_annihilates_balanced_basis_states() {
        let p = table2_params();
        let q = match build_observable(ObservableKind::TotalCharge, &p).unwrap() {
            Observable::Pauli(q) => q,
            _ => unreachable!(),
        };
        let dense = q.to_dense();
        for b in [0b0101usize, 0b0110, 0b1010, 0b1001, 0b0011, 0b1100] {
            assert_abs_diff_eq!(dense[(b, b)].re, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn phase_classification_examples() {
        assert_eq!(phase_classify(Complex64::new(0.8, 0.01)).unwrap(), BranchLabel::Scalar);
        assert_eq!(phase_classify(Complex64::new(-0.7, 0.02)).unwrap(), BranchLabel::Vector);
        assert!(matches!(
            phase_classify(Complex64::new(1e-9, 1e-9)),
            Err(Error::PhaseUndetermined { .. })
        ));
    }

    #[test]
    fn link_field_index_bounds_are_enforced() {
        let p = table2_params();
        assert!(build_observable(ObservableKind::LinkField(2), &p).is_ok());
        assert!(build_observable(ObservableKind::LinkField(3), &p).is_err());
        assert!(build_observable(ObservableKind::Efd(2), &p).is_ok());
        assert!(build_observable(ObservableKind::Efd(3), &p).is_err());
        assert!(build_observable(ObservableKind::Efd(0), &p).is_err());
    }
}
