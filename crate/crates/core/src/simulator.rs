//! Dense statevector engine.
//!
//! States hold `2^n` complex amplitudes with qubit 0 as the least significant
//! bit of the basis index. Gate application mutates in place; expectation,
//! fidelity and sampling are read-only.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pauli::PauliSum;

pub const UNITARITY_TOL: f64 = 1e-10;

/// Dense state over `2^n_qubits` basis states.
#[derive(Clone, Debug)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
    n_qubits: usize,
}

impl QuantumState {
    /// |0...0>.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { amplitudes, n_qubits }
    }

    /// Computational basis state |index>.
    pub fn basis(n_qubits: usize, index: u64) -> Result<Self> {
        if index >= (1u64 << n_qubits) {
            return Err(Error::InvalidParams(format!("basis index {index} out of range")));
        }
        let mut s = Self::zero(n_qubits);
        s.amplitudes[0] = Complex64::new(0.0, 0.0);
        s.amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>, n_qubits: usize) -> Result<Self> {
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::SizeMismatch { expected: 1 << n_qubits, got: amplitudes.len() });
        }
        Ok(Self { amplitudes, n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
    }

    /// <self|other>.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Raw little-endian dump: an 8-byte qubit count, then re/im f64 pairs.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_qubits as u64).to_le_bytes())?;
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let n_qubits = u64::from_le_bytes(header) as usize;
        if n_qubits > 30 {
            return Err(Error::Parse(format!("unreasonable qubit count {n_qubits}")));
        }
        let mut amplitudes = Vec::with_capacity(1 << n_qubits);
        let mut buf = [0u8; 16];
        for _ in 0..(1usize << n_qubits) {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
            amplitudes.push(Complex64::new(re, im));
        }
        Self::from_amplitudes(amplitudes, n_qubits)
    }
}

/// A placed k-qubit unitary (k <= 3 in practice).
#[derive(Clone, Debug)]
pub struct GateOp {
    pub matrix: DMatrix<Complex64>,
    pub targets: Vec<usize>,
    pub label: String,
}

impl GateOp {
    /// Validates shape, target distinctness and unitarity (1e-10).
    pub fn new(matrix: DMatrix<Complex64>, targets: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        let k = targets.len();
        let dim = 1usize << k;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::SizeMismatch { expected: dim, got: matrix.nrows() });
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[i + 1..].contains(t) {
                return Err(Error::InvalidParams(format!("duplicate target qubit {t}")));
            }
        }
        let deviation = crate::linalg::max_abs(&(&matrix * matrix.adjoint() - DMatrix::<Complex64>::identity(dim, dim)));
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { matrix, targets, label: label.into() })
    }

    /// Same gate re-placed on other qubits.
    pub fn retargeted(&self, targets: Vec<usize>) -> Result<Self> {
        GateOp::new(self.matrix.clone(), targets, self.label.clone())
    }

    /// The inverse gate.
    pub fn dagger(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
            label: format!("{}^", self.label),
        }
    }

    pub fn real_matrix(matrix: DMatrix<f64>) -> DMatrix<Complex64> {
        matrix.map(|v| Complex64::new(v, 0.0))
    }
}

/// Common fixed gates.
pub mod gates {
    use super::*;

    pub fn hadamard(target: usize) -> GateOp {
        let h = 1.0 / 2.0_f64.sqrt();
        let m = DMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        GateOp::new(GateOp::real_matrix(m), vec![target], "h").expect("hadamard is unitary")
    }

    pub fn pauli_x(target: usize) -> GateOp {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        GateOp::new(GateOp::real_matrix(m), vec![target], "x").expect("x is unitary")
    }

    pub fn phase_s(target: usize) -> GateOp {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
            ],
        );
        GateOp::new(m, vec![target], "s").expect("s is unitary")
    }

    pub fn phase_sdg(target: usize) -> GateOp {
        let mut g = phase_s(target).dagger();
        g.label = "sdg".into();
        g
    }

    /// CNOT with the given control and target; matrix indices follow the
    /// convention that element index bit 0 belongs to `targets[0]`.
    pub fn cnot(control: usize, target: usize) -> GateOp {
        // targets = [control, target]: basis |c + 2t> ... bit0 = control
        let mut m = DMatrix::<Complex64>::zeros(4, 4);
        let one = Complex64::new(1.0, 0.0);
        m[(0b00, 0b00)] = one;
        m[(0b11, 0b01)] = one; // control=1, target 0 -> 1
        m[(0b10, 0b10)] = one;
        m[(0b01, 0b11)] = one;
        GateOp::new(m, vec![control, target], "cnot").expect("cnot is unitary")
    }

    pub fn rx(target: usize, angle: f64) -> GateOp {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.0),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ],
        );
        GateOp::new(m, vec![target], "rx").expect("rx is unitary")
    }

    pub fn rz(target: usize, angle: f64) -> GateOp {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, -angle / 2.0),
            Complex64::from_polar(1.0, angle / 2.0),
        ]));
        GateOp::new(m, vec![target], "rz").expect("rz is unitary")
    }
}

/// Insert zero bits at the (ascending) positions in `targets`, spreading `i`
/// over the non-target bits.
#[inline]
fn expand_index(mut i: usize, sorted_targets: &[usize]) -> usize {
    for &t in sorted_targets {
        let low = i & ((1usize << t) - 1);
        i = ((i >> t) << (t + 1)) | low;
    }
    i
}

/// Apply a k-qubit gate in place.
pub fn apply_gate(state: &mut QuantumState, gate: &GateOp) -> Result<()> {
    let n = state.n_qubits;
    let k = gate.targets.len();
    for &t in &gate.targets {
        if t >= n {
            return Err(Error::SizeMismatch { expected: n, got: t + 1 });
        }
    }
    let dim = 1usize << k;
    let mut sorted = gate.targets.clone();
    sorted.sort_unstable();
    // offsets[j] = full-register bit for matrix-index bit j
    let offsets: Vec<usize> = gate.targets.iter().map(|&t| 1usize << t).collect();

    let amps = &mut state.amplitudes;
    let mut gathered = vec![Complex64::new(0.0, 0.0); dim];
    let mut positions = vec![0usize; dim];
    for i in 0..(1usize << (n - k)) {
        let base = expand_index(i, &sorted);
        for (j, pos) in positions.iter_mut().enumerate() {
            let mut p = base;
            for (bit, off) in offsets.iter().enumerate() {
                if (j >> bit) & 1 == 1 {
                    p |= off;
                }
            }
            *pos = p;
            gathered[j] = amps[p];
        }
        for (r, &pos) in positions.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, &g) in gathered.iter().enumerate() {
                acc += gate.matrix[(r, c)] * g;
            }
            amps[pos] = acc;
        }
    }
    Ok(())
}

/// Apply a Pauli sum to a state, producing `O|psi>`. The operator may act on
/// a prefix of the register (identity on the remaining qubits).
pub fn apply_pauli_sum(state: &QuantumState, obs: &PauliSum) -> Result<QuantumState> {
    if obs.n_qubits() > state.n_qubits {
        return Err(Error::SizeMismatch { expected: state.n_qubits, got: obs.n_qubits() });
    }
    let dim = state.amplitudes.len();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for t in obs.terms() {
        let scale = t.coefficient * t.y_phase();
        let (x, z) = (t.x_mask(), t.z_mask());
        for (b, amp) in state.amplitudes.iter().enumerate() {
            let sign = if (b as u64 & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[(b as u64 ^ x) as usize] += scale * sign * amp;
        }
    }
    QuantumState::from_amplitudes(out, state.n_qubits)
}

/// <psi|O|psi> for a Pauli sum acting on a prefix of the register. Terms are
/// evaluated in parallel and summed in a fixed order.
pub fn expectation(state: &QuantumState, obs: &PauliSum) -> Result<Complex64> {
    if obs.n_qubits() > state.n_qubits {
        return Err(Error::SizeMismatch { expected: state.n_qubits, got: obs.n_qubits() });
    }
    let amps = &state.amplitudes;
    let per_term: Vec<Complex64> = obs
        .terms()
        .par_iter()
        .map(|t| {
            let (x, z) = (t.x_mask(), t.z_mask());
            let mut acc = Complex64::new(0.0, 0.0);
            if x == 0 {
                let mut re_acc = 0.0;
                for (b, amp) in amps.iter().enumerate() {
                    let sign = if (b as u64 & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    re_acc += sign * amp.norm_sqr();
                }
                acc = Complex64::new(re_acc, 0.0);
            } else {
                for (b, amp) in amps.iter().enumerate() {
                    let sign = if (b as u64 & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    acc += amps[(b as u64 ^ x) as usize].conj() * (sign * amp);
                }
            }
            t.coefficient * t.y_phase() * acc
        })
        .collect();
    Ok(per_term.into_iter().sum())
}

/// Real expectation of a Hermitian Pauli sum.
pub fn expectation_real(state: &QuantumState, obs: &PauliSum) -> Result<f64> {
    if !obs.is_hermitian() {
        return Err(Error::InvalidParams("observable is not Hermitian".into()));
    }
    Ok(expectation(state, obs)?.re)
}

/// Variance <O^2> - <O>^2 via double application; requires Hermitian O.
pub fn variance(state: &QuantumState, obs: &PauliSum) -> Result<f64> {
    if !obs.is_hermitian() {
        return Err(Error::InvalidParams("variance requires a Hermitian observable".into()));
    }
    let applied = apply_pauli_sum(state, obs)?;
    let second_moment = applied.norm().powi(2);
    let mean = state.inner(&applied).re;
    Ok((second_moment - mean * mean).max(0.0))
}

/// |<a|b>|^2.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::SizeMismatch { expected: a.n_qubits, got: b.n_qubits });
    }
    Ok(a.inner(b).norm_sqr())
}

/// Multinomial sampling of the computational basis; deterministic per seed.
pub fn sample_counts(state: &QuantumState, shots: u64, seed: u64) -> Result<BTreeMap<u64, u64>> {
    if shots < 1 {
        return Err(Error::InvalidParams("shots must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(state.amplitudes.len());
    let mut acc = 0.0;
    for a in &state.amplitudes {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = rand::distributions::Uniform::new(0.0, total);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = uniform.sample(&mut rng);
        let idx = cumulative.partition_point(|&c| c < u) as u64;
        *counts.entry(idx.min(state.amplitudes.len() as u64 - 1)).or_insert(0) += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, LatticeParams};
    use crate::pauli::{PauliAxis, PauliSum};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn x_gate_flips_qubit_zero() {
        let mut s = QuantumState::zero(5);
        apply_gate(&mut s, &gates::pauli_x(0)).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hadamard_cnot_builds_bell_pair_on_high_qubits() {
        // H on ancilla (qubit 4), CNOT ancilla -> physical qubit 3.
        let mut s = QuantumState::zero(5);
        apply_gate(&mut s, &gates::hadamard(4)).unwrap();
        apply_gate(&mut s, &gates::cnot(4, 3)).unwrap();
        let amps = s.amplitudes();
        let expected = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(amps[0].re, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(amps[(1 << 4) | (1 << 3)].re, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn z_expectation_on_zero_state_is_plus_one() {
        let s = QuantumState::zero(3);
        let mut z0 = PauliSum::new(3);
        z0.push(c(1.0), &[(0, PauliAxis::Z)]).unwrap();
        assert_abs_diff_eq!(expectation(&s, &z0).unwrap().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn random_gate_sequences_preserve_norm_and_invert() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut s = QuantumState::zero(6);
        let mut gate_stack = Vec::new();
        for _ in 0..100 {
            let t0 = rng.gen_range(0..6);
            let mut t1 = rng.gen_range(0..6);
            while t1 == t0 {
                t1 = rng.gen_range(0..6);
            }
            // random SO(4) via QR of a random matrix would need linalg; use
            // a simpler random two-qubit unitary from known generators
            let a = rng.gen_range(-3.0..3.0);
            let b = rng.gen_range(-3.0..3.0);
            let g = gates::rx(t0, a);
            let g2 = gates::rz(t1, b);
            let cn = gates::cnot(t0, t1);
            apply_gate(&mut s, &g).unwrap();
            apply_gate(&mut s, &g2).unwrap();
            apply_gate(&mut s, &cn).unwrap();
            gate_stack.push((g, g2, cn));
        }
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-10);
        for (g, g2, cn) in gate_stack.iter().rev() {
            apply_gate(&mut s, &cn.dagger()).unwrap();
            apply_gate(&mut s, &g2.dagger()).unwrap();
            apply_gate(&mut s, &g.dagger()).unwrap();
        }
        let mut max_dev = 0.0f64;
        for (i, a) in s.amplitudes().iter().enumerate() {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            max_dev = max_dev.max((a - c(expect)).norm());
        }
        assert!(max_dev < 1e-12, "inverse deviation {max_dev}");
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let dim = 1usize << n;
        let mut amplitudes = Vec::with_capacity(dim);
        for _ in 0..dim {
            amplitudes.push(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
        let mut s = QuantumState::from_amplitudes(amplitudes, n).unwrap();
        s.normalize();

        let mut obs = PauliSum::new(n);
        for _ in 0..20 {
            let mut factors = Vec::new();
            for q in 0..n {
                match rng.gen_range(0..4) {
                    1 => factors.push((q, PauliAxis::X)),
                    2 => factors.push((q, PauliAxis::Y)),
                    3 => factors.push((q, PauliAxis::Z)),
                    _ => {}
                }
            }
            obs.push(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), &factors)
                .unwrap();
        }

        let fast = expectation(&s, &obs).unwrap();
        let dense = obs.to_dense();
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        let oracle = (v.adjoint() * &dense * &v)[(0, 0)];
        assert!((fast - oracle).norm() < 1e-10);

        // linearity: <aA + bB> = a<A> + b<B>
        let obs_b = {
            let mut b = PauliSum::new(n);
            b.push(c(0.7), &[(0, PauliAxis::X), (3, PauliAxis::X)]).unwrap();
            b
        };
        let combined = obs.scaled(c(0.3)).add(&obs_b.scaled(c(-1.2))).unwrap();
        let lhs = expectation(&s, &combined).unwrap();
        let rhs = expectation(&s, &obs).unwrap() * 0.3 + expectation(&s, &obs_b).unwrap() * -1.2;
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn variance_of_eigenstate_vanishes_and_two_level_case_is_quarter_gap_squared() {
        let p = LatticeParams::new(4, 0.16, 0.333, 0.5, 0.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        let dense = w.to_dense().map(|v| v.re);
        let eig = nalgebra::SymmetricEigen::new(dense);
        // pick the two lowest eigenpairs
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let (i0, i1) = (order[0], order[1]);
        let to_state = |col: usize| {
            let amplitudes: Vec<Complex64> =
                eig.eigenvectors.column(col).iter().map(|&v| c(v)).collect();
            QuantumState::from_amplitudes(amplitudes, 4).unwrap()
        };
        let s0 = to_state(i0);
        assert!(variance(&s0, &w).unwrap() < 1e-10);

        let gap = eig.eigenvalues[i1] - eig.eigenvalues[i0];
        let mut mixed: Vec<Complex64> = eig
            .eigenvectors
            .column(i0)
            .iter()
            .zip(eig.eigenvectors.column(i1).iter())
            .map(|(&a, &b)| c((a + b) / 2.0_f64.sqrt()))
            .collect();
        // renormalize defensively (columns are orthonormal already)
        let norm = mixed.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        mixed.iter_mut().for_each(|v| *v /= norm);
        let s_mix = QuantumState::from_amplitudes(mixed, 4).unwrap();
        assert_abs_diff_eq!(variance(&s_mix, &w).unwrap(), gap * gap / 4.0, epsilon = 1e-10);
    }

    #[test]
    fn sampling_is_deterministic_and_binomially_reasonable() {
        let s = QuantumState::zero(4);
        let counts = sample_counts(&s, 1000, 42).unwrap();
        assert_eq!(counts.get(&0), Some(&1000));

        let mut plus = QuantumState::zero(1);
        apply_gate(&mut plus, &gates::hadamard(0)).unwrap();
        let shots = 100_000u64;
        let counts = sample_counts(&plus, shots, 1).unwrap();
        let zero_fraction = *counts.get(&0).unwrap() as f64 / shots as f64;
        let sigma = (0.25 / shots as f64).sqrt();
        assert!((zero_fraction - 0.5).abs() < 5.0 * sigma, "fraction {zero_fraction}");
        let again = sample_counts(&plus, shots, 1).unwrap();
        assert_eq!(counts, again);
    }

    #[test]
    fn state_save_load_round_trips() {
        let mut s = QuantumState::zero(3);
        apply_gate(&mut s, &gates::hadamard(1)).unwrap();
        apply_gate(&mut s, &gates::rx(0, 0.7)).unwrap();
        let mut buf = Vec::new();
        s.save(&mut buf).unwrap();
        let loaded = QuantumState::load(buf.as_slice()).unwrap();
        assert_eq!(loaded.n_qubits(), 3);
        for (a, b) in s.amplitudes().iter().zip(loaded.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn non_unitary_matrices_are_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(
            GateOp::new(GateOp::real_matrix(m), vec![0], "bad"),
            Err(Error::NotUnitary { .. })
        ));
    }
}
