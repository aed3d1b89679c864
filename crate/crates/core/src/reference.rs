//! Exact oracles: charge-sector diagonalization (dense for small sectors,
//! Lanczos with full reorthogonalization above that) and the deflation
//! scheme that turns excited states into ground states of penalized
//! Hamiltonians.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{build_observable, LatticeParams, Observable, ObservableKind};
use crate::pauli::{PauliAxis, PauliSum};
use crate::simulator::{expectation, QuantumState};

/// Eigenvalue of the total-charge operator sum_n Z_n labelling a sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChargeSector(pub i64);

impl ChargeSector {
    pub const ZERO: ChargeSector = ChargeSector(0);
}

/// Lowest eigenpairs of a sector-restricted Hamiltonian.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub energies: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub sector: ChargeSector,
}

/// Computational basis states with the given total-charge eigenvalue,
/// ascending.
pub fn sector_basis(n_qubits: usize, sector: ChargeSector) -> Result<Vec<u64>> {
    let s = sector.0;
    if (n_qubits as i64 - s) % 2 != 0 || s.unsigned_abs() as usize > n_qubits {
        return Err(Error::SectorEmpty { sector: s, n_qubits });
    }
    // sum Z = n - 2*popcount  =>  popcount = (n - s) / 2
    let ones = ((n_qubits as i64 - s) / 2) as u32;
    let basis: Vec<u64> = (0..1u64 << n_qubits).filter(|b| b.count_ones() == ones).collect();
    if basis.is_empty() {
        return Err(Error::SectorEmpty { sector: s, n_qubits });
    }
    Ok(basis)
}

/// A Hamiltonian restricted to a charge sector, stored as CSR.
pub struct SectorOp {
    pub basis: Vec<u64>,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl SectorOp {
    /// Restrict a charge-conserving Hermitian Pauli sum to a sector. The
    /// commutator with the total charge is checked symbolically.
    pub fn build(hamiltonian: &PauliSum, sector: ChargeSector) -> Result<Self> {
        let n = hamiltonian.n_qubits();
        if !hamiltonian.is_hermitian() {
            return Err(Error::InvalidParams(
                "sector restriction needs a Hermitian operator".into(),
            ));
        }
        let mut charge = PauliSum::new(n);
        for q in 0..n {
            charge.push(Complex64::new(1.0, 0.0), &[(q, PauliAxis::Z)])?;
        }
        let comm = hamiltonian.commutator(&charge)?;
        if !comm.is_empty() {
            return Err(Error::InvalidParams(
                "operator does not commute with the total charge; sector restriction invalid"
                    .into(),
            ));
        }

        let basis = sector_basis(n, sector)?;
        let terms: Vec<(u64, u64, f64)> = hamiltonian
            .terms()
            .iter()
            .map(|t| {
                let v = t.coefficient * t.y_phase();
                debug_assert!(v.im.abs() < 1e-12);
                (t.x_mask(), t.z_mask(), v.re)
            })
            .collect();

        let mut row_offsets = Vec::with_capacity(basis.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        let mut scratch: Vec<(u32, f64)> = Vec::new();
        for (j, &b) in basis.iter().enumerate() {
            scratch.clear();
            let mut diag = 0.0;
            for &(x, z, v) in &terms {
                let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                if x == 0 {
                    diag += sign * v;
                } else {
                    let target = b ^ x;
                    if target.count_ones() == b.count_ones() {
                        if let Ok(i) = basis.binary_search(&target) {
                            scratch.push((i as u32, sign * v));
                        }
                    }
                }
            }
            scratch.push((j as u32, diag));
            scratch.sort_unstable_by_key(|e| e.0);
            let mut idx = 0;
            while idx < scratch.len() {
                let col = scratch[idx].0;
                let mut val = 0.0;
                while idx < scratch.len() && scratch[idx].0 == col {
                    val += scratch[idx].1;
                    idx += 1;
                }
                if val.abs() > 1e-14 || col == j as u32 {
                    col_indices.push(col);
                    values.push(val);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self { basis, row_offsets, col_indices, values })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for idx in self.row_offsets[j]..self.row_offsets[j + 1] {
                acc += self.values[idx] * v[self.col_indices[idx] as usize];
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            for idx in self.row_offsets[j]..self.row_offsets[j + 1] {
                m[(j, self.col_indices[idx] as usize)] = self.values[idx];
            }
        }
        m
    }

    /// Embed a sector vector back into the full register.
    pub fn embed(&self, v: &[f64], n_qubits: usize) -> Result<QuantumState> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        for (&b, &x) in self.basis.iter().zip(v) {
            amplitudes[b as usize] = Complex64::new(x, 0.0);
        }
        QuantumState::from_amplitudes(amplitudes, n_qubits)
    }
}

/// Switch point between the dense eigensolver and Lanczos.
const DENSE_CUTOFF: usize = 512;

/// Sector operator with optional rank-1 deflation shifts.
struct DeflatedOp<'a> {
    op: &'a SectorOp,
    deflation: Vec<(f64, Vec<f64>)>,
}

impl DeflatedOp<'_> {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.op.apply(v, out);
        for (omega, psi) in &self.deflation {
            let overlap: f64 = psi.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, p) in out.iter_mut().zip(psi) {
                *o += omega * overlap * p;
            }
        }
    }
}

/// Lowest-k eigenpairs by Lanczos with full reorthogonalization.
fn lanczos_lowest(
    op: &DeflatedOp,
    k: usize,
    tol: f64,
    max_krylov: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = op.op.dim();
    let cap = max_krylov.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2b);
    let mut v0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    v0.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];

    let solve_tridiag = |alphas: &[f64], betas: &[f64]| -> (Vec<f64>, DMatrix<f64>) {
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let evals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let evecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        (evals, evecs)
    };

    let assemble = |basis: &[Vec<f64>], evecs: &DMatrix<f64>, evals: &[f64], k: usize| {
        let m = evals.len();
        let mut out_vals = Vec::with_capacity(k);
        let mut out_vecs = Vec::with_capacity(k);
        for i in 0..k {
            out_vals.push(evals[i]);
            let mut full = vec![0.0; basis[0].len()];
            for q in 0..m {
                let c = evecs[(q, i)];
                for (f, x) in full.iter_mut().zip(&basis[q]) {
                    *f += c * x;
                }
            }
            let n = full.iter().map(|x| x * x).sum::<f64>().sqrt();
            full.iter_mut().for_each(|x| *x /= n);
            out_vecs.push(full);
        }
        (out_vals, out_vecs)
    };

    loop {
        let j = alphas.len();
        op.apply(&basis[j], &mut w);
        let alpha: f64 = basis[j].iter().zip(&w).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = alphas.len();
        let exhausted = beta < 1e-13 || m == dim;

        if m >= k && (m >= 2 * k + 4 || exhausted) {
            let (evals, evecs) = solve_tridiag(&alphas, &betas);
            let converged = (0..k).all(|i| beta * evecs[(m - 1, i)].abs() <= tol);
            if converged || exhausted {
                return Ok(assemble(&basis, &evecs, &evals, k));
            }
            if m >= cap {
                return Err(Error::Convergence(format!(
                    "Lanczos did not converge {k} pairs within {cap} iterations"
                )));
            }
        } else if exhausted {
            return Err(Error::TooManyEigenpairs { requested: k, dim });
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
}

/// Lowest `k` eigenpairs of the Hamiltonian restricted to a charge sector.
pub fn exact_spectrum(
    hamiltonian: &PauliSum,
    k: usize,
    sector: ChargeSector,
) -> Result<SpectrumResult> {
    if hamiltonian.n_qubits() > 20 {
        return Err(Error::InvalidParams("exact backend is limited to 20 qubits".into()));
    }
    let op = SectorOp::build(hamiltonian, sector)?;
    let dim = op.dim();
    if k > dim {
        return Err(Error::TooManyEigenpairs { requested: k, dim });
    }
    let n = hamiltonian.n_qubits();

    let (energies, vectors) = if dim <= DENSE_CUTOFF {
        let dense = op.to_dense();
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let energies: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
        let vectors: Vec<Vec<f64>> = order
            .iter()
            .take(k)
            .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect())
            .collect();
        (energies, vectors)
    } else {
        let wrapped = DeflatedOp { op: &op, deflation: Vec::new() };
        lanczos_lowest(&wrapped, k, 1e-10, dim.min(420))?
    };

    let states = vectors.iter().map(|v| op.embed(v, n)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult { energies, states, sector })
}

/// Excited states through deflation: state i is the ground state of
/// `W + sum_{j<i} omega |psi_j><psi_j|`, solved iteratively in the
/// zero-charge sector. `omega` is a spectral-range estimate plus the margin.
pub fn deflated_excited_states(
    hamiltonian: &PauliSum,
    k: usize,
    omega_margin: f64,
) -> Result<SpectrumResult> {
    let sector = ChargeSector::ZERO;
    let op = SectorOp::build(hamiltonian, sector)?;
    let dim = op.dim();
    if k > dim {
        return Err(Error::TooManyEigenpairs { requested: k, dim });
    }
    let n = hamiltonian.n_qubits();

    // coarse spectral range from a short Lanczos sweep
    let omega = {
        let probe = DeflatedOp { op: &op, deflation: Vec::new() };
        let sweep = dim.min(40);
        let mut rng = ChaCha8Rng::seed_from_u64(0xbeef);
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mut basis = vec![v];
        let mut alphas = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        for j in 0..sweep {
            probe.apply(&basis[j], &mut w);
            let a: f64 = basis[j].iter().zip(&w).map(|(x, y)| x * y).sum();
            alphas.push(a);
            for q in &basis {
                let c: f64 = q.iter().zip(&w).map(|(x, y)| x * y).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
            let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if b < 1e-12 {
                break;
            }
            betas.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m && i < betas.len() {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(t);
        let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) + omega_margin
    };

    let mut energies = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let deflation: Vec<(f64, Vec<f64>)> = vectors.iter().map(|v| (omega, v.clone())).collect();
        let shifted = DeflatedOp { op: &op, deflation };
        let (vals, vecs) = lanczos_lowest(&shifted, 1, 1e-11, dim.min(420))
            .map_err(|e| Error::Convergence(format!("deflation stage {i}: {e}")))?;
        energies.push(vals[0]);
        vectors.push(vecs.into_iter().next().unwrap());
    }

    let states = vectors.iter().map(|v| op.embed(v, n)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult { energies, states, sector })
}

/// Per-state spectroscopy row for CSV export.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub energy: f64,
    pub momentum_sq_over_x2: f64,
    pub sr_phase: f64,
    pub branch: String,
    pub condensate: f64,
    pub efd: f64,
}

/// Observable table for a computed spectrum (EFD radius r = 2, clamped for
/// tiny lattices).
pub fn spectrum_rows(result: &SpectrumResult, params: &LatticeParams) -> Result<Vec<SpectrumRow>> {
    let r = 2usize.min(params.n_sites / 2).max(1);
    let momentum = build_observable(ObservableKind::MomentumSq, params)?;
    let shift = build_observable(ObservableKind::SpinTransform, params)?;
    let condensate = build_observable(ObservableKind::ChiralCondensate, params)?;
    let efd = build_observable(ObservableKind::Efd(r), params)?;
    let mut rows = Vec::new();
    for (i, (e, s)) in result.energies.iter().zip(&result.states).enumerate() {
        let p2 = match &momentum {
            Observable::Pauli(p) => expectation(s, p)?.re / (params.x * params.x).max(1e-300),
            _ => unreachable!(),
        };
        let sr = match &shift {
            Observable::Shift(sh) => sh.expectation(s.amplitudes()),
            _ => unreachable!(),
        };
        let branch = match crate::model::phase_classify(sr) {
            Ok(crate::model::BranchLabel::Scalar) => "scalar".to_string(),
            Ok(crate::model::BranchLabel::Vector) => "vector".to_string(),
            Err(_) => "undetermined".to_string(),
        };
        let sg = match &condensate {
            Observable::Pauli(p) => expectation(s, p)?.re,
            _ => unreachable!(),
        };
        let fav = match &efd {
            Observable::Pauli(p) => expectation(s, p)?.re,
            _ => unreachable!(),
        };
        rows.push(SpectrumRow {
            index: i,
            energy: *e,
            momentum_sq_over_x2: p2,
            sr_phase: sr.arg(),
            branch,
            condensate: sg,
            efd: fav,
        });
    }
    Ok(rows)
}

/// CSV text of the observable table, floats at 10 significant digits.
pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out =
        String::from("index,energy,momentum_sq_over_x2,sr_phase,branch,condensate,efd\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e},{},{:.9e},{:.9e}\n",
            r.index, r.energy, r.momentum_sq_over_x2, r.sr_phase, r.branch, r.condensate, r.efd
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_hamiltonian;
    use approx::assert_abs_diff_eq;

    fn table2() -> PauliSum {
        let p = LatticeParams::new(4, 0.16, 0.333, 0.5, 0.0).unwrap();
        build_hamiltonian(&p).unwrap()
    }

    #[test]
    fn table2_energies_match_the_reference_values() {
        let spec = exact_spectrum(&table2(), 2, ChargeSector::ZERO).unwrap();
        assert_abs_diff_eq!(spec.energies[0], 0.6872150210, epsilon = 1e-8);
        assert_abs_diff_eq!(spec.energies[1], 1.3253490258, epsilon = 1e-8);
        let w = table2();
        for (e, s) in spec.energies.iter().zip(&spec.states) {
            let applied = crate::simulator::apply_pauli_sum(s, &w).unwrap();
            let resid: f64 = applied
                .amplitudes()
                .iter()
                .zip(s.amplitudes())
                .map(|(a, b)| (a - b * *e).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-8, "residual {resid}");
        }
    }

    #[test]
    fn x_zero_spectrum_is_the_classical_diagonal() {
        let p = LatticeParams::new(6, 0.0, 0.4, 0.2, 0.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        let basis = sector_basis(6, ChargeSector::ZERO).unwrap();
        let dense = w.to_dense();
        let mut diag: Vec<f64> =
            basis.iter().map(|&b| dense[(b as usize, b as usize)].re).collect();
        diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let spec = exact_spectrum(&w, 4, ChargeSector::ZERO).unwrap();
        for (got, want) in spec.energies.iter().zip(diag.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn penalty_leaves_zero_sector_eigenpairs_unchanged() {
        let base = LatticeParams::new(6, 0.64, 0.125, 0.0, 0.0).unwrap();
        let w0 = build_hamiltonian(&base).unwrap();
        let reference = exact_spectrum(&w0, 3, ChargeSector::ZERO).unwrap();
        for lambda in [1.0, 6.0, 8.0] {
            let wp = build_hamiltonian(&base.with_penalty(lambda)).unwrap();
            let spec = exact_spectrum(&wp, 3, ChargeSector::ZERO).unwrap();
            for (a, b) in spec.energies.iter().zip(&reference.energies) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn lanczos_path_agrees_with_dense_path() {
        // N=12 zero sector has dimension 924, above the dense cutoff.
        let p = LatticeParams::new(12, 1.0, -0.05, 0.08, 0.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        let spec = exact_spectrum(&w, 2, ChargeSector::ZERO).unwrap();
        let op = SectorOp::build(&w, ChargeSector::ZERO).unwrap();
        assert!(op.dim() > DENSE_CUTOFF);
        let dense = op.to_dense();
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(spec.energies[0], vals[0], epsilon = 1e-9);
        assert_abs_diff_eq!(spec.energies[1], vals[1], epsilon = 1e-9);
    }

    #[test]
    fn deflation_reduces_to_ground_state_search_for_k_one() {
        let w = table2();
        let direct = exact_spectrum(&w, 1, ChargeSector::ZERO).unwrap();
        let deflated = deflated_excited_states(&w, 1, 1.0).unwrap();
        assert_abs_diff_eq!(direct.energies[0], deflated.energies[0], epsilon = 1e-8);
    }

    #[test]
    fn deflated_states_match_exact_spectrum_and_stay_orthogonal() {
        let p = LatticeParams::new(8, 0.64, 0.125, 0.0, 0.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        let exact = exact_spectrum(&w, 4, ChargeSector::ZERO).unwrap();
        let deflated = deflated_excited_states(&w, 4, 1.0).unwrap();
        for (a, b) in exact.energies.iter().zip(&deflated.energies) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        for i in 0..4 {
            for j in 0..4 {
                let overlap = deflated.states[i].inner(&deflated.states[j]).norm();
                if i == j {
                    assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-8);
                } else {
                    assert!(overlap < 1e-8, "overlap {i},{j} = {overlap}");
                }
            }
            let f = crate::simulator::fidelity(&exact.states[i], &deflated.states[i]).unwrap();
            assert!(f > 1.0 - 1e-8, "fidelity {i} = {f}");
        }
    }

    #[test]
    fn sector_errors_are_reported() {
        let w = table2();
        assert!(matches!(exact_spectrum(&w, 1, ChargeSector(1)), Err(Error::SectorEmpty { .. })));
        assert!(matches!(
            exact_spectrum(&w, 100, ChargeSector::ZERO),
            Err(Error::TooManyEigenpairs { .. })
        ));
    }

    #[test]
    fn branch_labels_at_n8_follow_the_dispersion_pattern() {
        // ground state scalar, four vector states, then the scalar branch
        // whose first member sits at large pseudomomentum
        let p = LatticeParams::new(8, 0.64, 0.125, 0.0, 0.0).unwrap();
        let w = build_hamiltonian(&p).unwrap();
        let spec = exact_spectrum(&w, 8, ChargeSector::ZERO).unwrap();
        let rows = spectrum_rows(&spec, &p).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.branch.as_str()).collect();
        assert_eq!(
            labels,
            ["scalar", "vector", "vector", "vector", "vector", "scalar", "scalar", "scalar"]
        );
        assert!(rows[5].momentum_sq_over_x2 > rows[1].momentum_sq_over_x2);
    }
}
