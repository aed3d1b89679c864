//! The concurrent VQE driver: purified cost evaluation, gradients, staged
//! L-BFGS optimization over random seeds, subspace-Hamiltonian extraction
//! from ancilla-Pauli measurements, and the final rotation that turns the
//! optimized branches into eigenstates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_circuit, prepare_purified_on, so_generator, CircuitLayout, SoGateParams};
use crate::error::{Error, Result};
use crate::linalg::SkewExp;
use crate::model::{build_penalty, LatticeParams};
use crate::optimizer::{minimize_with_gradient, LbfgsOptions};
use crate::pauli::{PauliAxis, PauliSum};
use crate::simulator::{
    apply_gate, apply_pauli_sum, expectation, GateOp, QuantumState,
};

/// One optimization stage: iteration budget, whether gates share parameters
/// within a layer, and the factor applied to the running charge-penalty
/// strength on entry.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub iterations: usize,
    pub translation_symmetric: bool,
    pub penalty_scale: f64,
}

impl Stage {
    pub fn plain(iterations: usize) -> Self {
        Self { iterations, translation_symmetric: false, penalty_scale: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CvqeProblem {
    pub lattice: LatticeParams,
    pub layout: CircuitLayout,
    /// The physics Hamiltonian W on the physical qubits (no charge penalty;
    /// the per-stage penalty is added internally by `optimize`).
    pub hamiltonian: PauliSum,
    /// Number of eigenstates to report; at most 2^n_ancilla.
    pub n_eigenstates: usize,
    pub seeds: usize,
    pub stage_schedule: Vec<Stage>,
    pub master_seed: u64,
    /// Spread of the uniform initial-parameter distribution.
    pub init_spread: f64,
    /// Amplitude of the uniform noise used in warm starts.
    pub warm_noise: f64,
    /// Physical basis pattern the purified state is built over; the
    /// staggered vacuum keeps the initial branches near the zero-charge
    /// sector.
    pub start_pattern: u64,
}

impl CvqeProblem {
    pub fn new(lattice: LatticeParams, layout: CircuitLayout, stages: Vec<Stage>) -> Result<Self> {
        let hamiltonian = crate::model::build_hamiltonian(&lattice.with_penalty(0.0))?;
        let problem = Self {
            lattice,
            layout,
            hamiltonian,
            n_eigenstates: 1 << layout.n_ancilla,
            seeds: 11,
            stage_schedule: stages,
            master_seed: 1,
            init_spread: 1.0,
            warm_noise: 1e-3,
            start_pattern: crate::model::staggered_vacuum_pattern(lattice.n_sites),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        if self.layout.n_physical != self.lattice.n_sites {
            return Err(Error::SizeMismatch {
                expected: self.lattice.n_sites,
                got: self.layout.n_physical,
            });
        }
        if self.hamiltonian.n_qubits() != self.layout.n_physical {
            return Err(Error::SizeMismatch {
                expected: self.layout.n_physical,
                got: self.hamiltonian.n_qubits(),
            });
        }
        let k_max = 1usize << self.layout.n_ancilla;
        if self.n_eigenstates == 0 || self.n_eigenstates > k_max {
            return Err(Error::InvalidParams(format!(
                "n_eigenstates must be in 1..={k_max}"
            )));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidParams("need at least one seed".into()));
        }
        if self.stage_schedule.is_empty() {
            return Err(Error::InvalidParams("stage schedule is empty".into()));
        }
        if !self.hamiltonian.is_hermitian() {
            return Err(Error::InvalidParams("Hamiltonian must be Hermitian".into()));
        }
        Ok(())
    }

    pub fn n_branches(&self) -> usize {
        1 << self.layout.n_ancilla
    }

    fn layout_for(&self, stage: &Stage) -> CircuitLayout {
        let mut l = self.layout;
        l.translation_symmetric = stage.translation_symmetric;
        l
    }
}

/// Purified-expectation cost: (1/K) sum_m <psi_m|H|psi_m>, evaluated as the
/// expectation of H (x) identity on the circuit-evolved purified state.
pub fn cost(problem: &CvqeProblem, params: &[f64]) -> Result<f64> {
    cost_with(&problem.hamiltonian, &problem.layout, problem.start_pattern, params)
}

/// Cost against an explicit Hamiltonian (used internally with the staged
/// penalty added).
pub fn cost_with(
    hamiltonian: &PauliSum,
    layout: &CircuitLayout,
    start_pattern: u64,
    params: &[f64],
) -> Result<f64> {
    let circuit = build_circuit(layout, params)?;
    let mut state = prepare_purified_on(start_pattern, layout.n_physical, layout.n_ancilla)?;
    circuit.apply(&mut state)?;
    Ok(expectation(&state, hamiltonian)?.re)
}

/// Central finite differences with h = 1e-5, coordinates independent (and
/// evaluated in parallel).
pub fn gradient(problem: &CvqeProblem, params: &[f64]) -> Result<Vec<f64>> {
    gradient_with(&problem.hamiltonian, &problem.layout, problem.start_pattern, params, 1e-5)
}

pub fn gradient_with(
    hamiltonian: &PauliSum,
    layout: &CircuitLayout,
    start_pattern: u64,
    params: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    if params.len() != layout.param_count() {
        return Err(Error::ParamCount { expected: layout.param_count(), got: params.len() });
    }
    (0..params.len())
        .into_par_iter()
        .map(|i| {
            let mut plus = params.to_vec();
            plus[i] += step;
            let mut minus = params.to_vec();
            minus[i] -= step;
            Ok((cost_with(hamiltonian, layout, start_pattern, &plus)?
                - cost_with(hamiltonian, layout, start_pattern, &minus)?)
                / (2.0 * step))
        })
        .collect()
}

/// 2 Re <lambda| dU |phi> for a small real matrix dU placed on `targets`.
fn direction_overlaps(
    lambda: &QuantumState,
    phi: &QuantumState,
    directions: &[DMatrix<f64>],
    targets: &[usize],
) -> Vec<f64> {
    let n = phi.n_qubits();
    let k = targets.len();
    let dim = 1usize << k;
    let mut sorted = targets.to_vec();
    sorted.sort_unstable();
    let offsets: Vec<usize> = targets.iter().map(|&t| 1usize << t).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); directions.len()];
    let mut phi_block = vec![Complex64::new(0.0, 0.0); dim];
    let mut lam_block = vec![Complex64::new(0.0, 0.0); dim];
    let phi_amps = phi.amplitudes();
    let lam_amps = lambda.amplitudes();
    for i in 0..(1usize << (n - k)) {
        let mut base = i;
        for &t in &sorted {
            let low = base & ((1usize << t) - 1);
            base = ((base >> t) << (t + 1)) | low;
        }
        for j in 0..dim {
            let mut p = base;
            for (bit, off) in offsets.iter().enumerate() {
                if (j >> bit) & 1 == 1 {
                    p |= off;
                }
            }
            phi_block[j] = phi_amps[p];
            lam_block[j] = lam_amps[p];
        }
        for (d, mat) in directions.iter().enumerate() {
            let mut local = Complex64::new(0.0, 0.0);
            for r in 0..dim {
                let mut rowsum = Complex64::new(0.0, 0.0);
                for c in 0..dim {
                    rowsum += mat[(r, c)] * phi_block[c];
                }
                local += lam_block[r].conj() * rowsum;
            }
            acc[d] += local;
        }
    }
    acc.into_iter().map(|v| 2.0 * v.re).collect()
}

fn upper_triangle_directions(dim: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for r in 0..dim {
        for c in (r + 1)..dim {
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            m[(r, c)] = 1.0;
            m[(c, r)] = -1.0;
            out.push(m);
        }
    }
    out
}

/// Exact reverse-sweep gradient of the purified cost. Shared (translation
/// symmetric) parameters accumulate their per-gate contributions. Returns
/// the cost as well.
pub fn cost_and_adjoint_gradient(
    hamiltonian: &PauliSum,
    layout: &CircuitLayout,
    start_pattern: u64,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let initial = prepare_purified_on(start_pattern, layout.n_physical, layout.n_ancilla)?;
    cost_and_adjoint_gradient_from(hamiltonian, layout, &initial, params)
}

/// Adjoint gradient from an arbitrary initial state whose register matches
/// the layout.
pub fn cost_and_adjoint_gradient_from(
    hamiltonian: &PauliSum,
    layout: &CircuitLayout,
    initial: &QuantumState,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if initial.n_qubits() != layout.n_qubits() {
        return Err(Error::SizeMismatch { expected: layout.n_qubits(), got: initial.n_qubits() });
    }
    let circuit = build_circuit(layout, params)?;
    let slots = layout.gate_param_slots(params)?;
    let per_gate = layout.params_per_gate();
    let gate_dim = layout.gate_dim();
    let directions = upper_triangle_directions(gate_dim);

    let mut phi = initial.clone();
    circuit.apply(&mut phi)?;
    let mut lambda = apply_pauli_sum(&phi, hamiltonian)?;
    let f = phi.inner(&lambda).re;

    let mut grad = vec![0.0; params.len()];
    for (gate, (targets, offset)) in circuit.gates.iter().zip(slots.iter()).rev() {
        let dg = gate.dagger();
        apply_gate(&mut phi, &dg)?;
        // Frechet derivatives of this gate's exponential
        let chunk = SoGateParams {
            dim: gate_dim,
            entries: params[*offset..offset + per_gate].to_vec(),
        };
        let exp = SkewExp::new(&so_generator(&chunk));
        let dmats: Vec<DMatrix<f64>> = directions.iter().map(|d| exp.frechet(d)).collect();
        let contributions = direction_overlaps(&lambda, &phi, &dmats, targets);
        for (e, contribution) in contributions.into_iter().enumerate() {
            grad[offset + e] += contribution;
        }
        apply_gate(&mut lambda, &dg)?;
    }
    Ok((f, grad))
}

/// Per-state convergence diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub variance: f64,
    pub charge: f64,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CvqeResult {
    pub best_params: Vec<f64>,
    pub final_layout: CircuitLayout,
    pub best_seed: usize,
    pub final_cost: f64,
    pub subspace_h: DMatrix<Complex64>,
    pub rotation: DMatrix<Complex64>,
    pub energies: Vec<f64>,
    pub eigen_states: Vec<QuantumState>,
    pub diagnostics: Vec<StateDiagnostics>,
    pub cost_trace: Vec<(usize, f64)>,
    pub seed_costs: Vec<Option<f64>>,
}

struct SeedRun {
    params: Vec<f64>,
    layout: CircuitLayout,
    cost: f64,
    trace: Vec<(usize, f64)>,
}

fn run_seed(problem: &CvqeProblem, seed_index: usize) -> Result<SeedRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(problem.master_seed.wrapping_add(seed_index as u64));
    let mut stage_iter = problem.stage_schedule.iter();
    let first = stage_iter.next().expect("validated non-empty");
    let mut layout = problem.layout_for(first);
    let mut params: Vec<f64> =
        (0..layout.param_count()).map(|_| rng.gen_range(-problem.init_spread..problem.init_spread)).collect();
    let mut lambda = problem.lattice.penalty_strength * first.penalty_scale;
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut offset = 0usize;
    let mut final_cost = f64::INFINITY;

    let mut stages = vec![(*first, layout)];
    for s in stage_iter {
        stages.push((*s, problem.layout_for(s)));
    }

    for (idx, (stage, stage_layout)) in stages.iter().enumerate() {
        if idx > 0 {
            lambda *= stage.penalty_scale;
            let prev_layout = stages[idx - 1].1;
            if prev_layout.translation_symmetric && !stage_layout.translation_symmetric {
                params = prev_layout.expand_symmetric_params(&params)?;
                for p in params.iter_mut() {
                    *p += rng.gen_range(-problem.warm_noise..problem.warm_noise);
                }
            } else if !prev_layout.translation_symmetric && stage_layout.translation_symmetric {
                return Err(Error::InvalidParams(
                    "stage schedule cannot re-impose translation symmetry".into(),
                ));
            }
        }
        layout = *stage_layout;

        let mut cost_h = problem.hamiltonian.clone();
        if lambda > 0.0 {
            cost_h = cost_h.add(&build_penalty(problem.lattice.n_sites, lambda)?)?;
        }
        let opts = LbfgsOptions { max_iters: stage.iterations, ..LbfgsOptions::default() };
        let outcome = minimize_with_gradient(
            |x| {
                cost_and_adjoint_gradient(&cost_h, &layout, problem.start_pattern, x)
                    .unwrap_or_else(|_| (f64::NAN, vec![f64::NAN; x.len()]))
            },
            params,
            &opts,
        );
        if !outcome.finite {
            return Err(Error::Convergence(format!("seed {seed_index}: non-finite objective")));
        }
        params = outcome.x;
        final_cost = outcome.f;
        for (it, c) in &outcome.trace {
            trace.push((offset + it, *c));
        }
        offset += outcome.iterations.max(1);
    }
    Ok(SeedRun { params, layout, cost: final_cost, trace })
}

/// Run the full staged, multi-seed optimization and extract eigenstates.
pub fn optimize(problem: &CvqeProblem) -> Result<CvqeResult> {
    problem.validate()?;
    let runs: Vec<Result<SeedRun>> =
        (0..problem.seeds).into_par_iter().map(|s| run_seed(problem, s)).collect();

    let seed_costs: Vec<Option<f64>> =
        runs.iter().map(|r| r.as_ref().ok().map(|run| run.cost)).collect();
    let best_seed = seed_costs
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|v| (i, v)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i)
        .ok_or(Error::AllSeedsFailed)?;
    let best = match &runs[best_seed] {
        Ok(run) => run,
        Err(_) => unreachable!("best seed is Ok by construction"),
    };

    // final state and subspace extraction against the physics Hamiltonian
    let circuit = build_circuit(&best.layout, &best.params)?;
    let mut state =
        prepare_purified_on(problem.start_pattern, best.layout.n_physical, best.layout.n_ancilla)?;
    circuit.apply(&mut state)?;

    let subspace = subspace_hamiltonian(&state, &problem.hamiltonian, best.layout.n_ancilla)?;
    let (energies_all, rotation) = diagonalize_subspace(&subspace)?;
    let all_states = rotate_to_eigenstates(
        &state,
        &rotation,
        best.layout.n_physical,
        best.layout.n_ancilla,
    )?;

    let k = problem.n_eigenstates;
    let energies = energies_all[..k].to_vec();
    let eigen_states: Vec<QuantumState> = all_states.into_iter().take(k).collect();

    let charge_op = {
        let mut q = PauliSum::new(problem.lattice.n_sites);
        for i in 0..problem.lattice.n_sites {
            q.push(Complex64::new(1.0, 0.0), &[(i, PauliAxis::Z)])?;
        }
        q
    };
    let diagnostics = eigen_states
        .iter()
        .map(|s| {
            Ok(StateDiagnostics {
                variance: crate::simulator::variance(s, &problem.hamiltonian)?,
                charge: expectation(s, &charge_op)?.re,
                fidelity: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CvqeResult {
        best_params: best.params.clone(),
        final_layout: best.layout,
        best_seed,
        final_cost: best.cost,
        subspace_h: subspace,
        rotation,
        energies,
        eigen_states,
        diagnostics,
        cost_trace: best.trace.clone(),
        seed_costs,
    })
}

/// Attach fidelities against a reference spectrum to the diagnostics.
pub fn attach_reference_fidelities(
    result: &mut CvqeResult,
    reference: &crate::reference::SpectrumResult,
) -> Result<()> {
    for (i, diag) in result.diagnostics.iter_mut().enumerate() {
        if let Some(ref_state) = reference.states.get(i) {
            diag.fidelity =
                Some(crate::simulator::fidelity(&result.eigen_states[i], ref_state)?);
        }
    }
    Ok(())
}

/// Ancilla Pauli string with index `t`: qubit i carries factor
/// (t >> 2i) & 3 with 0:I, 1:X, 2:Y, 3:Z.
fn ancilla_pauli_factors(t: usize, n_ancilla: usize, n_physical: usize) -> Vec<(usize, PauliAxis)> {
    let mut factors = Vec::new();
    for i in 0..n_ancilla {
        let code = (t >> (2 * i)) & 3;
        let axis = match code {
            1 => Some(PauliAxis::X),
            2 => Some(PauliAxis::Y),
            3 => Some(PauliAxis::Z),
            _ => None,
        };
        if let Some(a) = axis {
            factors.push((n_physical + i, a));
        }
    }
    factors
}

fn ancilla_pauli_dense(t: usize, n_ancilla: usize) -> DMatrix<Complex64> {
    let mut sum = PauliSum::new(n_ancilla);
    let factors: Vec<(usize, PauliAxis)> = ancilla_pauli_factors(t, n_ancilla, 0)
        .into_iter()
        .map(|(q, a)| (q, a))
        .collect();
    sum.push(Complex64::new(1.0, 0.0), &factors).expect("valid factors");
    sum.to_dense()
}

/// All 4^n_ancilla expectation values <H (x) P_a> on the evolved purified
/// state, ordered by the Pauli index convention above.
pub fn measure_subspace_paulis(
    state: &QuantumState,
    hamiltonian: &PauliSum,
    n_ancilla: usize,
) -> Result<Vec<f64>> {
    let n_physical = state.n_qubits() - n_ancilla;
    if hamiltonian.n_qubits() > n_physical {
        return Err(Error::SizeMismatch { expected: n_physical, got: hamiltonian.n_qubits() });
    }
    let padded = hamiltonian.padded(state.n_qubits())?;
    let mut out = Vec::with_capacity(1 << (2 * n_ancilla));
    for t in 0..(1usize << (2 * n_ancilla)) {
        let mut p = PauliSum::new(state.n_qubits());
        p.push(Complex64::new(1.0, 0.0), &ancilla_pauli_factors(t, n_ancilla, n_physical))?;
        let obs = padded.product(&p)?;
        out.push(expectation(state, &obs)?.re);
    }
    Ok(out)
}

/// Reconstruct H_mn = <psi_m|H|psi_n> from the ancilla-Pauli expectations,
/// scaled by K = 2^n_ancilla.
pub fn subspace_from_pauli_expectations(
    values: &[f64],
    n_ancilla: usize,
) -> Result<DMatrix<Complex64>> {
    let count = 1usize << (2 * n_ancilla);
    if values.len() != count {
        return Err(Error::SizeMismatch { expected: count, got: values.len() });
    }
    let k = 1usize << n_ancilla;
    let mut h = DMatrix::<Complex64>::zeros(k, k);
    for (t, &val) in values.iter().enumerate() {
        let p = ancilla_pauli_dense(t, n_ancilla);
        for m in 0..k {
            for n in 0..k {
                // K * (1/2^Na) * <H x P> * (P^T)_{mn} = <H x P> * P_{nm}
                h[(m, n)] += Complex64::new(val, 0.0) * p[(n, m)];
            }
        }
    }
    Ok(h)
}

/// H_mn on the evolved purified state via ancilla-Pauli measurements.
pub fn subspace_hamiltonian(
    state: &QuantumState,
    hamiltonian: &PauliSum,
    n_ancilla: usize,
) -> Result<DMatrix<Complex64>> {
    let values = measure_subspace_paulis(state, hamiltonian, n_ancilla)?;
    subspace_from_pauli_expectations(&values, n_ancilla)
}

/// Branch states <alpha_m | Psi>, rescaled by sqrt(K) to unit norm.
pub fn branch_states(
    state: &QuantumState,
    n_physical: usize,
    n_ancilla: usize,
) -> Result<Vec<QuantumState>> {
    let k = 1usize << n_ancilla;
    let scale = (k as f64).sqrt();
    let phys_dim = 1usize << n_physical;
    let mut out = Vec::with_capacity(k);
    for m in 0..k {
        let base = m << n_physical;
        let amps: Vec<Complex64> =
            (0..phys_dim).map(|p| state.amplitudes()[base | p] * scale).collect();
        out.push(QuantumState::from_amplitudes(amps, n_physical)?);
    }
    Ok(out)
}

/// Eigen-decompose the subspace Hamiltonian: returns (ascending energies,
/// unitary V whose columns are the eigenvectors, with a deterministic phase
/// convention).
pub fn diagonalize_subspace(h: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let k = h.nrows();
    let herm_dev = crate::linalg::max_abs(&(h - h.adjoint()));
    if herm_dev > 1e-8 {
        return Err(Error::InvalidParams(format!(
            "subspace matrix is not Hermitian (deviation {herm_dev:.3e})"
        )));
    }
    let sym = (h + h.adjoint()).map(|v| v * 0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut v = DMatrix::<Complex64>::zeros(k, k);
    for (col, &i) in order.iter().enumerate() {
        // phase convention: largest component real positive
        let column = eig.eigenvectors.column(i);
        let mut pivot = 0;
        let mut mag = 0.0;
        for (r, val) in column.iter().enumerate() {
            if val.norm() > mag {
                mag = val.norm();
                pivot = r;
            }
        }
        let phase = column[pivot] / column[pivot].norm();
        for r in 0..k {
            v[(r, col)] = column[r] * phase.conj();
        }
    }
    Ok((energies, v))
}

/// Apply the rotation V on the ancilla register (as V^T, so that projecting
/// the ancillas onto |j> leaves eigenstate j), project and renormalize each
/// branch.
pub fn rotate_to_eigenstates(
    state: &QuantumState,
    rotation: &DMatrix<Complex64>,
    n_physical: usize,
    n_ancilla: usize,
) -> Result<Vec<QuantumState>> {
    let k = 1usize << n_ancilla;
    if rotation.nrows() != k || rotation.ncols() != k {
        return Err(Error::SizeMismatch { expected: k, got: rotation.nrows() });
    }
    let targets: Vec<usize> = (0..n_ancilla).map(|i| n_physical + i).collect();
    let gate = GateOp::new(rotation.transpose(), targets, "subspace-rotation")?;
    let mut rotated = state.clone();
    apply_gate(&mut rotated, &gate)?;

    let phys_dim = 1usize << n_physical;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let base = j << n_physical;
        let mut amps: Vec<Complex64> =
            (0..phys_dim).map(|p| rotated.amplitudes()[base | p]).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::DegenerateBranch { norm });
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        out.push(QuantumState::from_amplitudes(amps, n_physical)?);
    }
    Ok(out)
}

/// Raw little-endian parameter checkpoint: an 8-byte count then f64 values.
pub fn save_params<W: std::io::Write>(params: &[f64], mut w: W) -> Result<()> {
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_params<R: std::io::Read>(mut r: R) -> Result<Vec<f64>> {
    let mut header = [0u8; 8];
    r.read_exact(&mut header)?;
    let count = u64::from_le_bytes(header) as usize;
    if count > 1 << 24 {
        return Err(Error::Parse(format!("unreasonable parameter count {count}")));
    }
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

/// Warm start for a deeper circuit: parameters of existing layers are kept
/// (plus noise), new layers start from noise alone.
pub fn extend_layers_params(
    old_layout: &CircuitLayout,
    old_params: &[f64],
    new_layout: &CircuitLayout,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if old_params.len() != old_layout.param_count() {
        return Err(Error::ParamCount { expected: old_layout.param_count(), got: old_params.len() });
    }
    if new_layout.n_layers < old_layout.n_layers
        || new_layout.kind != old_layout.kind
        || new_layout.n_physical != old_layout.n_physical
        || new_layout.translation_symmetric != old_layout.translation_symmetric
    {
        return Err(Error::InvalidParams("layer extension must only add layers".into()));
    }
    let mut params = vec![0.0; new_layout.param_count()];
    params[..old_params.len()].copy_from_slice(old_params);
    for (i, p) in params.iter_mut().enumerate() {
        let _ = i;
        *p += rng.gen_range(-noise..noise);
    }
    Ok(params)
}
