//! Simulated hardware inference: circuit folding, a depolarizing-noise
//! density-matrix engine, shot-sampled Pauli measurements and linear
//! zero-noise extrapolation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_circuit, purification_gates_on, Circuit, CircuitLayout};
use crate::cvqe::subspace_from_pauli_expectations;
use crate::error::{Error, Result};
use crate::model::LatticeParams;
use crate::pauli::{PauliAxis, PauliSum};
use crate::simulator::{gates, GateOp, QuantumState};

pub const MAX_DENSITY_QUBITS: usize = 8;

/// Mixed state as a dense density matrix; capped at 8 qubits.
#[derive(Clone, Debug)]
pub struct DensityState {
    matrix: DMatrix<Complex64>,
    n_qubits: usize,
}

impl DensityState {
    pub fn from_pure(state: &QuantumState) -> Result<Self> {
        if state.n_qubits() > MAX_DENSITY_QUBITS {
            return Err(Error::InvalidParams(format!(
                "density engine is capped at {MAX_DENSITY_QUBITS} qubits"
            )));
        }
        let dim = state.amplitudes().len();
        let amps = state.amplitudes();
        let matrix = DMatrix::from_fn(dim, dim, |r, c| amps[r] * amps[c].conj());
        Ok(Self { matrix, n_qubits: state.n_qubits() })
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::from_pure(&QuantumState::zero(n_qubits))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Smallest eigenvalue, for positivity checks.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()).map(|v| v * 0.5);
        let eig = nalgebra::SymmetricEigen::new(herm);
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// rho -> U rho U^dagger.
    pub fn apply_unitary(&mut self, gate: &GateOp) -> Result<()> {
        self.left_multiply(gate)?;
        // rho U^dag = (U rho^dag)^dag and rho stays Hermitian
        self.matrix.adjoint_mut();
        self.left_multiply(gate)?;
        self.matrix.adjoint_mut();
        Ok(())
    }

    /// matrix <- G matrix (gate embedded on its targets), column by column.
    fn left_multiply(&mut self, gate: &GateOp) -> Result<()> {
        let n = self.n_qubits;
        let k = gate.targets.len();
        for &t in &gate.targets {
            if t >= n {
                return Err(Error::SizeMismatch { expected: n, got: t + 1 });
            }
        }
        let dim = 1usize << k;
        let mut sorted = gate.targets.clone();
        sorted.sort_unstable();
        let offsets: Vec<usize> = gate.targets.iter().map(|&t| 1usize << t).collect();
        let cols = self.matrix.ncols();
        let mut gathered = vec![Complex64::new(0.0, 0.0); dim];
        let mut positions = vec![0usize; dim];
        for col in 0..cols {
            for i in 0..(1usize << (n - k)) {
                let mut base = i;
                for &t in &sorted {
                    let low = base & ((1usize << t) - 1);
                    base = ((base >> t) << (t + 1)) | low;
                }
                for (j, pos) in positions.iter_mut().enumerate() {
                    let mut p = base;
                    for (bit, off) in offsets.iter().enumerate() {
                        if (j >> bit) & 1 == 1 {
                            p |= off;
                        }
                    }
                    *pos = p;
                    gathered[j] = self.matrix[(p, col)];
                }
                for (r, &pos) in positions.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (c, &g) in gathered.iter().enumerate() {
                        acc += gate.matrix[(r, c)] * g;
                    }
                    self.matrix[(pos, col)] = acc;
                }
            }
        }
        Ok(())
    }

    /// k-qubit depolarizing channel on `targets` with probability p:
    /// rho -> (1-p) rho + p (I/2^k) (x) Tr_targets rho.
    pub fn depolarize(&mut self, targets: &[usize], p: f64) -> Result<()> {
        if p == 0.0 {
            return Ok(());
        }
        let n = self.n_qubits;
        let k = targets.len();
        let dim = 1usize << k;
        let mut sorted = targets.to_vec();
        sorted.sort_unstable();
        let offsets: Vec<usize> = targets.iter().map(|&t| 1usize << t).collect();
        let rest = 1usize << (n - k);
        let expand = |mut i: usize| {
            for &t in &sorted {
                let low = i & ((1usize << t) - 1);
                i = ((i >> t) << (t + 1)) | low;
            }
            i
        };
        let insert_bits = |base: usize, j: usize| {
            let mut p2 = base;
            for (bit, off) in offsets.iter().enumerate() {
                if (j >> bit) & 1 == 1 {
                    p2 |= off;
                }
            }
            p2
        };
        let mut out = self.matrix.map(|v| v * (1.0 - p));
        for ri in 0..rest {
            let rbase = expand(ri);
            for ci in 0..rest {
                let cbase = expand(ci);
                let mut tr = Complex64::new(0.0, 0.0);
                for t in 0..dim {
                    tr += self.matrix[(insert_bits(rbase, t), insert_bits(cbase, t))];
                }
                let share = tr * (p / dim as f64);
                for t in 0..dim {
                    out[(insert_bits(rbase, t), insert_bits(cbase, t))] += share;
                }
            }
        }
        self.matrix = out;
        Ok(())
    }

    /// tr(rho O) for a Pauli sum acting on a prefix of the register.
    pub fn expectation(&self, obs: &PauliSum) -> Result<Complex64> {
        if obs.n_qubits() > self.n_qubits {
            return Err(Error::SizeMismatch { expected: self.n_qubits, got: obs.n_qubits() });
        }
        let dim = self.matrix.nrows();
        let mut total = Complex64::new(0.0, 0.0);
        for t in obs.terms() {
            let scale = t.coefficient * t.y_phase();
            let (x, z) = (t.x_mask(), t.z_mask());
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 0..dim as u64 {
                let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                acc += self.matrix[(b as usize, (b ^ x) as usize)] * sign;
            }
            total += scale * acc;
        }
        Ok(total)
    }
}

/// Depolarizing strengths per gate arity.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    /// per single-qubit gate
    pub p1: f64,
    /// per two-or-more-qubit gate
    pub p2: f64,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for p in [p1, p2] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("probability {p} outside [0, 1)")));
            }
        }
        Ok(Self { p1, p2 })
    }

    pub fn noiseless() -> Self {
        Self { p1: 0.0, p2: 0.0 }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { p1: 5e-4, p2: 5e-3 }
    }
}

/// U (U^dag U)^((level-1)/2) as a flat gate list; noiseless action equals U.
pub fn fold_circuit(circuit: &Circuit, level: u64) -> Result<Circuit> {
    if level % 2 == 0 || level == 0 {
        return Err(Error::InvalidParams(format!("fold level must be odd, got {level}")));
    }
    let mut gate_list = circuit.gates.clone();
    for _ in 0..(level - 1) / 2 {
        for g in circuit.gates.iter().rev() {
            gate_list.push(g.dagger());
        }
        gate_list.extend(circuit.gates.iter().cloned());
    }
    Ok(Circuit { n_qubits: circuit.n_qubits, gates: gate_list })
}

/// Evolve a density matrix through the circuit, applying the depolarizing
/// channel on each gate's targets.
pub fn run_noisy(circuit: &Circuit, noise: &NoiseModel, initial: &DensityState) -> Result<DensityState> {
    if circuit.n_qubits > MAX_DENSITY_QUBITS {
        return Err(Error::InvalidParams(format!(
            "density engine is capped at {MAX_DENSITY_QUBITS} qubits"
        )));
    }
    if circuit.n_qubits != initial.n_qubits() {
        return Err(Error::SizeMismatch { expected: initial.n_qubits(), got: circuit.n_qubits });
    }
    let mut rho = initial.clone();
    for g in &circuit.gates {
        rho.apply_unitary(g)?;
        let p = if g.targets.len() == 1 { noise.p1 } else { noise.p2 };
        rho.depolarize(&g.targets, p)?;
    }
    Ok(rho)
}

/// Linear least-squares intercept at level 0.
pub fn zne_extrapolate(levels_and_values: &[(f64, f64)]) -> Result<f64> {
    if levels_and_values.len() < 2 {
        return Err(Error::InvalidParams("need at least two noise levels".into()));
    }
    let fit = crate::linalg::polyfit(levels_and_values, 1)?;
    Ok(fit.coefficients[0])
}

/// Shot handling for measurements.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum ShotPolicy {
    /// exact expectation values (infinite-shot limit)
    Exact,
    Sampled { shots: u64, seed: u64 },
}

/// Measure a Pauli sum on a density matrix. Each non-identity term is
/// sampled from its exact mean with binomial statistics; identity terms are
/// exact. Returns (estimate, standard error).
pub fn measure_observable(
    rho: &DensityState,
    obs: &PauliSum,
    policy: &ShotPolicy,
    stream: u64,
) -> Result<(f64, f64)> {
    match policy {
        ShotPolicy::Exact => Ok((rho.expectation(obs)?.re, 0.0)),
        ShotPolicy::Sampled { shots, seed } => {
            if *shots < 1 {
                return Err(Error::InvalidParams("shots must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream));
            let mut value = 0.0;
            let mut var = 0.0;
            for t in obs.terms() {
                let coeff = (t.coefficient * t.y_phase()).re;
                if t.x_mask() == 0 && t.z_mask() == 0 {
                    value += coeff;
                    continue;
                }
                let mut single = PauliSum::new(obs.n_qubits());
                single.push_string(crate::pauli::PauliString::new(
                    Complex64::new(1.0, 0.0),
                    &t.factors(),
                )?)?;
                let mean = rho.expectation(&single)?.re.clamp(-1.0, 1.0);
                let p_plus = (1.0 + mean) / 2.0;
                let distribution = Binomial::new(*shots, p_plus.clamp(0.0, 1.0))
                    .map_err(|e| Error::InvalidParams(e.to_string()))?;
                let n_plus = distribution.sample(&mut rng);
                let estimate = 2.0 * n_plus as f64 / *shots as f64 - 1.0;
                value += coeff * estimate;
                var += coeff * coeff * (1.0 - mean * mean) / *shots as f64;
            }
            Ok((value, var.sqrt()))
        }
    }
}

/// Inference-run circuit realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    /// Per-eigenstate ancilla-free circuits (basis input, V, then the
    /// optimized ansatz).
    AncillaFree,
    /// Full purified circuit; observables reconstructed from O (x) P_a
    /// measurements through V.
    Ancilla,
}

#[derive(Clone, Debug)]
pub struct InferenceConfig {
    pub lattice: LatticeParams,
    pub layout: CircuitLayout,
    pub best_params: Vec<f64>,
    pub rotation: DMatrix<Complex64>,
    pub noise: NoiseModel,
    pub shots: ShotPolicy,
    pub levels: Vec<u64>,
    pub mode: InferenceMode,
    /// physical basis pattern the branch states are built over (0 for the
    /// raw |0...0> convention, or the staggered vacuum)
    pub start_pattern: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelValue {
    pub level: u64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MitigatedValue {
    pub observable: String,
    pub state: usize,
    pub levels: Vec<LevelValue>,
    pub slope: f64,
    pub extrapolated: f64,
    /// reference value (e.g. from exact diagonalization), when attached
    pub reference: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InferenceReport {
    pub mode: InferenceMode,
    pub values: Vec<MitigatedValue>,
}

/// The ancilla-free preparation circuit of eigenstate `j`: X gates writing
/// the branch pattern, the rotation V on the pattern qubits, then the
/// optimized ansatz gates.
pub fn eigenstate_circuit(
    layout: &CircuitLayout,
    params: &[f64],
    rotation: &DMatrix<Complex64>,
    state_index: usize,
    start_pattern: u64,
) -> Result<Circuit> {
    let n = layout.n_physical;
    let n_anc = layout.n_ancilla;
    let k = 1usize << n_anc;
    if rotation.nrows() != k {
        return Err(Error::SizeMismatch { expected: k, got: rotation.nrows() });
    }
    if state_index >= k {
        return Err(Error::InvalidParams(format!("state index {state_index} out of range")));
    }
    let mut gate_list: Vec<GateOp> = Vec::new();
    // base pattern, then the branch bits: bit i of the branch index lives on
    // physical qubit n-1-i
    for q in 0..n {
        if (start_pattern >> q) & 1 == 1 {
            gate_list.push(gates::pauli_x(q));
        }
    }
    for i in 0..n_anc {
        if (state_index >> i) & 1 == 1 {
            gate_list.push(gates::pauli_x(n - 1 - i));
        }
    }
    let targets: Vec<usize> = (0..n_anc).map(|i| n - 1 - i).collect();
    if n_anc > 0 {
        gate_list.push(GateOp::new(rotation.clone(), targets, "eigenstate-rotation")?);
    }
    let ansatz = build_circuit(&CircuitLayout { n_ancilla: 0, ..*layout }, params)?;
    gate_list.extend(ansatz.gates);
    Ok(Circuit { n_qubits: n, gates: gate_list })
}

/// Run the full inference pipeline: prepare, fold, measure with shot noise,
/// extrapolate to level zero. Observables are named Pauli sums on the
/// physical register.
pub fn inference_run(
    config: &InferenceConfig,
    observables: &[(String, PauliSum)],
) -> Result<InferenceReport> {
    if config.levels.len() < 2 {
        return Err(Error::InvalidParams("need at least two noise levels".into()));
    }
    for &l in &config.levels {
        if l % 2 == 0 {
            return Err(Error::InvalidParams(format!("noise level {l} is even")));
        }
    }
    let k = 1usize << config.layout.n_ancilla;
    if config.rotation.nrows() != k {
        return Err(Error::SizeMismatch { expected: k, got: config.rotation.nrows() });
    }

    let mut values = Vec::new();
    match config.mode {
        InferenceMode::AncillaFree => {
            for state in 0..k {
                let circuit = eigenstate_circuit(
                    &config.layout,
                    &config.best_params,
                    &config.rotation,
                    state,
                    config.start_pattern,
                )?;
                let mut rhos = Vec::new();
                for &level in &config.levels {
                    let folded = fold_circuit(&circuit, level)?;
                    let rho = run_noisy(&folded, &config.noise, &DensityState::zero(circuit.n_qubits)?)?;
                    rhos.push((level, rho));
                }
                for (oi, (name, obs)) in observables.iter().enumerate() {
                    let mut level_values = Vec::new();
                    for (li, (level, rho)) in rhos.iter().enumerate() {
                        let stream = (state as u64) << 32 | (oi as u64) << 16 | li as u64;
                        let (value, std_error) = measure_observable(rho, obs, &config.shots, stream)?;
                        level_values.push(LevelValue { level: *level, value, std_error });
                    }
                    let pts: Vec<(f64, f64)> =
                        level_values.iter().map(|lv| (lv.level as f64, lv.value)).collect();
                    let fit = crate::linalg::polyfit(&pts, 1)?;
                    values.push(MitigatedValue {
                        observable: name.clone(),
                        state,
                        levels: level_values,
                        slope: fit.coefficients[1],
                        extrapolated: fit.coefficients[0],
                        reference: None,
                    });
                }
            }
        }
        InferenceMode::Ancilla => {
            let n_total = config.layout.n_qubits();
            let mut gate_list = purification_gates_on(
                config.start_pattern,
                config.layout.n_physical,
                config.layout.n_ancilla,
            )?;
            let ansatz = build_circuit(&config.layout, &config.best_params)?;
            gate_list.extend(ansatz.gates);
            let circuit = Circuit { n_qubits: n_total, gates: gate_list };

            // per level: measure every O (x) P_a combination, reconstruct the
            // subspace matrix and rotate to per-state values
            let mut per_level: Vec<Vec<Vec<f64>>> = Vec::new(); // [level][obs][state]
            for (li, &level) in config.levels.iter().enumerate() {
                let folded = fold_circuit(&circuit, level)?;
                let rho = run_noisy(&folded, &config.noise, &DensityState::zero(n_total)?)?;
                let mut obs_states = Vec::new();
                for (oi, (_, obs)) in observables.iter().enumerate() {
                    let padded = obs.padded(n_total)?;
                    let mut measured = Vec::new();
                    for t in 0..(1usize << (2 * config.layout.n_ancilla)) {
                        let mut p = PauliSum::new(n_total);
                        let factors: Vec<(usize, PauliAxis)> = (0..config.layout.n_ancilla)
                            .filter_map(|i| {
                                let code = (t >> (2 * i)) & 3;
                                let axis = match code {
                                    1 => Some(PauliAxis::X),
                                    2 => Some(PauliAxis::Y),
                                    3 => Some(PauliAxis::Z),
                                    _ => None,
                                };
                                axis.map(|a| (config.layout.n_physical + i, a))
                            })
                            .collect();
                        p.push(Complex64::new(1.0, 0.0), &factors)?;
                        let combined = padded.product(&p)?;
                        let stream = 0xa000_0000u64 | (li as u64) << 40 | (oi as u64) << 20 | t as u64;
                        let (value, _) = measure_observable(&rho, &combined, &config.shots, stream)?;
                        measured.push(value);
                    }
                    let matrix = subspace_from_pauli_expectations(&measured, config.layout.n_ancilla)?;
                    let rotated = config.rotation.adjoint() * &matrix * &config.rotation;
                    obs_states.push((0..k).map(|j| rotated[(j, j)].re).collect::<Vec<f64>>());
                }
                per_level.push(obs_states);
            }
            for state in 0..k {
                for (oi, (name, _)) in observables.iter().enumerate() {
                    let level_values: Vec<LevelValue> = config
                        .levels
                        .iter()
                        .enumerate()
                        .map(|(li, &level)| LevelValue {
                            level,
                            value: per_level[li][oi][state],
                            std_error: 0.0,
                        })
                        .collect();
                    let pts: Vec<(f64, f64)> =
                        level_values.iter().map(|lv| (lv.level as f64, lv.value)).collect();
                    let fit = crate::linalg::polyfit(&pts, 1)?;
                    values.push(MitigatedValue {
                        observable: name.clone(),
                        state,
                        levels: level_values,
                        slope: fit.coefficients[1],
                        extrapolated: fit.coefficients[0],
                        reference: None,
                    });
                }
            }
        }
    }
    Ok(InferenceReport { mode: config.mode, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::LayoutKind;
    use crate::linalg::max_abs;
    use crate::model::build_hamiltonian;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn small_circuit() -> Circuit {
        let layout = CircuitLayout::new(LayoutKind::BrickwallSo4, 4, 0, 2, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params: Vec<f64> =
            (0..layout.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        build_circuit(&layout, &params).unwrap()
    }

    #[test]
    fn fold_level_one_is_identity_and_counts_scale() {
        let c = small_circuit();
        let f1 = fold_circuit(&c, 1).unwrap();
        assert_eq!(f1.gates.len(), c.gates.len());
        let f3 = fold_circuit(&c, 3).unwrap();
        assert_eq!(f3.gates.len(), 3 * c.gates.len());
        assert!(fold_circuit(&c, 2).is_err());
    }

    #[test]
    fn folding_preserves_noiseless_semantics() {
        let c = small_circuit();
        let mut reference = QuantumState::zero(4);
        c.apply(&mut reference).unwrap();
        for level in [3u64, 5] {
            let folded = fold_circuit(&c, level).unwrap();
            let mut state = QuantumState::zero(4);
            folded.apply(&mut state).unwrap();
            let dev: f64 = state
                .amplitudes()
                .iter()
                .zip(reference.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-10, "level {level}: deviation {dev}");
        }
    }

    #[test]
    fn noiseless_run_is_the_rank_one_projector() {
        let c = small_circuit();
        let rho = run_noisy(&c, &NoiseModel::noiseless(), &DensityState::zero(4).unwrap()).unwrap();
        let mut pure = QuantumState::zero(4);
        c.apply(&mut pure).unwrap();
        let expected = DensityState::from_pure(&pure).unwrap();
        assert!(max_abs(&(rho.matrix() - expected.matrix())) < 1e-12);
    }

    #[test]
    fn single_qubit_depolarizing_matches_the_channel_definition() {
        let mut plus = QuantumState::zero(1);
        crate::simulator::apply_gate(&mut plus, &gates::hadamard(0)).unwrap();
        let rho0 = DensityState::from_pure(&plus).unwrap();
        let p = 0.37;
        let circuit = Circuit { n_qubits: 1, gates: vec![gates::rz(0, 0.0)] };
        let noisy = run_noisy(
            &circuit,
            &NoiseModel::new(p, 0.0).unwrap(),
            &rho0,
        )
        .unwrap();
        // identity gate: output = (1-p) rho + p I/2
        let expected = rho0.matrix().map(|v| v * (1.0 - p))
            + DMatrix::<Complex64>::identity(2, 2).map(|v| v * (p / 2.0));
        assert!(max_abs(&(noisy.matrix() - &expected)) < 1e-12);
    }

    #[test]
    fn channel_is_trace_preserving_and_positive() {
        let c = small_circuit();
        let noise = NoiseModel::new(1e-3, 8e-3).unwrap();
        let rho = run_noisy(&c, &noise, &DensityState::zero(4).unwrap()).unwrap();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-10);
        assert!(rho.trace().im.abs() < 1e-12);
        assert!(rho.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn folded_energy_grows_with_noise_level() {
        // a circuit preparing a low-energy state: the staggered vacuum plus
        // small-angle entanglers; depolarization contaminates it toward the
        // mixed-state average, so the energy rises with the fold level
        let lattice = LatticeParams::new(4, 0.16, 0.333, 0.5, 0.0).unwrap();
        let w = build_hamiltonian(&lattice).unwrap();
        let layout = CircuitLayout::new(LayoutKind::BrickwallSo4, 4, 0, 1, false).unwrap();
        let params = vec![0.05; layout.param_count()];
        let mut gate_list = vec![gates::pauli_x(0), gates::pauli_x(2)];
        gate_list.extend(build_circuit(&layout, &params).unwrap().gates);
        let c = Circuit { n_qubits: 4, gates: gate_list };
        let noise = NoiseModel::new(5e-4, 2e-3).unwrap();
        let mut last = f64::NEG_INFINITY;
        for level in [1u64, 3, 5] {
            let folded = fold_circuit(&c, level).unwrap();
            let rho = run_noisy(&folded, &noise, &DensityState::zero(4).unwrap()).unwrap();
            let e = rho.expectation(&w).unwrap().re;
            assert!(e > last, "level {level}: energy {e} not above {last}");
            last = e;
        }
    }

    #[test]
    fn extrapolation_of_exact_lines() {
        assert_abs_diff_eq!(
            zne_extrapolate(&[(1.0, 4.2), (3.0, 4.2), (5.0, 4.2)]).unwrap(),
            4.2,
            epsilon = 1e-12
        );
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 5.0].iter().map(|&l| (l, 2.0 + 0.3 * l)).collect();
        assert_abs_diff_eq!(zne_extrapolate(&pts).unwrap(), 2.0, epsilon = 1e-12);
        assert!(zne_extrapolate(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(zne_extrapolate(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn shot_sampling_is_deterministic_and_consistent() {
        let mut plus = QuantumState::zero(2);
        crate::simulator::apply_gate(&mut plus, &gates::hadamard(0)).unwrap();
        let rho = DensityState::from_pure(&plus).unwrap();
        let mut obs = PauliSum::new(2);
        obs.push(Complex64::new(1.0, 0.0), &[(0, PauliAxis::X)]).unwrap();
        obs.push(Complex64::new(0.5, 0.0), &[(1, PauliAxis::Z)]).unwrap();
        let policy = ShotPolicy::Sampled { shots: 100_000, seed: 9 };
        let (v1, se) = measure_observable(&rho, &obs, &policy, 0).unwrap();
        let (v2, _) = measure_observable(&rho, &obs, &policy, 0).unwrap();
        assert_eq!(v1, v2);
        // exact value is 1.0 + 0.5 = 1.5; sampled within 5 standard errors
        assert!((v1 - 1.5).abs() < 5.0 * se.max(1e-4), "value {v1}, se {se}");
    }

    #[test]
    fn probabilities_outside_unit_interval_are_rejected() {
        assert!(NoiseModel::new(-0.1, 0.0).is_err());
        assert!(NoiseModel::new(0.0, 1.0).is_err());
        assert!(NoiseModel::new(0.2, 0.3).is_ok());
    }
}
