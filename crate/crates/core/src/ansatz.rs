//! Parametric SO(4)/SO(8) gates, the three circuit layouts, purified-state
//! preparation and gate decompositions.
//!
//! An SO(n) gate is `U = exp(A - A^T)` with `A` strictly upper triangular;
//! the free parameters are the upper-triangle entries in row-major order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SkewExp};
use crate::optimizer::{self, LbfgsOptions};
use crate::simulator::{apply_gate, gates, GateOp, QuantumState};

/// Parameters of one SO(4) or SO(8) gate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SoGateParams {
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl SoGateParams {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = Self::entry_count(dim)?;
        if entries.len() != expected {
            return Err(Error::ParamCount { expected, got: entries.len() });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParams("gate entries must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn entry_count(dim: usize) -> Result<usize> {
        match dim {
            4 => Ok(6),
            8 => Ok(28),
            _ => Err(Error::InvalidParams(format!("SO gate dimension must be 4 or 8, got {dim}"))),
        }
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Ok(Self { dim, entries: vec![0.0; Self::entry_count(dim)?] })
    }
}

/// The skew-symmetric generator A - A^T.
pub fn so_generator(params: &SoGateParams) -> DMatrix<f64> {
    let d = params.dim;
    let mut b = DMatrix::<f64>::zeros(d, d);
    let mut idx = 0;
    for r in 0..d {
        for c in (r + 1)..d {
            b[(r, c)] = params.entries[idx];
            b[(c, r)] = -params.entries[idx];
            idx += 1;
        }
    }
    b
}

/// The orthogonal matrix exp(A - A^T).
pub fn so_matrix(params: &SoGateParams) -> Result<DMatrix<f64>> {
    SoGateParams::new(params.dim, params.entries.clone())?;
    Ok(linalg::expm_real(&so_generator(params)))
}

/// The gate placed on the given qubits (2 for dim 4, 3 for dim 8).
pub fn so_gate(params: &SoGateParams, targets: &[usize]) -> Result<GateOp> {
    let expected_targets = if params.dim == 4 { 2 } else { 3 };
    if targets.len() != expected_targets {
        return Err(Error::SizeMismatch { expected: expected_targets, got: targets.len() });
    }
    let m = so_matrix(params)?;
    GateOp::new(GateOp::real_matrix(m), targets.to_vec(), format!("so{}", params.dim))
}

/// Circuit layout kinds of the three ansatz families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    BrickwallSo4,
    LadderSo4,
    LadderSo8,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CircuitLayout {
    pub kind: LayoutKind,
    pub n_physical: usize,
    pub n_ancilla: usize,
    pub n_layers: usize,
    pub translation_symmetric: bool,
}

impl CircuitLayout {
    pub fn new(
        kind: LayoutKind,
        n_physical: usize,
        n_ancilla: usize,
        n_layers: usize,
        translation_symmetric: bool,
    ) -> Result<Self> {
        let min_span = match kind {
            LayoutKind::BrickwallSo4 | LayoutKind::LadderSo4 => 2,
            LayoutKind::LadderSo8 => 3,
        };
        if n_physical < min_span {
            return Err(Error::InvalidParams(format!(
                "layout needs at least {min_span} physical qubits"
            )));
        }
        if n_ancilla > n_physical {
            return Err(Error::InvalidParams("more ancillas than physical qubits".into()));
        }
        if n_layers == 0 {
            return Err(Error::InvalidParams("n_layers must be positive".into()));
        }
        Ok(Self { kind, n_physical, n_ancilla, n_layers, translation_symmetric })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_physical + self.n_ancilla
    }

    pub fn gate_dim(&self) -> usize {
        match self.kind {
            LayoutKind::BrickwallSo4 | LayoutKind::LadderSo4 => 4,
            LayoutKind::LadderSo8 => 8,
        }
    }

    pub fn params_per_gate(&self) -> usize {
        SoGateParams::entry_count(self.gate_dim()).expect("valid dim")
    }

    /// Target qubits of every gate in one layer, in application order.
    /// Parametric gates act on physical qubits only.
    pub fn layer_slots(&self) -> Vec<Vec<usize>> {
        let n = self.n_physical;
        match self.kind {
            LayoutKind::BrickwallSo4 => {
                let mut slots = Vec::new();
                let mut q = 0;
                while q + 1 < n {
                    slots.push(vec![q, q + 1]);
                    q += 2;
                }
                let mut q = 1;
                while q + 1 < n {
                    slots.push(vec![q, q + 1]);
                    q += 2;
                }
                slots
            }
            LayoutKind::LadderSo4 => (0..n - 1).map(|q| vec![q, q + 1]).collect(),
            LayoutKind::LadderSo8 => (0..n - 2).map(|q| vec![q, q + 1, q + 2]).collect(),
        }
    }

    pub fn gates_per_layer(&self) -> usize {
        self.layer_slots().len()
    }

    /// Total number of free parameters.
    pub fn param_count(&self) -> usize {
        let per_gate = self.params_per_gate();
        if self.translation_symmetric {
            per_gate * self.n_layers
        } else {
            per_gate * self.n_layers * self.gates_per_layer()
        }
    }

    /// Expand a translation-symmetric parameter vector to the full per-gate
    /// vector of the same layout without the symmetry constraint.
    pub fn expand_symmetric_params(&self, params: &[f64]) -> Result<Vec<f64>> {
        if !self.translation_symmetric {
            return Err(Error::InvalidParams("layout is not translation symmetric".into()));
        }
        if params.len() != self.param_count() {
            return Err(Error::ParamCount { expected: self.param_count(), got: params.len() });
        }
        let per_gate = self.params_per_gate();
        let gates_per_layer = self.gates_per_layer();
        let mut out = Vec::with_capacity(per_gate * self.n_layers * gates_per_layer);
        for layer in 0..self.n_layers {
            let shared = &params[layer * per_gate..(layer + 1) * per_gate];
            for _ in 0..gates_per_layer {
                out.extend_from_slice(shared);
            }
        }
        Ok(out)
    }

    pub fn without_symmetry(mut self) -> Self {
        self.translation_symmetric = false;
        self
    }

    /// (targets, parameter offset) of every gate in application order.
    /// (targets, parameter offset) of every gate in application order.
    pub fn gate_param_slots_public(&self, params: &[f64]) -> Vec<(Vec<usize>, usize)> {
        self.gate_param_slots(params).expect("validated parameter count")
    }

    pub(crate) fn gate_param_slots(&self, params: &[f64]) -> Result<Vec<(Vec<usize>, usize)>> {
        if params.len() != self.param_count() {
            return Err(Error::ParamCount { expected: self.param_count(), got: params.len() });
        }
        let per_gate = self.params_per_gate();
        let slots = self.layer_slots();
        let mut out = Vec::with_capacity(self.n_layers * slots.len());
        for layer in 0..self.n_layers {
            for (g, slot) in slots.iter().enumerate() {
                let offset = if self.translation_symmetric {
                    layer * per_gate
                } else {
                    (layer * slots.len() + g) * per_gate
                };
                out.push((slot.clone(), offset));
            }
        }
        Ok(out)
    }
}

/// An ordered sequence of placed gates.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<GateOp>,
}

impl Circuit {
    pub fn apply(&self, state: &mut QuantumState) -> Result<()> {
        for g in &self.gates {
            apply_gate(state, g)?;
        }
        Ok(())
    }
}

/// Build the parametric portion of the ansatz (entanglement preparation is
/// separate, see [`prepare_purified`]).
pub fn build_circuit(layout: &CircuitLayout, params: &[f64]) -> Result<Circuit> {
    let dim = layout.gate_dim();
    let per_gate = layout.params_per_gate();
    let mut gate_list = Vec::new();
    for (slot, offset) in layout.gate_param_slots(params)? {
        let gp = SoGateParams::new(dim, params[offset..offset + per_gate].to_vec())?;
        gate_list.push(so_gate(&gp, &slot)?);
    }
    Ok(Circuit { n_qubits: layout.n_qubits(), gates: gate_list })
}

/// Serializable description of one placed gate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateRecord {
    pub label: String,
    pub targets: Vec<usize>,
    pub params: Vec<f64>,
}

/// Ordered gate records of the parametric circuit, for persistence.
pub fn circuit_records(layout: &CircuitLayout, params: &[f64]) -> Result<Vec<GateRecord>> {
    let per_gate = layout.params_per_gate();
    let mut out = Vec::new();
    for (slot, offset) in layout.gate_param_slots(params)? {
        out.push(GateRecord {
            label: format!("so{}", layout.gate_dim()),
            targets: slot,
            params: params[offset..offset + per_gate].to_vec(),
        });
    }
    Ok(out)
}

/// The purified initial state: each ancilla `N+i` is Bell-paired with the
/// physical qubit `N-1-i` at the ancilla end of the chain.
pub fn prepare_purified(n_physical: usize, n_ancilla: usize) -> Result<QuantumState> {
    prepare_purified_on(0, n_physical, n_ancilla)
}

/// Purified state over a basis pattern: the physical register starts in
/// `|pattern>` (e.g. the staggered vacuum) before the Bell pairs are formed,
/// so branch m is `|pattern ^ flips(m)>`.
pub fn prepare_purified_on(
    pattern: u64,
    n_physical: usize,
    n_ancilla: usize,
) -> Result<QuantumState> {
    let mut state = QuantumState::zero(n_physical + n_ancilla);
    for g in purification_gates_on(pattern, n_physical, n_ancilla)? {
        apply_gate(&mut state, &g)?;
    }
    Ok(state)
}

/// The entangling-preparation gates (used directly by inference runs).
pub fn purification_gates(n_physical: usize, n_ancilla: usize) -> Result<Vec<GateOp>> {
    purification_gates_on(0, n_physical, n_ancilla)
}

pub fn purification_gates_on(
    pattern: u64,
    n_physical: usize,
    n_ancilla: usize,
) -> Result<Vec<GateOp>> {
    if n_ancilla > n_physical {
        return Err(Error::InvalidParams("more ancillas than physical qubits".into()));
    }
    if pattern >= 1u64 << n_physical {
        return Err(Error::InvalidParams("start pattern outside the physical register".into()));
    }
    let mut out = Vec::new();
    for q in 0..n_physical {
        if (pattern >> q) & 1 == 1 {
            out.push(gates::pauli_x(q));
        }
    }
    for i in 0..n_ancilla {
        out.push(gates::hadamard(n_physical + i));
        out.push(gates::cnot(n_physical + i, n_physical - 1 - i));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// SO(4) decomposition into elementary gates (two CNOTs, fixed phase/Hadamard
// gates and two parametric single-qubit unitaries).
// ---------------------------------------------------------------------------

/// Magic-basis entry sequence: S(q0), S(q1), H(q1), CNOT(q1->q0). Conjugation
/// by this gate maps SO(4) into SU(2) x SU(2).
fn magic_gates(q0: usize, q1: usize) -> Vec<GateOp> {
    vec![gates::phase_s(q0), gates::phase_s(q1), gates::hadamard(q1), gates::cnot(q1, q0)]
}

fn magic_matrix_4x4() -> DMatrix<Complex64> {
    compose_two_qubit(&magic_gates(0, 1), 0, 1).expect("fixed gate list composes")
}

/// XZX Euler angles: V ~ RX(a) RZ(b) RX(c) up to a global phase,
/// in matrix order (RX(c) acts first).
fn euler_xzx(v: &DMatrix<Complex64>) -> (f64, f64, f64) {
    let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
    let phase = Complex64::from_polar(1.0, -det.arg() / 2.0);
    let vs = v.map(|x| x * phase);
    // RX(t) = H RZ(t) H, so read ZXZ angles off H V H
    let h = 1.0 / 2.0_f64.sqrt();
    let hm = DMatrix::from_fn(2, 2, |r, c| {
        Complex64::new(if (r, c) == (1, 1) { -h } else { h }, 0.0)
    });
    let w = &hm * vs * &hm;
    let c00 = w[(0, 0)];
    let c10 = w[(1, 0)];
    let (cos_half, sin_half) = (c00.norm(), c10.norm());
    let b = 2.0 * sin_half.atan2(cos_half);
    if sin_half < 1e-12 {
        (-2.0 * c00.arg(), b, 0.0)
    } else if cos_half < 1e-12 {
        (2.0 * c10.arg() + std::f64::consts::PI, b, 0.0)
    } else {
        let sum = -2.0 * c00.arg();
        let diff = 2.0 * c10.arg() + std::f64::consts::PI;
        (0.5 * (sum + diff), b, 0.5 * (sum - diff))
    }
}

fn single_qubit_euler_gates(v: &DMatrix<Complex64>, qubit: usize) -> Vec<GateOp> {
    let (a, b, c) = euler_xzx(v);
    vec![gates::rx(qubit, c), gates::rz(qubit, b), gates::rx(qubit, a)]
}

/// Verify U is real orthogonal with determinant +1 and return the real part.
fn check_so(u: &DMatrix<Complex64>, dim: usize, tol: f64) -> Result<DMatrix<f64>> {
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::SizeMismatch { expected: dim, got: u.nrows() });
    }
    let imag = u.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let real = u.map(|v| v.re);
    let ortho = (&real * real.transpose() - DMatrix::<f64>::identity(dim, dim)).amax();
    let det_dev = (real.determinant() - 1.0).abs();
    let deviation = imag.max(ortho).max(det_dev);
    if deviation > tol {
        return Err(Error::NotSpecialOrthogonal { dim, deviation });
    }
    Ok(real)
}

/// Decompose an SO(4) matrix into the fixed template: phase/Hadamard gates
/// into the magic basis, two parametric single-qubit unitaries (each split
/// RX-RZ-RX) and the mirrored exit. Exactly two CNOTs; the composed list
/// equals U up to a global phase.
pub fn decompose_so4(u: &DMatrix<Complex64>) -> Result<Vec<GateOp>> {
    decompose_so4_on(u, 0, 1)
}

pub fn decompose_so4_on(u: &DMatrix<Complex64>, q0: usize, q1: usize) -> Result<Vec<GateOp>> {
    check_so(u, 4, 1e-8)?;
    let m = magic_matrix_4x4();
    let w = &m * u * m.adjoint();
    let (low, high) = linalg::kron_factor_2x2(&w);
    let rebuilt = linalg::kron_low_high(&low, &high);
    if linalg::max_abs(&(&rebuilt - &w)) > 1e-8 {
        return Err(Error::NotSpecialOrthogonal {
            dim: 4,
            deviation: linalg::max_abs(&(&rebuilt - &w)),
        });
    }

    let mut gate_list = magic_gates(q0, q1);
    gate_list.extend(single_qubit_euler_gates(&low, q0));
    gate_list.extend(single_qubit_euler_gates(&high, q1));
    // adjoint of the magic sequence
    gate_list.push(gates::cnot(q1, q0));
    gate_list.push(gates::hadamard(q1));
    gate_list.push(gates::phase_sdg(q0));
    gate_list.push(gates::phase_sdg(q1));
    Ok(gate_list)
}

/// Compose a two-qubit gate list (targets within {q0, q1}) into a 4x4 matrix
/// with q0 as matrix-index bit 0.
pub fn compose_two_qubit(gate_list: &[GateOp], q0: usize, q1: usize) -> Result<DMatrix<Complex64>> {
    let n = q0.max(q1) + 1;
    let mut cols = Vec::new();
    for b in 0..4u64 {
        let bits0 = b & 1;
        let bits1 = (b >> 1) & 1;
        let mut s = QuantumState::basis(n, (bits0 << q0) | (bits1 << q1))?;
        for g in gate_list {
            apply_gate(&mut s, g)?;
        }
        let mut col = vec![Complex64::new(0.0, 0.0); 4];
        for (idx, amp) in s.amplitudes().iter().enumerate() {
            let r0 = (idx >> q0) & 1;
            let r1 = (idx >> q1) & 1;
            col[r0 | (r1 << 1)] += amp;
        }
        cols.push(col);
    }
    Ok(DMatrix::from_fn(4, 4, |r, c| cols[c as usize][r as usize]))
}

// ---------------------------------------------------------------------------
// SO(8) decomposition into a ladder of SO(4) gates.
// ---------------------------------------------------------------------------

/// Result of [`decompose_so8`].
#[derive(Clone, Debug)]
pub struct So8Decomposition {
    /// Per-layer SO(4) parameters: gates on (q0,q1) then (q1,q2).
    pub layers: Vec<[SoGateParams; 2]>,
    pub distance: f64,
    pub below_threshold: bool,
}

impl So8Decomposition {
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer[0].entries);
            out.extend_from_slice(&layer[1].entries);
        }
        out
    }

    /// The composed ladder as an 8x8 orthogonal matrix.
    pub fn compose(&self) -> DMatrix<f64> {
        compose_so8_ladder(&self.flat_params())
    }

    /// The ladder as placed gates on the given qubit triple.
    pub fn gates(&self, q0: usize, q1: usize, q2: usize) -> Result<Vec<GateOp>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(so_gate(&layer[0], &[q0, q1])?);
            out.push(so_gate(&layer[1], &[q1, q2])?);
        }
        Ok(out)
    }
}

fn embed_low(g: &DMatrix<f64>) -> DMatrix<f64> {
    // gate on (q0,q1) of a 3-qubit space: identity on the high bit
    let mut m = DMatrix::<f64>::zeros(8, 8);
    for hb in 0..2 {
        for r in 0..4 {
            for c in 0..4 {
                m[(r + 4 * hb, c + 4 * hb)] = g[(r, c)];
            }
        }
    }
    m
}

fn embed_high(g: &DMatrix<f64>) -> DMatrix<f64> {
    // gate on (q1,q2): identity on bit 0
    let mut m = DMatrix::<f64>::zeros(8, 8);
    for lb in 0..2 {
        for r in 0..4 {
            for c in 0..4 {
                m[(lb + 2 * r, lb + 2 * c)] = g[(r, c)];
            }
        }
    }
    m
}

/// Compose a flat parameter vector (12 per layer) into the ladder matrix.
fn compose_so8_ladder(params: &[f64]) -> DMatrix<f64> {
    let mut acc = DMatrix::<f64>::identity(8, 8);
    for layer in params.chunks_exact(12) {
        let a = SoGateParams { dim: 4, entries: layer[0..6].to_vec() };
        let b = SoGateParams { dim: 4, entries: layer[6..12].to_vec() };
        let ga = embed_low(&linalg::expm_real(&so_generator(&a)));
        let gb = embed_high(&linalg::expm_real(&so_generator(&b)));
        acc = gb * ga * acc;
    }
    acc
}

const UPPER_4X4: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Frobenius-squared objective and its analytic gradient via the Frechet
/// derivative of each gate exponential.
fn so8_objective_and_gradient(params: &[f64], target: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let n_gates = params.len() / 6;
    let mut mats = Vec::with_capacity(n_gates);
    let mut exps = Vec::with_capacity(n_gates);
    for (gi, chunk) in params.chunks_exact(6).enumerate() {
        let gp = SoGateParams { dim: 4, entries: chunk.to_vec() };
        let exp = SkewExp::new(&so_generator(&gp));
        let g = exp.exp();
        let embedded = if gi % 2 == 0 { embed_low(&g) } else { embed_high(&g) };
        mats.push(embedded);
        exps.push(exp);
    }
    let mut prefix = vec![DMatrix::<f64>::identity(8, 8)];
    for m in &mats {
        let next = m * prefix.last().unwrap();
        prefix.push(next);
    }
    let mut suffix = vec![DMatrix::<f64>::identity(8, 8); n_gates + 1];
    for i in (0..n_gates).rev() {
        suffix[i] = &suffix[i + 1] * &mats[i];
    }
    let resid = &prefix[n_gates] - target;
    let f = resid.iter().map(|v| v * v).sum::<f64>();

    let mut grad = vec![0.0; params.len()];
    for gi in 0..n_gates {
        let left = &suffix[gi + 1];
        let right = &prefix[gi];
        for e in 0..6 {
            let mut dir = DMatrix::<f64>::zeros(4, 4);
            let (r, c) = UPPER_4X4[e];
            dir[(r, c)] = 1.0;
            dir[(c, r)] = -1.0;
            let dgate = exps[gi].frechet(&dir);
            let dembedded = if gi % 2 == 0 { embed_low(&dgate) } else { embed_high(&dgate) };
            let dcomposed = left * dembedded * right;
            grad[gi * 6 + e] =
                2.0 * resid.iter().zip(dcomposed.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    (f, grad)
}

pub const SO8_DISTANCE_THRESHOLD: f64 = 1e-10;

/// Decompose an SO(8) gate into a ladder of SO(4) gates by minimizing the
/// squared Frobenius distance, growing the layer count until the threshold
/// is met. Eight seeded random restarts per layer count; if `max_layers` is
/// exhausted the best found is returned with `below_threshold = false`.
pub fn decompose_so8(
    u: &DMatrix<Complex64>,
    max_layers: usize,
    seed: u64,
) -> Result<So8Decomposition> {
    if max_layers < 1 {
        return Err(Error::InvalidParams("max_layers must be >= 1".into()));
    }
    let target = check_so(u, 8, 1e-8)?;

    let id_dist = (&target - DMatrix::<f64>::identity(8, 8)).iter().map(|v| v * v).sum::<f64>();
    if id_dist < SO8_DISTANCE_THRESHOLD {
        return Ok(So8Decomposition {
            layers: Vec::new(),
            distance: id_dist,
            below_threshold: true,
        });
    }

    let restarts = 8;
    let opts = LbfgsOptions {
        max_iters: 800,
        grad_tol: 1e-10,
        f_target: Some(SO8_DISTANCE_THRESHOLD * 0.01),
        ..LbfgsOptions::default()
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    'layer_loop: for layers in 1..=max_layers {
        let n_params = 12 * layers;
        for restart in 0..restarts {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                seed ^ ((layers as u64) << 32) ^ restart as u64,
            );
            let x0: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let outcome =
                optimizer::minimize_with_gradient(|x| so8_objective_and_gradient(x, &target), x0, &opts);
            if best.as_ref().map_or(true, |(_, f)| outcome.f < *f) {
                best = Some((outcome.x, outcome.f));
            }
            if best.as_ref().unwrap().1 < SO8_DISTANCE_THRESHOLD {
                break 'layer_loop;
            }
        }
    }
    let (params, distance) = best.expect("at least one restart ran");
    let layers = params
        .chunks_exact(12)
        .map(|chunk| {
            [
                SoGateParams { dim: 4, entries: chunk[0..6].to_vec() },
                SoGateParams { dim: 4, entries: chunk[6..12].to_vec() },
            ]
        })
        .collect();
    Ok(So8Decomposition { layers, distance, below_threshold: distance < SO8_DISTANCE_THRESHOLD })
}

/// Elementary export of a placed gate list: rx/rz carry their angle, the
/// adjoint phase gate is exported as rz(-pi/2) (equal up to global phase).
pub fn elementary_records(gate_list: &[GateOp]) -> Vec<GateRecord> {
    gate_list
        .iter()
        .map(|g| {
            let (label, params) = match g.label.as_str() {
                "rx" => {
                    let c = g.matrix[(0, 0)].re.clamp(-1.0, 1.0);
                    let s = -g.matrix[(0, 1)].im;
                    ("rx".to_string(), vec![2.0 * s.atan2(c)])
                }
                "rz" => ("rz".to_string(), vec![2.0 * g.matrix[(1, 1)].arg()]),
                "sdg" => ("rz".to_string(), vec![-std::f64::consts::FRAC_PI_2]),
                other => (other.to_string(), Vec::new()),
            };
            GateRecord { label, targets: g.targets.clone(), params }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn random_so4_params(rng: &mut rand_chacha::ChaCha8Rng) -> SoGateParams {
        SoGateParams::new(4, (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn zero_parameters_give_identity() {
        let u = so_matrix(&SoGateParams::zeros(4).unwrap()).unwrap();
        assert!((u - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn single_entry_is_a_givens_rotation_mapping_e0_to_minus_e1_at_half_pi() {
        let th = std::f64::consts::FRAC_PI_2;
        let gp = SoGateParams::new(4, vec![th, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let u = so_matrix(&gp).unwrap();
        // column 0 is the image of e0
        assert_abs_diff_eq!(u[(0, 0)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)], -1.0, epsilon = 1e-14);
        let gp = SoGateParams::new(4, vec![0.37, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let u = so_matrix(&gp).unwrap();
        assert_abs_diff_eq!(u[(0, 0)], 0.37f64.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 0)], -0.37f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn random_so_gates_are_special_orthogonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for i in 0..100 {
            let dim = if i % 2 == 0 { 4 } else { 8 };
            let count = SoGateParams::entry_count(dim).unwrap();
            let gp =
                SoGateParams::new(dim, (0..count).map(|_| rng.gen_range(-3.0..3.0)).collect())
                    .unwrap();
            let u = so_matrix(&gp).unwrap();
            let dev = (&u * u.transpose() - DMatrix::<f64>::identity(dim, dim)).amax();
            assert!(dev < 1e-10, "orthogonality deviation {dev}");
            assert_abs_diff_eq!(u.determinant(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn brickwall_layout_counts_match_figure() {
        let layout = CircuitLayout::new(LayoutKind::BrickwallSo4, 8, 1, 1, false).unwrap();
        let slots = layout.layer_slots();
        let starts: Vec<usize> = slots.iter().map(|s| s[0]).collect();
        assert_eq!(starts, vec![0, 2, 4, 6, 1, 3, 5]);
        assert_eq!(layout.param_count(), 42);
    }

    #[test]
    fn ladder_layout_counts() {
        let sym = CircuitLayout::new(LayoutKind::LadderSo4, 20, 1, 8, true).unwrap();
        assert_eq!(sym.param_count(), 48);
        let so8 = CircuitLayout::new(LayoutKind::LadderSo8, 16, 3, 8, false).unwrap();
        assert_eq!(so8.gates_per_layer(), 14);
        assert_eq!(so8.param_count(), 14 * 8 * 28);
    }

    #[test]
    fn parameter_count_mismatch_is_rejected() {
        let layout = CircuitLayout::new(LayoutKind::BrickwallSo4, 4, 1, 2, false).unwrap();
        assert!(build_circuit(&layout, &vec![0.0; layout.param_count() - 1]).is_err());
        assert!(build_circuit(&layout, &vec![0.0; layout.param_count()]).is_ok());
    }

    #[test]
    fn purified_state_matches_the_bell_pair_example() {
        let s = prepare_purified(4, 1).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(s.amplitudes()[0].re, r, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitudes()[(1 << 4) | (1 << 3)].re, r, epsilon = 1e-12);

        let trivial = prepare_purified(3, 0).unwrap();
        assert_abs_diff_eq!(trivial.amplitudes()[0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn purified_ancilla_marginal_is_maximally_mixed() {
        let n_phys = 8;
        let s = prepare_purified(n_phys, 3).unwrap();
        let phys_mask = (1usize << n_phys) - 1;
        let mut rho = DMatrix::<Complex64>::zeros(8, 8);
        for (idx, amp) in s.amplitudes().iter().enumerate() {
            for (idx2, amp2) in s.amplitudes().iter().enumerate() {
                if idx & phys_mask == idx2 & phys_mask {
                    rho[(idx >> n_phys, idx2 >> n_phys)] += amp * amp2.conj();
                }
            }
        }
        let expected = DMatrix::<Complex64>::identity(8, 8).map(|v| v / 8.0);
        assert!(linalg::max_abs(&(rho - expected)) < 1e-12);
        // entropy of I/8 is 3 ln 2 by construction of the uniform marginal
    }

    #[test]
    fn so4_decomposition_recomposes_and_uses_exactly_two_cnots() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let gp = random_so4_params(&mut rng);
            let u = so_matrix(&gp).unwrap().map(|v| Complex64::new(v, 0.0));
            let gate_list = decompose_so4(&u).unwrap();
            let cnots = gate_list.iter().filter(|g| g.label == "cnot").count();
            assert_eq!(cnots, 2);
            let composed = compose_two_qubit(&gate_list, 0, 1).unwrap();
            let err = linalg::distance_up_to_phase(&composed, &u);
            assert!(err < 1e-8, "recomposition error {err}");
        }
    }

    #[test]
    fn so4_identity_decomposes_to_identity_up_to_phase() {
        let id = DMatrix::<Complex64>::identity(4, 4);
        let gate_list = decompose_so4(&id).unwrap();
        let composed = compose_two_qubit(&gate_list, 0, 1).unwrap();
        assert!(linalg::distance_up_to_phase(&composed, &id) < 1e-10);
    }

    #[test]
    fn so4_decomposition_rejects_non_orthogonal_input() {
        let mut m = DMatrix::<Complex64>::identity(4, 4);
        m[(0, 0)] = Complex64::new(2.0, 0.0);
        assert!(decompose_so4(&m).is_err());
    }

    #[test]
    fn so8_ladder_round_trip_recovers_constructed_targets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let layers = 4;
        let params: Vec<f64> = (0..12 * layers).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = compose_so8_ladder(&params).map(|v| Complex64::new(v, 0.0));
        let dec = decompose_so8(&target, 4, 123).unwrap();
        assert!(dec.below_threshold, "distance {}", dec.distance);
        assert!(dec.distance < SO8_DISTANCE_THRESHOLD);
    }

    #[test]
    fn so8_identity_is_the_empty_ladder() {
        let id = DMatrix::<Complex64>::identity(8, 8);
        let dec = decompose_so8(&id, 2, 7).unwrap();
        assert!(dec.layers.is_empty());
        assert_abs_diff_eq!(dec.distance, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn elementary_export_covers_the_allowed_gate_set() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let gp = random_so4_params(&mut rng);
        let u = so_matrix(&gp).unwrap().map(|v| Complex64::new(v, 0.0));
        let records = elementary_records(&decompose_so4(&u).unwrap());
        for r in &records {
            assert!(
                ["h", "s", "cnot", "rx", "rz"].contains(&r.label.as_str()),
                "label {}",
                r.label
            );
        }
    }
}
