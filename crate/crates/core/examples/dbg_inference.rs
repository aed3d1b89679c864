// isolate the depolarizing-channel bug
use nalgebra::DMatrix;
use num_complex::Complex64;
use schwinger_core::linalg::{kron_low_high, max_abs};
use schwinger_core::model::{build_hamiltonian, LatticeParams};
use schwinger_core::reference::{exact_spectrum, ChargeSector};
use schwinger_core::zne::DensityState;

fn main() {
    let lattice = LatticeParams::new(4, 0.16, 0.333, 0.5, 0.0).unwrap();
    let w = build_hamiltonian(&lattice).unwrap();
    let spec = exact_spectrum(&w, 2, ChargeSector::ZERO).unwrap();
    let psi = &spec.states[1];
    let rho = DensityState::from_pure(psi).unwrap();
    let e0 = rho.expectation(&w).unwrap().re;
    println!("noiseless E1 = {e0:.8}");

    let p = 0.01;
    // channel on qubits (0,1) via the implementation
    let mut noisy = rho.clone();
    noisy.depolarize(&[0, 1], p).unwrap();
    let e_impl = noisy.expectation(&w).unwrap().re;

    // independent dense construction: junk = (I/4 on qubits 0,1) (x) Tr_{01} rho
    let m = rho.matrix();
    let mut reduced = DMatrix::<Complex64>::zeros(4, 4);
    for hi_r in 0..4usize {
        for hi_c in 0..4usize {
            let mut acc = Complex64::new(0.0, 0.0);
            for lo in 0..4usize {
                acc += m[(hi_r * 4 + lo, hi_c * 4 + lo)];
            }
            reduced[(hi_r, hi_c)] = acc;
        }
    }
    let id4 = DMatrix::<Complex64>::identity(4, 4).map(|v| v / 4.0);
    let junk = kron_low_high(&id4, &reduced);
    let expected = m.map(|v| v * (1.0 - p)) + junk.map(|v| v * p);
    let wd = w.to_dense();
    let e_direct = (0..16).map(|i| (expected.row(i) * wd.column(i))[(0, 0)].re).sum::<f64>();
    println!("channel E: impl {e_impl:.8} vs direct {e_direct:.8}");
    // matrix-level comparison
    let diff = max_abs(&(noisy.matrix() - &expected));
    println!("matrix diff: {diff:.3e}");
}
