//! Subcommand implementations and artifact writers.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use schwinger_core::ansatz::{self, SoGateParams};
use schwinger_core::cvqe::{self, CvqeProblem};
use schwinger_core::model::{
    build_hamiltonian, build_observable, staggered_vacuum_pattern, LatticeParams, Observable,
    ObservableKind,
};
use schwinger_core::reference::{self, ChargeSector, SpectrumResult};
use schwinger_core::renorm::{self, Backend, MassShiftRequest, Method};
use schwinger_core::simulator::expectation;
use schwinger_core::zne::{self, InferenceConfig, NoiseModel, ShotPolicy};

use crate::config::{Command, DecomposeTarget, MethodSection, RunConfig};
use crate::CliError;

/// Floats are emitted with 10 significant digits throughout.
fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(())
}

pub struct RunOutcome {
    pub artifacts: Vec<String>,
}

pub fn run(command: Command, config: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Config(format!("output dir: {e}")))?;
    match command {
        Command::Ed => run_ed(config, out_dir),
        Command::Dispersion => run_ed(config, out_dir).map(|mut o| {
            // dispersion is the ed observable table under its canonical name
            o.artifacts.push("dispersion.csv".into());
            o
        }),
        Command::Cvqe => run_cvqe(config, out_dir).map(|(o, _)| o),
        Command::Massshift => run_massshift(config, out_dir),
        Command::Zne => run_zne(config, out_dir),
        Command::Decompose => run_decompose(config, out_dir),
    }
}

fn spectrum_with_observables(
    config: &RunConfig,
) -> Result<(LatticeParams, SpectrumResult, Vec<reference::SpectrumRow>), CliError> {
    let params = config.lattice.to_params()?;
    let w = build_hamiltonian(&params).map_err(CliError::numerical)?;
    let spec = reference::exact_spectrum(&w, config.eigenstates, ChargeSector::ZERO)
        .map_err(CliError::numerical)?;
    let rows = reference::spectrum_rows(&spec, &params).map_err(CliError::numerical)?;
    Ok((params, spec, rows))
}

fn run_ed(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let (_, _, rows) = spectrum_with_observables(config)?;
    let csv = reference::spectrum_csv(&rows);
    fs::write(out_dir.join("spectrum.csv"), &csv).map_err(|e| CliError::Numerical(e.to_string()))?;
    fs::write(out_dir.join("dispersion.csv"), &csv)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(RunOutcome { artifacts: vec!["spectrum.csv".into()] })
}

fn build_problem(config: &RunConfig) -> Result<CvqeProblem, CliError> {
    let lattice = config.lattice.to_params()?;
    let ansatz_section = config
        .ansatz
        .as_ref()
        .ok_or_else(|| CliError::Config("cvqe requires an ansatz section".into()))?;
    let layout = ansatz_section.to_layout(lattice.n_sites)?;
    let mut problem =
        CvqeProblem::new(lattice, layout, config.optimizer.stages.clone()).map_err(CliError::config)?;
    problem.seeds = config.optimizer.seeds;
    problem.master_seed = config.random_seed;
    problem.init_spread = config.optimizer.init_spread;
    problem.warm_noise = config.optimizer.warm_noise;
    problem.n_eigenstates = config.eigenstates.min(1 << layout.n_ancilla);
    problem.start_pattern = if config.optimizer.vacuum_start {
        staggered_vacuum_pattern(lattice.n_sites)
    } else {
        0
    };
    Ok(problem)
}

fn run_cvqe(
    config: &RunConfig,
    out_dir: &Path,
) -> Result<(RunOutcome, (CvqeProblem, cvqe::CvqeResult)), CliError> {
    let problem = build_problem(config)?;
    let mut result = cvqe::optimize(&problem).map_err(CliError::numerical)?;
    // reference fidelities from the exact backend at desk scale
    if problem.lattice.n_sites <= 16 {
        let reference_spec = reference::exact_spectrum(
            &problem.hamiltonian,
            problem.n_eigenstates,
            ChargeSector::ZERO,
        )
        .map_err(CliError::numerical)?;
        cvqe::attach_reference_fidelities(&mut result, &reference_spec)
            .map_err(CliError::numerical)?;
    }

    let records = ansatz::circuit_records(&result.final_layout, &result.best_params)
        .map_err(CliError::numerical)?;
    let manifest = json!({
        "problem": {
            "lattice": config.lattice,
            "ansatz": config.ansatz,
            "eigenstates": problem.n_eigenstates,
            "stage_schedule": problem.stage_schedule,
            "seeds": problem.seeds,
            "start_pattern": problem.start_pattern,
        },
        "random_seed": config.random_seed,
        "best_seed": result.best_seed,
        "seed_costs": result.seed_costs,
        "final_cost": fmt(result.final_cost),
        "energies": result.energies.iter().map(|e| fmt(*e)).collect::<Vec<_>>(),
        "diagnostics": result.diagnostics,
        "cost_trace": result.cost_trace.iter().map(|(i, c)| json!([i, fmt(*c)])).collect::<Vec<_>>(),
        "circuit": records,
        "final_parameters": result.best_params,
    });
    write_json(&out_dir.join("cvqe_manifest.json"), &manifest)?;
    let mut checkpoint = Vec::new();
    cvqe::save_params(&result.best_params, &mut checkpoint).map_err(CliError::numerical)?;
    fs::write(out_dir.join("params.bin"), checkpoint)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok((
        RunOutcome { artifacts: vec!["cvqe_manifest.json".into(), "params.bin".into()] },
        (problem, result),
    ))
}

fn run_massshift(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let section = config
        .massshift
        .as_ref()
        .ok_or_else(|| CliError::Config("massshift requires a massshift section".into()))?;
    let params = config.lattice.to_params()?;
    let method = match section.method {
        MethodSection::Gap => Method::Gap,
        MethodSection::Efd { r } => Method::Efd { r },
    };
    let request = MassShiftRequest {
        params,
        method,
        bracket: section.bracket,
        tolerance: section.tolerance,
        backend: Backend::Exact,
        max_iterations: 80,
    };
    let outcome = renorm::mass_shift(&request).map_err(CliError::numerical)?;

    let mut csv = String::from("iteration,mass_lat,objective\n");
    for t in &outcome.trace {
        csv.push_str(&format!("{},{},{}\n", t.iteration, fmt(t.mass_lat), fmt(t.objective)));
    }
    fs::write(out_dir.join("massshift.csv"), csv)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let summary = json!({
        "method": section.method,
        "bracket": section.bracket,
        "tolerance": section.tolerance,
        "shift": fmt(outcome.shift),
        "root": fmt(outcome.root),
        "final_interval": fmt(outcome.final_interval),
        "iterations": outcome.iterations,
    });
    write_json(&out_dir.join("massshift_summary.json"), &summary)?;
    Ok(RunOutcome { artifacts: vec!["massshift.csv".into(), "massshift_summary.json".into()] })
}

fn run_zne(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let section = config.zne.clone().unwrap_or_default();
    let (_, (problem, result)) = run_cvqe(config, out_dir)?;

    let lattice = problem.lattice;
    let noise = NoiseModel::new(section.p1, section.p2).map_err(CliError::config)?;
    let inference = InferenceConfig {
        lattice,
        layout: result.final_layout,
        best_params: result.best_params.clone(),
        rotation: result.rotation.clone(),
        noise,
        shots: ShotPolicy::Sampled { shots: section.shots, seed: config.random_seed },
        levels: section.levels.clone(),
        mode: section.mode,
        start_pattern: problem.start_pattern,
    };
    let observables = standard_observables(&lattice)?;
    let mut report = zne::inference_run(&inference, &observables).map_err(CliError::numerical)?;

    // attach exact-diagonalization references per state and quantity
    let w = build_hamiltonian(&lattice.with_penalty(0.0)).map_err(CliError::numerical)?;
    let spec = reference::exact_spectrum(&w, 1 << result.final_layout.n_ancilla, ChargeSector::ZERO)
        .map_err(CliError::numerical)?;
    for value in &mut report.values {
        if let Some(state) = spec.states.get(value.state) {
            let obs = observables.iter().find(|(n, _)| *n == value.observable);
            if let Some((_, op)) = obs {
                value.reference =
                    Some(expectation(state, op).map_err(CliError::numerical)?.re);
            }
        }
    }
    write_json(&out_dir.join("zne_results.json"), &report)?;
    Ok(RunOutcome {
        artifacts: vec![
            "cvqe_manifest.json".into(),
            "params.bin".into(),
            "zne_results.json".into(),
        ],
    })
}

/// The Table-2 observable set on the physical register.
pub fn standard_observables(
    lattice: &LatticeParams,
) -> Result<Vec<(String, schwinger_core::pauli::PauliSum)>, CliError> {
    let w = build_hamiltonian(&lattice.with_penalty(0.0)).map_err(CliError::numerical)?;
    let mut out = vec![("energy".to_string(), w)];
    let momentum = match build_observable(ObservableKind::MomentumSq, lattice)
        .map_err(CliError::numerical)?
    {
        Observable::Pauli(p) => p.scaled(Complex64::new(1.0 / (lattice.x * lattice.x), 0.0)),
        _ => unreachable!(),
    };
    out.push(("momentum_sq_over_x2".into(), momentum));
    for (name, kind) in [
        ("total_charge", ObservableKind::TotalCharge),
        ("link_field_1", ObservableKind::LinkField(1)),
        ("chiral_condensate", ObservableKind::ChiralCondensate),
    ] {
        match build_observable(kind, lattice).map_err(CliError::numerical)? {
            Observable::Pauli(p) => out.push((name.into(), p)),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

fn run_decompose(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    let target = config
        .decompose
        .as_ref()
        .ok_or_else(|| CliError::Config("decompose requires a decompose section".into()))?;
    let report = match target {
        DecomposeTarget::So4 { entries } => {
            let gp = SoGateParams::new(4, entries.clone()).map_err(CliError::config)?;
            let u = ansatz::so_matrix(&gp)
                .map_err(CliError::numerical)?
                .map(|v| Complex64::new(v, 0.0));
            let gates_list = ansatz::decompose_so4(&u).map_err(CliError::numerical)?;
            let records = ansatz::elementary_records(&gates_list);
            let composed = ansatz::compose_two_qubit(&gates_list, 0, 1).map_err(CliError::numerical)?;
            let err = schwinger_core::linalg::distance_up_to_phase(&composed, &u);
            json!({
                "kind": "so4",
                "recomposition_error": fmt(err),
                "cnot_count": records.iter().filter(|r| r.label == "cnot").count(),
                "gates": records,
            })
        }
        DecomposeTarget::So8 { entries, max_layers } => {
            let gp = SoGateParams::new(8, entries.clone()).map_err(CliError::config)?;
            let u = ansatz::so_matrix(&gp)
                .map_err(CliError::numerical)?
                .map(|v| Complex64::new(v, 0.0));
            let dec = ansatz::decompose_so8(&u, *max_layers, config.random_seed)
                .map_err(CliError::numerical)?;
            let gates_list = dec.gates(0, 1, 2).map_err(CliError::numerical)?;
            let records: Vec<_> = gates_list
                .iter()
                .map(|g| ansatz::GateRecord {
                    label: g.label.clone(),
                    targets: g.targets.clone(),
                    params: Vec::new(),
                })
                .collect();
            json!({
                "kind": "so8",
                "frobenius_sq_distance": fmt(dec.distance),
                "below_threshold": dec.below_threshold,
                "layers": dec.layers.len(),
                "gates": records,
                "layer_parameters": dec.layers,
            })
        }
    };
    write_json(&out_dir.join("decomposition.json"), &report)?;
    Ok(RunOutcome { artifacts: vec!["decomposition.json".into()] })
}
