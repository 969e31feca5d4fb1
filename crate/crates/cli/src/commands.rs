//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::thread;

use anyhow::bail;
use chiral_core::dynamics::{
    init_from_soliton, mirror_check, run_with, Boundary, Grid, InitOptions, Observation, SimConfig,
};
use chiral_core::energetics::MaterialParams;
use chiral_core::planar::{traveling_constants, TravelingWaveSetup};
use chiral_core::soliton::{f0, f1, f2, Branch, PerturbativeSolution};
use chiral_core::verify::{
    dynamics_suite, generic_params, mirror_suite, perturbation_suite, planar_suite, symmetry_suite,
    variation_suite, DynamicsSuiteConfig, SuiteReport,
};
use clap::ValueEnum;
use serde::Serialize;

use crate::output::{csv_row, out_dir, OutputWriter, RunManifest, FALLBACK_OUT_DIR};
use crate::settings::{BranchArg, DirectionArg, Settings, UsageError};

/// Whether the checks of a command held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

impl Outcome {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Passed
        } else {
            Outcome::Failed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Symmetries,
    Variations,
    Planar,
    Perturbation,
    Dynamics,
    Mirror,
    All,
}

const ALL_SUITES: [Suite; 6] = [
    Suite::Symmetries,
    Suite::Variations,
    Suite::Planar,
    Suite::Perturbation,
    Suite::Dynamics,
    Suite::Mirror,
];

fn run_suite(suite: Suite, trials: usize, seed: u64) -> chiral_core::Result<SuiteReport> {
    let dyn_cfg = DynamicsSuiteConfig::default();
    match suite {
        Suite::Symmetries => Ok(symmetry_suite(&generic_params(), trials, seed)?.0),
        Suite::Variations => variation_suite(&generic_params(), trials, seed),
        Suite::Planar => planar_suite(trials, seed),
        Suite::Perturbation => perturbation_suite(),
        Suite::Dynamics => dynamics_suite(&dyn_cfg),
        Suite::Mirror => Ok(mirror_suite(&dyn_cfg, &[0.0, 0.05], 1e-4)?.0),
        Suite::All => unreachable!("expanded by the caller"),
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    passed: bool,
    trials: usize,
    seed: u64,
    suites: Vec<SuiteReport>,
}

#[derive(Debug, Serialize)]
struct VerifyParams {
    suite: Suite,
    trials: usize,
}

pub fn verify(suite: Suite, trials: usize, seed: u64, out: Option<&Path>) -> anyhow::Result<Outcome> {
    if trials == 0 {
        bail!(UsageError("--trials must be at least 1".into()));
    }
    let suites: Vec<Suite> = if suite == Suite::All { ALL_SUITES.to_vec() } else { vec![suite] };
    // suites are independent, run them side by side
    let reports = thread::scope(|scope| {
        let handles: Vec<_> = suites
            .iter()
            .map(|&s| scope.spawn(move || run_suite(s, trials, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite thread panicked"))
            .collect::<chiral_core::Result<Vec<_>>>()
    })?;
    let report = VerifyReport {
        passed: reports.iter().all(|r| r.passed),
        trials,
        seed,
        suites: reports,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = out_dir(out) {
        let manifest = RunManifest::new("verify", &VerifyParams { suite, trials }, seed)?;
        let mut w = OutputWriter::create(dir, manifest)?;
        w.write_json("verify.json", &report)?;
        w.finish()?;
    }
    Ok(Outcome::from_bool(report.passed))
}

#[derive(Debug, Serialize)]
struct ReduceReport {
    params: MaterialParams,
    v: f64,
    m: Option<f64>,
    setup: TravelingWaveSetup,
}

pub fn reduce(settings: &Settings, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let (p, v, c1) = settings.material()?;
    let setup = traveling_constants(&p, v, c1)?;
    let report = ReduceReport {
        params: p,
        v,
        m: setup.m().ok(),
        setup,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = out_dir(out) {
        let manifest = RunManifest::new("reduce", &settings.resolved(&p, v), 0)?;
        let mut w = OutputWriter::create(dir, manifest)?;
        w.write_json("reduce.json", &report)?;
        w.finish()?;
    }
    Ok(Outcome::Passed)
}

/// Parses `a:b` with `a < b`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got '{s}'"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("bad range start '{a}': {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("bad range end '{b}': {e}"))?;
    if !(a < b) {
        return Err(format!("range start must be below its end, got {a}:{b}"));
    }
    Ok((a, b))
}

#[derive(Debug, Serialize)]
struct SolitonParams {
    m: f64,
    chi_tilde: f64,
    order: u8,
    branch: BranchArg,
    range: String,
    samples: usize,
}

/// CSV table `s,F0,F1,F2,F,phi`, where `F` is the series truncated at
/// `order` and `phi = F/2`.
pub fn soliton_csv(m: f64, chi_tilde: f64, order: u8, branch: Branch, range: (f64, f64), samples: usize) -> anyhow::Result<String> {
    if samples < 2 {
        bail!(UsageError("--samples must be at least 2".into()));
    }
    let sol = PerturbativeSolution::new(m, chi_tilde, order, branch)?;
    let mut csv = String::from("s,F0,F1,F2,F,phi\n");
    for i in 0..samples {
        let s = range.0 + (range.1 - range.0) * i as f64 / (samples - 1) as f64;
        let f = sol.eval(s);
        csv.push_str(&csv_row(&[s, f0(s, m, branch), f1(s, m), f2(s, m, branch), f, 0.5 * f]));
    }
    Ok(csv)
}

pub fn soliton(
    m: f64,
    chi_tilde: f64,
    order: u8,
    branch: BranchArg,
    range: (f64, f64),
    samples: usize,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let csv = soliton_csv(m, chi_tilde, order, branch.into(), range, samples)?;
    match out_dir(out) {
        Some(dir) => {
            let params = SolitonParams {
                m,
                chi_tilde,
                order,
                branch,
                range: format!("{}:{}", range.0, range.1),
                samples,
            };
            let mut w = OutputWriter::create(dir, RunManifest::new("soliton", &params, 0)?)?;
            let path = w.write("soliton.csv", csv.as_bytes())?;
            w.finish()?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(Outcome::Passed)
}

/// Everything a dynamic run needs, resolved from the settings.
struct RunSetup {
    params: MaterialParams,
    v: f64,
    setup: TravelingWaveSetup,
    grid: Grid,
    config: SimConfig,
    options: InitOptions,
}

fn run_setup(settings: &Settings) -> anyhow::Result<RunSetup> {
    let (params, v, c1) = settings.material()?;
    let setup = traveling_constants(&params, v, c1)?;
    let m = setup.m()?;
    let half = 20.0 / m;
    let dz = match (settings.dz, settings.nz) {
        (Some(dz), _) => dz,
        (None, Some(nz)) if nz >= 2 => 2.0 * half / (nz - 1) as f64,
        _ => 0.01 / m,
    };
    if !(dz > 0.0) {
        bail!(UsageError(format!("dz must be positive, got {dz}")));
    }
    let grid = match settings.nz {
        Some(nz) => Grid::symmetric(dz, nz)?,
        None => Grid::covering(half, dz)?,
    };
    let t_end = settings.t_end.unwrap_or(5.0 / (m * v));
    let boundary = settings.boundary.map(Boundary::from).unwrap_or_default();
    let mut config = SimConfig::with_cfl(dz, t_end, boundary, settings.cfl.unwrap_or(0.5), &params);
    if let Some(dt) = settings.dt {
        config.dt = dt;
    }
    config.validate(&params)?;
    let options = InitOptions {
        order: settings.order.unwrap_or(1),
        branch: settings.branch.map(Branch::from).unwrap_or_default(),
        center: settings.center.unwrap_or(0.0),
    };
    Ok(RunSetup {
        params,
        v,
        setup,
        grid,
        config,
        options,
    })
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    params: MaterialParams,
    v: f64,
    m: f64,
    chi_tilde: f64,
    grid: Grid,
    config: SimConfig,
    options: InitOptions,
    steps: usize,
    /// Largest relative change of the conserved energy.
    energy_drift: f64,
    initial_residual_phi: Option<f64>,
    initial_residual_psi: Option<f64>,
    /// Peak trajectory, energy series and residual norms.
    observations: Vec<Observation>,
}

pub fn simulate(settings: &Settings, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let rs = run_setup(settings)?;
    let direction = settings.direction.unwrap_or(DirectionArg::Right);
    let init = init_from_soliton(&rs.setup, &rs.grid, direction.into(), rs.options)?;
    let steps = rs.config.steps();
    let stride = settings.snapshot_every.unwrap_or((steps / 10).max(1)).max(1);

    let mut csv = String::from("t,z,phi,psi\n");
    let mut snapshot = |s: &chiral_core::dynamics::PlanarState| {
        for i in 0..s.grid.n {
            csv.push_str(&csv_row(&[s.time, s.grid.z(i), s.phi[i], s.psi[i]]));
        }
    };
    snapshot(&init);
    let mut k = 0usize;
    let run = run_with(&init, &rs.params, &rs.config, (steps / 100).max(1), |s| {
        k += 1;
        if k % stride == 0 || k == steps {
            snapshot(s);
        }
    })?;

    let h0 = run.observations[0].energy.hamiltonian();
    let energy_drift = run
        .observations
        .iter()
        .map(|o| (o.energy.hamiltonian() - h0).abs() / h0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let summary = SimulationSummary {
        params: rs.params,
        v: rs.v,
        m: rs.setup.m()?,
        chi_tilde: rs.setup.chi_tilde,
        grid: rs.grid,
        config: rs.config,
        options: rs.options,
        steps: run.steps,
        energy_drift,
        initial_residual_phi: run.observations[0].residual_phi,
        initial_residual_psi: run.observations[0].residual_psi,
        observations: run.observations,
    };

    let dir = out_dir(out).unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR));
    let resolved = Settings {
        direction: Some(direction),
        snapshot_every: Some(stride),
        ..settings.resolved(&rs.params, rs.v)
    };
    let mut w = OutputWriter::create(dir.clone(), RunManifest::new("simulate", &resolved, 0)?)?;
    w.write("snapshots.csv", csv.as_bytes())?;
    w.write_json("summary.json", &summary)?;
    w.finish()?;
    println!(
        "{}",
        serde_json::json!({
            "out": dir,
            "steps": summary.steps,
            "nz": summary.grid.n,
            "energy_drift": summary.energy_drift,
            "initial_residual_phi": summary.initial_residual_phi,
            "initial_residual_psi": summary.initial_residual_psi,
        })
    );
    Ok(Outcome::Passed)
}

pub fn mirror(settings: &Settings, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let rs = run_setup(settings)?;
    let tol = settings.tol.unwrap_or(1e-4);
    let report = mirror_check(&rs.params, &rs.setup, &rs.grid, &rs.config, rs.options, tol)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let dir = out_dir(out).unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR));
    let resolved = Settings {
        tol: Some(tol),
        ..settings.resolved(&rs.params, rs.v)
    };
    let mut w = OutputWriter::create(dir, RunManifest::new("mirror-check", &resolved, 0)?)?;
    w.write_json("mirror.json", &report)?;
    w.finish()?;
    Ok(Outcome::from_bool(report.passed))
}
