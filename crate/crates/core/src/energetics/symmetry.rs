//! Executable objectivity, hemitropy and chirality predicates for the energy
//! terms, evaluated on random smooth fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{dislocation_density, gradient, MatrixField, Point, VectorField};
use crate::random::{random_deformation, random_rotation_field};
use crate::tensor::{random_rotation, sym, Mat3};

use super::{chiral_density, curvature_density, elastic_density, ChiSignConvention, MaterialParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyTerm {
    Elastic,
    Curvature,
    Chiral,
}

impl EnergyTerm {
    pub const ALL: [EnergyTerm; 3] = [EnergyTerm::Elastic, EnergyTerm::Curvature, EnergyTerm::Chiral];
}

/// Whether the random fields carry analytic partials or are differentiated
/// numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    FiniteDifference,
}

impl DerivativeMode {
    /// Default invariance tolerance for this derivative mode.
    pub fn invariance_tolerance(self) -> f64 {
        match self {
            DerivativeMode::Analytic => 1e-8,
            DerivativeMode::FiniteDifference => 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub check: String,
    pub term: EnergyTerm,
    pub trials: usize,
    pub derivatives: DerivativeMode,
    /// `+1` if the term should be invariant, `-1` if it should change sign.
    pub expected_sign: f64,
    /// Maximum of `|W' - sign·W| / max(1, |W|)` over the trials.
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_sign_convention: Option<ChiSignConvention>,
    /// Sign relating the total chiral energy of the inverted system to the
    /// original once the convention for `χ#` is applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverted_system_sign: Option<f64>,
}

struct Config {
    phi: VectorField,
    rbar: MatrixField,
    point: Point,
}

fn random_config(rng: &mut ChaCha8Rng, mode: DerivativeMode) -> Config {
    let q = random_rotation(rng);
    let s = sym(&Mat3::from_fn(|_, _| rng.gen_range(-0.2..0.2)));
    let phi = random_deformation(rng, q * (Mat3::identity() + s), 0.15, 2);
    let rbar = random_rotation_field(rng, 1.0, 2);
    let point = Point::from_fn(|_, _| rng.gen_range(-2.0..2.0));
    match mode {
        DerivativeMode::Analytic => Config { phi, rbar, point },
        DerivativeMode::FiniteDifference => Config {
            phi: phi.without_partials(),
            rbar: rbar.without_partials(),
            point,
        },
    }
}

fn term_value(
    term: EnergyTerm,
    phi: &VectorField,
    rbar: &MatrixField,
    p: &Point,
    params: &MaterialParams,
) -> Result<f64> {
    match term {
        EnergyTerm::Elastic => elastic_density(&gradient(phi, p)?, &rbar.eval(p)?, params),
        EnergyTerm::Curvature => Ok(curvature_density(&dislocation_density(rbar, p)?, params)),
        EnergyTerm::Chiral => Ok(chiral_density(&dislocation_density(rbar, p)?, params)),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_check(
    name: &str,
    term: EnergyTerm,
    params: &MaterialParams,
    trials: usize,
    tol: f64,
    seed: u64,
    mode: DerivativeMode,
    expected_sign: f64,
    transform: impl Fn(&mut ChaCha8Rng, &Config) -> (VectorField, MatrixField, Point),
) -> Result<SymmetryReport> {
    assert!(trials >= 1, "at least one trial is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = 0.0f64;
    for _ in 0..trials {
        let cfg = random_config(&mut rng, mode);
        let (phi2, rbar2, ref_point) = transform(&mut rng, &cfg);
        let w = term_value(term, &cfg.phi, &cfg.rbar, &ref_point, params)?;
        let w2 = term_value(term, &phi2, &rbar2, &cfg.point, params)?;
        let violation = (w2 - expected_sign * w).abs() / w.abs().max(1.0);
        max_violation = max_violation.max(violation);
    }
    Ok(SymmetryReport {
        check: name.to_string(),
        term,
        trials,
        derivatives: mode,
        expected_sign,
        max_violation,
        tolerance: tol,
        passed: max_violation < tol,
        chi_sign_convention: None,
        inverted_system_sign: None,
    })
}

/// Invariance under `(F, R̄) -> (QF, QR̄)` for constant `Q ∈ SO(3)`.
pub fn check_objectivity(
    term: EnergyTerm,
    params: &MaterialParams,
    trials: usize,
    tol: f64,
    seed: u64,
    mode: DerivativeMode,
) -> Result<SymmetryReport> {
    run_check("objectivity", term, params, trials, tol, seed, mode, 1.0, |rng, cfg| {
        let q = random_rotation(rng);
        (cfg.phi.left_mul(q), cfg.rbar.left_mul(q), cfg.point)
    })
}

/// Invariance under a rotation `Q₂` of the reference configuration, which
/// acts on the right: `F -> F Q₂`, `R̄ -> R̄ Q₂`, `K̄ -> Q₂ᵀ K̄ Q₂`.
pub fn check_hemitropy(
    term: EnergyTerm,
    params: &MaterialParams,
    trials: usize,
    tol: f64,
    seed: u64,
    mode: DerivativeMode,
) -> Result<SymmetryReport> {
    run_check("hemitropy", term, params, trials, tol, seed, mode, 1.0, |rng, cfg| {
        let q2 = random_rotation(rng);
        (
            cfg.phi.reference_rotated(q2),
            cfg.rbar.reference_rotated(q2),
            q2 * cfg.point,
        )
    })
}

/// Behaviour under coordinate inversion at fixed moduli: the deformation is
/// pulled back, `φ#(p) = φ(-p)`, and the microrotation transforms like the
/// polar rotation, `R̄#(p) = -R̄(-p)`. The chiral term must change sign;
/// the elastic and curvature terms must not.
pub fn check_chirality(
    term: EnergyTerm,
    params: &MaterialParams,
    trials: usize,
    tol: f64,
    seed: u64,
    mode: DerivativeMode,
) -> Result<SymmetryReport> {
    let expected = if term == EnergyTerm::Chiral { -1.0 } else { 1.0 };
    let mut report = run_check("chirality", term, params, trials, tol, seed, mode, expected, |_, cfg| {
        (cfg.phi.inverted(), cfg.rbar.inverted_with_sign(), -cfg.point)
    })?;
    if term == EnergyTerm::Chiral {
        report.chi_sign_convention = Some(params.chi_sign_convention);
        let ratio = if params.chi == 0.0 { 1.0 } else { params.chi_inverted() / params.chi };
        report.inverted_system_sign = Some(-ratio);
    }
    Ok(report)
}
