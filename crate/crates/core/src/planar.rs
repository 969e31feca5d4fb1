//! Planar ansatz: rotations about the z axis by `φ(z,t)` and displacement
//! `ψ(z,t)` along it. Equations of motion, closed-form `B` components and the
//! traveling-wave reduction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energetics::{EnergyBreakdown, MaterialParams};
use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::tensor::{rotation_z, Mat3, Vec3};

/// Step for first derivatives of planar configurations without analytic
/// derivatives.
pub const FD_STEP_FIRST: f64 = 1e-5;
/// Step for second derivatives; larger than the first-derivative step to
/// keep the `ε/h²` rounding term below the truncation error.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// Values and derivatives of `φ` and `ψ` at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarJet {
    pub phi: f64,
    pub phi_z: f64,
    pub phi_zz: f64,
    pub phi_t: f64,
    pub phi_tt: f64,
    pub psi_z: f64,
    pub psi_zz: f64,
    pub psi_t: f64,
    pub psi_tt: f64,
}

impl PlanarJet {
    /// Jet of the mirrored configuration `φ#(z,t) = φ(-z,t)`,
    /// `ψ#(z,t) = -ψ(-z,t)`, given the jet of the original at `(-z, t)`.
    pub fn mirrored(&self) -> Self {
        Self {
            phi: self.phi,
            phi_z: -self.phi_z,
            phi_zz: self.phi_zz,
            phi_t: self.phi_t,
            phi_tt: self.phi_tt,
            psi_z: self.psi_z,
            psi_zz: -self.psi_zz,
            psi_t: -self.psi_t,
            psi_tt: -self.psi_tt,
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type JetFn = Arc<dyn Fn(f64, f64) -> PlanarJet + Send + Sync>;

/// A planar configuration `(φ(z,t), ψ(z,t))`.
#[derive(Clone)]
pub struct PlanarConfig {
    phi: ScalarFn,
    psi: ScalarFn,
    jet: Option<JetFn>,
}

impl std::fmt::Debug for PlanarConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlanarConfig")
            .field("analytic", &self.jet.is_some())
            .finish()
    }
}

fn d1(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = FD_STEP_FIRST;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn d2(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = FD_STEP_SECOND;
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

impl PlanarConfig {
    /// Configuration differentiated by central differences.
    pub fn new(
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Arc::new(phi),
            psi: Arc::new(psi),
            jet: None,
        }
    }

    /// Configuration with an analytic jet, e.g. a manufactured solution.
    pub fn analytic(
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        jet: impl Fn(f64, f64) -> PlanarJet + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Arc::new(phi),
            psi: Arc::new(psi),
            jet: Some(Arc::new(jet)),
        }
    }

    pub fn is_analytic(&self) -> bool {
        self.jet.is_some()
    }

    pub fn phi(&self, z: f64, t: f64) -> f64 {
        (self.phi)(z, t)
    }

    pub fn psi(&self, z: f64, t: f64) -> f64 {
        (self.psi)(z, t)
    }

    pub fn jet(&self, z: f64, t: f64) -> PlanarJet {
        if let Some(j) = &self.jet {
            return j(z, t);
        }
        let (phi, psi) = (&self.phi, &self.psi);
        let pz = |x: f64| phi(x, t);
        let pt = |x: f64| phi(z, x);
        let sz = |x: f64| psi(x, t);
        let st = |x: f64| psi(z, x);
        PlanarJet {
            phi: phi(z, t),
            phi_z: d1(&pz, z),
            phi_zz: d2(&pz, z),
            phi_t: d1(&pt, t),
            phi_tt: d2(&pt, t),
            psi_z: d1(&sz, z),
            psi_zz: d2(&sz, z),
            psi_t: d1(&st, t),
            psi_tt: d2(&st, t),
        }
    }

    /// The inverted configuration `φ#(z,t) = φ(-z,t)`, `ψ#(z,t) = -ψ(-z,t)`.
    pub fn mirrored(&self) -> Self {
        let (phi, psi) = (self.phi.clone(), self.psi.clone());
        let jet = self.jet.clone();
        Self {
            phi: Arc::new(move |z, t| phi(-z, t)),
            psi: Arc::new(move |z, t| -psi(-z, t)),
            jet: jet.map(|j| Arc::new(move |z: f64, t: f64| j(-z, t).mirrored()) as JetFn),
        }
    }

    /// The microrotation at time `t` as a field over space, with analytic
    /// partials built from the jet.
    pub fn rbar_field(&self, t: f64) -> MatrixField {
        let phi = self.phi.clone();
        let cfg = self.clone();
        MatrixField::with_partials(
            move |p| rotation_z(phi(p.z, t)),
            move |p, j| {
                if j == 2 {
                    let jet = cfg.jet(p.z, t);
                    rotation_z_derivative(jet.phi) * jet.phi_z
                } else {
                    Mat3::zeros()
                }
            },
        )
    }

    /// The deformation gradient at time `t` as a field over space.
    pub fn deformation_gradient_field(&self, t: f64) -> MatrixField {
        let cfg = self.clone();
        MatrixField::new(move |p| Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.0 + cfg.jet(p.z, t).psi_z)))
    }
}

/// `d/dφ R_z(φ)`.
pub fn rotation_z_derivative(phi: f64) -> Mat3 {
    let (s, c) = phi.sin_cos();
    Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// `d²/dφ² R_z(φ)`.
pub fn rotation_z_second_derivative(phi: f64) -> Mat3 {
    let (s, c) = phi.sin_cos();
    Mat3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0)
}

/// Second time derivative of the planar microrotation.
pub fn rbar_ddot(jet: &PlanarJet) -> Mat3 {
    rotation_z_second_derivative(jet.phi) * jet.phi_t * jet.phi_t
        + rotation_z_derivative(jet.phi) * jet.phi_tt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarLift {
    pub rbar: Mat3,
    pub f: Mat3,
    pub kbar: Mat3,
}

/// Microrotation, deformation gradient and dislocation density of the
/// planar ansatz at one point.
pub fn planar_lift(phi: f64, phi_z: f64, psi_z: f64) -> Result<PlanarLift> {
    let stretch = 1.0 + psi_z;
    if !(stretch > 0.0) {
        return Err(Error::InvertedElement { stretch });
    }
    Ok(PlanarLift {
        rbar: rotation_z(phi),
        f: Mat3::from_diagonal(&Vec3::new(1.0, 1.0, stretch)),
        kbar: Mat3::from_diagonal(&Vec3::new(phi_z, phi_z, 0.0)),
    })
}

/// `(κ₁ + 6κ₃)/3`, the stiffness of the φ wave operator.
pub fn rotational_stiffness(params: &MaterialParams) -> f64 {
    (params.kappa1 + 6.0 * params.kappa3) / 3.0
}

pub fn phi_residual(jet: &PlanarJet, params: &MaterialParams) -> f64 {
    let (s, c) = jet.phi.sin_cos();
    params.rho_rot * jet.phi_tt - rotational_stiffness(params) * jet.phi_zz
        - 3.0 * params.chi * jet.phi_z * jet.phi_zz
        + (params.lambda + params.mu) * (1.0 - c) * s
        - 0.5 * params.lambda * s * jet.psi_z
}

pub fn psi_residual(jet: &PlanarJet, params: &MaterialParams) -> f64 {
    params.rho * jet.psi_tt + 2.0 * params.lambda * jet.phi.sin() * jet.phi_z
        - (params.lambda + 2.0 * params.mu) * jet.psi_zz
}

pub fn eom_residual_phi(config: &PlanarConfig, params: &MaterialParams, z: f64, t: f64) -> f64 {
    phi_residual(&config.jet(z, t), params)
}

pub fn eom_residual_psi(config: &PlanarConfig, params: &MaterialParams, z: f64, t: f64) -> f64 {
    psi_residual(&config.jet(z, t), params)
}

/// Closed forms of `B₁₁` and `B₁₂` under the planar ansatz.
pub fn b_closed_form(jet: &PlanarJet, params: &MaterialParams) -> (f64, f64) {
    let MaterialParams {
        mu,
        lambda: la,
        kappa1: k1,
        kappa2: k2,
        kappa3: k3,
        chi,
        rho_rot,
        ..
    } = *params;
    let (s, c) = jet.phi.sin_cos();
    let pz2 = jet.phi_z * jet.phi_z;
    let curv = pz2 * (k1 - 3.0 * k2 + 24.0 * k3 + 18.0 * chi * jet.phi_z);
    let wave = -3.0 * rho_rot * jet.phi_tt + (k1 + 6.0 * k3 + 9.0 * chi * jet.phi_z) * jet.phi_zz;
    let kin = 6.0 * rho_rot * jet.phi_t * jet.phi_t;
    let b11 = -2.0 * (la + mu) + c / 3.0 * (3.0 * (2.0 * la + mu) - kin + curv) + la * jet.psi_z
        + 2.0 / 3.0 * s * wave;
    let b12 = s / 3.0 * (3.0 * mu + kin - curv) + 2.0 / 3.0 * c * wave;
    (b11, b12)
}

/// `B : ∂R̄/∂φ = -(2B₁₁ sin φ + 2B₁₂ cos φ)`.
pub fn b_pairing(jet: &PlanarJet, params: &MaterialParams) -> f64 {
    let (b11, b12) = b_closed_form(jet, params);
    let (s, c) = jet.phi.sin_cos();
    -(2.0 * b11 * s + 2.0 * b12 * c)
}

/// Ratio between `B : ∂R̄/∂φ` and the φ equation, read off from the
/// coefficients of `∂ttφ` in both.
pub fn b_route_normalization(params: &MaterialParams) -> f64 {
    let unit = PlanarJet {
        phi_tt: 1.0,
        ..Default::default()
    };
    let zero = PlanarJet::default();
    let b = b_pairing(&unit, params) - b_pairing(&zero, params);
    let direct = phi_residual(&unit, params) - phi_residual(&zero, params);
    b / direct
}

/// The φ equation obtained from the closed-form `B` components.
pub fn phi_residual_via_b(jet: &PlanarJet, params: &MaterialParams) -> f64 {
    b_pairing(jet, params) / b_route_normalization(params)
}

/// Densities of the four energy terms restricted to the planar ansatz.
pub fn planar_densities(jet: &PlanarJet, params: &MaterialParams) -> EnergyBreakdown {
    let c1 = jet.phi.cos() - 1.0;
    let e = jet.psi_z;
    let elastic = params.mu * (2.0 * c1 * c1 + e * e) + 0.5 * params.lambda * (2.0 * c1 + e).powi(2);
    let curvature = 2.0 * rotational_stiffness(params) * jet.phi_z * jet.phi_z;
    let chiral = 2.0 * params.chi * jet.phi_z.powi(3);
    let kinetic = 0.5 * params.rho * jet.psi_t * jet.psi_t + 2.0 * params.rho_rot * jet.phi_t * jet.phi_t;
    EnergyBreakdown::new(elastic, curvature, chiral, kinetic)
}

/// Constants of the traveling-wave reduction `φ = f(z - vt)`,
/// `ψ = g(z - vt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelingWaveSetup {
    pub v: f64,
    pub c1: f64,
    pub c2: f64,
    pub m_sq: f64,
    /// `m²` evaluated with the closed form as printed; equal to `m_sq`.
    pub m_sq_printed: f64,
    /// `χ̃` that makes the normalized first integral an identity.
    pub chi_tilde: f64,
    /// `χ̃` evaluated with the closed form as printed.
    pub chi_tilde_printed: f64,
    /// The chiral modulus `χ` the setup was built from.
    pub chi: f64,
    /// Coefficient of `f''`.
    pub coeff_fpp: f64,
    /// Coefficient of `f' f''`.
    pub coeff_cubic: f64,
    /// Coefficient of `sin f`.
    pub coeff_sin: f64,
    /// Coefficient of `sin 2f`.
    pub coeff_sin2: f64,
    /// `2λ/(ρv² - (λ+2μ))`, so that `g' = strain_coeff·cos f + C₁`.
    pub strain_coeff: f64,
    pub soliton_regime: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TravelingWaveSetup {
    pub fn m(&self) -> Result<f64> {
        if self.m_sq > 0.0 {
            Ok(self.m_sq.sqrt())
        } else {
            Err(Error::SingularParameter(format!(
                "no soliton: m^2 = {} is not positive",
                self.m_sq
            )))
        }
    }

    /// Strain `g'` for a given rotation angle.
    pub fn strain(&self, f: f64) -> f64 {
        self.strain_coeff * f.cos() + self.c1
    }

    /// The bracket `(λ+μ) + λ²/(ρv² - λ - 2μ)`.
    fn d(&self) -> f64 {
        -2.0 * self.coeff_sin2
    }
}

fn nearly_zero(x: f64, scale: f64) -> bool {
    x.abs() <= 1e-12 * scale.abs().max(1.0)
}

/// Default first integration constant `C₁ = 2(λ+μ)/λ`, which removes the
/// `sin f` term.
pub fn default_c1(params: &MaterialParams) -> Result<f64> {
    if params.lambda == 0.0 {
        return Err(Error::SingularParameter("default C1 needs lambda != 0".into()));
    }
    Ok(2.0 * (params.lambda + params.mu) / params.lambda)
}

/// `m²` from the closed form as printed.
pub fn m_sq_printed_form(params: &MaterialParams, v: f64) -> f64 {
    let MaterialParams {
        mu,
        lambda: la,
        kappa1: k1,
        kappa3: k3,
        rho,
        rho_rot,
        ..
    } = *params;
    let v2 = v * v;
    (3.0 * v2 * rho * (la + mu) - 3.0 * mu * (3.0 * la + 2.0 * mu))
        / ((la + 2.0 * mu - v2 * rho) * (k1 + 6.0 * k3 - 3.0 * v2 * rho_rot))
}

pub fn traveling_constants(params: &MaterialParams, v: f64, c1: Option<f64>) -> Result<TravelingWaveSetup> {
    params.validate()?;
    if !v.is_finite() {
        return Err(Error::InvalidInput("wave speed must be finite".into()));
    }
    let MaterialParams {
        mu,
        lambda: la,
        kappa1: k1,
        kappa3: k3,
        chi,
        rho,
        rho_rot,
        ..
    } = *params;
    let v2 = v * v;
    let resonance = rho * v2 - (la + 2.0 * mu);
    if nearly_zero(resonance, la + 2.0 * mu) {
        return Err(Error::SingularParameter(format!(
            "rho v^2 = lambda + 2 mu = {}: resonance with the elastic wave",
            la + 2.0 * mu
        )));
    }
    let norm = 3.0 * rho_rot * v2 - (k1 + 6.0 * k3);
    if nearly_zero(norm, k1 + 6.0 * k3) {
        return Err(Error::SingularParameter(
            "3 rho_rot v^2 = kappa1 + 6 kappa3: degenerate normalization".into(),
        ));
    }
    let c1 = match c1 {
        Some(c) => c,
        None => default_c1(params)?,
    };
    let a = rho_rot * v2 - (k1 + 6.0 * k3) / 3.0;
    let b = (la + mu) - 0.5 * la * c1;
    let d = (la + mu) + la * la / resonance;
    let m_sq = d / a;
    let mut warnings = Vec::new();
    if b != 0.0 {
        warnings.push(format!(
            "C1 = {c1} leaves a sin(f) term of weight {b}; the normalized first integral assumes it vanishes"
        ));
    }
    let soliton_regime = m_sq > 0.0;
    if !soliton_regime {
        warnings.push(format!("m^2 = {m_sq} <= 0: no soliton solution"));
    }
    Ok(TravelingWaveSetup {
        v,
        c1,
        c2: d / 4.0,
        m_sq,
        m_sq_printed: m_sq_printed_form(params, v),
        chi_tilde: chi / a,
        chi_tilde_printed: 3.0 * chi / (rho_rot * v2 - (k1 + 6.0 * k3)),
        chi,
        coeff_fpp: a,
        coeff_cubic: -3.0 * chi,
        coeff_sin: b,
        coeff_sin2: -0.5 * d,
        strain_coeff: 2.0 * la / resonance,
        soliton_regime,
        warnings,
    })
}

/// `ρ_rot v² - (κ₁+6κ₃)/3`, the coefficient of `f''`.
fn fpp_coefficient(params: &MaterialParams, v: f64) -> f64 {
    params.rho_rot * v * v - rotational_stiffness(params)
}

/// The chiral modulus that produces a given `χ̃` at speed `v`.
pub fn chi_for_chi_tilde(params: &MaterialParams, v: f64, chi_tilde: f64) -> Result<f64> {
    let a = fpp_coefficient(params, v);
    if nearly_zero(a, rotational_stiffness(params)) {
        return Err(Error::SingularParameter(
            "3 rho_rot v^2 = kappa1 + 6 kappa3: chi~ is undefined".into(),
        ));
    }
    Ok(chi_tilde * a)
}

/// The `κ₁` for which the soliton at speed `v` has inverse width `m`,
/// other moduli fixed. `κ₂` and `χ` do not enter `m`.
pub fn kappa1_for_m(params: &MaterialParams, v: f64, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!("m must be positive, got {m}")));
    }
    let resonance = params.rho * v * v - (params.lambda + 2.0 * params.mu);
    if nearly_zero(resonance, params.lambda + 2.0 * params.mu) {
        return Err(Error::SingularParameter("rho v^2 = lambda + 2 mu".into()));
    }
    let d = (params.lambda + params.mu) + params.lambda * params.lambda / resonance;
    Ok(3.0 * (params.rho_rot * v * v - d / (m * m)) - 6.0 * params.kappa3)
}

/// `(F')² - χ̃(F')³ - 2m²(1 - cos F)` for `F = 2f`.
pub fn first_integral_residual(big_f: f64, big_fp: f64, setup: &TravelingWaveSetup) -> f64 {
    big_fp * big_fp - setup.chi_tilde * big_fp.powi(3) - 2.0 * setup.m_sq * (1.0 - big_f.cos())
}

/// Left-hand side of the unnormalized first integral, minus `C₂`.
pub fn first_integral(f: f64, fp: f64, setup: &TravelingWaveSetup) -> f64 {
    0.5 * setup.coeff_fpp * fp * fp - setup.chi * fp.powi(3) - setup.coeff_sin * f.cos()
        + 0.25 * setup.d() * (2.0 * f).cos()
        - setup.c2
}

/// The reduced traveling-wave equation for `f(s)`.
pub fn traveling_residual(f: f64, fp: f64, fpp: f64, setup: &TravelingWaveSetup) -> f64 {
    setup.coeff_fpp * fpp + setup.coeff_cubic * fp * fpp + setup.coeff_sin * f.sin()
        + setup.coeff_sin2 * (2.0 * f).sin()
}

/// Difference between the scaled unnormalized first integral and the
/// normalized one at `F = 2f`, `F' = 2f'`; vanishes identically when the
/// normalization constants are consistent and `C₁` takes its default value.
pub fn normalization_defect(f: f64, fp: f64, setup: &TravelingWaveSetup) -> f64 {
    8.0 / setup.coeff_fpp * first_integral(f, fp, setup) - first_integral_residual(2.0 * f, 2.0 * fp, setup)
}

/// The same defect evaluated with the printed `χ̃`.
pub fn normalization_defect_printed(f: f64, fp: f64, setup: &TravelingWaveSetup) -> f64 {
    let printed = TravelingWaveSetup {
        chi_tilde: setup.chi_tilde_printed,
        ..setup.clone()
    };
    normalization_defect(f, fp, &printed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> MaterialParams {
        MaterialParams {
            mu: 1.0,
            lambda: 2.0,
            kappa1: 3.4,
            kappa2: 0.5,
            kappa3: 1.0,
            chi: 0.07,
            rho: 1.0,
            rho_rot: 1.0,
            ..Default::default()
        }
    }

    fn random_jet(rng: &mut ChaCha8Rng) -> PlanarJet {
        let mut r = || rng.gen_range(-2.0..2.0);
        PlanarJet {
            phi: r(),
            phi_z: r(),
            phi_zz: r(),
            phi_t: r(),
            phi_tt: r(),
            psi_z: 0.5 * r(),
            psi_zz: r(),
            psi_t: r(),
            psi_tt: r(),
        }
    }

    #[test]
    fn lift_examples() {
        let l = planar_lift(0.0, 0.0, 0.0).unwrap();
        assert_eq!(l.rbar, Mat3::identity());
        assert_eq!(l.f, Mat3::identity());
        assert_eq!(l.kbar, Mat3::zeros());
        let l = planar_lift(std::f64::consts::FRAC_PI_2, 0.0, 0.0).unwrap();
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((l.rbar - expected).norm() < 1e-15);
        let l = planar_lift(0.3, 0.8, 0.1).unwrap();
        assert_eq!(l.kbar, Mat3::from_diagonal(&Vec3::new(0.8, 0.8, 0.0)));
        assert!(matches!(planar_lift(0.0, 0.0, -1.0), Err(Error::InvertedElement { .. })));
    }

    #[test]
    fn trivial_residuals() {
        let p = params();
        let zero = PlanarJet::default();
        assert_eq!(phi_residual(&zero, &p), 0.0);
        assert_eq!(psi_residual(&zero, &p), 0.0);
        let pi = PlanarJet {
            phi: std::f64::consts::PI,
            ..Default::default()
        };
        assert!(phi_residual(&pi, &p).abs() < 1e-15);
    }

    #[test]
    fn linear_elastic_wave_solves_psi_equation() {
        let p = params();
        let c = ((p.lambda + 2.0 * p.mu) / p.rho).sqrt();
        let cfg = PlanarConfig::analytic(
            |_, _| 0.0,
            move |z, t| (z - c * t).sin(),
            move |z, t| {
                let (s, co) = (z - c * t).sin_cos();
                PlanarJet {
                    psi_z: co,
                    psi_zz: -s,
                    psi_t: -c * co,
                    psi_tt: -c * c * s,
                    ..Default::default()
                }
            },
        );
        for k in 0..20 {
            let z = -3.0 + 0.3 * k as f64;
            assert!(eom_residual_psi(&cfg, &p, z, 0.7).abs() < 1e-8);
        }
        // the difference-quotient path agrees to its own accuracy
        let fd = PlanarConfig::new(|_, _| 0.0, move |z, t| (z - c * t).sin());
        assert!(eom_residual_psi(&fd, &p, 0.4, 0.7).abs() < 1e-5);
    }

    #[test]
    fn b_route_matches_direct_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params();
        assert!((b_route_normalization(&p) - 4.0).abs() < 1e-12);
        for _ in 0..200 {
            let jet = random_jet(&mut rng);
            let direct = phi_residual(&jet, &p);
            let via_b = phi_residual_via_b(&jet, &p);
            assert!((direct - via_b).abs() < 1e-12 * (1.0 + direct.abs()) * 50.0);
        }
    }

    #[test]
    fn kappa2_cancels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let jet = random_jet(&mut rng);
            let base = phi_residual_via_b(&jet, &params());
            for k2 in [-10.0, -3.0, 0.0, 4.5, 10.0] {
                let p = MaterialParams { kappa2: k2, ..params() };
                assert!((phi_residual_via_b(&jet, &p) - base).abs() < 1e-10);
                assert_eq!(phi_residual(&jet, &p), phi_residual(&jet, &params()));
            }
        }
    }

    #[test]
    fn mirror_property_of_phi_equation() {
        let p = params();
        let cfg = PlanarConfig::new(
            |z, t| 0.7 * (z - 0.4 * t).sin() + 0.2 * (2.0 * z).cos() + 0.1 * z,
            |z, t| 0.05 * (1.3 * z + t).sin() + 0.02 * z * z,
        );
        let mirrored = cfg.mirrored();
        let p_flip = p.with_chi(-p.chi);
        for k in 0..25 {
            let z = -2.0 + 0.17 * k as f64;
            let lhs = eom_residual_phi(&mirrored, &p_flip, z, 0.3);
            let rhs = eom_residual_phi(&cfg, &p, -z, 0.3);
            assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn planar_kinetic_density_from_rates() {
        let p = params();
        let jet = PlanarJet {
            phi: 0.4,
            phi_t: 0.3,
            psi_t: -0.6,
            ..Default::default()
        };
        let rdot = rotation_z_derivative(jet.phi) * jet.phi_t;
        let direct = crate::energetics::kinetic_density(&Vec3::new(0.0, 0.0, jet.psi_t), &rdot, &p);
        assert!((planar_densities(&jet, &p).kinetic - direct).abs() < 1e-15);
    }

    #[test]
    fn planar_densities_match_general_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params();
        for _ in 0..50 {
            let jet = random_jet(&mut rng);
            let lift = planar_lift(jet.phi, jet.phi_z, jet.psi_z).unwrap();
            let general = crate::energetics::densities(
                &lift.f,
                &lift.rbar,
                &lift.kbar,
                &Vec3::new(0.0, 0.0, jet.psi_t),
                &(rotation_z_derivative(jet.phi) * jet.phi_t),
                &p,
            )
            .unwrap();
            let planar = planar_densities(&jet, &p);
            assert!((general.elastic - planar.elastic).abs() < 1e-12);
            assert!((general.curvature - planar.curvature).abs() < 1e-12);
            assert!((general.chiral - planar.chiral).abs() < 1e-12);
            assert!((general.kinetic - planar.kinetic).abs() < 1e-12);
        }
    }

    #[test]
    fn default_c1_and_sin_coefficient() {
        let p = MaterialParams {
            lambda: 1.0,
            mu: 1.0,
            ..Default::default()
        };
        assert_eq!(default_c1(&p).unwrap(), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let p = MaterialParams {
                lambda: rng.gen_range(0.1..5.0),
                mu: rng.gen_range(0.1..5.0),
                ..Default::default()
            };
            let s = traveling_constants(&p, 0.3, None).unwrap();
            assert!(s.coeff_sin.abs() < 1e-12);
        }
    }

    #[test]
    fn example_parameter_set() {
        let p = MaterialParams {
            lambda: 1.0,
            mu: 1.0,
            rho: 1.0,
            rho_rot: 1.0,
            kappa1: 3.0,
            kappa2: 0.0,
            kappa3: 1.0,
            chi: 0.1,
            ..Default::default()
        };
        let s = traveling_constants(&p, 2.0, None).unwrap();
        assert_eq!(s.c1, 4.0);
        // d = 2 + 1/(4-3) = 3, a = 4 - 3 = 1
        assert!((s.m_sq - 3.0).abs() < 1e-14);
        assert!((s.m_sq_printed - 3.0).abs() < 1e-14);
        assert!((s.chi_tilde - 0.1).abs() < 1e-15);
        assert!((s.chi_tilde_printed + 0.06).abs() < 1e-15);
        assert!((s.c2 - 0.75).abs() < 1e-15);
        assert!((s.strain(0.0) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn resonance_and_degenerate_normalization() {
        let p = params();
        let v_res = ((p.lambda + 2.0 * p.mu) / p.rho).sqrt();
        assert!(matches!(
            traveling_constants(&p, v_res, None),
            Err(Error::SingularParameter(_))
        ));
        let v_deg = ((p.kappa1 + 6.0 * p.kappa3) / (3.0 * p.rho_rot)).sqrt();
        assert!(matches!(
            traveling_constants(&p, v_deg, None),
            Err(Error::SingularParameter(_))
        ));
    }

    #[test]
    fn normalization_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = traveling_constants(&params(), 2.8f64.sqrt(), None).unwrap();
        assert!((s.m_sq - 1.0).abs() < 1e-12);
        for _ in 0..100 {
            let (f, fp) = (rng.gen_range(-4.0..4.0), rng.gen_range(-2.0..2.0));
            assert!(normalization_defect(f, fp, &s).abs() < 1e-11);
        }
        // the printed normalization is off whenever χ f'³ ≠ 0
        assert!(normalization_defect_printed(0.3, 1.0, &s).abs() > 1e-3);
    }

    #[test]
    fn first_integral_vanishes_on_kink() {
        let mut s = traveling_constants(&params(), 2.8f64.sqrt(), None).unwrap();
        s.chi_tilde = 0.0;
        let m = s.m().unwrap();
        for k in 0..41 {
            let x = -10.0 + 0.5 * k as f64;
            let big_f = 4.0 * (m * x).exp().atan();
            let big_fp = 2.0 * m / (m * x).cosh();
            assert!(first_integral_residual(big_f, big_fp, &s).abs() < 1e-10);
        }
        assert_eq!(first_integral_residual(0.0, 0.0, &s), 0.0);
    }

    #[test]
    fn inverse_parameter_maps() {
        let p = params();
        let v = 1.3;
        let chi = chi_for_chi_tilde(&p, v, 0.05).unwrap();
        let s = traveling_constants(&p.with_chi(chi), v, None).unwrap();
        assert!((s.chi_tilde - 0.05).abs() < 1e-14);
        let k1 = kappa1_for_m(&p, v, 1.7).unwrap();
        let s = traveling_constants(&MaterialParams { kappa1: k1, ..p }, v, None).unwrap();
        assert!((s.m().unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn first_integral_derivative() {
        let s = traveling_constants(&params(), 2.8f64.sqrt(), None).unwrap();
        // arbitrary smooth trajectory
        let f = |x: f64| 1.2 * (0.7 * x).sin() + 0.3 * x;
        let fp = |x: f64| 0.84 * (0.7 * x).cos() + 0.3;
        let fpp = |x: f64| -0.588 * (0.7 * x).sin();
        let i = |x: f64| first_integral(f(x), fp(x), &s);
        let h = 1e-3;
        for k in 0..30 {
            let x = -3.0 + 0.2 * k as f64;
            let di = (-i(x + 2.0 * h) + 8.0 * i(x + h) - 8.0 * i(x - h) + i(x - 2.0 * h)) / (12.0 * h);
            let rhs = fp(x) * traveling_residual(f(x), fp(x), fpp(x), &s);
            assert!((di - rhs).abs() < 1e-8, "{di} vs {rhs}");
        }
    }
}
