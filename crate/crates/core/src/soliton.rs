//! Kink and antikink solutions of the traveling-wave equation
//! `(F')² - χ̃(F')³ = 2m²(1 - cos F)` with `F = 2φ` and `s = z - vt`:
//! the perturbation series in `χ̃` up to second order, and a numerically
//! exact profile from the separable first-order form.

use std::cell::RefCell;
use std::f64::consts::PI;

use ode_solvers::continuous_output_model::ContinuousOutputModel;
use ode_solvers::{Dopri5, OutputType, System, Vector1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planar::TravelingWaveSetup;

/// Which of the two χ̃ = 0 solutions through `F(0) = π` is followed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `F` rises from 0 to 2π.
    Kink,
    /// `F` falls from 2π to 0.
    Antikink,
    /// Kink for `s < 0`, antikink for `s > 0`: a pulse returning to 0 on
    /// both sides.
    #[default]
    Piecewise,
}

impl Branch {
    /// `+1` where the profile follows the kink, `-1` on the antikink side.
    pub fn sigma(self, s: f64) -> f64 {
        match self {
            Branch::Kink => 1.0,
            Branch::Antikink => -1.0,
            Branch::Piecewise => {
                if s > 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kink" => Ok(Branch::Kink),
            "antikink" => Ok(Branch::Antikink),
            "piecewise" => Ok(Branch::Piecewise),
            other => Err(Error::InvalidInput(format!(
                "unknown branch '{other}' (expected kink, antikink or piecewise)"
            ))),
        }
    }
}

/// Derivatives `F₀, F₀', F₀'', F₀'''` of the zeroth-order solution.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Zeroth {
    f: f64,
    d1: f64,
    d2: f64,
    d3: f64,
}

fn zeroth(s: f64, m: f64, sigma: f64) -> Zeroth {
    let x = m * s;
    let sech = 1.0 / x.cosh();
    let tanh = x.tanh();
    Zeroth {
        f: 4.0 * (sigma * x).exp().atan(),
        d1: 2.0 * sigma * m * sech,
        d2: -2.0 * sigma * m * m * sech * tanh,
        d3: -2.0 * sigma * m.powi(3) * sech * (1.0 - 2.0 * tanh * tanh),
    }
}

fn check_m(m: f64) {
    debug_assert!(m > 0.0 && m.is_finite(), "m must be positive, got {m}");
}

/// `F₀`: `4 atan(e^{±ms})` according to the branch; `π` at `s = 0`.
pub fn f0(s: f64, m: f64, branch: Branch) -> f64 {
    check_m(m);
    zeroth(s, m, branch.sigma(s)).f
}

/// `F₀'`. On the piecewise branch the one-sided values at `s = 0` are
/// `±2m`; the left value is returned there.
pub fn f0_d1(s: f64, m: f64, branch: Branch) -> f64 {
    zeroth(s, m, branch.sigma(s)).d1
}

pub fn f0_d2(s: f64, m: f64, branch: Branch) -> f64 {
    zeroth(s, m, branch.sigma(s)).d2
}

/// First-order correction `½F₀'(F₀ - π) = m sech(ms)(4 atan(e^{ms}) - π)`.
/// The same function on every branch.
pub fn f1(s: f64, m: f64) -> f64 {
    check_m(m);
    let z = zeroth(s, m, 1.0);
    0.5 * z.d1 * (z.f - PI)
}

pub fn f1_d1(s: f64, m: f64) -> f64 {
    let z = zeroth(s, m, 1.0);
    0.5 * (z.d2 * (z.f - PI) + z.d1 * z.d1)
}

/// Second-order correction, in the expanded form
/// `⅛F₀''[(F₀ - π)² - 12] + ¼F₀'²(F₀ - π)`, which has no `0/0` at `s = 0`.
/// Odd under kink ↔ antikink.
pub fn f2(s: f64, m: f64, branch: Branch) -> f64 {
    check_m(m);
    let z = zeroth(s, m, branch.sigma(s));
    let g = z.f - PI;
    0.125 * z.d2 * (g * g - 12.0) + 0.25 * z.d1 * z.d1 * g
}

pub fn f2_d1(s: f64, m: f64, branch: Branch) -> f64 {
    let z = zeroth(s, m, branch.sigma(s));
    let g = z.f - PI;
    0.125 * z.d3 * (g * g - 12.0) + 0.75 * z.d1 * z.d2 * g + 0.25 * z.d1.powi(3)
}

/// The truncated series `F₀ + χ̃F₁ + χ̃²F₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeSolution {
    pub m: f64,
    pub chi_tilde: f64,
    pub order: u8,
    pub branch: Branch,
}

impl PerturbativeSolution {
    pub fn new(m: f64, chi_tilde: f64, order: u8, branch: Branch) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("m must be positive, got {m}")));
        }
        if order > 2 {
            return Err(Error::InvalidInput(format!("order must be 0, 1 or 2, got {order}")));
        }
        if !chi_tilde.is_finite() {
            return Err(Error::InvalidInput("chi_tilde must be finite".into()));
        }
        Ok(Self {
            m,
            chi_tilde,
            order,
            branch,
        })
    }

    pub fn from_setup(setup: &TravelingWaveSetup, order: u8, branch: Branch) -> Result<Self> {
        Self::new(setup.m()?, setup.chi_tilde, order, branch)
    }

    /// `F(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        let c = self.chi_tilde;
        let mut f = f0(s, self.m, self.branch);
        if self.order >= 1 {
            f += c * f1(s, self.m);
        }
        if self.order >= 2 {
            f += c * c * f2(s, self.m, self.branch);
        }
        f
    }

    /// `F'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        let c = self.chi_tilde;
        let mut d = f0_d1(s, self.m, self.branch);
        if self.order >= 1 {
            d += c * f1_d1(s, self.m);
        }
        if self.order >= 2 {
            d += c * c * f2_d1(s, self.m, self.branch);
        }
        d
    }

    /// Rotation angle `φ = F/2` at `(z, t)` for a wave moving at `v`.
    pub fn phi(&self, z: f64, t: f64, v: f64) -> f64 {
        0.5 * self.eval(z - v * t)
    }
}

/// `φ(z,t) = ½F(z - vt)` from the truncated series.
pub fn phi_perturbative(z: f64, t: f64, setup: &TravelingWaveSetup, order: u8, branch: Branch) -> Result<f64> {
    Ok(PerturbativeSolution::from_setup(setup, order, branch)?.phi(z, t, setup.v))
}

/// Strain `∂zψ = g'` slaved to the rotation through the integrated ψ
/// equation, evaluated for the angle `phi(z, t)`.
pub fn psi_strain(z: f64, t: f64, setup: &TravelingWaveSetup, phi: impl Fn(f64, f64) -> f64) -> Result<f64> {
    if !setup.strain_coeff.is_finite() {
        return Err(Error::SingularParameter(
            "rho v^2 = lambda + 2 mu: the strain is undefined".into(),
        ));
    }
    Ok(setup.strain(phi(z, t)))
}

/// `φ(s₀ + δ) - φ(s₀ - δ)` about the peak `s₀` of the perturbative profile;
/// zero for an even profile.
pub fn asymmetry(solution: &PerturbativeSolution, delta: f64) -> f64 {
    // the peak is where F' changes sign; bracket it around s = 0
    let (mut lo, mut hi) = (-3.0 / solution.m, 3.0 / solution.m);
    let d = |s: f64| solution.derivative(s);
    if d(lo) * d(hi) > 0.0 {
        return 0.5 * (solution.eval(delta) - solution.eval(-delta));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(lo) * d(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);
    0.5 * (solution.eval(s0 + delta) - solution.eval(s0 - delta))
}

/// Default relative tolerance of the exact profile integration.
pub const EXACT_RTOL: f64 = 1e-12;
/// Default absolute tolerance of the exact profile integration.
pub const EXACT_ATOL: f64 = 1e-14;

/// One sample of the exact profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub f: f64,
    pub fp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactProfile {
    pub m: f64,
    pub chi_tilde: f64,
    pub branch: Branch,
    pub rtol: f64,
    pub atol: f64,
    pub samples: Vec<ProfileSample>,
}

impl ExactProfile {
    /// Largest `|F(s) - other(s)|` over the samples.
    pub fn max_abs_error(&self, other: impl Fn(f64) -> f64) -> f64 {
        self.samples.iter().map(|p| (p.f - other(p.s)).abs()).fold(0.0, f64::max)
    }

    /// Largest residual of the cubic first integral over the samples.
    pub fn max_first_integral_residual(&self) -> f64 {
        let (m2, c) = (self.m * self.m, self.chi_tilde);
        self.samples
            .iter()
            .map(|p| (p.fp * p.fp - c * p.fp.powi(3) - 2.0 * m2 * (1.0 - p.f.cos())).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of solving the cubic for `F'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeRoot {
    Found(f64),
    /// The tracked root has merged with its neighbour; `r_max` is the
    /// largest right-hand side that still has it.
    Collided { r: f64, r_max: f64 },
}

/// Solves `X² - χ̃X³ = 2m²(1 - cos F)` for the root continuously connected
/// to the χ̃ = 0 slope `σ·2m|sin(F/2)|`.
///
/// With `Y = σX` and `c = σχ̃` the tracked root is the smallest
/// non-negative solution of `Y² - cY³ = R`. For `c ≤ 0` it lies in
/// `[0, √R]`; for `c > 0` in `[√R, 2/(3c)]`, where the left side is
/// increasing, and it disappears once `R > 4/(27c²)`.
pub fn slope_root(big_f: f64, m: f64, chi_tilde: f64, sigma: f64) -> SlopeRoot {
    let r = 2.0 * m * m * (1.0 - big_f.cos());
    let r = r.max(0.0);
    let c = sigma * chi_tilde;
    let root_r = r.sqrt();
    if c == 0.0 || r == 0.0 {
        return SlopeRoot::Found(sigma * root_r);
    }
    let g = |y: f64| y * y - c * y * y * y - r;
    let dg = |y: f64| 2.0 * y - 3.0 * c * y * y;
    let (mut lo, mut hi) = if c < 0.0 {
        (0.0, root_r)
    } else {
        let y_max = 2.0 / (3.0 * c);
        let r_max = 4.0 / (27.0 * c * c);
        if r > r_max {
            return SlopeRoot::Collided { r, r_max };
        }
        (root_r.min(y_max), y_max)
    };
    let mut y = root_r.clamp(lo, hi);
    for _ in 0..200 {
        let gy = g(y);
        if gy == 0.0 {
            break;
        }
        // g is increasing on the bracket
        if gy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let slope = dg(y);
        let mut next = if slope > 0.0 { y - gy / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(f64::MIN_POSITIVE) {
            y = next;
            break;
        }
        y = next;
    }
    SlopeRoot::Found(sigma * y)
}

/// `dF/du = dir·σ·Y(F)`. The solver interface has no error channel, so a
/// lost root is recorded in `failure` and the slope frozen at zero.
struct SlopeSystem<'a> {
    m: f64,
    chi_tilde: f64,
    sigma: f64,
    dir: f64,
    failure: &'a RefCell<Option<(f64, String)>>,
}

impl System<f64, Vector1<f64>> for SlopeSystem<'_> {
    fn system(&self, u: f64, y: &Vector1<f64>, dy: &mut Vector1<f64>) {
        match slope_root(y[0], self.m, self.chi_tilde, self.sigma) {
            SlopeRoot::Found(x) => dy[0] = self.dir * x,
            SlopeRoot::Collided { r, r_max } => {
                let s = self.dir * u;
                let mut failure = self.failure.borrow_mut();
                if failure.as_ref().is_none_or(|(s0, _)| s.abs() < s0.abs()) {
                    *failure = Some((s, collision_detail(r, r_max)));
                }
                dy[0] = 0.0;
            }
        }
    }
}

fn collision_detail(r: f64, r_max: f64) -> String {
    format!("2m^2(1 - cos F) = {r:.6e} exceeds 4/(27 chi~^2) = {r_max:.6e}")
}

/// Integrates `F(u)` from `F(0) = π` over `u ∈ [0, u_end]`, where
/// `s = dir·u`, and returns `F` at the requested `u` values.
#[allow(clippy::too_many_arguments)]
fn integrate_half(
    m: f64,
    chi_tilde: f64,
    sigma: f64,
    dir: f64,
    u_end: f64,
    at: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<f64>> {
    // the slope is largest at F = π, so a collision shows up at s = 0
    if let SlopeRoot::Collided { r, r_max } = slope_root(PI, m, chi_tilde, sigma) {
        return Err(Error::Branch {
            s: 0.0,
            detail: collision_detail(r, r_max),
        });
    }
    if at.is_empty() || u_end <= 0.0 {
        return Ok(vec![PI; at.len()]);
    }
    let failure = RefCell::new(None);
    let system = SlopeSystem {
        m,
        chi_tilde,
        sigma,
        dir,
        failure: &failure,
    };
    let h_max = (0.25 / m).min(u_end);
    let mut solver = Dopri5::from_param(
        system,
        0.0,
        u_end,
        0.0,
        Vector1::new(PI),
        rtol,
        atol,
        0.9,
        0.04,
        0.2,
        10.0,
        h_max,
        0.0,
        1_000_000,
        1000,
        OutputType::Continuous,
    );
    let mut model = ContinuousOutputModel::default();
    solver
        .integrate_with_continuous_output_model(&mut model)
        .map_err(|e| Error::Domain(format!("profile integration failed: {e}")))?;
    if let Some((s, detail)) = failure.into_inner() {
        return Err(Error::Branch { s, detail });
    }
    at.iter()
        .map(|&u| {
            if u == 0.0 {
                return Ok(PI);
            }
            model
                .evaluate(u.min(u_end))
                .map(|y| y[0])
                .ok_or_else(|| Error::Domain(format!("no dense output at s = {}", dir * u)))
        })
        .collect()
}

/// Numerically exact profile on `n_samples` equally spaced points of
/// `s_range`, integrated in both directions from `F(0) = π`.
pub fn exact_profile_with(
    m: f64,
    chi_tilde: f64,
    branch: Branch,
    s_range: (f64, f64),
    n_samples: usize,
    rtol: f64,
    atol: f64,
) -> Result<ExactProfile> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidInput(format!("m must be positive, got {m}")));
    }
    let (a, b) = s_range;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidInput(format!("invalid range [{a}, {b}]")));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("at least two samples are required".into()));
    }
    let grid: Vec<f64> = (0..n_samples)
        .map(|i| a + (b - a) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let left_u: Vec<f64> = grid.iter().filter(|&&s| s < 0.0).map(|&s| -s).collect();
    let right_u: Vec<f64> = grid.iter().filter(|&&s| s >= 0.0).copied().collect();
    let left = integrate_half(m, chi_tilde, branch.sigma(-1.0), -1.0, -a.min(0.0), &left_u, rtol, atol)?;
    let right = integrate_half(m, chi_tilde, branch.sigma(1.0), 1.0, b.max(0.0), &right_u, rtol, atol)?;
    let samples = grid
        .iter()
        .zip(left.into_iter().chain(right))
        .map(|(&s, f)| {
            let fp = match slope_root(f, m, chi_tilde, branch.sigma(s)) {
                SlopeRoot::Found(x) => x,
                SlopeRoot::Collided { r, r_max } => {
                    return Err(Error::Branch {
                        s,
                        detail: collision_detail(r, r_max),
                    })
                }
            };
            Ok(ProfileSample { s, f, fp })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactProfile {
        m,
        chi_tilde,
        branch,
        rtol,
        atol,
        samples,
    })
}

/// [`exact_profile_with`] for the constants of a traveling-wave setup at
/// the default tolerances.
pub fn exact_profile(
    setup: &TravelingWaveSetup,
    branch: Branch,
    s_range: (f64, f64),
    n_samples: usize,
) -> Result<ExactProfile> {
    exact_profile_with(setup.m()?, setup.chi_tilde, branch, s_range, n_samples, EXACT_RTOL, EXACT_ATOL)
}
