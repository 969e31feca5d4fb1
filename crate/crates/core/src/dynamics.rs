//! Method-of-lines solver for the coupled planar equations
//!
//! ```text
//! ρ_rot φ_tt = (κ₁+6κ₃)/3 φ_zz + 3χ φ_z φ_zz - (λ+μ)(1 - cos φ) sin φ + ½λ sin φ ψ_z
//! ρ ψ_tt     = (λ+2μ) ψ_zz - 2λ sin φ φ_z
//! ```
//!
//! with second-order central differences in space and classical RK4 in time.

use serde::{Deserialize, Serialize};

use crate::energetics::{EnergyBreakdown, MaterialParams};
use crate::error::{Error, Result};
use crate::planar::{planar_densities, rotational_stiffness, PlanarJet, TravelingWaveSetup};
use crate::soliton::{Branch, PerturbativeSolution};

/// `max|φ|` beyond which a run is declared unstable.
pub const BLOW_UP_THRESHOLD: f64 = 1e3;
/// Largest far-field deviation of `φ` accepted by [`init_from_soliton`].
pub const FAR_FIELD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// End nodes keep their initial velocity, so `φ` stays at its far-field
    /// value and `ψ` follows its linear asymptote.
    #[default]
    DirichletAsymptotic,
    /// Periodic up to constant jumps `φ(z+L) = φ(z) + Jφ`,
    /// `ψ(z+L) = ψ(z) + Jψ` with `L = n·dz`.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Right,
    Left,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

/// Uniform grid `z_i = z_min + i·dz`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub z_min: f64,
    pub dz: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(z_min: f64, dz: f64, n: usize) -> Result<Self> {
        if !(dz > 0.0 && dz.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {dz}")));
        }
        if n < 5 {
            return Err(Error::Config(format!("grid needs at least 5 nodes, got {n}")));
        }
        if !z_min.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Self { z_min, dz, n })
    }

    /// `n` nodes placed symmetrically about `z = 0`, so that node `i` and
    /// node `n-1-i` are exact mirror images.
    pub fn symmetric(dz: f64, n: usize) -> Result<Self> {
        Self::new(-0.5 * (n as f64 - 1.0) * dz, dz, n)
    }

    /// Symmetric grid covering at least `[-half_width, half_width]`.
    pub fn covering(half_width: f64, dz: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Config(format!("half width must be positive, got {half_width}")));
        }
        let half = (half_width / dz).ceil() as usize;
        Self::symmetric(dz, 2 * half + 1)
    }

    pub fn z(&self, i: usize) -> f64 {
        if self.is_symmetric() {
            0.5 * (2.0 * i as f64 - (self.n as f64 - 1.0)) * self.dz
        } else {
            self.z_min + i as f64 * self.dz
        }
    }

    fn is_symmetric(&self) -> bool {
        self.z_min == -0.5 * (self.n as f64 - 1.0) * self.dz
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.z(i)).collect()
    }

    /// Period of the periodic extension.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.dz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dz: f64,
    pub dt: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub cfl_safety: f64,
}

/// Fastest linear wave speed, `max(√((λ+2μ)/ρ), √((κ₁+6κ₃)/(3ρ_rot)))`.
pub fn max_wave_speed(params: &MaterialParams) -> f64 {
    let elastic = ((params.lambda + 2.0 * params.mu) / params.rho).sqrt();
    let rotational = (rotational_stiffness(params) / params.rho_rot).sqrt();
    elastic.max(rotational)
}

impl SimConfig {
    /// Time step at the CFL limit scaled by `cfl_safety`.
    pub fn with_cfl(dz: f64, t_end: f64, boundary: Boundary, cfl_safety: f64, params: &MaterialParams) -> Self {
        Self {
            dz,
            dt: cfl_safety * dz / max_wave_speed(params),
            t_end,
            boundary,
            cfl_safety,
        }
    }

    pub fn validate(&self, params: &MaterialParams) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.dz > 0.0 && self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(Error::Config("dz, dt must be positive and t_end non-negative".into()));
        }
        let limit = self.cfl_safety * self.dz / max_wave_speed(params);
        // allow for rounding in dt computed from the same expression
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "CFL violated: dt = {} exceeds cfl_safety·dz/v_max = {limit}",
                self.dt
            )));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`, the last one possibly shortened.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub psi_t: Vec<f64>,
    pub time: f64,
    /// Jumps used by the periodic boundary.
    pub phi_jump: f64,
    pub psi_jump: f64,
    /// Signed speed of the traveling wave this state was built from, used
    /// for the equation residuals.
    pub wave_speed: Option<f64>,
}

impl PlanarState {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n;
        Self {
            grid,
            phi: vec![0.0; n],
            psi: vec![0.0; n],
            phi_t: vec![0.0; n],
            psi_t: vec![0.0; n],
            time: 0.0,
            phi_jump: 0.0,
            psi_jump: 0.0,
            wave_speed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n;
        if [&self.phi, &self.psi, &self.phi_t, &self.psi_t].iter().any(|a| a.len() != n) {
            return Err(Error::Config(format!("state arrays must all have length {n}")));
        }
        Ok(())
    }

    /// `ψ` with the linear background `ψ(z_min) + e(z - z_min)` removed,
    /// `e` the mean strain across the grid. For plotting only.
    pub fn psi_detrended(&self) -> Vec<f64> {
        let n = self.grid.n;
        let span = self.grid.z(n - 1) - self.grid.z(0);
        let e = (self.psi[n - 1] - self.psi[0]) / span;
        (0..n)
            .map(|i| self.psi[i] - self.psi[0] - e * (self.grid.z(i) - self.grid.z(0)))
            .collect()
    }
}

/// How the initial soliton is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitOptions {
    pub order: u8,
    pub branch: Branch,
    /// Position of the center `s = 0` of the right-mover at `t = 0`; the
    /// left-mover is centered at `-center`.
    pub center: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            order: 1,
            branch: Branch::Piecewise,
            center: 0.0,
        }
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// `∫ g'(s) ds` cell by cell with three-point Gauss rules.
fn cumulative_integral(points: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        acc += half * GAUSS3.iter().map(|&(x, wt)| wt * g(mid + half * x)).sum::<f64>();
        out.push(acc);
    }
    out
}

/// Traveling-wave initial data: `φ = ½F(s)`, `∂tφ = -v∂zφ` and
/// `∂zψ = g'(φ)` integrated from `ψ(z_min) = 0`, `∂tψ = -v g'`. The
/// left-mover is the reflection `φ(-z)`, `-ψ(-z)` of the right-mover,
/// shifted so that `ψ(z_min) = 0` as well.
pub fn init_from_soliton(
    setup: &TravelingWaveSetup,
    grid: &Grid,
    direction: Direction,
    options: InitOptions,
) -> Result<PlanarState> {
    let sol = PerturbativeSolution::from_setup(setup, options.order, options.branch)?;
    let center = options.center;
    init_from_profile(
        setup,
        grid,
        direction,
        |s| (0.5 * sol.eval(s - center), 0.5 * sol.derivative(s - center)),
        far_field_phi(options.branch),
    )
}

/// A kink centered at `-separation/2` followed by an antikink at
/// `+separation/2`, both moving with the wave. `φ` returns to zero on both
/// sides and the strain to the same value, so the pair is compatible with
/// the periodic boundary without jumps.
pub fn init_soliton_pair(
    setup: &TravelingWaveSetup,
    grid: &Grid,
    direction: Direction,
    order: u8,
    separation: f64,
) -> Result<PlanarState> {
    let kink = PerturbativeSolution::from_setup(setup, order, Branch::Kink)?;
    let anti = PerturbativeSolution::from_setup(setup, order, Branch::Antikink)?;
    let h = 0.5 * separation;
    init_from_profile(
        setup,
        grid,
        direction,
        |s| {
            (
                0.5 * (kink.eval(s + h) + anti.eval(s - h)) - std::f64::consts::PI,
                0.5 * (kink.derivative(s + h) + anti.derivative(s - h)),
            )
        },
        (0.0, 0.0),
    )
}

/// Initial data of a wave `φ(z,t) = angle(z - vt).0` moving right, or its
/// mirror image moving left. `angle` returns `φ` and `dφ/ds`; `far` holds
/// the values of `φ` the right-mover approaches as `s -> -∞` and `s -> +∞`.
pub fn init_from_profile(
    setup: &TravelingWaveSetup,
    grid: &Grid,
    direction: Direction,
    angle: impl Fn(f64) -> (f64, f64),
    far: (f64, f64),
) -> Result<PlanarState> {
    let v = setup.v;
    let z = grid.points();
    // the left-mover samples the right-mover at mirrored nodes
    let sgn = direction.sign();
    let mut state = PlanarState::zeros(*grid);
    for (i, &zi) in z.iter().enumerate() {
        let (phi, phi_s) = angle(sgn * zi);
        state.phi[i] = phi;
        // ∂tφ(z) = -v φ_R'(s) for both directions
        state.phi_t[i] = -v * phi_s;
        // ∂tψ_R = -v g'; the mirror flips its sign
        state.psi_t[i] = -sgn * v * setup.strain(phi);
    }
    // the mirror ψ -> -ψ(-z) leaves the strain unchanged: ∂zψ = g'(φ)
    state.psi = cumulative_integral(&z, |zz| setup.strain(angle(sgn * zz).0));

    let far = if sgn > 0.0 { far } else { (far.1, far.0) };
    let n = grid.n;
    let left = (state.phi[0] - far.0).abs();
    let right = (state.phi[n - 1] - far.1).abs();
    if !(left <= FAR_FIELD_TOL) {
        return Err(Error::GridTooNarrow {
            side: "left",
            residual: left,
        });
    }
    if !(right <= FAR_FIELD_TOL) {
        return Err(Error::GridTooNarrow {
            side: "right",
            residual: right,
        });
    }
    state.phi_jump = far.1 - far.0;
    state.psi_jump = cumulative_jump(&state);
    state.wave_speed = Some(sgn * v);
    Ok(state)
}

/// Far-field values of `φ` as `s -> -∞` and `s -> +∞`.
fn far_field_phi(branch: Branch) -> (f64, f64) {
    use std::f64::consts::PI;
    match branch {
        Branch::Kink => (0.0, PI),
        Branch::Antikink => (PI, 0.0),
        Branch::Piecewise => (0.0, 0.0),
    }
}

/// `ψ(z_max) - ψ(z_min)` extrapolated by one cell, the jump that makes the
/// periodic extension consistent with the end strain.
fn cumulative_jump(state: &PlanarState) -> f64 {
    let n = state.grid.n;
    let end_strain = (state.psi[n - 1] - state.psi[n - 2]) / state.grid.dz;
    state.psi[n - 1] - state.psi[0] + end_strain * state.grid.dz
}

/// Right-hand side of the first-order system.
struct Rhs<'a> {
    params: &'a MaterialParams,
    boundary: Boundary,
    dz: f64,
    phi_jump: f64,
    psi_jump: f64,
}

impl Rhs<'_> {
    /// Neighbours of node `i` with the periodic jumps applied.
    #[inline]
    fn neighbours(&self, a: &[f64], i: usize, jump: f64) -> (f64, f64) {
        let n = a.len();
        let left = if i == 0 { a[n - 1] - jump } else { a[i - 1] };
        let right = if i == n - 1 { a[0] + jump } else { a[i + 1] };
        (left, right)
    }

    fn accelerations(&self, phi: &[f64], psi: &[f64], acc_phi: &mut [f64], acc_psi: &mut [f64]) {
        let p = self.params;
        let n = phi.len();
        let (inv2dz, invdz2) = (0.5 / self.dz, 1.0 / (self.dz * self.dz));
        let kappa = rotational_stiffness(p);
        let (lm, l2m) = (p.lambda + p.mu, p.lambda + 2.0 * p.mu);
        let interior = match self.boundary {
            Boundary::Periodic => 0..n,
            Boundary::DirichletAsymptotic => {
                acc_phi[0] = 0.0;
                acc_phi[n - 1] = 0.0;
                acc_psi[0] = 0.0;
                acc_psi[n - 1] = 0.0;
                1..n - 1
            }
        };
        for i in interior {
            let (pl, pr) = self.neighbours(phi, i, self.phi_jump);
            let (ql, qr) = self.neighbours(psi, i, self.psi_jump);
            let phi_z = (pr - pl) * inv2dz;
            // (l + r) - 2c keeps the stencil exactly symmetric under z -> -z
            let phi_zz = ((pl + pr) - 2.0 * phi[i]) * invdz2;
            let psi_z = (qr - ql) * inv2dz;
            let psi_zz = ((ql + qr) - 2.0 * psi[i]) * invdz2;
            let (s, c) = phi[i].sin_cos();
            acc_phi[i] = (kappa * phi_zz + 3.0 * p.chi * phi_z * phi_zz - lm * (1.0 - c) * s
                + 0.5 * p.lambda * s * psi_z)
                / p.rho_rot;
            acc_psi[i] = (l2m * psi_zz - 2.0 * p.lambda * s * phi_z) / p.rho;
        }
    }
}

/// Scratch space for the RK4 stages.
struct Workspace {
    k: [[Vec<f64>; 4]; 4],
    tmp: [Vec<f64>; 4],
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            k: std::array::from_fn(|_| std::array::from_fn(|_| z())),
            tmp: std::array::from_fn(|_| z()),
        }
    }
}

fn stage(rhs: &Rhs, y: [&[f64]; 4], k: &mut [Vec<f64>; 4]) {
    let [phi, psi, phi_t, psi_t] = y;
    k[0].copy_from_slice(phi_t);
    k[1].copy_from_slice(psi_t);
    let (a, b) = k.split_at_mut(3);
    rhs.accelerations(phi, psi, &mut a[2], &mut b[0]);
}

fn rk4_step(state: &mut PlanarState, rhs: &Rhs, dt: f64, ws: &mut Workspace) {
    let n = state.grid.n;
    let fields = |s: &PlanarState| -> [Vec<f64>; 4] {
        [s.phi.clone(), s.psi.clone(), s.phi_t.clone(), s.psi_t.clone()]
    };
    let y0 = fields(state);
    let coeffs = [0.0, 0.5, 0.5, 1.0];
    for st in 0..4 {
        if st == 0 {
            stage(rhs, [&y0[0], &y0[1], &y0[2], &y0[3]], &mut ws.k[0]);
        } else {
            let h = coeffs[st] * dt;
            for c in 0..4 {
                for i in 0..n {
                    ws.tmp[c][i] = y0[c][i] + h * ws.k[st - 1][c][i];
                }
            }
            let [a, b, c, d] = &ws.tmp;
            stage(rhs, [a, b, c, d], &mut ws.k[st]);
        }
    }
    let targets = [&mut state.phi, &mut state.psi, &mut state.phi_t, &mut state.psi_t];
    for (c, target) in targets.into_iter().enumerate() {
        for i in 0..n {
            target[i] = y0[c][i]
                + dt / 6.0 * (ws.k[0][c][i] + 2.0 * ws.k[1][c][i] + 2.0 * ws.k[2][c][i] + ws.k[3][c][i]);
        }
    }
    state.time += dt;
}

fn check_blow_up(state: &PlanarState) -> Result<()> {
    let max_abs = state.phi.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) });
    if !(max_abs <= BLOW_UP_THRESHOLD) {
        return Err(Error::Instability {
            time: state.time,
            max_abs,
        });
    }
    Ok(())
}

/// Advances `state` by one step of `config.dt`.
pub fn step(state: &PlanarState, params: &MaterialParams, config: &SimConfig) -> Result<PlanarState> {
    let mut next = state.clone();
    let mut ws = Workspace::new(state.grid.n);
    step_in_place(&mut next, params, config, config.dt, &mut ws)?;
    Ok(next)
}

fn step_in_place(
    state: &mut PlanarState,
    params: &MaterialParams,
    config: &SimConfig,
    dt: f64,
    ws: &mut Workspace,
) -> Result<()> {
    config.validate(params)?;
    state.validate()?;
    if (config.dz - state.grid.dz).abs() > 1e-12 * state.grid.dz {
        return Err(Error::Config(format!(
            "config dz = {} does not match the grid spacing {}",
            config.dz, state.grid.dz
        )));
    }
    let rhs = Rhs {
        params,
        boundary: config.boundary,
        dz: state.grid.dz,
        phi_jump: state.phi_jump,
        psi_jump: state.psi_jump,
    };
    rk4_step(state, &rhs, dt, ws);
    check_blow_up(state)
}

/// Observables of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    /// Position and value of the maximum of `φ`, refined by a parabola
    /// through the three largest samples; `None` for a flat state or a
    /// maximum on the boundary.
    pub peak_z: Option<f64>,
    pub peak_phi: Option<f64>,
    /// Where `φ` crosses the mean of its end values; `None` when the end
    /// values coincide.
    pub center_z: Option<f64>,
    pub energy: EnergyBreakdown,
    /// Discrete L² norms of the residuals of the φ and ψ equations on the
    /// interior, with time derivatives taken from the traveling-wave
    /// relation `∂t = -v∂z`. `None` when the state carries no wave speed.
    pub residual_phi: Option<f64>,
    pub residual_psi: Option<f64>,
}

fn peak(state: &PlanarState) -> Option<(f64, f64)> {
    let phi = &state.phi;
    let n = phi.len();
    let (imax, &vmax) = phi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    let vmin = phi.iter().copied().fold(f64::INFINITY, f64::min);
    if imax == 0 || imax == n - 1 || vmax - vmin <= 0.0 {
        return None;
    }
    let (a, b, c) = (phi[imax - 1], vmax, phi[imax + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let value = b - 0.25 * (a - c) * offset;
    Some((state.grid.z(imax) + offset * state.grid.dz, value))
}

fn level_crossing(state: &PlanarState) -> Option<f64> {
    let phi = &state.phi;
    let n = phi.len();
    let (first, last) = (phi[0], phi[n - 1]);
    if (last - first).abs() < 1e-3 {
        return None;
    }
    let level = 0.5 * (first + last);
    (0..n - 1).find_map(|i| {
        let (a, b) = (phi[i] - level, phi[i + 1] - level);
        if a == 0.0 {
            Some(state.grid.z(i))
        } else if a * b < 0.0 {
            Some(state.grid.z(i) + state.grid.dz * a / (a - b))
        } else {
            None
        }
    })
}

/// First derivative by central differences, second order everywhere,
/// one-sided at the ends of a non-periodic grid.
fn d1(a: &[f64], dz: f64, periodic: Option<f64>) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|i| match (i, periodic) {
            (0, None) => (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * dz),
            (i, None) if i == n - 1 => (3.0 * a[n - 1] - 4.0 * a[n - 2] + a[n - 3]) / (2.0 * dz),
            (i, jump) => {
                let j = jump.unwrap_or(0.0);
                let l = if i == 0 { a[n - 1] - j } else { a[i - 1] };
                let r = if i == n - 1 { a[0] + j } else { a[i + 1] };
                (r - l) / (2.0 * dz)
            }
        })
        .collect()
}

/// Fourth-order central first and second derivatives on nodes `2..n-2`.
fn d12_fourth(a: &[f64], i: usize, dz: f64) -> (f64, f64) {
    let (m2, m1, c, p1, p2) = (a[i - 2], a[i - 1], a[i], a[i + 1], a[i + 2]);
    let first = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * dz);
    let second = (-(p2 + m2) + 16.0 * (p1 + m1) - 30.0 * c) / (12.0 * dz * dz);
    (first, second)
}

/// Planar energy breakdown by quadrature, `(Σ w_i) dz` over all nodes for
/// a periodic grid and the trapezoidal rule otherwise.
pub fn planar_energy(state: &PlanarState, params: &MaterialParams, boundary: Boundary) -> EnergyBreakdown {
    let dz = state.grid.dz;
    let (jp, jq) = match boundary {
        Boundary::Periodic => (Some(state.phi_jump), Some(state.psi_jump)),
        Boundary::DirichletAsymptotic => (None, None),
    };
    let phi_z = d1(&state.phi, dz, jp);
    let psi_z = d1(&state.psi, dz, jq);
    let n = state.grid.n;
    let mut total = EnergyBreakdown::default();
    for i in 0..n {
        let jet = PlanarJet {
            phi: state.phi[i],
            phi_z: phi_z[i],
            phi_t: state.phi_t[i],
            psi_z: psi_z[i],
            psi_t: state.psi_t[i],
            ..Default::default()
        };
        let w = match boundary {
            Boundary::DirichletAsymptotic if i == 0 || i == n - 1 => 0.5 * dz,
            _ => dz,
        };
        let d = planar_densities(&jet, params);
        total = EnergyBreakdown::new(
            total.elastic + w * d.elastic,
            total.curvature + w * d.curvature,
            total.chiral + w * d.chiral,
            total.kinetic + w * d.kinetic,
        );
    }
    total
}

fn residuals(state: &PlanarState, params: &MaterialParams, v: f64) -> (f64, f64) {
    let n = state.grid.n;
    let dz = state.grid.dz;
    let (mut rp, mut rq) = (0.0, 0.0);
    for i in 2..n - 2 {
        let (phi_z, phi_zz) = d12_fourth(&state.phi, i, dz);
        let (psi_z, psi_zz) = d12_fourth(&state.psi, i, dz);
        let (phi_tz, _) = d12_fourth(&state.phi_t, i, dz);
        let (psi_tz, _) = d12_fourth(&state.psi_t, i, dz);
        let jet = PlanarJet {
            phi: state.phi[i],
            phi_z,
            phi_zz,
            phi_t: state.phi_t[i],
            phi_tt: -v * phi_tz,
            psi_z,
            psi_zz,
            psi_t: state.psi_t[i],
            psi_tt: -v * psi_tz,
        };
        rp += crate::planar::phi_residual(&jet, params).powi(2) * dz;
        rq += crate::planar::psi_residual(&jet, params).powi(2) * dz;
    }
    (rp.sqrt(), rq.sqrt())
}

pub fn observe(state: &PlanarState, params: &MaterialParams, boundary: Boundary) -> Observation {
    let pk = peak(state);
    let (residual_phi, residual_psi) = match state.wave_speed {
        Some(v) if state.grid.n >= 5 => {
            let (a, b) = residuals(state, params, v);
            (Some(a), Some(b))
        }
        _ => (None, None),
    };
    Observation {
        time: state.time,
        peak_z: pk.map(|p| p.0),
        peak_phi: pk.map(|p| p.1),
        center_z: level_crossing(state),
        energy: planar_energy(state, params, boundary),
        residual_phi,
        residual_psi,
    }
}

/// Final state and the observations taken along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub state: PlanarState,
    pub observations: Vec<Observation>,
    pub steps: usize,
}

/// Integrates up to `config.t_end`, observing every `observe_every` steps
/// (and at the start and end). `on_step` sees the state after every step.
pub fn run_with(
    initial: &PlanarState,
    params: &MaterialParams,
    config: &SimConfig,
    observe_every: usize,
    mut on_step: impl FnMut(&PlanarState),
) -> Result<RunOutput> {
    config.validate(params)?;
    initial.validate()?;
    let mut state = initial.clone();
    let mut ws = Workspace::new(state.grid.n);
    let steps = config.steps();
    let t0 = state.time;
    let mut observations = vec![observe(&state, params, config.boundary)];
    let every = observe_every.max(1);
    for k in 1..=steps {
        let target = t0 + config.t_end.min(k as f64 * config.dt);
        let dt = target - state.time;
        step_in_place(&mut state, params, config, dt, &mut ws)?;
        state.time = target;
        on_step(&state);
        if k % every == 0 || k == steps {
            observations.push(observe(&state, params, config.boundary));
        }
    }
    Ok(RunOutput {
        state,
        observations,
        steps,
    })
}

pub fn run(initial: &PlanarState, params: &MaterialParams, config: &SimConfig, observe_every: usize) -> Result<RunOutput> {
    run_with(initial, params, config, observe_every, |_| {})
}

/// Outcome of the mirror comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorReport {
    pub chi: f64,
    pub chi_tilde: f64,
    pub t_end: f64,
    /// `max |φ_left(z,t) - φ_right(-z,t)|` over the grid and the compared
    /// times.
    pub max_deviation: f64,
    /// The same for the strains `∂zψ_left(z) - ∂zψ_right(-z)`.
    pub max_strain_deviation: f64,
    pub tolerance: f64,
    /// Sign of `∂tφ` at the leading edge of each wave.
    pub leading_phi_t_sign_right: f64,
    pub leading_phi_t_sign_left: f64,
    /// `sign(direction · ∂tφ)` at the leading edge: the handedness of the
    /// rotation relative to the direction of travel.
    pub rotation_sense_right: f64,
    pub rotation_sense_left: f64,
    pub senses_opposite: bool,
    pub passed: bool,
}

/// `∂tφ` at the largest `|∂tφ|` ahead of the wave center.
fn leading_phi_t(state: &PlanarState, direction: Direction) -> f64 {
    let center = peak(state).map(|p| p.0).or_else(|| level_crossing(state)).unwrap_or(0.0);
    let ahead = |z: f64| direction.sign() * (z - center) > 0.0;
    let mut best = 0.0f64;
    for i in 0..state.grid.n {
        if ahead(state.grid.z(i)) && state.phi_t[i].abs() > best.abs() {
            best = state.phi_t[i];
        }
    }
    best
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Runs the right-mover with `params` and the left-mover, built from the
/// reflected profile, with the chiral term reversed (`χ -> -χ`), then
/// compares `φ_left(z,t)` with `φ_right(-z,t)` at every observation.
pub fn mirror_check(
    params: &MaterialParams,
    setup: &TravelingWaveSetup,
    grid: &Grid,
    config: &SimConfig,
    options: InitOptions,
    tolerance: f64,
) -> Result<MirrorReport> {
    if !grid.is_symmetric() {
        return Err(Error::Config("mirror check needs a grid symmetric about z = 0".into()));
    }
    let right0 = init_from_soliton(setup, grid, Direction::Right, options)?;
    let left0 = init_from_soliton(setup, grid, Direction::Left, options)?;
    let mirrored_params = params.with_chi(-params.chi);

    let every = (config.steps() / 20).max(1);
    let mut right_states = Vec::new();
    let mut k = 0usize;
    let right = run_with(&right0, params, config, every, |s| {
        k += 1;
        if k % every == 0 {
            right_states.push(s.clone());
        }
    })?;
    let mut max_deviation = compare_mirrored(&right0, &left0).0;
    let mut max_strain = compare_mirrored(&right0, &left0).1;
    let mut idx = 0usize;
    let mut k = 0usize;
    let left = run_with(&left0, &mirrored_params, config, every, |s| {
        k += 1;
        if k % every == 0 {
            let (d, e) = compare_mirrored(&right_states[idx], s);
            max_deviation = max_deviation.max(d);
            max_strain = max_strain.max(e);
            idx += 1;
        }
    })?;
    let (d, e) = compare_mirrored(&right.state, &left.state);
    max_deviation = max_deviation.max(d);
    max_strain = max_strain.max(e);

    let pr = leading_phi_t(&right.state, Direction::Right);
    let pl = leading_phi_t(&left.state, Direction::Left);
    let sense_r = sign(Direction::Right.sign() * pr);
    let sense_l = sign(Direction::Left.sign() * pl);
    let senses_opposite = sense_r != 0.0 && sense_r == -sense_l;
    Ok(MirrorReport {
        chi: params.chi,
        chi_tilde: setup.chi_tilde,
        t_end: config.t_end,
        max_deviation,
        max_strain_deviation: max_strain,
        tolerance,
        leading_phi_t_sign_right: sign(pr),
        leading_phi_t_sign_left: sign(pl),
        rotation_sense_right: sense_r,
        rotation_sense_left: sense_l,
        senses_opposite,
        passed: max_deviation <= tolerance && senses_opposite,
    })
}

/// Largest `|φ_b(z) - φ_a(-z)|` and `|∂zψ_b(z) - ∂zψ_a(-z)|`.
fn compare_mirrored(a: &PlanarState, b: &PlanarState) -> (f64, f64) {
    let n = a.grid.n;
    let dz = a.grid.dz;
    let sa = d1(&a.psi, dz, None);
    let sb = d1(&b.psi, dz, None);
    (0..n).fold((0.0f64, 0.0f64), |(d, e), i| {
        let j = n - 1 - i;
        (d.max((b.phi[i] - a.phi[j]).abs()), e.max((sb[i] - sa[j]).abs()))
    })
}
