//! Run parameters from a JSON file and command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chiral_core::energetics::MaterialParams;
use chiral_core::planar::{chi_for_chi_tilde, kappa1_for_m};
use chiral_core::verify::{dynamics_params, DYNAMICS_V2};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

/// A command-line value that is invalid on its own terms. Exits with the
/// usage status.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Every tunable of `reduce`, `simulate` and `mirror-check`. Parameter files
/// use the same keys; a run manifest is accepted too, in which case its
/// `parameters` object is read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub kappa3: Option<f64>,
    pub chi: Option<f64>,
    pub rho: Option<f64>,
    pub rho_rot: Option<f64>,
    pub v: Option<f64>,
    pub v2: Option<f64>,
    pub m: Option<f64>,
    pub chi_tilde: Option<f64>,
    pub c1: Option<f64>,
    pub nz: Option<usize>,
    pub dz: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub cfl: Option<f64>,
    pub direction: Option<DirectionArg>,
    pub boundary: Option<BoundaryArg>,
    pub order: Option<u8>,
    pub branch: Option<BranchArg>,
    pub center: Option<f64>,
    pub snapshot_every: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DirectionArg {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryArg {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BranchArg {
    Kink,
    Antikink,
    Piecewise,
}

impl From<BranchArg> for chiral_core::soliton::Branch {
    fn from(b: BranchArg) -> Self {
        use chiral_core::soliton::Branch;
        match b {
            BranchArg::Kink => Branch::Kink,
            BranchArg::Antikink => Branch::Antikink,
            BranchArg::Piecewise => Branch::Piecewise,
        }
    }
}

impl From<DirectionArg> for chiral_core::dynamics::Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Right => Self::Right,
            DirectionArg::Left => Self::Left,
        }
    }
}

impl From<BoundaryArg> for chiral_core::dynamics::Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Dirichlet => Self::DirichletAsymptotic,
            BoundaryArg::Periodic => Self::Periodic,
        }
    }
}

/// Moduli, wave speed and the parameter file.
#[derive(Debug, Clone, Default, Args)]
pub struct MaterialArgs {
    /// JSON parameter file (or run manifest); flags override its entries
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "m")]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub kappa3: Option<f64>,
    #[arg(long, conflicts_with = "chi_tilde", allow_hyphen_values = true)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub rho_rot: Option<f64>,
    /// Wave speed
    #[arg(long = "v", conflicts_with = "v2")]
    pub v: Option<f64>,
    /// Squared wave speed
    #[arg(long)]
    pub v2: Option<f64>,
    /// Target soliton wavenumber; solves for kappa1
    #[arg(long)]
    pub m: Option<f64>,
    /// Target reduced chirality; solves for chi
    #[arg(long, allow_hyphen_values = true)]
    pub chi_tilde: Option<f64>,
    /// Strain integration constant (default 2(λ+μ)/λ)
    #[arg(long, allow_hyphen_values = true)]
    pub c1: Option<f64>,
}

/// Grid, time stepping and initial data.
#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Number of grid points
    #[arg(long)]
    pub nz: Option<usize>,
    /// Grid spacing (default 0.01/m)
    #[arg(long)]
    pub dz: Option<f64>,
    /// Time step (default from the CFL limit)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time (default 5/(m v))
    #[arg(long)]
    pub t_end: Option<f64>,
    /// CFL safety factor in (0, 1]
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Perturbative order of the initial data
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long, value_enum)]
    pub branch: Option<BranchArg>,
    /// Initial position of the wave center
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<f64>,
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(p) = value.get_mut("parameters") {
            value = p.take();
        }
        serde_json::from_value(value)
            .map_err(|e| UsageError(format!("invalid parameter file {}: {e}", path.display())).into())
    }

    pub fn from_material(args: &MaterialArgs) -> Self {
        Self {
            mu: args.mu,
            lambda: args.lambda,
            kappa1: args.kappa1,
            kappa2: args.kappa2,
            kappa3: args.kappa3,
            chi: args.chi,
            rho: args.rho,
            rho_rot: args.rho_rot,
            v: args.v,
            v2: args.v2,
            m: args.m,
            chi_tilde: args.chi_tilde,
            c1: args.c1,
            ..Default::default()
        }
    }

    pub fn with_sim(mut self, args: &SimArgs) -> Self {
        self.nz = args.nz;
        self.dz = args.dz;
        self.dt = args.dt;
        self.t_end = args.t_end;
        self.cfl = args.cfl;
        self.boundary = args.boundary;
        self.order = args.order;
        self.branch = args.branch;
        self.center = args.center;
        self
    }

    /// Entries of `flags` replace those of `self`. A flag from a pair of
    /// alternatives (`kappa1`/`m`, `chi`/`chi_tilde`, `v`/`v2`) also
    /// discards the other member of the pair.
    pub fn overlay(mut self, flags: &Settings) -> Self {
        if flags.kappa1.is_some() || flags.m.is_some() {
            self.kappa1 = None;
            self.m = None;
        }
        if flags.chi.is_some() || flags.chi_tilde.is_some() {
            self.chi = None;
            self.chi_tilde = None;
        }
        if flags.v.is_some() || flags.v2.is_some() {
            self.v = None;
            self.v2 = None;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(
            mu, lambda, kappa1, kappa2, kappa3, chi, rho, rho_rot, v, v2, m, chi_tilde, c1, nz, dz, dt, t_end,
            cfl, direction, boundary, order, branch, center, snapshot_every, tol
        );
        self
    }

    /// Reads `--params` if given and lays the flags over it.
    pub fn gather(file: Option<&Path>, flags: Settings) -> anyhow::Result<Self> {
        let base = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        Ok(base.overlay(&flags))
    }

    /// Material parameters, wave speed and `C₁`. Unset moduli and speed
    /// fall back to the reference set of the dynamic checks. `m` is
    /// reached by solving for `κ₁`, then `χ̃` by solving for `χ`.
    pub fn material(&self) -> anyhow::Result<(MaterialParams, f64, Option<f64>)> {
        if self.kappa1.is_some() && self.m.is_some() {
            bail!(UsageError("kappa1 and m are alternatives; give one".into()));
        }
        if self.chi.is_some() && self.chi_tilde.is_some() {
            bail!(UsageError("chi and chi_tilde are alternatives; give one".into()));
        }
        let v = match (self.v, self.v2) {
            (Some(_), Some(_)) => bail!(UsageError("v and v2 are alternatives; give one".into())),
            (Some(v), None) => v,
            (None, Some(v2)) if v2 > 0.0 => v2.sqrt(),
            (None, Some(v2)) => bail!(UsageError(format!("v2 must be positive, got {v2}"))),
            (None, None) => DYNAMICS_V2.sqrt(),
        };
        if !(v > 0.0 && v.is_finite()) {
            bail!(UsageError(format!("wave speed must be positive, got {v}")));
        }
        let mut p = dynamics_params(0.0)?;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(x) = self.$f { p.$f = x; } )* };
        }
        set!(mu, lambda, kappa1, kappa2, kappa3, chi, rho, rho_rot);
        if let Some(m) = self.m {
            p.kappa1 = kappa1_for_m(&p, v, m)?;
        }
        if let Some(ct) = self.chi_tilde {
            p.chi = chi_for_chi_tilde(&p, v, ct)?;
        }
        Ok((p, v, self.c1))
    }

    /// The resolved parameters as a flat settings record, used for the
    /// manifest: re-reading it reproduces the run.
    pub fn resolved(&self, p: &MaterialParams, v: f64) -> Self {
        Self {
            mu: Some(p.mu),
            lambda: Some(p.lambda),
            kappa1: Some(p.kappa1),
            kappa2: Some(p.kappa2),
            kappa3: Some(p.kappa3),
            chi: Some(p.chi),
            rho: Some(p.rho),
            rho_rot: Some(p.rho_rot),
            v: Some(v),
            v2: None,
            m: None,
            chi_tilde: None,
            ..self.clone()
        }
    }
}
