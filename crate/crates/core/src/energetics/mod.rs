//! Energy densities of the chiral Cosserat model, the integrated energy on a
//! periodic box, variational derivatives and symmetry predicates.

mod symmetry;
mod variation;

pub use symmetry::{
    check_chirality, check_hemitropy, check_objectivity, DerivativeMode, EnergyTerm,
    SymmetryReport,
};
pub use variation::{tangent_projection, variation_a, variation_b, variation_b_parts, BParts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_orthogonal, dislocation_density, gradient, MatrixField, Point, VectorField};
use crate::tensor::{decompose, dev, frobenius, Mat3, Vec3};

/// How the chiral modulus transforms when the energy is evaluated in the
/// inverted coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSignConvention {
    /// `χ# = -χ`: the modulus is a pseudoscalar, so the total energy is
    /// unchanged by inversion.
    #[default]
    Flips,
    /// `χ# = χ`: the chiral energy changes sign under inversion.
    Invariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub chi: f64,
    pub rho: f64,
    pub rho_rot: f64,
    #[serde(default)]
    pub chi_sign_convention: ChiSignConvention,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 1.0,
            kappa1: 1.0,
            kappa2: 1.0,
            kappa3: 1.0,
            chi: 0.0,
            rho: 1.0,
            rho_rot: 1.0,
            chi_sign_convention: ChiSignConvention::Flips,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mu,
            self.lambda,
            self.kappa1,
            self.kappa2,
            self.kappa3,
            self.chi,
            self.rho,
            self.rho_rot,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("material parameters must be finite".into()));
        }
        if self.mu <= 0.0 {
            return Err(Error::InvalidInput(format!("mu must be positive, got {}", self.mu)));
        }
        if self.lambda + 2.0 * self.mu <= 0.0 {
            return Err(Error::InvalidInput("lambda + 2 mu must be positive".into()));
        }
        if self.rho <= 0.0 || self.rho_rot <= 0.0 {
            return Err(Error::InvalidInput("rho and rho_rot must be positive".into()));
        }
        Ok(())
    }

    /// The chiral modulus to use for energies evaluated in the inverted
    /// coordinate system.
    pub fn chi_inverted(&self) -> f64 {
        match self.chi_sign_convention {
            ChiSignConvention::Flips => -self.chi,
            ChiSignConvention::Invariant => self.chi,
        }
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }
}

/// Energy split by term. `total` follows the Lagrangian sign convention
/// `elastic + curvature + chiral - kinetic`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub curvature: f64,
    pub chiral: f64,
    pub kinetic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(elastic: f64, curvature: f64, chiral: f64, kinetic: f64) -> Self {
        Self {
            elastic,
            curvature,
            chiral,
            kinetic,
            total: elastic + curvature + chiral - kinetic,
        }
    }

    pub fn potential(&self) -> f64 {
        self.elastic + self.curvature + self.chiral
    }

    /// Conserved energy of the dynamics, potential plus kinetic.
    pub fn hamiltonian(&self) -> f64 {
        self.potential() + self.kinetic
    }

    fn scaled(&self, w: f64) -> Self {
        Self::new(self.elastic * w, self.curvature * w, self.chiral * w, self.kinetic * w)
    }

    fn add(&self, o: &Self) -> Self {
        Self::new(
            self.elastic + o.elastic,
            self.curvature + o.curvature,
            self.chiral + o.chiral,
            self.kinetic + o.kinetic,
        )
    }
}

pub fn elastic_density(f: &Mat3, rbar: &Mat3, params: &MaterialParams) -> Result<f64> {
    check_orthogonal(rbar)?;
    let e = rbar.transpose() * f - Mat3::identity();
    let d = decompose(&e);
    Ok(params.mu * d.sym.norm_squared() + 0.5 * params.lambda * d.trace * d.trace)
}

pub fn curvature_density(k: &Mat3, params: &MaterialParams) -> f64 {
    let d = decompose(k);
    params.kappa1 * dev(&d.sym).norm_squared()
        + params.kappa2 * d.skew.norm_squared()
        + params.kappa3 * d.trace * d.trace
}

pub fn chiral_density(k: &Mat3, params: &MaterialParams) -> f64 {
    params.chi * (k * k * k).trace()
}

pub fn kinetic_density(u_dot: &Vec3, rbar_dot: &Mat3, params: &MaterialParams) -> f64 {
    0.5 * params.rho * u_dot.norm_squared() + params.rho_rot * rbar_dot.norm_squared()
}

/// All four densities at a point from pointwise kinematic data.
pub fn densities(
    f: &Mat3,
    rbar: &Mat3,
    k: &Mat3,
    u_dot: &Vec3,
    rbar_dot: &Mat3,
    params: &MaterialParams,
) -> Result<EnergyBreakdown> {
    Ok(EnergyBreakdown::new(
        elastic_density(f, rbar, params)?,
        curvature_density(k, params),
        chiral_density(k, params),
        kinetic_density(u_dot, rbar_dot, params),
    ))
}

/// Kinematic fields of a configuration. Missing rates are treated as zero.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub deformation: VectorField,
    pub microrotation: MatrixField,
    pub velocity: Option<VectorField>,
    pub microrotation_rate: Option<MatrixField>,
}

impl FieldSet {
    pub fn static_config(deformation: VectorField, microrotation: MatrixField) -> Self {
        Self {
            deformation,
            microrotation,
            velocity: None,
            microrotation_rate: None,
        }
    }

    pub fn densities_at(&self, p: &Point, params: &MaterialParams) -> Result<EnergyBreakdown> {
        let f = gradient(&self.deformation, p)?;
        let r = self.microrotation.eval(p)?;
        let k = dislocation_density(&self.microrotation, p)?;
        let u_dot = match &self.velocity {
            Some(v) => v.eval(p)?,
            None => Vec3::zeros(),
        };
        let r_dot = match &self.microrotation_rate {
            Some(m) => m.eval(p)?,
            None => Mat3::zeros(),
        };
        densities(&f, &r, &k, &u_dot, &r_dot, params)
    }
}

/// Axis-aligned box sampled at `n[i]` cell midpoints per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    pub lower: Vec3,
    pub upper: Vec3,
    pub n: [usize; 3],
}

impl BoxGrid {
    pub fn cube(lower: f64, upper: f64, n: usize) -> Self {
        Self {
            lower: Vec3::repeat(lower),
            upper: Vec3::repeat(upper),
            n: [n; 3],
        }
    }

    pub fn spacing(&self) -> Vec3 {
        Vec3::from_fn(|i, _| (self.upper[i] - self.lower[i]) / self.n[i] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().product()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let h = self.spacing();
        let [nx, ny, nz] = self.n;
        (0..nx).flat_map(move |i| {
            (0..ny).flat_map(move |j| {
                (0..nz).map(move |k| {
                    self.lower
                        + Vec3::new(
                            (i as f64 + 0.5) * h.x,
                            (j as f64 + 0.5) * h.y,
                            (k as f64 + 0.5) * h.z,
                        )
                })
            })
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n.iter().any(|&n| n < 4) {
            return Err(Error::Config(format!(
                "quadrature needs at least 4 cells per axis, got {:?}",
                self.n
            )));
        }
        if (0..3).any(|i| !(self.upper[i] > self.lower[i])) {
            return Err(Error::Config("box upper corner must exceed lower corner".into()));
        }
        Ok(())
    }
}

/// Midpoint-rule integral of the four densities over the box.
pub fn total_energy(fields: &FieldSet, params: &MaterialParams, grid: &BoxGrid) -> Result<EnergyBreakdown> {
    grid.validate()?;
    let mut acc = EnergyBreakdown::default();
    for p in grid.points() {
        acc = acc.add(&fields.densities_at(&p, params)?);
    }
    Ok(acc.scaled(grid.cell_volume()))
}

/// Directional derivative `d/dh W(F + h dF)` of the elastic density by
/// central differences; used to cross-check [`variation_a`].
pub fn elastic_directional_fd(
    f: &Mat3,
    rbar: &Mat3,
    df: &Mat3,
    h: f64,
    params: &MaterialParams,
) -> Result<f64> {
    let plus = elastic_density(&(f + df * h), rbar, params)?;
    let minus = elastic_density(&(f - df * h), rbar, params)?;
    Ok((plus - minus) / (2.0 * h))
}

/// `A : dF`, the first-order change of the elastic density.
pub fn elastic_directional(f: &Mat3, rbar: &Mat3, df: &Mat3, params: &MaterialParams) -> Result<f64> {
    Ok(frobenius(&variation_a(f, rbar, params)?, df))
}
