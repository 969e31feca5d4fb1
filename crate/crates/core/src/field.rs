//! Matrix- and vector-valued fields over 3D space and the differential
//! operators acting on them.
//!
//! A field is a closure `p -> value`, optionally paired with analytic
//! partial derivatives. Without analytic partials, derivatives are taken by
//! central differences with the field's `fd_step`.
//!
//! The row-wise matrix curl follows the component layout
//! `(Curl M)_ik = ε_kjl ∂_j M_il`, i.e. row `i` of `Curl M` is the vector
//! curl of row `i` of `M`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{is_finite, levi_civita, orthogonality_defect, Mat3, Vec3};

pub type Point = Vec3;

pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Tolerance on `|R^T R - I|` for inputs that must be orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;
/// Step multiplier applied to fields built from derivatives of other fields.
pub const NESTED_STEP_FACTOR: f64 = 10.0;

/// Finite-difference stencil used when no analytic partials are available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdScheme {
    /// Second-order central difference.
    #[default]
    Central,
    /// Richardson extrapolation of two central differences (fourth order).
    Richardson,
}

type MatFn = Arc<dyn Fn(&Point) -> Mat3 + Send + Sync>;
type MatPartialFn = Arc<dyn Fn(&Point, usize) -> Mat3 + Send + Sync>;
type VecFn = Arc<dyn Fn(&Point) -> Vec3 + Send + Sync>;
type VecPartialFn = Arc<dyn Fn(&Point, usize) -> Vec3 + Send + Sync>;

fn axis(j: usize) -> Vec3 {
    let mut e = Vec3::zeros();
    e[j] = 1.0;
    e
}

fn central<T, F>(f: F, p: &Point, j: usize, h: f64, scheme: FdScheme) -> T
where
    F: Fn(&Point) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let e = axis(j);
    let d = |h: f64| (f(&(p + e * h)) - f(&(p - e * h))) * (0.5 / h);
    match scheme {
        FdScheme::Central => d(h),
        FdScheme::Richardson => d(0.5 * h) * (4.0 / 3.0) + d(h) * (-1.0 / 3.0),
    }
}

/// Smooth map from space to 3×3 matrices.
#[derive(Clone)]
pub struct MatrixField {
    eval: MatFn,
    partials: Option<MatPartialFn>,
    fd_step: f64,
    scheme: FdScheme,
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixField")
            .field("analytic_partials", &self.partials.is_some())
            .field("fd_step", &self.fd_step)
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl MatrixField {
    pub fn new(eval: impl Fn(&Point) -> Mat3 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            partials: None,
            fd_step: DEFAULT_FD_STEP,
            scheme: FdScheme::Central,
        }
    }

    /// Field with analytic partials; `partials(p, j)` returns `∂_j M(p)`.
    pub fn with_partials(
        eval: impl Fn(&Point) -> Mat3 + Send + Sync + 'static,
        partials: impl Fn(&Point, usize) -> Mat3 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            partials: Some(Arc::new(partials)),
            fd_step: DEFAULT_FD_STEP,
            scheme: FdScheme::Central,
        }
    }

    pub fn constant(m: Mat3) -> Self {
        Self::with_partials(move |_| m, |_, _| Mat3::zeros())
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        assert!(h > 0.0, "fd_step must be positive");
        self.fd_step = h;
        self
    }

    pub fn with_scheme(mut self, scheme: FdScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn scheme(&self) -> FdScheme {
        self.scheme
    }

    pub fn has_partials(&self) -> bool {
        self.partials.is_some()
    }

    /// Drops analytic partials so derivatives fall back to finite differences.
    pub fn without_partials(mut self) -> Self {
        self.partials = None;
        self
    }

    /// Raw evaluation without the finiteness check.
    pub fn value(&self, p: &Point) -> Mat3 {
        (self.eval)(p)
    }

    pub fn eval(&self, p: &Point) -> Result<Mat3> {
        let m = (self.eval)(p);
        if is_finite(&m) {
            Ok(m)
        } else {
            Err(Error::Domain(format!("non-finite matrix at {:?}", p.as_slice())))
        }
    }

    /// `∂_j M(p)`, analytic when available.
    pub fn partial(&self, p: &Point, j: usize) -> Result<Mat3> {
        let d = match &self.partials {
            Some(dp) => dp(p, j),
            None => self.partial_fd_raw(p, j),
        };
        if is_finite(&d) {
            Ok(d)
        } else {
            Err(Error::Domain(format!(
                "non-finite derivative along axis {j} at {:?}",
                p.as_slice()
            )))
        }
    }

    /// `∂_j M(p)` by finite differences regardless of analytic partials.
    pub fn partial_fd(&self, p: &Point, j: usize) -> Result<Mat3> {
        let d = self.partial_fd_raw(p, j);
        if is_finite(&d) {
            Ok(d)
        } else {
            Err(Error::Domain(format!(
                "non-finite difference quotient along axis {j} at {:?}",
                p.as_slice()
            )))
        }
    }

    fn partial_fd_raw(&self, p: &Point, j: usize) -> Mat3 {
        central(|q| (self.eval)(q), p, j, self.fd_step, self.scheme)
    }

    fn derived(
        &self,
        eval: impl Fn(&Point) -> Mat3 + Send + Sync + 'static,
        partials: Option<MatPartialFn>,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            partials,
            fd_step: self.fd_step,
            scheme: self.scheme,
        }
    }

    /// `p -> Q M(p)` for a constant matrix `Q`.
    pub fn left_mul(&self, q: Mat3) -> Self {
        let f = self.eval.clone();
        let dp = self
            .partials
            .clone()
            .map(|d| Arc::new(move |p: &Point, j| q * d(p, j)) as MatPartialFn);
        self.derived(move |p| q * f(p), dp)
    }

    /// `p -> M(p) Q` for a constant matrix `Q` (no change of coordinates).
    pub fn right_mul(&self, q: Mat3) -> Self {
        let f = self.eval.clone();
        let dp = self
            .partials
            .clone()
            .map(|d| Arc::new(move |p: &Point, j| d(p, j) * q) as MatPartialFn);
        self.derived(move |p| f(p) * q, dp)
    }

    /// Rotation of the reference frame: `X -> M(Q X) Q`.
    ///
    /// This is the right action `R̄ -> R̄ Q` expressed on a field; the row-wise
    /// curl transforms as `Curl -> (Curl M)(Q X) Q` for proper rotations.
    pub fn reference_rotated(&self, q: Mat3) -> Self {
        let f = self.eval.clone();
        let dp = self.partials.clone().map(|d| {
            Arc::new(move |p: &Point, j: usize| {
                let qp = q * p;
                let mut acc = Mat3::zeros();
                for k in 0..3 {
                    acc += d(&qp, k) * q[(k, j)];
                }
                acc * q
            }) as MatPartialFn
        });
        self.derived(move |p| f(&(q * p)) * q, dp)
    }

    /// `p -> -M(p)`.
    pub fn negated(&self) -> Self {
        let f = self.eval.clone();
        let dp = self
            .partials
            .clone()
            .map(|d| Arc::new(move |p: &Point, j| -d(p, j)) as MatPartialFn);
        self.derived(move |p| -f(p), dp)
    }

    /// The pullback under coordinate inversion, `p -> M(-p)`.
    pub fn inverted(&self) -> Self {
        let f = self.eval.clone();
        let dp = self
            .partials
            .clone()
            .map(|d| Arc::new(move |p: &Point, j| -d(&-p, j)) as MatPartialFn);
        self.derived(move |p| f(&-p), dp)
    }

    /// `p -> -M(-p)`, the transformation law of gradients and of their polar
    /// rotations under inversion.
    pub fn inverted_with_sign(&self) -> Self {
        self.inverted().negated()
    }

    /// A new field evaluated through `f`, differentiated by finite
    /// differences with `NESTED_STEP_FACTOR` times this field's step.
    pub fn composite(&self, f: impl Fn(&Point) -> Mat3 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            partials: None,
            fd_step: self.fd_step * NESTED_STEP_FACTOR,
            scheme: self.scheme,
        }
    }

    /// The field `p -> Curl M(p)`.
    pub fn curl_field(&self) -> Self {
        let inner = self.clone();
        self.composite(move |p| curl(&inner, p).unwrap_or_else(|_| nan_mat()))
    }
}

/// Smooth map from space to vectors, e.g. a deformation or a velocity.
#[derive(Clone)]
pub struct VectorField {
    eval: VecFn,
    partials: Option<VecPartialFn>,
    fd_step: f64,
    scheme: FdScheme,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("analytic_partials", &self.partials.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl VectorField {
    pub fn new(eval: impl Fn(&Point) -> Vec3 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            partials: None,
            fd_step: DEFAULT_FD_STEP,
            scheme: FdScheme::Central,
        }
    }

    pub fn with_partials(
        eval: impl Fn(&Point) -> Vec3 + Send + Sync + 'static,
        partials: impl Fn(&Point, usize) -> Vec3 + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            partials: Some(Arc::new(partials)),
            fd_step: DEFAULT_FD_STEP,
            scheme: FdScheme::Central,
        }
    }

    pub fn identity_map() -> Self {
        Self::with_partials(|p| *p, |_, j| axis(j))
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        assert!(h > 0.0, "fd_step must be positive");
        self.fd_step = h;
        self
    }

    pub fn with_scheme(mut self, scheme: FdScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn without_partials(mut self) -> Self {
        self.partials = None;
        self
    }

    pub fn has_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn value(&self, p: &Point) -> Vec3 {
        (self.eval)(p)
    }

    pub fn eval(&self, p: &Point) -> Result<Vec3> {
        let v = (self.eval)(p);
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Domain(format!("non-finite vector at {:?}", p.as_slice())))
        }
    }

    pub fn partial(&self, p: &Point, j: usize) -> Result<Vec3> {
        let d = match &self.partials {
            Some(dp) => dp(p, j),
            None => central(|q| (self.eval)(q), p, j, self.fd_step, self.scheme),
        };
        if d.iter().all(|x| x.is_finite()) {
            Ok(d)
        } else {
            Err(Error::Domain(format!(
                "non-finite derivative along axis {j} at {:?}",
                p.as_slice()
            )))
        }
    }

    /// `p -> Q φ(p)`.
    pub fn left_mul(&self, q: Mat3) -> Self {
        let f = self.eval.clone();
        let dp = self
            .partials
            .clone()
            .map(|d| Arc::new(move |p: &Point, j| q * d(p, j)) as VecPartialFn);
        Self {
            eval: Arc::new(move |p| q * f(p)),
            partials: dp,
            fd_step: self.fd_step,
            scheme: self.scheme,
        }
    }

    /// `X -> φ(Q X)`; its gradient is `F(Q X) Q`.
    pub fn reference_rotated(&self, q: Mat3) -> Self {
        let f = self.eval.clone();
        let dp = self.partials.clone().map(|d| {
            Arc::new(move |p: &Point, j: usize| {
                let qp = q * p;
                let mut acc = Vec3::zeros();
                for k in 0..3 {
                    acc += d(&qp, k) * q[(k, j)];
                }
                acc
            }) as VecPartialFn
        });
        Self {
            eval: Arc::new(move |p| f(&(q * p))),
            partials: dp,
            fd_step: self.fd_step,
            scheme: self.scheme,
        }
    }

    /// The pullback `p -> φ(-p)`.
    pub fn inverted(&self) -> Self {
        let f = self.eval.clone();
        let dp = self
            .partials
            .clone()
            .map(|d| Arc::new(move |p: &Point, j| -d(&-p, j)) as VecPartialFn);
        Self {
            eval: Arc::new(move |p| f(&-p)),
            partials: dp,
            fd_step: self.fd_step,
            scheme: self.scheme,
        }
    }

    /// The deformation-gradient field `p -> ∇φ(p)`.
    pub fn gradient_field(&self) -> MatrixField {
        let inner = self.clone();
        MatrixField {
            eval: Arc::new(move |p| gradient(&inner, p).unwrap_or_else(|_| nan_mat())),
            partials: None,
            fd_step: self.fd_step * NESTED_STEP_FACTOR,
            scheme: self.scheme,
        }
    }
}

fn nan_mat() -> Mat3 {
    Mat3::repeat(f64::NAN)
}

/// Deformation gradient `F_ij = ∂_j φ_i`.
pub fn gradient(phi: &VectorField, p: &Point) -> Result<Mat3> {
    let mut f = Mat3::zeros();
    for j in 0..3 {
        f.set_column(j, &phi.partial(p, j)?);
    }
    Ok(f)
}

/// Row-wise curl, `(Curl M)_ik = ε_kjl ∂_j M_il`.
pub fn curl(m: &MatrixField, p: &Point) -> Result<Mat3> {
    let d = [m.partial(p, 0)?, m.partial(p, 1)?, m.partial(p, 2)?];
    Ok(curl_from_partials(&d))
}

pub fn curl_from_partials(d: &[Mat3; 3]) -> Mat3 {
    let mut c = Mat3::zeros();
    for i in 0..3 {
        for k in 0..3 {
            let mut v = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    let e = levi_civita(k, j, l);
                    if e != 0.0 {
                        v += e * d[j][(i, l)];
                    }
                }
            }
            c[(i, k)] = v;
        }
    }
    c
}

/// Gradient of a scalar field by central differences.
pub fn scalar_gradient(f: impl Fn(&Point) -> f64, p: &Point, h: f64, scheme: FdScheme) -> Vec3 {
    Vec3::new(
        central(&f, p, 0, h, scheme),
        central(&f, p, 1, h, scheme),
        central(&f, p, 2, h, scheme),
    )
}

/// The coordinate-inversion pullback `p -> M(-p)`.
pub fn invert_field(m: &MatrixField) -> MatrixField {
    m.inverted()
}

pub fn check_orthogonal(r: &Mat3) -> Result<()> {
    let deviation = orthogonality_defect(r);
    if deviation <= ORTHOGONALITY_TOL {
        Ok(())
    } else {
        Err(Error::NotOrthogonal { deviation })
    }
}

/// Dislocation density tensor `K̄ = R̄^T Curl R̄` at `p`.
pub fn dislocation_density(rbar: &MatrixField, p: &Point) -> Result<Mat3> {
    let r = rbar.eval(p)?;
    check_orthogonal(&r)?;
    Ok(r.transpose() * curl(rbar, p)?)
}

/// Mixed curvature measures built from the polar rotation and the
/// microrotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedCurvatures {
    /// `R^T Curl R̄`
    pub l: Mat3,
    /// `R̄^T Curl R`
    pub m: Mat3,
}

pub fn mixed_curvatures(r: &MatrixField, rbar: &MatrixField, p: &Point) -> Result<MixedCurvatures> {
    let rp = r.eval(p)?;
    let rbp = rbar.eval(p)?;
    check_orthogonal(&rp)?;
    check_orthogonal(&rbp)?;
    Ok(MixedCurvatures {
        l: rp.transpose() * curl(rbar, p)?,
        m: rbp.transpose() * curl(r, p)?,
    })
}

/// Field of polar rotations `p -> polar(∇φ(p))`, valid for either sign of
/// `det F`.
pub fn polar_rotation_field(phi: &VectorField) -> MatrixField {
    let inner = phi.clone();
    let fd_step = phi.fd_step * NESTED_STEP_FACTOR;
    MatrixField {
        eval: Arc::new(move |p| {
            gradient(&inner, p)
                .and_then(|f| crate::tensor::polar_decompose_o3(&f))
                .map(|polar| polar.rotation)
                .unwrap_or_else(|_| nan_mat())
        }),
        partials: None,
        fd_step,
        scheme: phi.scheme,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_rotation_field, TrigPoly};
    use crate::tensor::{polar_decompose_o3, random_rotation, rotation_z};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planar_rotation(phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> MatrixField {
        MatrixField::new(move |p| rotation_z(phi(p.z)))
    }

    fn random_point(rng: &mut ChaCha8Rng) -> Point {
        Point::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn gradient_of_identity_map() {
        let phi = VectorField::new(|p| *p);
        let f = gradient(&phi, &Point::new(0.3, -1.2, 2.0)).unwrap();
        assert!((f - Mat3::identity()).norm() < 1e-10);
    }

    #[test]
    fn gradient_of_planar_displacement() {
        let phi = VectorField::new(|p| Vec3::new(p.x, p.y, p.z + 0.1 * p.z));
        let f = gradient(&phi, &Point::new(0.1, 0.2, 0.7)).unwrap();
        let expected = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.1));
        assert!((f - expected).norm() < 1e-10);
    }

    #[test]
    fn gradient_of_random_cubic_matches_hand_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // φ_i = Σ_j a_ij x_j + b_ij x_j^2 + c_ij x_j^3 + d_i x y z
            let a = Mat3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            let b = Mat3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            let c = Mat3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            let d = Vec3::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            let phi = VectorField::new(move |p| {
                Vec3::from_fn(|i, _| {
                    (0..3)
                        .map(|j| a[(i, j)] * p[j] + b[(i, j)] * p[j].powi(2) + c[(i, j)] * p[j].powi(3))
                        .sum::<f64>()
                        + d[i] * p.x * p.y * p.z
                })
            });
            let p = random_point(&mut rng);
            let oracle = Mat3::from_fn(|i, j| {
                let others: f64 = (0..3).filter(|&k| k != j).map(|k| p[k]).product();
                a[(i, j)] + 2.0 * b[(i, j)] * p[j] + 3.0 * c[(i, j)] * p[j].powi(2) + d[i] * others
            });
            let f = gradient(&phi, &p).unwrap();
            assert!((f - oracle).amax() < 1e-8, "{}", (f - oracle).amax());
        }
    }

    #[test]
    fn gradient_reports_domain_failure() {
        let phi = VectorField::new(|p| Vec3::new(p.x.ln(), 0.0, 0.0));
        assert!(matches!(
            gradient(&phi, &Point::new(0.0, 0.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn curl_of_constant_field_vanishes() {
        let m = MatrixField::new(|_| Mat3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0));
        assert!(curl(&m, &Point::new(0.5, 0.5, 0.5)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn curl_row_layout() {
        let m = MatrixField::new(|p| {
            let mut out = Mat3::zeros();
            out[(0, 1)] = (2.0 * p.x).sin();
            out
        });
        let p = Point::new(0.3, 0.1, -0.4);
        let c = curl(&m, &p).unwrap();
        let mut expected = Mat3::zeros();
        expected[(0, 2)] = 2.0 * (2.0 * p.x).cos();
        assert!((c - expected).norm() < 1e-7);
    }

    #[test]
    fn planar_rotation_gives_diagonal_dislocation_density() {
        let phi = |z: f64| 0.8 * z.sin() + 0.3 * z * z;
        let dphi = |z: f64| 0.8 * z.cos() + 0.6 * z;
        let rbar = planar_rotation(phi);
        for z in [-1.0, 0.0, 0.4, 2.0] {
            let p = Point::new(0.2, -0.1, z);
            let k = dislocation_density(&rbar, &p).unwrap();
            let expected = Mat3::from_diagonal(&Vec3::new(dphi(z), dphi(z), 0.0));
            assert!((k - expected).norm() < 1e-7);
        }
        let alpha = 1.7;
        let rbar = planar_rotation(move |z| alpha * z);
        let k = dislocation_density(&rbar, &Point::new(0.0, 0.0, 0.3)).unwrap();
        assert!((k - Mat3::from_diagonal(&Vec3::new(alpha, alpha, 0.0))).norm() < 1e-7);
    }

    #[test]
    fn rotation_about_z_varying_in_x() {
        // hand-differentiated: Curl R̄ has column 3 = (-β cos βx, -β sin βx, 0),
        // so K̄ = R̄^T Curl R̄ has the single entry K̄_13 = -β
        let beta = 0.9;
        let rbar = MatrixField::new(move |p| rotation_z(beta * p.x));
        let k = dislocation_density(&rbar, &Point::new(0.7, 0.2, -0.3)).unwrap();
        let mut expected = Mat3::zeros();
        expected[(0, 2)] = -beta;
        assert!((k - expected).norm() < 1e-8);
    }

    #[test]
    fn constant_rotation_has_no_dislocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rbar = MatrixField::constant(random_rotation(&mut rng));
        let k = dislocation_density(&rbar, &Point::new(1.0, 2.0, 3.0)).unwrap();
        assert!(k.norm() < 1e-14);
    }

    #[test]
    fn non_orthogonal_input_rejected() {
        let m = MatrixField::new(|_| Mat3::identity() * 1.01);
        assert!(matches!(
            dislocation_density(&m, &Point::zeros()),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn inversion_of_constant_field() {
        let c = Mat3::new(1.0, 2.0, 3.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0);
        let inv = invert_field(&MatrixField::new(move |_| c));
        assert_eq!(inv.eval(&Point::new(0.3, 0.4, 0.5)).unwrap(), c);
    }

    #[test]
    fn inverted_deformation_gradient_picks_up_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = TrigPoly::random_vector(&mut rng, 0.2, 2);
        let phi = VectorField::new(move |p| p + u.eval(p));
        let inv = phi.inverted();
        for _ in 0..10 {
            let p = random_point(&mut rng);
            let lhs = gradient(&inv, &p).unwrap();
            let rhs = -gradient(&phi, &-p).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn inversion_properties_of_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let rbar = random_rotation_field(&mut rng, 0.8, 2);
            // exercise both the analytic and the finite-difference paths
            let rbar = if trial % 2 == 0 { rbar } else { rbar.without_partials() };
            let p = random_point(&mut rng);
            let k_minus = dislocation_density(&rbar, &-p).unwrap();

            // pullback and signed inversion both flip K̄
            let k_pull = dislocation_density(&rbar.inverted(), &p).unwrap();
            let k_sign = dislocation_density(&rbar.inverted_with_sign(), &p).unwrap();
            assert!((k_pull + k_minus).norm() <= 1e-6, "{}", (k_pull + k_minus).norm());
            assert!((k_sign + k_minus).norm() <= 1e-6);

            // curl removes the inversion sign
            let c_sign = curl(&rbar.inverted_with_sign(), &p).unwrap();
            let c_minus = curl(&rbar, &-p).unwrap();
            assert!((c_sign - c_minus).norm() <= 1e-6);
        }
    }

    #[test]
    fn stretch_invariant_and_rotation_flips_under_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u = TrigPoly::random_vector(&mut rng, 0.2, 2);
            let q = random_rotation(&mut rng);
            let phi = VectorField::new(move |p| q * (p + u.eval(p)));
            let p = random_point(&mut rng);
            let f_inv = gradient(&phi.inverted(), &p).unwrap();
            let f_ref = gradient(&phi, &-p).unwrap();
            let inv = polar_decompose_o3(&f_inv).unwrap();
            let reference = polar_decompose_o3(&f_ref).unwrap();
            assert!((inv.stretch - reference.stretch).norm() < 1e-9);
            assert!((inv.rotation + reference.rotation).norm() < 1e-9);
            assert!((inv.rotation.determinant() + 1.0).abs() < 1e-9);

            let rf = polar_rotation_field(&phi);
            let rf_inv = polar_rotation_field(&phi.inverted());
            let lhs = rf_inv.eval(&p).unwrap();
            let rhs = -rf.eval(&-p).unwrap();
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }

    #[test]
    fn mixed_curvature_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rbar = random_rotation_field(&mut rng, 0.7, 2);
        let p = random_point(&mut rng);
        let k = dislocation_density(&rbar, &p).unwrap();
        let mc = mixed_curvatures(&rbar, &rbar, &p).unwrap();
        assert!((mc.l - k).norm() < 1e-12);
        assert!((mc.m - k).norm() < 1e-12);

        let planar = planar_rotation(|z| z.sin());
        let ident = MatrixField::constant(Mat3::identity());
        let mc = mixed_curvatures(&ident, &planar, &p).unwrap();
        assert!((mc.l - curl(&planar, &p).unwrap()).norm() < 1e-12);
        assert!(mc.m.norm() < 1e-12);
    }

    #[test]
    fn mixed_curvatures_right_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let r = random_rotation_field(&mut rng, 0.6, 2);
            let rbar = random_rotation_field(&mut rng, 0.6, 2);
            let q2 = random_rotation(&mut rng);
            let p = random_point(&mut rng);
            let base = mixed_curvatures(&r, &rbar, &(q2 * p)).unwrap();
            let rot = mixed_curvatures(&r.reference_rotated(q2), &rbar.reference_rotated(q2), &p)
                .unwrap();
            assert!((rot.l - q2.transpose() * base.l * q2).norm() < 1e-10);
            assert!((rot.m - q2.transpose() * base.m * q2).norm() < 1e-10);

            // same identity through finite differences
            let rot_fd = mixed_curvatures(
                &r.reference_rotated(q2).without_partials(),
                &rbar.reference_rotated(q2).without_partials(),
                &p,
            )
            .unwrap();
            assert!((rot_fd.l - q2.transpose() * base.l * q2).norm() < 1e-6);
        }
    }

    #[test]
    fn analytic_partials_agree_with_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let rbar = random_rotation_field(&mut rng, 1.0, 3);
            let p = random_point(&mut rng);
            for j in 0..3 {
                let a = rbar.partial(&p, j).unwrap();
                let d = rbar.partial_fd(&p, j).unwrap();
                assert!((a - d).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn richardson_improves_difference_accuracy() {
        let m = MatrixField::new(|p| Mat3::identity() * (3.0 * p.y).sin()).with_fd_step(1e-2);
        let p = Point::new(0.0, 0.4, 0.0);
        let exact = 3.0 * (1.2f64).cos();
        let central = m.partial(&p, 1).unwrap()[(0, 0)];
        let rich = m
            .clone()
            .with_scheme(FdScheme::Richardson)
            .partial(&p, 1)
            .unwrap()[(0, 0)];
        assert!((rich - exact).abs() < 0.01 * (central - exact).abs());
    }
}
