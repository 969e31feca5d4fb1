//! Random smooth test fields built from trigonometric polynomials with
//! integer wave vectors, so that they are periodic on `[0, 2π)^3` and have
//! exact analytic derivatives.

use rand::Rng;

use crate::field::{MatrixField, Point, VectorField};
use crate::tensor::{random_rotation, Mat3, Vec3};

/// `f(x) = c + Σ a_k sin(k·x + θ_k)` with integer `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub offset: f64,
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: Vec3,
    pub amplitude: f64,
    pub phase: f64,
}

impl TrigPoly {
    /// A few random modes with `|k_i| <= kmax` and amplitudes summing to at
    /// most `amplitude`.
    pub fn random<R: Rng>(rng: &mut R, amplitude: f64, kmax: i32) -> Self {
        let n = rng.gen_range(2..=4);
        let modes = (0..n)
            .map(|_| {
                let mut k = Vec3::zeros();
                while k == Vec3::zeros() {
                    k = Vec3::from_fn(|_, _| rng.gen_range(-kmax..=kmax) as f64);
                }
                Mode {
                    k,
                    amplitude: amplitude / n as f64 * rng.gen_range(-1.0..1.0),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        Self {
            offset: rng.gen_range(-amplitude..amplitude),
            modes,
        }
    }

    pub fn random_vector<R: Rng>(rng: &mut R, amplitude: f64, kmax: i32) -> TrigVec {
        TrigVec([
            Self::random(rng, amplitude, kmax),
            Self::random(rng, amplitude, kmax),
            Self::random(rng, amplitude, kmax),
        ])
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.offset
            + self
                .modes
                .iter()
                .map(|m| m.amplitude * (m.k.dot(p) + m.phase).sin())
                .sum::<f64>()
    }

    pub fn gradient(&self, p: &Point) -> Vec3 {
        self.modes
            .iter()
            .map(|m| m.k * (m.amplitude * (m.k.dot(p) + m.phase).cos()))
            .fold(Vec3::zeros(), |acc, v| acc + v)
    }
}

/// Three independent trigonometric polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigVec(pub [TrigPoly; 3]);

impl TrigVec {
    pub fn eval(&self, p: &Point) -> Vec3 {
        Vec3::new(self.0[0].eval(p), self.0[1].eval(p), self.0[2].eval(p))
    }

    /// `J_ij = ∂_j u_i`.
    pub fn jacobian(&self, p: &Point) -> Mat3 {
        let mut j = Mat3::zeros();
        for i in 0..3 {
            j.set_row(i, &self.0[i].gradient(p).transpose());
        }
        j
    }
}

fn rz(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0),
    )
}

fn ry(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Mat3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s),
    )
}

fn rx(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Mat3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s),
    )
}

/// Rotation field `R0 · R_z(a(x)) R_y(b(x)) R_x(c(x))` with random
/// trigonometric angle fields and analytic partials.
pub fn random_rotation_field<R: Rng>(rng: &mut R, amplitude: f64, kmax: i32) -> MatrixField {
    let r0 = random_rotation(rng);
    let angles = TrigPoly::random_vector(rng, amplitude, kmax);
    let ang = angles.clone();
    MatrixField::with_partials(
        move |p| {
            let w = ang.eval(p);
            r0 * rz(w[0]).0 * ry(w[1]).0 * rx(w[2]).0
        },
        move |p, j| {
            let w = angles.eval(p);
            let jac = angles.jacobian(p);
            let (z, dz) = rz(w[0]);
            let (y, dy) = ry(w[1]);
            let (x, dx) = rx(w[2]);
            r0 * (dz * y * x * jac[(0, j)] + z * dy * x * jac[(1, j)] + z * y * dx * jac[(2, j)])
        },
    )
}

/// Deformation `x -> G x + u(x)` with a trigonometric displacement `u`.
pub fn random_deformation<R: Rng>(rng: &mut R, linear: Mat3, amplitude: f64, kmax: i32) -> VectorField {
    let u = TrigPoly::random_vector(rng, amplitude, kmax);
    let du = u.clone();
    VectorField::with_partials(
        move |p| linear * p + u.eval(p),
        move |p, j| linear.column(j) + du.jacobian(p).column(j),
    )
}

/// Random vector field with analytic partials, e.g. a velocity.
pub fn random_vector_field<R: Rng>(rng: &mut R, amplitude: f64, kmax: i32) -> VectorField {
    random_deformation(rng, Mat3::zeros(), amplitude, kmax)
}
