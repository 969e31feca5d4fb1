//! Dense 3×3 linear algebra on top of nalgebra's fixed-size types.
//!
//! Everything here is a pure function of value types. The polar
//! decomposition is the only iterative routine; it uses the scaled Newton
//! iteration `R <- (γR + R^{-T}/γ)/2`, which converges to the orthogonal
//! polar factor of any nonsingular matrix and preserves the sign of the
//! determinant.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

const POLAR_TOL: f64 = 1e-12;
const POLAR_MAX_ITER: usize = 100;
const UNIT_AXIS_TOL: f64 = 1e-12;

/// Symmetric, skew and deviatoric parts of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub sym: Mat3,
    pub skew: Mat3,
    pub dev: Mat3,
    pub trace: f64,
}

pub fn sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

pub fn skew(m: &Mat3) -> Mat3 {
    (m - m.transpose()) * 0.5
}

pub fn dev(m: &Mat3) -> Mat3 {
    m - Mat3::identity() * (m.trace() / 3.0)
}

pub fn decompose(m: &Mat3) -> Decomposition {
    Decomposition {
        sym: sym(m),
        skew: skew(m),
        dev: dev(m),
        trace: m.trace(),
    }
}

/// Frobenius inner product `A : B = Σ A_ij B_ij`.
pub fn frobenius(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// Levi-Civita symbol for indices in `0..3`.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Skew matrix `[w]×` with `[w]× v = w × v`.
pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rotation about the unit axis `n` by `angle` radians:
/// `R_iL = δ_iL cos φ + ε_ijL n_j sin φ + (1 - cos φ) n_i n_L`.
pub fn axis_angle(n: &Vec3, angle: f64) -> Result<Mat3> {
    let norm = n.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(Error::InvalidInput(format!(
            "rotation axis must be a unit vector, |n| = {norm}"
        )));
    }
    Ok(axis_angle_unchecked(n, angle))
}

fn axis_angle_unchecked(n: &Vec3, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let mut r = Mat3::zeros();
    for i in 0..3 {
        for l in 0..3 {
            let mut v = (1.0 - c) * n[i] * n[l];
            if i == l {
                v += c;
            }
            for j in 0..3 {
                v += levi_civita(i, j, l) * n[j] * s;
            }
            r[(i, l)] = v;
        }
    }
    r
}

/// Exponential map of a rotation vector (axis times angle).
pub fn rotation_from_vector(w: &Vec3) -> Mat3 {
    let angle = w.norm();
    if angle < 1e-300 {
        return Mat3::identity();
    }
    axis_angle_unchecked(&(w / angle), angle)
}

/// Rotation about the z axis, the planar microrotation.
pub fn rotation_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `|R^T R - I|_F`.
pub fn orthogonality_defect(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

pub fn is_finite(m: &Mat3) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Uniformly distributed rotation (Shoemake's unit-quaternion method).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let u3: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos());
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Polar factors `F = R U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub rotation: Mat3,
    pub stretch: Mat3,
    pub iterations: usize,
}

/// Polar decomposition of a deformation gradient with `det F > 0`.
pub fn polar_decompose(f: &Mat3) -> Result<Polar> {
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(Error::SingularDeformation { det });
    }
    polar_decompose_o3(f)
}

/// Polar decomposition of any nonsingular matrix; the orthogonal factor
/// lies in O(3) and carries the sign of `det F`.
pub fn polar_decompose_o3(f: &Mat3) -> Result<Polar> {
    if !is_finite(f) {
        return Err(Error::InvalidInput("non-finite matrix".into()));
    }
    let scale = f.norm();
    let det = f.determinant();
    if scale == 0.0 || det.abs() <= 1e-300 * scale.powi(3) {
        return Err(Error::SingularDeformation { det });
    }

    let mut r = *f;
    let mut residual = f64::INFINITY;
    for it in 1..=POLAR_MAX_ITER {
        let inv_t = r
            .try_inverse()
            .ok_or(Error::SingularDeformation { det })?
            .transpose();
        // Frobenius-norm scaling accelerates the early iterations; it is
        // switched off near convergence where it no longer helps.
        let gamma = if residual > 1e-2 {
            (inv_t.norm() / r.norm()).sqrt()
        } else {
            1.0
        };
        let next = (r * gamma + inv_t / gamma) * 0.5;
        residual = (next - r).norm() / next.norm();
        r = next;
        if residual <= POLAR_TOL {
            let stretch = sym(&(r.transpose() * f));
            return Ok(Polar {
                rotation: r,
                stretch,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: POLAR_MAX_ITER,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_mat(rng: &mut ChaCha8Rng) -> Mat3 {
        Mat3::from_fn(|_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn decompose_identity() {
        let d = decompose(&Mat3::identity());
        assert_eq!(d.sym, Mat3::identity());
        assert_eq!(d.skew, Mat3::zeros());
        assert_eq!(d.dev, Mat3::zeros());
        assert_eq!(d.trace, 3.0);
    }

    #[test]
    fn decompose_single_off_diagonal() {
        let mut m = Mat3::zeros();
        m[(0, 1)] = 1.0;
        let d = decompose(&m);
        assert_eq!(d.sym[(0, 1)], 0.5);
        assert_eq!(d.sym[(1, 0)], 0.5);
        assert_eq!(d.skew[(0, 1)], 0.5);
        assert_eq!(d.skew[(1, 0)], -0.5);
        assert_eq!(d.trace, 0.0);
    }

    #[test]
    fn decompose_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_mat(&mut rng);
            let d = decompose(&m);
            // direct recomputation
            let sym = Mat3::from_fn(|i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
            let skw = Mat3::from_fn(|i, j| 0.5 * (m[(i, j)] - m[(j, i)]));
            assert!((d.sym - sym).norm() < 1e-15);
            assert!((d.skew - skw).norm() < 1e-15);
            assert!((d.sym + d.skew - m).norm() < 1e-14);
            assert!(d.dev.trace().abs() < 1e-14);
        }
    }

    #[test]
    fn frobenius_cases() {
        let i = Mat3::identity();
        assert_eq!(frobenius(&i, &i), 3.0);
        assert_eq!(frobenius(&i, &Mat3::zeros()), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = random_mat(&mut rng);
            let b = random_mat(&mut rng);
            let oracle = (a.transpose() * b).trace();
            assert!((frobenius(&a, &b) - oracle).abs() < 1e-13);
            assert!((frobenius(&a, &a) - a.norm_squared()).abs() < 1e-13);
        }
    }

    #[test]
    fn axis_angle_cases() {
        let n = Vec3::new(1.0, 2.0, 2.0) / 3.0;
        assert!((axis_angle(&n, 0.0).unwrap() - Mat3::identity()).norm() < 1e-15);

        let z = Vec3::z();
        let q = axis_angle(&z, FRAC_PI_2).unwrap();
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((q - expected).norm() < 1e-15);

        for phi in [0.3, -1.1, 2.5] {
            let r = axis_angle(&z, phi).unwrap();
            assert!((r - rotation_z(phi)).norm() < 1e-15);
        }

        let r = axis_angle(&n, 0.7).unwrap();
        assert!(orthogonality_defect(&r) < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn axis_angle_rejects_non_unit_axis() {
        let err = axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.2).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn polar_identity_and_planar_stretch() {
        let p = polar_decompose(&Mat3::identity()).unwrap();
        assert!((p.rotation - Mat3::identity()).norm() < 1e-14);
        assert!((p.stretch - Mat3::identity()).norm() < 1e-14);

        let f = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.3));
        let p = polar_decompose(&f).unwrap();
        assert!((p.rotation - Mat3::identity()).norm() < 1e-14);
        assert!((p.stretch - f).norm() < 1e-14);
    }

    #[test]
    fn polar_recovers_constructed_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 0.5));
        for _ in 0..20 {
            let q = random_rotation(&mut rng);
            let p = polar_decompose(&(q * d)).unwrap();
            assert!((p.rotation - q).norm() < 1e-12);
            assert!((p.stretch - d).norm() < 1e-12);
        }
    }

    #[test]
    fn polar_rejects_nonpositive_determinant() {
        let f = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            polar_decompose(&f),
            Err(Error::SingularDeformation { .. })
        ));
        assert!(matches!(
            polar_decompose(&Mat3::zeros()),
            Err(Error::SingularDeformation { .. })
        ));
        // the O(3) variant accepts it and keeps the reflection in R
        let p = polar_decompose_o3(&f).unwrap();
        assert!((p.rotation.determinant() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn o3_classification() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let w = Vec3::from_fn(|_, _| rng.gen_range(-PI..PI));
            let r = rotation_from_vector(&w);
            assert!((r.determinant() - 1.0).abs() < 1e-13);
            assert!(((-r).determinant() + 1.0).abs() < 1e-13);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit_axis() -> impl Strategy<Value = Vec3> {
            (0.0..PI, 0.0..std::f64::consts::TAU).prop_map(|(theta, phi)| {
                Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
            })
        }

        proptest! {
            #[test]
            fn axis_angle_inverse(n in unit_axis(), angle in -10.0..10.0f64) {
                let prod = axis_angle(&n, angle).unwrap() * axis_angle(&n, -angle).unwrap();
                prop_assert!((prod - Mat3::identity()).norm() < 1e-12);
            }

            #[test]
            fn decompose_parts(entries in proptest::array::uniform9(-1e3..1e3f64)) {
                let m = Mat3::from_row_slice(&entries);
                let d = decompose(&m);
                let scale = m.norm().max(1.0);
                prop_assert!((d.sym - d.sym.transpose()).norm() == 0.0);
                prop_assert!((d.skew + d.skew.transpose()).norm() == 0.0);
                prop_assert!(d.dev.trace().abs() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn polar_recomposes_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut count = 0;
        while count < 1000 {
            let f = random_mat(&mut rng);
            if f.determinant() <= 1e-3 {
                continue;
            }
            let p = polar_decompose(&f).unwrap();
            assert!((p.rotation * p.stretch - f).norm() <= 1e-10 * f.norm());
            assert!(orthogonality_defect(&p.rotation) < 1e-12);
            assert!(p.stretch.symmetric_eigenvalues().min() > 0.0);
            count += 1;
        }
    }
}
