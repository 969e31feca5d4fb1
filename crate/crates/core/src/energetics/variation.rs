use crate::error::Result;
use crate::field::{check_orthogonal, curl, scalar_gradient, MatrixField, Point};
use crate::tensor::{levi_civita, Mat3};

use super::MaterialParams;

/// Derivative of the elastic density with respect to `F`:
/// `A = μ(R̄ Fᵀ R̄ + F) - (2μ+3λ) R̄ + λ tr(R̄ᵀF) R̄`.
pub fn variation_a(f: &Mat3, rbar: &Mat3, params: &MaterialParams) -> Result<Mat3> {
    check_orthogonal(rbar)?;
    let (mu, la) = (params.mu, params.lambda);
    Ok(mu * (rbar * f.transpose() * rbar + f) - (2.0 * mu + 3.0 * la) * rbar
        + la * (rbar.transpose() * f).trace() * rbar)
}

/// The contributions to the microrotation variation `B`, kept apart for
/// diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BParts {
    pub chiral: Mat3,
    pub elastic: Mat3,
    pub curvature: Mat3,
    pub inertia: Mat3,
}

impl BParts {
    pub fn total(&self) -> Mat3 {
        self.chiral + self.elastic + self.curvature + self.inertia
    }

    /// Everything except the inertia term.
    pub fn static_part(&self) -> Mat3 {
        self.chiral + self.elastic + self.curvature
    }
}

/// Assembled variation `B` of the energy with respect to the microrotation.
///
/// Only `B : R̄Ω` for skew `Ω` is meaningful: the formula omits terms that
/// are orthogonal to the tangent space of SO(3) at `R̄`.
pub fn variation_b(
    rbar: &MatrixField,
    f: &MatrixField,
    rbar_ddot: &Mat3,
    params: &MaterialParams,
    p: &Point,
) -> Result<Mat3> {
    Ok(variation_b_parts(rbar, f, rbar_ddot, params, p)?.total())
}

pub fn variation_b_parts(
    rbar: &MatrixField,
    f: &MatrixField,
    rbar_ddot: &Mat3,
    params: &MaterialParams,
    p: &Point,
) -> Result<BParts> {
    let r = rbar.eval(p)?;
    check_orthogonal(&r)?;
    let fp = f.eval(p)?;
    let c = curl(rbar, p)?;
    let k = r.transpose() * c;
    let k2 = k * k;

    let (mu, la) = (params.mu, params.lambda);
    let (k1, k2c, k3) = (params.kappa1, params.kappa2, params.kappa3);

    let chiral = if params.chi != 0.0 {
        let inner = rbar.clone();
        let g = rbar.composite(move |x| {
            let rx = inner.value(x);
            let kx = rx.transpose() * curl(&inner, x).unwrap_or(Mat3::repeat(f64::NAN));
            rx * (kx * kx).transpose()
        });
        3.0 * params.chi * (c * k2 + curl(&g, p)?)
    } else {
        Mat3::zeros()
    };

    let elastic = mu * fp * r.transpose() * fp - (2.0 * mu + 3.0 * la) * fp
        + la * (r.transpose() * fp).trace() * fp;

    let mut curvature = Mat3::zeros();
    if k1 - k2c != 0.0 {
        let inner = rbar.clone();
        let g = rbar.composite(move |x| {
            let rx = inner.value(x);
            let cx = curl(&inner, x).unwrap_or(Mat3::repeat(f64::NAN));
            rx * cx.transpose() * rx
        });
        curvature += (k1 - k2c) * (c * r.transpose() * c + curl(&g, p)?);
    }
    if k1 + k2c != 0.0 {
        curvature += (k1 + k2c) * curl(&rbar.curl_field(), p)?;
    }
    let k13 = k1 / 3.0 - k3;
    if k13 != 0.0 {
        let inner = rbar.clone();
        let tr_k = move |x: &Point| {
            let rx = inner.value(x);
            (rx.transpose() * curl(&inner, x).unwrap_or(Mat3::repeat(f64::NAN))).trace()
        };
        let h = rbar.fd_step() * crate::field::NESTED_STEP_FACTOR;
        let grad = scalar_gradient(tr_k, p, h, rbar.scheme());
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(crate::Error::Domain(format!(
                "non-finite curvature trace gradient at {:?}",
                p.as_slice()
            )));
        }
        let mut star = Mat3::zeros();
        for i in 0..3 {
            for kk in 0..3 {
                star[(i, kk)] = (0..3).map(|j| levi_civita(i, j, kk) * grad[j]).sum();
            }
        }
        curvature -= k13 * (4.0 * k.trace() * c - 2.0 * r * star);
    }

    Ok(BParts {
        chiral,
        elastic,
        curvature,
        inertia: 2.0 * params.rho_rot * rbar_ddot,
    })
}

/// `skew(R̄ᵀB)`, the part of `B` that pairs with rotation-compatible
/// perturbations `δR̄ = R̄Ω`.
pub fn tangent_projection(rbar: &Mat3, b: &Mat3) -> Mat3 {
    crate::tensor::skew(&(rbar.transpose() * b))
}
