//! Real orthonormal spherical-harmonic basis of degree n.
//!
//! The basis is indexed k = -n..=n with
//!     Y_0(θ,φ)   = N̄_n^0(cos θ)            (zonal, = sqrt(2n+1) P_n(cos θ))
//!     Y_{+k}     = sqrt(2) N̄_n^k(cos θ) cos(kφ)
//!     Y_{-k}     = sqrt(2) N̄_n^k(cos θ) sin(kφ)
//! which is orthonormal for the uniform probability measure on the sphere
//! and satisfies the addition theorem
//!     (2n+1)^{-1} Σ_k Y_k(x) Y_k(y) = P_n(cos Θ(x,y)).
//!
//! A second kind replaces the (k=0, k=1) pair by its rotation
//!     Ỹ_0 = (Y_0 + Y_1)/√2,  Ỹ_1 = (Y_0 - Y_1)/√2,
//! used by the basis-dependence demonstration at the pole.

use crate::error::{Error, Result};
use crate::specfn::{assoc_legendre_norm_row, assoc_legendre_norm_row_theta, legendre_p_unchecked};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// Pole rows are evaluated at θ clamped here so that orthonormal-frame
/// φ-derivatives (which divide by sin θ) stay finite.
const POLE_CLAMP: f64 = 1e-8;

/// Point on the unit sphere in colatitude/longitude coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    /// Colatitude in [0, π].
    pub theta: f64,
    /// Longitude in [0, 2π).
    pub phi: f64,
}

impl SpherePoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::domain(format!("colatitude {theta} outside [0, pi]")));
        }
        if !phi.is_finite() {
            return Err(Error::domain(format!("longitude {phi} not finite")));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Ok(SpherePoint { theta, phi: phi.rem_euclid(tau) })
    }

    pub const fn north_pole() -> Self {
        SpherePoint { theta: 0.0, phi: 0.0 }
    }

    pub fn to_unit_vector(self) -> [f64; 3] {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        [st * cp, st * sp, ct]
    }

    pub fn from_unit_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / norm).clamp(-1.0, 1.0).acos();
        let phi = v[1].atan2(v[0]).rem_euclid(2.0 * std::f64::consts::PI);
        SpherePoint { theta, phi }
    }

    /// Angle Θ(x, y) in [0, π], computed through atan2 for stability near 0 and π.
    pub fn angle_to(self, other: SpherePoint) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cx = a[1] * b[2] - a[2] * b[1];
        let cy = a[2] * b[0] - a[0] * b[2];
        let cz = a[0] * b[1] - a[1] * b[0];
        let cross = (cx * cx + cy * cy + cz * cz).sqrt();
        cross.atan2(dot)
    }
}

/// Which degree-n basis to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Standard,
    /// Standard basis with the (k=0, k=1) pair rotated by 45°.
    PoleRotatedPair,
}

/// Degree-n real orthonormal basis, immutable after construction.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    degree: usize,
    kind: BasisKind,
}

/// Basis evaluation at a point: values, θ-derivatives and orthonormal-frame
/// φ-derivatives (already divided by sin θ) for all 2n+1 functions,
/// indexed by k + n.
pub struct BasisEval {
    pub values: Vec<f64>,
    pub d_theta: Vec<f64>,
    pub d_phi_frame: Vec<f64>,
}

pub fn build_basis(n: usize, kind: BasisKind) -> Result<HarmonicBasis> {
    if n == 0 {
        return Err(Error::config("unsupported degree: n >= 1 required".to_string()));
    }
    Ok(HarmonicBasis { degree: n, kind })
}

impl HarmonicBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        2 * self.degree + 1
    }

    /// Index of basis function k in the output vectors.
    pub fn index_of(&self, k: isize) -> usize {
        (k + self.degree as isize) as usize
    }

    /// Evaluate all 2n+1 basis functions at p. Σ of squares = 2n+1.
    pub fn eval(&self, p: SpherePoint) -> Vec<f64> {
        let n = self.degree;
        let row = assoc_legendre_norm_row(n, p.theta.cos());
        let mut out = vec![0.0; 2 * n + 1];
        out[n] = row[0];
        // cos(kφ), sin(kφ) by angle-addition recurrence
        let (s1, c1) = (p.phi.sin(), p.phi.cos());
        let (mut sk, mut ck) = (0.0, 1.0);
        for k in 1..=n {
            let c_next = ck * c1 - sk * s1;
            let s_next = sk * c1 + ck * s1;
            ck = c_next;
            sk = s_next;
            out[n + k] = SQRT_2 * row[k] * ck;
            out[n - k] = SQRT_2 * row[k] * sk;
        }
        self.apply_pair_rotation_values(&mut out);
        out
    }

    /// Values together with gradient components in the orthonormal frame
    /// (e_θ, e_φ): grad Y = (∂_θ Y) e_θ + (∂_φ Y / sin θ) e_φ.
    pub fn eval_grad(&self, p: SpherePoint) -> BasisEval {
        let n = self.degree;
        let theta = p.theta.clamp(POLE_CLAMP, std::f64::consts::PI - POLE_CLAMP);
        let (row, drow) = assoc_legendre_norm_row_theta(n, theta);
        let sin_t = theta.sin();
        let mut values = vec![0.0; 2 * n + 1];
        let mut d_theta = vec![0.0; 2 * n + 1];
        let mut d_phi = vec![0.0; 2 * n + 1];
        values[n] = row[0];
        d_theta[n] = drow[0];
        let (s1, c1) = (p.phi.sin(), p.phi.cos());
        let (mut sk, mut ck) = (0.0, 1.0);
        for k in 1..=n {
            let c_next = ck * c1 - sk * s1;
            let s_next = sk * c1 + ck * s1;
            ck = c_next;
            sk = s_next;
            let kf = k as f64;
            values[n + k] = SQRT_2 * row[k] * ck;
            values[n - k] = SQRT_2 * row[k] * sk;
            d_theta[n + k] = SQRT_2 * drow[k] * ck;
            d_theta[n - k] = SQRT_2 * drow[k] * sk;
            d_phi[n + k] = -SQRT_2 * row[k] * kf * sk / sin_t;
            d_phi[n - k] = SQRT_2 * row[k] * kf * ck / sin_t;
        }
        self.apply_pair_rotation_values(&mut values);
        self.apply_pair_rotation_values(&mut d_theta);
        self.apply_pair_rotation_values(&mut d_phi);
        BasisEval { values, d_theta, d_phi_frame: d_phi }
    }

    fn apply_pair_rotation_values(&self, out: &mut [f64]) {
        if self.kind == BasisKind::PoleRotatedPair {
            let n = self.degree;
            let y0 = out[n];
            let y1 = out[n + 1];
            out[n] = (y0 + y1) / SQRT_2;
            out[n + 1] = (y0 - y1) / SQRT_2;
        }
    }
}

/// Point at geodesic distance `dist` from `x` along the bearing `alpha`
/// (bearing 0 points toward increasing θ, π/2 toward increasing φ).
pub fn geodesic_offset(x: SpherePoint, dist: f64, alpha: f64) -> SpherePoint {
    let (st, ct) = (x.theta.sin(), x.theta.cos());
    let (sp, cp) = (x.phi.sin(), x.phi.cos());
    let (sd, cd) = (dist.sin(), dist.cos());
    let u = [sd * alpha.cos(), sd * alpha.sin(), cd];
    // Rz(φ) Ry(θ) applied to u
    SpherePoint::from_unit_vector([
        ct * cp * u[0] - sp * u[1] + st * cp * u[2],
        ct * sp * u[0] + cp * u[1] + st * sp * u[2],
        -st * u[0] + ct * u[2],
    ])
}

/// Normalized two-point function of the degree-n ensemble,
/// (2n+1)^{-1} Σ_k Y_k(x) Y_k(y) = P_n(cos Θ).
pub fn two_point(n: usize, theta_angle: f64) -> f64 {
    legendre_p_unchecked(n, theta_angle.cos().clamp(-1.0, 1.0))
}
