//! Coefficient sampling and assembly of the random field
//!     f_n(x) = (2n+1)^{-1/2} Σ_k a_k Y_k(x)
//! together with its rescaled local patches F_x(y) = f(exp_x(R y / n)).

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, HarmonicBasis, SpherePoint};
use crate::error::{Error, Result};

/// Maximum allowed R/n for patch specs; keeps the exponential map well
/// inside its injectivity radius even on the |y| <= 2 evaluation ring
/// (2 · R/n < 1 radian, far from the antipodal cut at π).
pub const INJECTIVITY_MARGIN: f64 = 0.5;

// ---------------------------------------------------------------------------
// Counter-based random streams
// ---------------------------------------------------------------------------
//
// Every random draw in the pipeline is a pure function of
// (master seed, trial index, counter, lane), so coefficient vectors are
// order-independent and the whole pipeline replays bit-identically.

fn splitmix_round(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Statelessly mix a master seed with up to three counters.
pub fn mix_seed(master: u64, a: u64, b: u64, c: u64) -> u64 {
    let z = master
        ^ a.wrapping_mul(0x9e3779b97f4a7c15)
        ^ b.wrapping_mul(0xd6e8feb86659fd93)
        ^ c.wrapping_mul(0xa0761d6478bd642f);
    splitmix_round(splitmix_round(z.wrapping_add(0x2545f4914f6cdd1d)))
}

/// Per-trial seed derived from the master seed.
pub fn trial_seed(master: u64, trial_index: u64) -> u64 {
    mix_seed(master, trial_index, 0x7261_6e64, 0)
}

/// Uniform in (0, 1), counter-based.
fn u01(seed: u64, counter: u64, lane: u64) -> f64 {
    let z = mix_seed(seed, counter, lane, 0x756e_6966);
    ((z >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

// ---------------------------------------------------------------------------
// Coefficient distributions
// ---------------------------------------------------------------------------

/// A named coefficient law with mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientDistribution {
    Gaussian,
    /// Uniform on {-1, +1}.
    Rademacher,
    /// Uniform on [-sqrt(3), sqrt(3)].
    Uniform,
    /// sqrt((1-p)/p) with probability p, -sqrt(p/(1-p)) otherwise.
    TwoPointAsymmetric { p: f64 },
}

impl CoefficientDistribution {
    pub fn two_point(p: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::domain(format!("two-point parameter p in (0,1) required, got {p}")));
        }
        Ok(CoefficientDistribution::TwoPointAsymmetric { p })
    }

    /// Draw the coefficient with the given counter from this law.
    fn draw(self, seed: u64, counter: u64) -> f64 {
        match self {
            CoefficientDistribution::Gaussian => {
                let u1 = u01(seed, counter, 0);
                let u2 = u01(seed, counter, 1);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            }
            CoefficientDistribution::Rademacher => {
                if u01(seed, counter, 0) < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            CoefficientDistribution::Uniform => {
                let s = 3.0_f64.sqrt();
                (2.0 * u01(seed, counter, 0) - 1.0) * s
            }
            CoefficientDistribution::TwoPointAsymmetric { p } => {
                if u01(seed, counter, 0) < p {
                    ((1.0 - p) / p).sqrt()
                } else {
                    -(p / (1.0 - p)).sqrt()
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            CoefficientDistribution::Gaussian => "gaussian".to_string(),
            CoefficientDistribution::Rademacher => "rademacher".to_string(),
            CoefficientDistribution::Uniform => "uniform".to_string(),
            CoefficientDistribution::TwoPointAsymmetric { p } => format!("two-point({p})"),
        }
    }
}

impl std::str::FromStr for CoefficientDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => Ok(CoefficientDistribution::Gaussian),
            "rademacher" => Ok(CoefficientDistribution::Rademacher),
            "uniform" => Ok(CoefficientDistribution::Uniform),
            _ => {
                // two-point(p), two-point:p, two-point-asymmetric(p)
                let rest = s
                    .strip_prefix("two-point-asymmetric")
                    .or_else(|| s.strip_prefix("two-point"))
                    .ok_or_else(|| Error::config(format!("unknown distribution `{s}`")))?;
                let p_str = rest.trim_matches(|c| c == '(' || c == ')' || c == ':' || c == '=');
                let p: f64 = p_str
                    .parse()
                    .map_err(|_| Error::config(format!("bad two-point parameter `{p_str}`")))?;
                CoefficientDistribution::two_point(p)
            }
        }
    }
}

/// 2n+1 i.i.d. draws; identical (dist, n, seed) gives the identical vector,
/// and coefficient i never depends on coefficient j.
pub fn sample_coefficients(dist: CoefficientDistribution, n: usize, seed: u64) -> Vec<f64> {
    (0..2 * n + 1).map(|i| dist.draw(seed, i as u64)).collect()
}

// ---------------------------------------------------------------------------
// Random field
// ---------------------------------------------------------------------------

/// Degree-n random eigenfunction with frozen coefficients; immutable after
/// construction, evaluation is safe from any thread.
#[derive(Debug, Clone)]
pub struct RandomField {
    basis: HarmonicBasis,
    coeffs: Vec<f64>,
    normalizer: f64,
}

pub fn build_field(n: usize, basis: HarmonicBasis, coeffs: Vec<f64>) -> Result<RandomField> {
    if basis.degree() != n {
        return Err(Error::config(format!(
            "basis degree {} does not match field degree {n}",
            basis.degree()
        )));
    }
    if coeffs.len() != 2 * n + 1 {
        return Err(Error::Dimension { expected: 2 * n + 1, got: coeffs.len() });
    }
    let normalizer = 1.0 / ((2 * n + 1) as f64).sqrt();
    Ok(RandomField { basis, coeffs, normalizer })
}

impl RandomField {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &HarmonicBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Coefficients re-expressed in the standard basis. For the rotated-pair
    /// kind the 45° rotation is folded into (a_0, a_1); grid fast paths can
    /// then always evaluate against the standard basis.
    pub fn standard_coeffs(&self) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        if self.basis.kind() == BasisKind::PoleRotatedPair {
            let n = self.degree();
            let s = std::f64::consts::SQRT_2;
            let (a0, a1) = (c[n], c[n + 1]);
            c[n] = (a0 + a1) / s;
            c[n + 1] = (a0 - a1) / s;
        }
        c
    }

    pub fn eval(&self, p: SpherePoint) -> f64 {
        let vals = self.basis.eval(p);
        self.normalizer * dot(&self.coeffs, &vals)
    }

    /// Value and gradient in the orthonormal frame (e_θ, e_φ).
    pub fn eval_grad(&self, p: SpherePoint) -> (f64, [f64; 2]) {
        let ev = self.basis.eval_grad(p);
        let value = self.normalizer * dot(&self.coeffs, &ev.values);
        let g_theta = self.normalizer * dot(&self.coeffs, &ev.d_theta);
        let g_phi = self.normalizer * dot(&self.coeffs, &ev.d_phi_frame);
        (value, [g_theta, g_phi])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Local patches
// ---------------------------------------------------------------------------

/// Rescaled local chart around a center point: y in the plane maps to
/// exp_x(R y / n) on the sphere.
#[derive(Debug, Clone)]
pub struct PatchSpec {
    center: SpherePoint,
    scale_r: f64,
    degree: usize,
    /// Rotation taking the north pole to `center`: Rz(φ) Ry(θ), columns are
    /// the images of (e_x, e_y, e_z); e_x maps to e_θ, e_y to e_φ.
    rotation: [[f64; 3]; 3],
}

impl PatchSpec {
    pub fn new(center: SpherePoint, scale_r: f64, degree: usize) -> Result<Self> {
        if !(scale_r > 0.0) {
            return Err(Error::config(format!("patch scale R must be positive, got {scale_r}")));
        }
        if scale_r / degree as f64 >= INJECTIVITY_MARGIN {
            return Err(Error::config(format!(
                "injectivity margin violated: R/n = {} >= {INJECTIVITY_MARGIN}",
                scale_r / degree as f64
            )));
        }
        let (st, ct) = (center.theta.sin(), center.theta.cos());
        let (sp, cp) = (center.phi.sin(), center.phi.cos());
        // Rz(φ) Ry(θ)
        let rotation = [
            [ct * cp, -sp, st * cp],
            [ct * sp, cp, st * sp],
            [-st, 0.0, ct],
        ];
        Ok(PatchSpec { center, scale_r, degree, rotation })
    }

    pub fn center(&self) -> SpherePoint {
        self.center
    }

    pub fn scale_r(&self) -> f64 {
        self.scale_r
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn apply_rotation(&self, v: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
            r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
            r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
        ]
    }

    /// Sphere point exp_x(R y / n).
    pub fn map_point(&self, y: [f64; 2]) -> SpherePoint {
        let rho = self.scale_r / self.degree as f64;
        let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let r = rho * norm;
        let (c1, c2) = if norm < 1e-14 { (1.0, 0.0) } else { (y[0] / norm, y[1] / norm) };
        let u = [r.sin() * c1, r.sin() * c2, r.cos()];
        SpherePoint::from_unit_vector(self.apply_rotation(u))
    }

    /// Mapped point together with the Jacobian columns dz/dy_1, dz/dy_2
    /// (3-vectors); |dz/dy_i| = R/n, the exponential map is a radial isometry.
    fn map_point_jacobian(&self, y: [f64; 2]) -> ([f64; 3], [[f64; 3]; 2]) {
        let rho = self.scale_r / self.degree as f64;
        let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if norm < 1e-9 {
            let z = self.apply_rotation([0.0, 0.0, 1.0]);
            let j0 = self.apply_rotation([rho, 0.0, 0.0]);
            let j1 = self.apply_rotation([0.0, rho, 0.0]);
            return (z, [j0, j1]);
        }
        let r = rho * norm;
        let (sr, cr) = (r.sin(), r.cos());
        let c = [y[0] / norm, y[1] / norm];
        let z = self.apply_rotation([sr * c[0], sr * c[1], cr]);
        let mut jac = [[0.0; 3]; 2];
        for i in 0..2 {
            let dr = rho * c[i];
            let mut du = [0.0; 3];
            for j in 0..2 {
                let dc = ((i == j) as u8 as f64 - c[i] * c[j]) / norm;
                du[j] = cr * dr * c[j] + sr * dc;
            }
            du[2] = -sr * dr;
            jac[i] = self.apply_rotation(du);
        }
        (z, jac)
    }
}

/// Evaluate f at exp_x(R y / n); the ring |y| <= 2 beyond the unit disk is
/// allowed for contained-count boundary logic.
pub fn eval_patch(field: &RandomField, spec: &PatchSpec, y: [f64; 2]) -> Result<f64> {
    check_patch_args(field, spec, y)?;
    Ok(field.eval(spec.map_point(y)))
}

/// Patch value together with the planar gradient (∂F/∂y_1, ∂F/∂y_2).
pub fn eval_patch_grad(field: &RandomField, spec: &PatchSpec, y: [f64; 2]) -> Result<(f64, [f64; 2])> {
    check_patch_args(field, spec, y)?;
    let (z, jac) = spec.map_point_jacobian(y);
    let p = SpherePoint::from_unit_vector(z);
    let (value, g) = field.eval_grad(p);
    // Express grad f as a 3-vector through the frame (e_θ, e_φ) at p.
    let (st, ct) = (p.theta.sin(), p.theta.cos());
    let (sp, cp) = (p.phi.sin(), p.phi.cos());
    let e_theta = [ct * cp, ct * sp, -st];
    let e_phi = [-sp, cp, 0.0];
    let grad3 = [
        g[0] * e_theta[0] + g[1] * e_phi[0],
        g[0] * e_theta[1] + g[1] * e_phi[1],
        g[0] * e_theta[2] + g[1] * e_phi[2],
    ];
    let dy = [
        grad3[0] * jac[0][0] + grad3[1] * jac[0][1] + grad3[2] * jac[0][2],
        grad3[0] * jac[1][0] + grad3[1] * jac[1][1] + grad3[2] * jac[1][2],
    ];
    Ok((value, dy))
}

fn check_patch_args(field: &RandomField, spec: &PatchSpec, y: [f64; 2]) -> Result<()> {
    if field.degree() != spec.degree() {
        return Err(Error::config(format!(
            "patch degree {} does not match field degree {}",
            spec.degree(),
            field.degree()
        )));
    }
    let norm2 = y[0] * y[0] + y[1] * y[1];
    if norm2 > 4.0 + 1e-12 {
        return Err(Error::domain(format!("patch point |y| = {} beyond the evaluation ring", norm2.sqrt())));
    }
    Ok(())
}
