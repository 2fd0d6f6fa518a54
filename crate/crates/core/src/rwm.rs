//! Random wave model on the plane: the Gaussian limit field with spectral
//! measure uniform on the unit circle, approximated by a finite superposition
//! of plane waves, plus nodal-domain counting in disks. This estimates the
//! nodal-domain density independently of the sphere ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nodal::{build_patch_grid, census_disk, NodalCensus};

/// F(x) = sqrt(2/M) Σ_j cos(⟨ξ_j, x⟩ + φ_j) with ξ_j uniform on the unit
/// circle and φ_j uniform phases. E[F] = 0 and E[F²] = 1 exactly by
/// construction; the covariance tends to J₀(|x−y|) as M → ∞ and the field
/// is Gaussian in the same limit.
#[derive(Debug, Clone)]
pub struct RwmField {
    directions: Vec<[f64; 2]>,
    phases: Vec<f64>,
    amplitude: f64,
}

/// Minimum number of plane waves for a sampled field.
pub const MIN_WAVES: usize = 64;

pub fn sample_rwm(n_waves: usize, seed: u64) -> Result<RwmField> {
    if n_waves < MIN_WAVES {
        return Err(Error::config(format!("need >= {MIN_WAVES} plane waves, got {n_waves}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let directions = (0..n_waves)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..tau);
            [a.cos(), a.sin()]
        })
        .collect();
    let phases = (0..n_waves).map(|_| rng.gen_range(0.0..tau)).collect();
    Ok(RwmField::from_waves(directions, phases))
}

impl RwmField {
    /// Explicit wave list; used for deterministic oracle fields in tests.
    pub fn from_waves(directions: Vec<[f64; 2]>, phases: Vec<f64>) -> Self {
        assert_eq!(directions.len(), phases.len());
        let amplitude = (2.0 / directions.len() as f64).sqrt();
        RwmField { directions, phases, amplitude }
    }

    pub fn n_waves(&self) -> usize {
        self.directions.len()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let mut acc = 0.0;
        for (xi, phi) in self.directions.iter().zip(&self.phases) {
            acc += (xi[0] * x[0] + xi[1] * x[1] + phi).cos();
        }
        self.amplitude * acc
    }
}

/// Count nodal domains of F fully contained in the disk of radius R
/// (components whose cells stay clear of the boundary ring).
pub fn census_rwm(field: &RwmField, radius: f64, q: usize) -> Result<usize> {
    Ok(census_rwm_full(field, radius, q)?.count_contained.expect("disk census fills this"))
}

/// Full census with per-component statistics; wavenumber is 1, so the
/// lattice spacing rule is 2π/q outright.
pub fn census_rwm_full(field: &RwmField, radius: f64, q: usize) -> Result<NodalCensus> {
    if radius < 5.0 {
        return Err(Error::config(format!("disk radius >= 5 required, got {radius}")));
    }
    if q < 8 {
        return Err(Error::config(format!("oversample q >= 8 required, got {q}")));
    }
    let grid = build_patch_grid(radius, 2.0 * std::f64::consts::PI / q as f64)?;
    Ok(census_disk(|y| field.eval(y), &grid))
}
