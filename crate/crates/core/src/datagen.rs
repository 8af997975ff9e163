//! Synthetic point sets sampled from random polynomial manifolds.
//!
//! A latent parameter `t` is drawn uniformly from `[-1, 1]^m` and mapped into
//! `R^d` by a random polynomial per coordinate. The polynomial degree acts as
//! a rough knob for the intrinsic complexity of the resulting set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EmdError, Result};
use crate::geometry::WeightedPointSet;

pub const MAX_INTRINSIC_DIM: usize = 5;
pub const MAX_DEGREE: u32 = 50;

const COEFFICIENT_STREAM: u64 = 0;
const LATENT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub degree: u32,
    pub n_points: usize,
    pub seed: u64,
    pub coefficient_scale: f64,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        Self {
            ambient_dim: 500,
            intrinsic_dim: 2,
            degree: 8,
            n_points: 1000,
            seed: 0,
            coefficient_scale: 1.0,
        }
    }
}

impl ManifoldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EmdError::InvalidArgument(msg));
        if !(1..=MAX_INTRINSIC_DIM).contains(&self.intrinsic_dim) {
            return bad(format!("intrinsic dimension must be in 1..={MAX_INTRINSIC_DIM}, got {}", self.intrinsic_dim));
        }
        if !(1..=MAX_DEGREE).contains(&self.degree) {
            return bad(format!("degree must be in 1..={MAX_DEGREE}, got {}", self.degree));
        }
        if self.ambient_dim < self.intrinsic_dim {
            return bad(format!(
                "ambient dimension {} is below intrinsic dimension {}",
                self.ambient_dim, self.intrinsic_dim
            ));
        }
        if self.n_points == 0 {
            return Err(EmdError::EmptySet);
        }
        if !(self.coefficient_scale.is_finite() && self.coefficient_scale > 0.0) {
            return bad(format!("coefficient scale must be positive, got {}", self.coefficient_scale));
        }
        Ok(())
    }
}

struct Monomial {
    coefficient: f64,
    exponents: Vec<u32>,
}

/// One coordinate map: a sparse sum of monomials in the latent variables.
struct Polynomial {
    terms: Vec<Monomial>,
}

impl Polynomial {
    fn random(rng: &mut ChaCha8Rng, spec: &ManifoldSpec) -> Self {
        let count = 3 * spec.degree as usize;
        let terms = (0..count)
            .map(|_| {
                let total = rng.gen_range(0..=spec.degree);
                let mut exponents = vec![0; spec.intrinsic_dim];
                for _ in 0..total {
                    exponents[rng.gen_range(0..spec.intrinsic_dim)] += 1;
                }
                let z: f64 = rng.sample(StandardNormal);
                Monomial {
                    coefficient: z * spec.coefficient_scale,
                    exponents,
                }
            })
            .collect();
        Self { terms }
    }

    /// `powers[k][e]` holds `t_k^e`.
    fn eval(&self, powers: &[Vec<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                m.exponents
                    .iter()
                    .zip(powers)
                    .fold(m.coefficient, |acc, (&e, p)| acc * p[e as usize])
            })
            .sum()
    }
}

/// Samples `n_points` unit-weight points from a random polynomial manifold.
pub fn sample_manifold(spec: &ManifoldSpec) -> Result<WeightedPointSet> {
    spec.validate()?;
    let mut coeff_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    coeff_rng.set_stream(COEFFICIENT_STREAM);
    let mut latent_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    latent_rng.set_stream(LATENT_STREAM);

    let maps: Vec<Polynomial> = (0..spec.ambient_dim)
        .map(|_| Polynomial::random(&mut coeff_rng, spec))
        .collect();

    let g = spec.degree as usize;
    let mut coords = Vec::with_capacity(spec.n_points * spec.ambient_dim);
    let mut powers = vec![vec![1.0; g + 1]; spec.intrinsic_dim];
    for _ in 0..spec.n_points {
        for p in powers.iter_mut() {
            let t: f64 = latent_rng.gen_range(-1.0..=1.0);
            for e in 1..=g {
                p[e] = p[e - 1] * t;
            }
        }
        coords.extend(maps.iter().map(|poly| poly.eval(&powers)));
    }
    WeightedPointSet::uniform(coords, spec.ambient_dim)
}

/// Two independently drawn manifolds sharing every setting but the seed.
pub fn sample_pair(spec: &ManifoldSpec) -> Result<(WeightedPointSet, WeightedPointSet)> {
    let a = sample_manifold(spec)?;
    let b = sample_manifold(&ManifoldSpec {
        seed: spec.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
        ..spec.clone()
    })?;
    Ok((a, b))
}
