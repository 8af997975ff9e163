#![allow(dead_code)]

use emdq::WeightedPointSet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plain Euclidean distance, kept separate from the library's kernel.
pub fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn uniform_cube(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: f64, hi: f64) -> WeightedPointSet {
    WeightedPointSet::uniform((0..n * d).map(|_| rng.gen_range(lo..hi)).collect(), d).unwrap()
}

/// A few Gaussian-ish blobs: sums of uniforms around random centers.
pub fn clustered(rng: &mut ChaCha8Rng, n: usize, d: usize) -> WeightedPointSet {
    let k = rng.gen_range(2..6);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &centers[rng.gen_range(0..k)];
        coords.extend(c.iter().map(|x| x + (0..3).map(|_| rng.gen_range(-0.5..0.5)).sum::<f64>()));
    }
    WeightedPointSet::uniform(coords, d).unwrap()
}

/// Random positive weights rescaled to `total`.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w * total / s).collect()
}

/// `total` units spread over `parts` bins, zeros allowed.
pub fn integer_split(rng: &mut ChaCha8Rng, parts: usize, total: u32) -> Vec<f64> {
    let mut w = vec![0.0; parts];
    for _ in 0..total {
        w[rng.gen_range(0..parts)] += 1.0;
    }
    w
}

/// A balanced pair with unequal sizes and non-uniform weights.
pub fn weighted_pair(rng: &mut ChaCha8Rng, n_max: usize, d_max: usize) -> (WeightedPointSet, WeightedPointSet) {
    let d = rng.gen_range(1..=d_max);
    let na = rng.gen_range(2..=n_max);
    let nb = rng.gen_range(2..=n_max);
    let shift = rng.gen_range(0.0..2.0);
    let total = rng.gen_range(1.0..100.0);
    let a_pts: Vec<f64> = (0..na * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b_pts: Vec<f64> = (0..nb * d).map(|_| rng.gen_range(-1.0..1.0) + shift).collect();
    let a = WeightedPointSet::new(a_pts, d, random_weights(rng, na, total)).unwrap();
    let mut wb = random_weights(rng, nb, total);
    // Make the totals agree to the last bit.
    let diff = a.total_weight() - wb.iter().sum::<f64>();
    wb[0] += diff;
    let b = WeightedPointSet::new(b_pts, d, wb).unwrap();
    (a, b)
}
