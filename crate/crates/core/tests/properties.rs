mod common;

use emdq::query::{emd_query, QueryParams};
use emdq::transport::{brute_force_oracle, solve_exact, TransportInstance};
use emdq::{PointSource, WeightedPointSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact(a: &WeightedPointSet, b: &WeightedPointSet) -> f64 {
    solve_exact(&TransportInstance::new(a.clone(), b.clone()).unwrap()).unwrap().emd()
}

fn close(x: f64, y: f64, scale: f64) -> bool {
    (x - y).abs() <= 1e-9 * scale.max(1e-300)
}

/// Pair of balanced weighted sets drawn from a seed.
fn pair() -> impl Strategy<Value = (WeightedPointSet, WeightedPointSet)> {
    any::<u64>().prop_map(|seed| common::weighted_pair(&mut ChaCha8Rng::seed_from_u64(seed), 40, 6))
}

fn integral_pair() -> impl Strategy<Value = (WeightedPointSet, WeightedPointSet)> {
    (1usize..=3, 1usize..=4, 1usize..=4, 1u32..=12, any::<u64>()).prop_map(|(d, na, nb, total, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = |rng: &mut ChaCha8Rng, n| {
            let base = common::uniform_cube(rng, n, d, -3.0, 3.0);
            WeightedPointSet::new(base.coords().to_vec(), d, common::integer_split(rng, n, total))
                .unwrap()
        };
        (set(&mut rng, na), set(&mut rng, nb))
    })
}

fn centroid(set: &WeightedPointSet) -> Vec<f64> {
    let mut c = vec![0.0; set.dim()];
    for (i, p) in set.points().enumerate() {
        for (ck, x) in c.iter_mut().zip(p) {
            *ck += set.weight(i) * x;
        }
    }
    let w = set.total_weight();
    c.iter_mut().for_each(|x| *x /= w);
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emd_is_symmetric((a, b) in pair()) {
        let (ab, ba) = (exact(&a, &b), exact(&b, &a));
        prop_assert!(close(ab, ba, ab), "{ab} vs {ba}");
    }

    #[test]
    fn emd_scales_with_coordinates((a, b) in pair(), s in 1e-3f64..1e3) {
        let base = exact(&a, &b);
        let scaled = exact(&a.scaled(s).unwrap(), &b.scaled(s).unwrap());
        prop_assert!(close(scaled, s * base, s * base), "{scaled} vs {}", s * base);
    }

    #[test]
    fn emd_ignores_common_weight_scale((a, b) in pair(), s in 1e-3f64..1e3) {
        let base = exact(&a, &b);
        let heavier = exact(&a.reweighted(s).unwrap(), &b.reweighted(s).unwrap());
        prop_assert!(close(heavier, base, base));
    }

    #[test]
    fn emd_bounded_below_by_centroid_gap((a, b) in pair()) {
        let gap = common::dist(&centroid(&a), &centroid(&b));
        let emd = exact(&a, &b);
        prop_assert!(emd >= gap - 1e-9 * emd.max(1.0), "{emd} < {gap}");
    }

    #[test]
    fn exact_matches_oracle((a, b) in integral_pair()) {
        let inst = TransportInstance::new(a, b).unwrap();
        let got = solve_exact(&inst).unwrap().cost;
        let want = brute_force_oracle(&inst).unwrap();
        prop_assert!(close(got, want, want), "{got} vs {want}");
    }

    #[test]
    fn query_is_deterministic((a, b) in pair(), theta in -4.0f64..4.0) {
        let t = 2f64.powf(theta) * exact(&a, &b);
        let params = QueryParams::new(t, 0.05);
        let first = emd_query(&a, &b, &params).unwrap();
        let second = emd_query(&a, &b, &params).unwrap();
        prop_assert_eq!(first.verdict, second.verdict);
        prop_assert_eq!(first.levels.len(), second.levels.len());
        for (x, y) in first.levels.iter().zip(&second.levels) {
            prop_assert_eq!(x.estimate, y.estimate);
            prop_assert_eq!(x.node_count, y.node_count);
        }
    }
}
