use approx::assert_relative_eq;
use cachepart::ct::{self, CtProblem};
use cachepart::Provider;
use cachepart::UtilitySpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn zipf_rates(n: usize, z: f64, rate: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-z)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| rate * x / s).collect()
}

/// Plain bisection on `sum (1 - e^{-r t}) = c`, 200 halvings.
fn bisect_time(rates: &[f64], c: f64) -> f64 {
    let occ = |t: f64| rates.iter().map(|&r| -(-r * t).exp_m1()).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while occ(hi) < c {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if occ(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn hit_at(rates: &[f64], c: f64) -> f64 {
    let p = CtProblem::new(rates.to_vec(), c).unwrap();
    let s = ct::solve_ct(&p, 1e-12).unwrap();
    ct::hit_rate(&p, &s)
}

#[test]
fn small_zipf_time_matches_bisection() {
    let rates = zipf_rates(20, 0.8, 1.0);
    let oracle = bisect_time(&rates, 5.0);
    let p = CtProblem::new(rates, 5.0).unwrap();
    let s = ct::solve_ct(&p, 1e-12).unwrap();
    assert_relative_eq!(s.time, oracle, max_relative = 1e-6);
    assert_relative_eq!(s.hit_probs.iter().sum::<f64>(), 5.0, max_relative = 1e-10);
}

#[test]
fn first_base_provider_at_half_cache() {
    let p = Provider::zipf(0, 15.0, 0.6, 10_000, UtilitySpec::log()).unwrap();
    let rates = p.file_rates().unwrap();
    let t = bisect_time(&rates, 5000.0);
    let oracle: f64 = rates.iter().map(|&r| r * -(-r * t).exp_m1()).sum();
    let h = hit_at(&rates, 5000.0);
    assert_relative_eq!(h, oracle, max_relative = 1e-4);
    assert_relative_eq!(h, 10.102237404005695, max_relative = 1e-4);
}

#[test]
fn hit_rate_derivative_matches_central_difference() {
    for (n, z, lambda) in [(10_000, 0.6, 15.0), (20_000, 0.8, 10.0)] {
        let rates = zipf_rates(n, z, lambda);
        for c in [1000.0, 5000.0, 9000.0] {
            let d = 1e-3 * c;
            let fd = (hit_at(&rates, c + d) - hit_at(&rates, c - d)) / (2.0 * d);
            let p = CtProblem::new(rates.clone(), c).unwrap();
            let s = ct::solve_ct(&p, 1e-12).unwrap();
            let analytic = ct::d_hit_rate_dC(&p, &s).unwrap();
            assert_relative_eq!(analytic, fd, max_relative = 1e-4);
        }
    }
}

#[test]
fn marginal_hit_rate_decreases_in_capacity() {
    let rates = zipf_rates(100, 0.8, 1.0);
    let mut last = f64::INFINITY;
    for c in 1..100 {
        let p = CtProblem::new(rates.clone(), c as f64).unwrap();
        let s = ct::solve_ct(&p, 1e-12).unwrap();
        let m = ct::d_hit_rate_dC(&p, &s).unwrap();
        assert!(m < last, "dh/dC rose at C={c}");
        last = m;
    }
}

#[test]
fn hit_rate_is_concave_on_random_workloads() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(50..2000);
        let rates = zipf_rates(n, rng.random_range(0.0..1.4), rng.random_range(0.5..20.0));
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 * (n as f64 - 1.0) / 101.0).collect();
        let h: Vec<f64> = grid.iter().map(|&c| hit_at(&rates, c)).collect();
        for w in h.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-8);
        }
    }
}

#[test]
fn shared_partition_components_add_up() {
    let a = zipf_rates(300, 0.7, 4.0);
    let b: Vec<f64> = zipf_rates(300, 0.9, 6.0).into_iter().rev().collect();
    let d = ct::PartitionDemand::new(vec![(0, a.clone()), (1, b.clone())]).unwrap();
    let sol = ct::multi_rate_hit_rates(&d, 120.0, 1e-12).unwrap();
    let agg: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    assert_relative_eq!(sol.total(), hit_at(&agg, 120.0), max_relative = 1e-10);
    let t = bisect_time(&agg, 120.0);
    let first: f64 = a.iter().zip(&agg).map(|(&r, &l)| r * -(-l * t).exp_m1()).sum();
    assert_relative_eq!(sol.hits[0].1, first, max_relative = 1e-8);
}
