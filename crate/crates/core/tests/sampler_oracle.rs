//! Sampler output against direct quadrature of the Gibbs density for N = 2
//! and N = 3, plus sanity checks on larger runs.

use rieszlab::analysis::BatchAccumulator;
use rieszlab::energy::uniform_gap_hessian;
use rieszlab::kernel::riesz_kernel;
use rieszlab::meanfield::brascamp_lieb_bound;
use rieszlab::sampler::{run, SampleSet, SamplerConfig};
use rieszlab::Params;

const S: f64 = 0.5;
const BETA: f64 = 2.0;

/// exp(-β N^{-s} Σ_{i≠j} g(|x_i - x_j| / N)) for the gaps of a configuration.
fn weight(gaps: &[f64]) -> f64 {
    let n = gaps.len();
    let nf = n as f64;
    let mut x = vec![0.0; n];
    for i in 1..n {
        x[i] = x[i - 1] + gaps[i - 1];
    }
    let mut h = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            h += 2.0 * riesz_kernel(S, (x[j] - x[i]) / nf).unwrap();
        }
    }
    (-BETA * nf.powf(-S) * h).exp()
}

fn simpson_weights(m: usize) -> Vec<f64> {
    (0..=m).map(|k| if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 }).collect()
}

/// E[(y_1 - 1)^p] for p = 1, 2, 3 by composite Simpson; the density vanishes at the boundary.
fn moments_two() -> [f64; 3] {
    let m = 4000;
    let h = 2.0 / m as f64;
    let w = simpson_weights(m);
    let mut acc = [0.0; 4];
    for k in 1..m {
        let y = k as f64 * h;
        let f = w[k] * weight(&[y, 2.0 - y]);
        let d = y - 1.0;
        acc[0] += f;
        acc[1] += f * d;
        acc[2] += f * d * d;
        acc[3] += f * d * d * d;
    }
    [acc[1] / acc[0], acc[2] / acc[0], acc[3] / acc[0]]
}

fn moments_three() -> [f64; 3] {
    // y1 = 3u, y2 = (3 - y1) v, Jacobian 3 (3 - y1)
    let m = 300;
    let w = simpson_weights(m);
    let h = 1.0 / m as f64;
    let mut acc = [0.0; 4];
    for a in 1..m {
        let y1 = 3.0 * a as f64 * h;
        let rest = 3.0 - y1;
        for b in 1..m {
            let y2 = rest * b as f64 * h;
            let f = w[a] * w[b] * 3.0 * rest * weight(&[y1, y2, rest - y2]);
            let d = y1 - 1.0;
            acc[0] += f;
            acc[1] += f * d;
            acc[2] += f * d * d;
            acc[3] += f * d * d * d;
        }
    }
    [acc[1] / acc[0], acc[2] / acc[0], acc[3] / acc[0]]
}

fn sample_moments(set: &SampleSet) -> Vec<(f64, f64)> {
    let n = set.n();
    let mut acc = BatchAccumulator::new(3);
    for c in &set.chains {
        acc.begin_chain(c.len()).unwrap();
        for snap in c.gaps.chunks_exact(n) {
            let d = snap[0] - 1.0;
            acc.push(&[d, d * d, d * d * d]);
        }
    }
    acc.finish().unwrap().iter().map(|e| (e.mean, e.std_error)).collect()
}

fn oracle_case(n: usize, oracle: [f64; 3]) {
    let p = Params::new(n, S, BETA).unwrap();
    let cfg = SamplerConfig { sweeps: 251_000, burn_in: 1_000, thin: 5, chains: 4, seed: 40 + n as u64, ..Default::default() };
    let set = run(&p, &cfg).unwrap();
    assert_eq!(set.total_snapshots(), 200_000);
    for (k, ((mc, se), exact)) in sample_moments(&set).into_iter().zip(oracle).enumerate() {
        assert!((mc - exact).abs() <= 3.0 * se, "N={n}, moment {}: {mc} vs {exact} (se {se})", k + 1);
    }
}

#[test]
fn two_points_match_quadrature() {
    let m = moments_two();
    assert!(m[0].abs() < 1e-12 && m[2].abs() < 1e-12, "symmetry y <-> 2 - y: {m:?}");
    oracle_case(2, m);
}

#[test]
fn three_points_match_quadrature() {
    let m = moments_three();
    assert!(m[0].abs() < 1e-6, "exchangeable gaps have mean 1: {m:?}");
    oracle_case(3, m);
}

#[test]
fn constraint_and_no_collisions() {
    let p = Params::new(64, S, BETA).unwrap();
    let cfg = SamplerConfig { sweeps: 20_000, burn_in: 2_000, thin: 10, chains: 2, seed: 3, ..Default::default() };
    let set = run(&p, &cfg).unwrap();
    for snap in set.snapshots() {
        let sum: f64 = snap.iter().sum();
        assert!((sum - 64.0).abs() <= 64.0 * 1e-9, "{sum}");
    }
    assert!(set.min_gap() > 1e-4, "{}", set.min_gap());
}

#[test]
fn brascamp_lieb_bounds_gap_difference() {
    let p = Params::new(128, S, BETA).unwrap();
    let cfg = SamplerConfig { sweeps: 30_000, burn_in: 5_000, thin: 5, chains: 2, seed: 17, ..Default::default() };
    let set = run(&p, &cfg).unwrap();
    let mut dir = vec![0.0; 128];
    dir[0] = 1.0;
    dir[1] = -1.0;
    let bound = brascamp_lieb_bound(&uniform_gap_hessian(&p).unwrap(), &dir, BETA).unwrap();
    let xs: Vec<f64> = set.snapshots().map(|g| g[0] - g[1]).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!(var <= 1.1 * bound, "MC variance {var} vs bound {bound}");
}
