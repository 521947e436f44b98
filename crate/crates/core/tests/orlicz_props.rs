use opnorm_core::dist::DistSpec;
use opnorm_core::matgraph::CoeffMatrix;
use opnorm_core::orlicz::{max_linear, OrliczBudget, BUDGET_SLACK};
use opnorm_core::rng::substream;
use rand::Rng;

fn laws() -> Vec<DistSpec<f64>> {
    vec![
        DistSpec::gaussian(),
        DistSpec::rademacher(),
        DistSpec::weibull(0.5).unwrap(),
        DistSpec::weibull(1.0).unwrap(),
        DistSpec::weibull(2.0).unwrap(),
        DistSpec::exp_power(3.0).unwrap(),
        DistSpec::discrete(vec![(0.5, 0.6), (2.0, 0.3), (4.0, 0.1)]).unwrap(),
    ]
}

fn random_matrix(n: usize, seed: u64) -> CoeffMatrix<f64> {
    let mut rng = substream(seed, 0, 0);
    CoeffMatrix::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0).unwrap()
}

#[test]
fn duality_gap_is_small_on_random_matrices() {
    let mut worst = 0.0f64;
    for law in laws() {
        let tp = law.normalize(1.0).unwrap().tail_profile();
        for seed in 0..100u64 {
            let a = random_matrix(8, seed);
            let p = [1.0, 2.0, 4.0, 8.0][seed as usize % 4];
            let b = OrliczBudget::uniform(p, tp.clone()).unwrap();
            let s = max_linear(&a, &b).unwrap();
            assert!(s.feasible);
            assert!(s.budget_used <= p * (1.0 + BUDGET_SLACK));
            let recomputed: f64 = s.witness.iter().map(|&(i, j, t)| a.get(i, j) * t).sum();
            assert!((recomputed - s.objective).abs() <= 1e-9 * s.objective);
            assert!(s.gap <= 0.02, "{} seed {seed} p {p}: gap {}", law.label(), s.gap);
            worst = worst.max(s.gap);
        }
    }
    eprintln!("worst relative duality gap {worst:.3e}");
}

/// Every coordinate on a grid of `k` points on `[0, 1]` and `k` points on
/// `(1, hi]`; returns `(t, N̂(t))` pairs and the largest grid step.
fn coordinate_grid(tp: &opnorm_core::dist::TailProfile<f64>, p: f64, k: usize) -> (Vec<(f64, f64)>, f64) {
    let hi = tp.hat_n_inv(p);
    let mut pts: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let mut step = 1.0 / k as f64;
    if hi > 1.0 {
        let a = 1.0 + 4.0 * f64::EPSILON;
        pts.extend((0..=k).map(|i| a + (hi - a) * i as f64 / k as f64));
        step = step.max((hi - a) / k as f64);
    }
    let pairs = pts.into_iter().map(|t| (t, tp.hat_n(t))).filter(|x| x.1 <= p).collect();
    (pairs, step)
}

/// Grid optimum of `Σ c_k t_k` subject to `Σ N̂(t_k) <= p` by meet in the
/// middle over two halves of the coordinates.
fn grid_oracle(c: &[f64], grids: &[Vec<(f64, f64)>], p: f64) -> f64 {
    let half = |range: std::ops::Range<usize>| {
        let mut acc: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for k in range {
            let mut next = Vec::with_capacity(acc.len() * grids[k].len());
            for &(cost, val) in &acc {
                for &(t, nt) in &grids[k] {
                    if cost + nt <= p {
                        next.push((cost + nt, val + c[k] * t));
                    }
                }
            }
            acc = next;
        }
        acc
    };
    let m = c.len() / 2;
    let left = half(0..m);
    let mut right = half(m..c.len());
    right.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best_prefix = Vec::with_capacity(right.len());
    let mut run = f64::NEG_INFINITY;
    for r in &right {
        run = run.max(r.1);
        best_prefix.push(run);
    }
    let mut best = f64::NEG_INFINITY;
    for &(cost, val) in &left {
        let room = p - cost;
        let idx = right.partition_point(|r| r.0 <= room);
        if idx > 0 {
            best = best.max(val + best_prefix[idx - 1]);
        }
    }
    best
}

#[test]
fn max_linear_matches_grid_search_on_tiny_matrices() {
    let k = 1000;
    for (li, law) in laws().into_iter().enumerate() {
        let tp = law.normalize(1.0).unwrap().tail_profile();
        for seed in 0..3u64 {
            let n = 1 + (seed as usize % 2);
            let a = random_matrix(n, 100 + seed + 10 * li as u64);
            let p = [1.0, 2.5, 5.0][seed as usize];
            let b = OrliczBudget::uniform(p, tp.clone()).unwrap();
            let s = max_linear(&a, &b).unwrap();
            let c: Vec<f64> = a.support().iter().map(|e| e.2.abs()).collect();
            let (grid, step) = coordinate_grid(&tp, p, k);
            let grids = vec![grid; c.len()];
            let oracle = grid_oracle(&c, &grids, p);
            let slack: f64 = c.iter().map(|x| x * step).sum();
            assert!(s.dual_upper >= oracle - 1e-9, "{}: dual {} below grid {oracle}", law.label(), s.dual_upper);
            assert!(s.objective >= oracle - 1e-6, "{} n={n} p={p}: {} < grid {oracle}", law.label(), s.objective);
            assert!(
                s.objective <= oracle + slack + 1e-9,
                "{} n={n} p={p}: {} > grid {oracle} + {slack}",
                law.label(),
                s.objective
            );
        }
    }
}

#[test]
fn gaussian_values_track_the_moment_scale() {
    for seed in 0..100u64 {
        let a = random_matrix(8, 1000 + seed);
        let norm = a.matrix().frobenius();
        for p in [1.0, 2.0, 4.0, 8.0] {
            let b = OrliczBudget::uniform(p, DistSpec::gaussian().tail_profile()).unwrap();
            let v = max_linear(&a, &b).unwrap().objective;
            let ratio = v / (p.sqrt() * norm);
            assert!((0.5..=2.0).contains(&ratio), "seed {seed} p {p}: ratio {ratio}");
        }
    }
}
