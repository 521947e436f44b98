use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::budget::{just_above_one, BudgetProfiles, Cand, Coord, OrliczBudget, TailShape};
use crate::error::Result;
use crate::matgraph::CoeffMatrix;
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Relative slack allowed on the budget of a returned point.
pub const BUDGET_SLACK: f64 = 1e-9;
const BISECTION_ITERS: usize = 300;
const DUAL_ITERS: usize = 120;
const FILL_ROUNDS: usize = 16;
const TAIL_ROUNDS: usize = 4;
const TAIL_CANDIDATES: usize = 16;
const TAIL_GRID: usize = 48;
/// Budget units in the tail allocation table.
const SPLIT_LEVELS: usize = 1024;
/// Slack used inside the search, well below [`BUDGET_SLACK`] so that
/// re-summation in another order cannot cross it.
const SEARCH_SLACK: f64 = 1e-12;

/// Maximizer of `Σ a_ij t_ij` over the budget set, with a dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct OrliczSolution<T: Real> {
    pub n: usize,
    /// Nonzero `t*_ij` as `(i, j, t)`, signs matching `a_ij`.
    pub witness: Vec<(usize, usize, T)>,
    pub lambda: T,
    pub budget_used: T,
    pub objective: T,
    /// Lagrangian dual value: an upper bound on the optimum.
    pub dual_upper: T,
    /// `(dual_upper - objective) / dual_upper`.
    pub gap: T,
    pub feasible: bool,
}

impl<T: Real> OrliczSolution<T> {
    pub fn t_star(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for &(i, j, t) in &self.witness {
            m.set(i, j, t);
        }
        m
    }
}

struct Problem<'a, T: Real> {
    pos: Vec<(usize, usize)>,
    c: Vec<T>,
    coords: Vec<Coord<'a, T>>,
    p: T,
}

impl<T: Real> Problem<'_, T> {
    fn argmax(&self, lambda: T, prefer_high: bool) -> Vec<Cand<T>> {
        self.coords
            .par_iter()
            .zip(&self.c)
            .map(|(k, &c)| k.best(c, lambda, prefer_high))
            .collect()
    }

    fn budget_of(x: &[Cand<T>]) -> T {
        x.iter().map(|c| c.cost).sum()
    }

    fn objective(&self, t: &[T]) -> T {
        t.iter().zip(&self.c).map(|(&t, &c)| c * t).sum()
    }

    fn dual(&self, lambda: T) -> T {
        lambda * self.p + self.argmax(lambda, false).iter().map(|c| c.value).sum::<T>()
    }

    fn feasible(&self, cost: T) -> bool {
        cost <= self.p * (T::one() + T::lit(SEARCH_SLACK))
    }

    fn cost_of(&self, t: &[T]) -> T {
        self.coords.iter().zip(t).map(|(k, &x)| k.cost(x)).sum()
    }

    /// Best `Σ c_l t_l` with every `t_l <= 1` and `Σ t_l² <= b` over the
    /// coordinates in `idx` (sorted by decreasing `c`); fills `t`.
    fn waterfill(&self, idx: &[usize], b: T, t: &mut [T]) -> T {
        if !(b > T::zero()) || idx.is_empty() {
            return T::zero();
        }
        let m = idx.len();
        if T::lit(m as f64) <= b {
            idx.iter().for_each(|&k| t[k] = T::one());
            return idx.iter().map(|&k| self.c[k]).sum();
        }
        let mut suffix = vec![T::zero(); m + 1];
        for j in (0..m).rev() {
            suffix[j] = suffix[j + 1] + self.c[idx[j]] * self.c[idx[j]];
        }
        let mut head = T::zero();
        for j in 0..m {
            let rem = b - T::lit(j as f64);
            if !(rem > T::zero()) || suffix[j] == T::zero() {
                break;
            }
            let level = (suffix[j] / rem).sqrt();
            if self.c[idx[j]] <= level {
                idx[..j].iter().for_each(|&k| t[k] = T::one());
                idx[j..].iter().for_each(|&k| t[k] = (self.c[k] / level).min(T::one()));
                return head + suffix[j] / level;
            }
            head = head + self.c[idx[j]];
        }
        let full = (b.floor().to_usize().unwrap_or(m)).min(m);
        idx[..full].iter().for_each(|&k| t[k] = T::one());
        idx[..full].iter().map(|&k| self.c[k]).sum()
    }

    /// Upper bound and feasible point from splitting each solution into
    /// coordinates past 1 and coordinates in `[0, 1]`, for a shared profile.
    ///
    /// With one profile, exchanging coefficients shows the coordinates past 1
    /// can be taken to be the `m` largest. Their budget shares are tabulated
    /// in units of `Δ = p / L`: rounding each share up gives an upper bound,
    /// rounding down a feasible point. The remaining budget is water-filled
    /// over the other coordinates, which is exact on `[0, 1]`.
    fn split_bound(&self, order: &[usize]) -> Option<(T, Vec<T>)> {
        let coord = &self.coords[order[0]];
        let nu = coord.cost(just_above_one::<T>());
        if !(coord.hi > T::one()) || !(nu > T::zero()) {
            return None;
        }
        let levels = SPLIT_LEVELS;
        let delta = self.p / T::lit(levels as f64);
        let m_max = (self.p / nu).floor().to_usize().unwrap_or(0).min(order.len());
        let jmin = (nu / delta).floor().to_usize().unwrap_or(levels).min(levels);
        let h_up: Vec<T> = (0..=levels).map(|j| coord.reach(delta * T::lit((j + 1) as f64))).collect();
        let h_dn: Vec<T> = (0..=levels)
            .map(|j| {
                let t = coord.reach(delta * T::lit(j as f64));
                if t > T::one() {
                    t
                } else {
                    T::neg_infinity()
                }
            })
            .collect();
        let mut scratch = vec![T::zero(); self.c.len()];
        let quad: Vec<Vec<T>> = (0..=m_max)
            .map(|m| {
                (0..=levels)
                    .map(|j| self.waterfill(&order[m..], self.p - delta * T::lit(j as f64), &mut scratch))
                    .collect()
            })
            .collect();
        let ninf = T::neg_infinity();
        let mut up = vec![T::zero(); levels + 1];
        let mut dn = vec![T::zero(); levels + 1];
        let mut choice: Vec<Vec<usize>> = Vec::with_capacity(m_max);
        let mut best_up = quad[0][0];
        let (mut best_dn, mut best_at) = (quad[0][0], (0usize, 0usize));
        for m in 1..=m_max {
            let c = self.c[order[m - 1]];
            let mut nu_ = vec![ninf; levels + 1];
            let mut nd = vec![ninf; levels + 1];
            let mut ch = vec![usize::MAX; levels + 1];
            for big_j in jmin..=levels {
                for j in jmin..=big_j {
                    let u = up[big_j - j] + c * h_up[j];
                    if u > nu_[big_j] {
                        nu_[big_j] = u;
                    }
                    let d = dn[big_j - j] + c * h_dn[j];
                    if d > nd[big_j] {
                        nd[big_j] = d;
                        ch[big_j] = j;
                    }
                }
            }
            for big_j in 1..=levels {
                if nu_[big_j - 1] > nu_[big_j] {
                    nu_[big_j] = nu_[big_j - 1];
                }
            }
            up = nu_;
            dn = nd;
            for big_j in 0..=levels {
                best_up = best_up.max(up[big_j] + quad[m][big_j]);
                let d = dn[big_j] + quad[m][big_j];
                if d > best_dn {
                    best_dn = d;
                    best_at = (m, big_j);
                }
            }
            choice.push(ch);
            if m < m_max && up.iter().all(|v| *v == ninf) {
                break;
            }
        }
        let (m, mut big_j) = best_at;
        let mut t = vec![T::zero(); self.c.len()];
        let mut js = vec![0usize; m];
        // Walk the choices back from the last tail coordinate.
        let mut tables = choice;
        tables.truncate(m);
        for k in (0..m).rev() {
            let j = tables[k][big_j];
            js[k] = j;
            big_j -= j;
        }
        let tail_units: usize = js.iter().sum();
        for (k, &j) in js.iter().enumerate() {
            t[order[k]] = coord.reach(delta * T::lit(j as f64));
        }
        self.waterfill(&order[m..], self.p - delta * T::lit(tail_units as f64), &mut t);
        Some((best_up, t))
    }

    /// A few coordinates on the tail branch, chosen greedily with their
    /// budget shares on a grid, and the rest water-filled on `[0, 1]`.
    fn tail_and_waterfill(&self, order: &[usize]) -> Vec<T> {
        let nnz = self.c.len();
        let mut chosen: Vec<(usize, T)> = Vec::new();
        let eval = |chosen: &[(usize, T)], t: &mut Vec<T>| -> T {
            t.iter_mut().for_each(|x| *x = T::zero());
            let mut used = T::zero();
            let mut val = T::zero();
            for &(k, y) in chosen {
                t[k] = self.coords[k].reach(y);
                used = used + self.coords[k].cost(t[k]);
                val = val + self.c[k] * t[k];
            }
            let rest: Vec<usize> = order.iter().copied().filter(|k| !chosen.iter().any(|c| c.0 == *k)).collect();
            val + self.waterfill(&rest, self.p - used, t)
        };
        let mut t = vec![T::zero(); nnz];
        let mut best_val = eval(&chosen, &mut t);
        let mut best_t = t.clone();
        for _ in 0..TAIL_ROUNDS {
            let used: T = chosen.iter().map(|&(k, y)| self.coords[k].cost(self.coords[k].reach(y))).sum();
            let room = self.p - used;
            let mut round_best: Option<(T, usize, T)> = None;
            for &k in order.iter().filter(|k| !chosen.iter().any(|c| c.0 == **k)).take(TAIL_CANDIDATES) {
                let coord = &self.coords[k];
                let floor = coord.cost(just_above_one::<T>());
                if !(coord.hi > T::one()) || !(floor <= room) {
                    continue;
                }
                let ys: Vec<T> = match &coord.shape {
                    TailShape::Atoms(xs) => xs.iter().map(|&x| coord.cost(x)).filter(|&y| y <= room).collect(),
                    _ => (0..=TAIL_GRID)
                        .map(|i| floor + (room - floor) * T::lit(i as f64 / TAIL_GRID as f64))
                        .collect(),
                };
                for y in ys {
                    let mut trial = chosen.clone();
                    trial.push((k, y));
                    let v = eval(&trial, &mut t);
                    if self.feasible(self.cost_of(&t)) && round_best.is_none_or(|b| v > b.0) {
                        round_best = Some((v, k, y));
                    }
                }
            }
            match round_best {
                Some((v, k, y)) if v > best_val => {
                    chosen.push((k, y));
                    best_val = eval(&chosen, &mut t);
                    best_t = t.clone();
                }
                _ => break,
            }
        }
        best_t
    }

    /// Spends leftover budget on the single coordinate with the best gain,
    /// a few times over.
    fn greedy_fill(&self, t: &mut [T]) {
        for _ in 0..FILL_ROUNDS {
            let costs: Vec<T> = self.coords.iter().zip(t.iter()).map(|(k, &x)| k.cost(x)).collect();
            let left = self.p - costs.iter().copied().sum::<T>();
            if !(left > T::zero()) {
                return;
            }
            let mut best: Option<(usize, T, T)> = None;
            for (k, coord) in self.coords.iter().enumerate() {
                let to = coord.reach(costs[k] + left).max(t[k]);
                let gain = self.c[k] * (to - t[k]);
                if gain > T::zero() && best.is_none_or(|b| gain > b.2) {
                    best = Some((k, to, gain));
                }
            }
            match best {
                Some((k, to, _)) if self.feasible(self.coords[k].cost(to) - costs[k] + (self.p - left)) => t[k] = to,
                _ => return,
            }
        }
    }

    /// Top-`m` coefficients sharing the budget equally, for geometric `m`.
    fn concentrated(&self) -> Vec<T> {
        let mut order: Vec<usize> = (0..self.c.len()).collect();
        order.sort_by(|&a, &b| self.c[b].partial_cmp(&self.c[a]).expect("finite coefficients"));
        let mut best = vec![T::zero(); self.c.len()];
        let mut best_val = T::neg_infinity();
        let mut m = 1usize;
        while m <= order.len().min(4096) {
            let share = self.p / T::lit(m as f64);
            let mut t = vec![T::zero(); self.c.len()];
            for &k in &order[..m] {
                t[k] = self.coords[k].reach(share);
            }
            let v = self.objective(&t);
            if v > best_val {
                best_val = v;
                best = t;
            }
            m = (m + 1).max(m * 5 / 4);
        }
        best
    }
}

/// `max Σ |a_ij| t_ij` over `t >= 0` with `Σ N̂_ij(t_ij) <= p`.
///
/// Lagrangian separation: for each multiplier every coordinate is maximized
/// on its own, the multiplier is bisected until the budget is met, and the
/// coordinates that differ across the final bracket are switched in order of
/// value per unit of budget. The best of that point, a greedy fill of the
/// remaining budget and equal-share concentrations on the largest entries is
/// returned, together with the minimized dual value.
pub fn max_linear<T: Real>(a: &CoeffMatrix<T>, budget: &OrliczBudget<T>) -> Result<OrliczSolution<T>> {
    let n = a.n();
    budget.check_dim(n)?;
    let p = budget.p();
    let support = a.support();
    let pos: Vec<(usize, usize)> = support.iter().map(|&(i, j, _)| (i, j)).collect();
    let coords = budget.coords(&pos, p)?;
    let prob = Problem {
        pos,
        c: support.iter().map(|e| e.2.abs()).collect(),
        coords,
        p,
    };
    if prob.c.is_empty() {
        return Ok(OrliczSolution {
            n,
            witness: Vec::new(),
            lambda: T::zero(),
            budget_used: T::zero(),
            objective: T::zero(),
            dual_upper: T::zero(),
            gap: T::zero(),
            feasible: true,
        });
    }

    let (lambda, t_lagrange) = {
        let free = prob.argmax(T::zero(), false);
        if prob.feasible(Problem::budget_of(&free)) {
            (T::zero(), free.iter().map(|c| c.t).collect::<Vec<T>>())
        } else {
            let (lo, hi) = bracket(&prob);
            let (mut lo, mut hi) = (lo, hi);
            for _ in 0..BISECTION_ITERS {
                if hi - lo <= T::lit(1e-12) * hi {
                    break;
                }
                let mid = (lo * hi).sqrt();
                let mid = if mid > lo && mid < hi { mid } else { (lo + hi) / T::lit(2.0) };
                if prob.feasible(Problem::budget_of(&prob.argmax(mid, false))) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let x_hi = prob.argmax(hi, false);
            let x_lo = prob.argmax(lo, true);
            (hi, mixture(&prob, &x_hi, &x_lo))
        }
    };
    let mut order: Vec<usize> = (0..prob.c.len()).collect();
    order.sort_by(|&x, &y| prob.c[y].partial_cmp(&prob.c[x]).expect("finite coefficients").then(x.cmp(&y)));
    let mut t = Vec::new();
    let mut best = T::neg_infinity();
    let uniform = matches!(budget.profiles(), BudgetProfiles::Uniform(_));
    let split = if uniform { prob.split_bound(&order) } else { None };
    let mut cands = vec![t_lagrange, prob.concentrated(), prob.tail_and_waterfill(&order)];
    if let Some((_, t)) = &split {
        cands.push(t.clone());
    }
    for mut cand in cands {
        prob.greedy_fill(&mut cand);
        let v = prob.objective(&cand);
        if prob.feasible(prob.cost_of(&cand)) && v > best {
            best = v;
            t = cand;
        }
    }

    let dual_upper = if lambda == T::zero() {
        prob.dual(T::zero())
    } else {
        minimize_dual(&prob, lambda)
    };
    let dual_upper = match &split {
        Some((u, _)) => dual_upper.min(*u),
        None => dual_upper,
    };
    let witness: Vec<(usize, usize, T)> = prob
        .pos
        .iter()
        .zip(&t)
        .zip(&support)
        .filter(|((_, &t), _)| t > T::zero())
        .map(|((&(i, j), &t), e)| (i, j, if e.2 < T::zero() { -t } else { t }))
        .collect();
    let budget_used = budget.cost(&witness);
    let objective: T = witness.iter().map(|&(i, j, t)| a.get(i, j) * t).sum();
    let dual_upper = dual_upper.max(objective);
    let gap = if dual_upper > T::zero() { (dual_upper - objective) / dual_upper } else { T::zero() };
    Ok(OrliczSolution {
        n,
        witness,
        lambda,
        budget_used,
        objective,
        dual_upper,
        gap,
        feasible: budget_used <= p * (T::one() + T::lit(BUDGET_SLACK)),
    })
}

/// `(lo, hi)` with the budget violated at `lo` and met at `hi`.
fn bracket<T: Real>(prob: &Problem<'_, T>) -> (T, T) {
    let ok = |l: T| prob.feasible(Problem::budget_of(&prob.argmax(l, false)));
    let two = T::lit(2.0);
    let mut hi = T::one();
    while !ok(hi) {
        hi = hi * two;
        if !hi.is_finite() {
            break;
        }
    }
    let mut lo = hi / two;
    while ok(lo) && lo > T::min_positive_value() {
        hi = lo;
        lo = lo / two;
    }
    (lo, hi)
}

/// Starts from the feasible `x_hi` and moves coordinates to their `x_lo`
/// value, best value per unit of budget first, while the budget allows.
fn mixture<T: Real>(prob: &Problem<'_, T>, x_hi: &[Cand<T>], x_lo: &[Cand<T>]) -> Vec<T> {
    let mut t: Vec<T> = x_hi.iter().map(|c| c.t).collect();
    let mut used = Problem::budget_of(x_hi);
    let mut moves: Vec<(usize, T, T)> = (0..t.len())
        .filter(|&k| x_lo[k].t > x_hi[k].t)
        .map(|k| {
            let dv = prob.c[k] * (x_lo[k].t - x_hi[k].t);
            let db = x_lo[k].cost - x_hi[k].cost;
            (k, dv, db)
        })
        .collect();
    moves.sort_by(|a, b| {
        let ra = if a.2 > T::zero() { a.1 / a.2 } else { T::infinity() };
        let rb = if b.2 > T::zero() { b.1 / b.2 } else { T::infinity() };
        rb.partial_cmp(&ra).expect("finite ratios").then(a.0.cmp(&b.0))
    });
    for (k, _, db) in moves {
        if prob.feasible(used + db) {
            t[k] = x_lo[k].t;
            used = used + db;
        }
    }
    t
}

/// Golden-section search of the convex dual over `ln λ` around `lambda0`.
fn minimize_dual<T: Real>(prob: &Problem<'_, T>, lambda0: T) -> T {
    let f = |u: T| prob.dual(u.exp());
    let mut lo = lambda0.ln() - T::lit(30.0);
    let mut hi = lambda0.ln() + T::lit(30.0);
    let g = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..DUAL_ITERS {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.min(f2).min(prob.dual(lambda0)).min(prob.dual(T::zero()))
}
