use std::collections::VecDeque;

use super::Assignment;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Largest cloud the O(N³) exact solver accepts.
pub const EXACT_CAP: usize = 512;

fn check_sizes(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

fn cost_matrix(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for p in a {
        c.extend(b.iter().map(|q| (p - q).norm()));
    }
    c
}

/// Optimal assignment by shortest augmenting paths (Hungarian method).
pub fn emd_exact(a: &[Vec3], b: &[Vec3]) -> Result<(f64, Assignment)> {
    check_sizes(a, b)?;
    let n = a.len();
    if n > EXACT_CAP {
        return Err(Error::ExactCapExceeded { n, cap: EXACT_CAP });
    }
    let c = cost_matrix(a, b);
    // 1-based rows/columns; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &c[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut phi = vec![0; n];
    for j in 1..=n {
        phi[owner[j] - 1] = j - 1;
    }
    let asg = Assignment(phi);
    Ok((asg.cost(a, b), asg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionOptions {
    /// Stop once the matched cost is within this relative gap of a dual lower bound.
    pub tolerance: f64,
    /// Factor by which ε shrinks between phases.
    pub scaling: f64,
    /// Smallest ε relative to the largest pairwise distance.
    pub min_eps_rel: f64,
    pub max_bids: u64,
}

impl Default for AuctionOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.01,
            scaling: 5.0,
            min_eps_rel: 1e-12,
            max_bids: 2_000_000_000,
        }
    }
}

impl AuctionOptions {
    /// Runs ε-scaling down to the floor regardless of the gap.
    pub fn to_completion() -> Self {
        Self { tolerance: 0.0, ..Self::default() }
    }
}

/// Prices carried between solves on similar inputs.
#[derive(Debug, Clone, Default)]
pub struct AuctionState {
    prices: Vec<f64>,
    last_eps: f64,
}

pub fn emd_approx(a: &[Vec3], b: &[Vec3], opts: &AuctionOptions) -> Result<f64> {
    Ok(emd_approx_assignment(a, b, opts, &mut AuctionState::default())?.0)
}

/// Forward auction with ε-scaling. Each phase ends with a complete
/// assignment; the solve stops when its cost is within `tolerance` of the
/// dual bound `Σ_i min_j (c_ij + p_j) - Σ_j p_j`, which never exceeds the optimum.
pub fn emd_approx_assignment(
    a: &[Vec3],
    b: &[Vec3],
    opts: &AuctionOptions,
    state: &mut AuctionState,
) -> Result<(f64, Assignment)> {
    check_sizes(a, b)?;
    let n = a.len();
    let c = cost_matrix(a, b);
    let max_cost = c.iter().cloned().fold(0.0, f64::max);
    if max_cost == 0.0 {
        let asg = Assignment::identity(n);
        return Ok((asg.cost(a, b), asg));
    }
    let eps_min = opts.min_eps_rel * max_cost;
    let warm = state.prices.len() == n;
    if !warm {
        state.prices = vec![0.0; n];
    }
    let prices = &mut state.prices;
    let mut eps = if warm && state.last_eps > 0.0 {
        (state.last_eps * opts.scaling * opts.scaling).min(max_cost / 2.0)
    } else {
        max_cost / 2.0
    };
    let mut owner = vec![usize::MAX; n];
    let mut phi = vec![usize::MAX; n];
    let mut bids = 0u64;
    loop {
        owner.iter_mut().for_each(|o| *o = usize::MAX);
        phi.iter_mut().for_each(|o| *o = usize::MAX);
        let mut queue: VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            bids += 1;
            if bids > opts.max_bids {
                return Err(Error::NonConvergence(bids as usize));
            }
            let row = &c[i * n..(i + 1) * n];
            let (mut best, mut second, mut jb) = (f64::INFINITY, f64::INFINITY, 0);
            for (j, (&cij, &pj)) in row.iter().zip(prices.iter()).enumerate() {
                let r = cij + pj;
                if r < best {
                    second = best;
                    best = r;
                    jb = j;
                } else if r < second {
                    second = r;
                }
            }
            let inc = if second.is_finite() { second - best + eps } else { eps };
            prices[jb] += inc;
            let prev = std::mem::replace(&mut owner[jb], i);
            phi[i] = jb;
            if prev != usize::MAX {
                phi[prev] = usize::MAX;
                queue.push_back(prev);
            }
        }
        let primal: f64 = (0..n).map(|i| c[i * n + phi[i]]).sum();
        let dual: f64 = (0..n)
            .map(|i| {
                c[i * n..(i + 1) * n]
                    .iter()
                    .zip(prices.iter())
                    .map(|(x, p)| x + p)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            - prices.iter().sum::<f64>();
        let done = primal - dual <= opts.tolerance * dual.max(0.0) || eps <= eps_min;
        if done {
            state.last_eps = eps;
            break;
        }
        eps = (eps / opts.scaling).max(eps_min);
    }
    let asg = Assignment(phi);
    Ok((asg.cost(a, b), asg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn random_cloud(n: usize, rng: &mut seed::Rng) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    fn brute(a: &[Vec3], b: &[Vec3]) -> f64 {
        fn rec(i: usize, a: &[Vec3], b: &[Vec3], used: &mut Vec<bool>, perm: &mut Vec<usize>, best: &mut f64) {
            if i == a.len() {
                let s = Assignment(perm.clone()).cost(a, b);
                *best = best.min(s);
                return;
            }
            for j in 0..b.len() {
                if !used[j] {
                    used[j] = true;
                    perm.push(j);
                    rec(i + 1, a, b, used, perm, best);
                    perm.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, a, b, &mut vec![false; b.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn greedy_trap_example() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        let b = [Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let (v, asg) = emd_exact(&a, &b).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(asg.0, vec![0, 1]);
    }

    #[test]
    fn identity_is_zero() {
        let mut rng = seed::rng(1);
        let a = random_cloud(20, &mut rng);
        let (v, asg) = emd_exact(&a, &a).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(asg, Assignment::identity(20));
        assert!(emd_approx(&a, &a, &AuctionOptions::default()).unwrap() <= 0.01 * 3f64.sqrt());
    }

    #[test]
    fn errors() {
        let a = [Vec3::zeros(); 3];
        assert!(matches!(emd_exact(&a, &a[..2]), Err(Error::SizeMismatch { .. })));
        let big = vec![Vec3::zeros(); EXACT_CAP + 1];
        assert!(matches!(emd_exact(&big, &big), Err(Error::ExactCapExceeded { .. })));
        assert!(matches!(emd_approx(&a, &a[..1], &AuctionOptions::default()), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut rng = seed::rng(7);
        for trial in 0..60 {
            let n = 1 + trial % 6;
            let a = random_cloud(n, &mut rng);
            let b = random_cloud(n, &mut rng);
            let (v, asg) = emd_exact(&a, &b).unwrap();
            assert!(asg.is_bijection());
            assert!((v - brute(&a, &b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn auction_bounds() {
        let mut rng = seed::rng(8);
        for _ in 0..10 {
            let a = random_cloud(64, &mut rng);
            let b = random_cloud(64, &mut rng);
            let (exact, _) = emd_exact(&a, &b).unwrap();
            let (approx, asg) = emd_approx_assignment(&a, &b, &AuctionOptions::default(), &mut AuctionState::default()).unwrap();
            assert!(asg.is_bijection());
            assert!(approx >= exact - 1e-9 && approx <= 1.01 * exact, "{approx} vs {exact}");
        }
        let a = random_cloud(8, &mut rng);
        let b = random_cloud(8, &mut rng);
        let full = emd_approx(&a, &b, &AuctionOptions::to_completion()).unwrap();
        assert!((full - emd_exact(&a, &b).unwrap().0).abs() <= 1e-9);
    }

    #[test]
    fn warm_start_gives_same_guarantee() {
        let mut rng = seed::rng(9);
        let a = random_cloud(100, &mut rng);
        let b = random_cloud(100, &mut rng);
        let mut state = AuctionState::default();
        emd_approx_assignment(&a, &b, &AuctionOptions::default(), &mut state).unwrap();
        let a2: Vec<Vec3> = a.iter().map(|p| p + Vec3::new(0.01, 0.0, 0.0)).collect();
        let (v, _) = emd_approx_assignment(&a2, &b, &AuctionOptions::default(), &mut state).unwrap();
        let exact = emd_exact(&a2, &b).unwrap().0;
        assert!(v >= exact - 1e-9 && v <= 1.01 * exact);
    }
}
