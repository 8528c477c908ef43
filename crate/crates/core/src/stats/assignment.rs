//! Dense linear assignment (Hungarian method with potentials, O(n^3)).

use crate::error::{Error, Result};

/// Minimum-cost perfect matching for a square row-major cost matrix.
/// Returns `perm` with row `i` assigned to column `perm[i]`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::InvalidParameter(format!(
            "cost matrix has {} entries, expected {n}x{n}",
            cost.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based arrays; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    Ok(perm)
}

/// Optimal total cost, summed from the original entries in row order.
pub fn assignment_cost(cost: &[f64], n: usize) -> Result<f64> {
    let perm = solve_assignment(cost, n)?;
    Ok(perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_permutation_search() {
        let mut rng = SeededRng::new(11, 0);
        for trial in 0..600 {
            let n = 1 + trial % 6;
            let cost: Vec<f64> = (0..n * n).map(|_| rng.open01() * 10.0).collect();
            let got = assignment_cost(&cost, n).unwrap();
            let want = brute_force(&cost, n);
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "n={n}: {got} vs {want}");
            let mut perm = solve_assignment(&cost, n).unwrap();
            perm.sort_unstable();
            assert_eq!(perm, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn handles_ties_and_negatives() {
        let cost = vec![1.0; 16];
        assert_eq!(assignment_cost(&cost, 4).unwrap(), 4.0);
        let cost = vec![-1.0, 2.0, 3.0, -4.0];
        assert_eq!(assignment_cost(&cost, 2).unwrap(), -5.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_assignment(&[1.0, 2.0], 2).is_err());
        assert!(solve_assignment(&[f64::NAN], 1).is_err());
        assert!(solve_assignment(&[], 0).unwrap().is_empty());
    }
}
