//! Simplex results against brute-force vertex enumeration on small boxed LPs.

use modescout::lp::{solve, solve_with, LinearProgram, LpStatus, PivotRule, SimplexOptions};
use proptest::prelude::*;

/// Solve a k×k system by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// `min c·z` over `{A z <= b}` (bounded) by enumerating every vertex.
fn vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    for idx in combinations(a.len(), n) {
        let sub_a = idx.iter().map(|&i| a[i].clone()).collect();
        let sub_b = idx.iter().map(|&i| b[i]).collect();
        let Some(z) = solve_square(sub_a, sub_b) else { continue };
        let feasible = a
            .iter()
            .zip(b)
            .all(|(row, &bi)| row.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>() <= bi + 1e-7);
        if feasible {
            let v: f64 = c.iter().zip(&z).map(|(x, y)| x * y).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn small_lp() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec((prop::collection::vec(-3.0..3.0f64, n), -4.0..6.0f64), 1..5),
        )
            .prop_map(move |(c, rows)| {
                let (a, b): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
                (c, a, b)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_vertex_enumeration((c, a, b) in small_lp()) {
        let n = c.len();
        // box -10 <= z <= 10 keeps every instance bounded
        let mut lp = LinearProgram::minimize(c.clone());
        for v in 0..n {
            lp = lp.bound(v, Some(-10.0), Some(10.0)).unwrap();
        }
        for (row, &bi) in a.iter().zip(&b) {
            lp = lp.le(row, bi).unwrap();
        }
        let mut all_a = a.clone();
        let mut all_b = b.clone();
        for v in 0..n {
            let mut e = vec![0.0; n];
            e[v] = 1.0;
            all_a.push(e.clone());
            all_b.push(10.0);
            e[v] = -1.0;
            all_a.push(e);
            all_b.push(10.0);
        }
        let oracle = vertex_oracle(&c, &all_a, &all_b);
        for rule in [PivotRule::Bland, PivotRule::DantzigThenBland] {
            let out = solve_with(&lp, &SimplexOptions { rule, ..SimplexOptions::default() }).unwrap();
            match oracle {
                None => prop_assert_eq!(out.status, LpStatus::Infeasible),
                Some(v) => {
                    prop_assert_eq!(out.status, LpStatus::Optimal);
                    let got = out.objective_value.unwrap();
                    prop_assert!((got - v).abs() <= 1e-6 * (1.0 + v.abs()), "{got} vs {v}");
                    prop_assert!(lp.max_violation(out.solution.as_ref().unwrap()) <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn weak_duality_and_determinism((c, a, b) in small_lp(), probes in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 5), 50)) {
        let n = c.len();
        let mut lp = LinearProgram::minimize(c.clone());
        for v in 0..n {
            lp = lp.bound(v, Some(-10.0), Some(10.0)).unwrap();
        }
        for (row, &bi) in a.iter().zip(&b) {
            lp = lp.le(row, bi).unwrap();
        }
        let out = solve(&lp, 1e-9).unwrap();
        prop_assert_eq!(&out, &solve(&lp, 1e-9).unwrap());
        if let Some(opt) = out.objective_value {
            for p in &probes {
                let z = &p[..n];
                if lp.max_violation(z) <= 0.0 {
                    prop_assert!(lp.objective_at(z) >= opt - 1e-9);
                }
            }
        }
    }

    #[test]
    fn equality_rows_hold((c, a, b) in small_lp(), shift in -2.0..2.0f64) {
        let n = c.len();
        let mut lp = LinearProgram::minimize(c);
        for v in 0..n {
            lp = lp.bound(v, Some(-10.0), Some(10.0)).unwrap();
        }
        lp = lp.eq(&vec![1.0; n], shift).unwrap();
        for (row, &bi) in a.iter().zip(&b) {
            lp = lp.le(row, bi).unwrap();
        }
        let out = solve(&lp, 1e-9).unwrap();
        if let Some(z) = out.solution {
            prop_assert!((z.iter().sum::<f64>() - shift).abs() < 1e-7);
        }
    }
}

#[test]
fn spec_examples() {
    let lp = LinearProgram::minimize(vec![1.0]).ge(&[1.0], 3.0).unwrap();
    let out = solve(&lp, 1e-9).unwrap();
    assert_eq!(out.status, LpStatus::Optimal);
    assert_eq!(out.solution.unwrap(), vec![3.0]);
    assert_eq!(out.objective_value, Some(3.0));

    let infeasible = LinearProgram::feasibility(1)
        .le(&[1.0], 0.0)
        .unwrap()
        .ge(&[1.0], 1.0)
        .unwrap();
    let out = solve(&infeasible, 1e-9).unwrap();
    assert_eq!(out.status, LpStatus::Infeasible);
    assert!(out.solution.is_none());

    let unbounded = LinearProgram::minimize(vec![-1.0]);
    assert_eq!(solve(&unbounded, 1e-9).unwrap().status, LpStatus::Unbounded);
}
