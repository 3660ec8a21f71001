#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpp_lp::{dual_signs_ok, LinearProgram, LpStatus, Sense, SolverOptions, VarId, VarStatus};

/// Brute-force optimum over all basic solutions of a bounded LP.
///
/// Rows and finite bounds are turned into half-spaces `g.x <= h`; every
/// n-subset is solved as a square system and feasible points are compared.
fn vertex_enumeration(p: &LinearProgram) -> Option<f64> {
    let n = p.num_variables();
    let mut halfspaces: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in p.constraints() {
        let mut g = vec![0.0; n];
        for &(v, a) in &c.terms {
            g[v.0] = a;
        }
        match c.sense {
            Sense::Le => halfspaces.push((g, c.rhs)),
            Sense::Ge => halfspaces.push((g.iter().map(|v| -v).collect(), -c.rhs)),
            Sense::Eq => {
                halfspaces.push((g.clone(), c.rhs));
                halfspaces.push((g.iter().map(|v| -v).collect(), -c.rhs));
            }
        }
    }
    for (j, v) in p.variables().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if v.upper.is_finite() {
            halfspaces.push((e.clone(), v.upper));
        }
        if v.lower.is_finite() {
            halfspaces.push((e.iter().map(|x| -x).collect(), -v.lower));
        }
    }
    let k = halfspaces.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    if n > k {
        return None;
    }
    loop {
        let mut a: Vec<Vec<f64>> = idx.iter().map(|&i| halfspaces[i].0.clone()).collect();
        let mut b: Vec<f64> = idx.iter().map(|&i| halfspaces[i].1).collect();
        if let Some(x) = gauss_solve(&mut a, &mut b) {
            let feasible = halfspaces
                .iter()
                .all(|(g, h)| g.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= h + 1e-9);
            if feasible {
                let obj = p.evaluate_objective(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] != i + k - n {
                break;
            }
            if i == 0 && idx[0] == k - n {
                return best;
            }
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Independent optimality certificate: primal feasibility, dual sign
/// feasibility, reduced-cost consistency and complementary slackness.
fn assert_kkt(p: &LinearProgram, sol: &vpp_lp::LpSolution, tol: f64) {
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(
        p.max_violation(&sol.primal) <= 1e-7,
        "primal violation {}",
        p.max_violation(&sol.primal)
    );
    assert!(dual_signs_ok(p, sol, tol));
    let n = p.num_variables();
    // d = c - A^T y
    let mut d = p.objective().to_vec();
    for (c, &y) in p.constraints().iter().zip(&sol.duals) {
        for &(v, a) in &c.terms {
            d[v.0] -= a * y;
        }
    }
    for j in 0..n {
        let v = p.variable(VarId(j));
        let x = sol.primal[j];
        let scale = 1.0 + p.objective()[j].abs();
        if d[j] > tol * scale {
            assert!(
                (x - v.lower).abs() <= 1e-6 * (1.0 + v.lower.abs()),
                "var {j} d={} x={x} lower={}",
                d[j],
                v.lower
            );
        } else if d[j] < -tol * scale {
            assert!(
                (x - v.upper).abs() <= 1e-6 * (1.0 + v.upper.abs()),
                "var {j} d={} x={x} upper={}",
                d[j],
                v.upper
            );
        }
    }
    for (i, (c, &y)) in p.constraints().iter().zip(&sol.duals).enumerate() {
        if y.abs() > tol {
            let act = p.row_activity(vpp_lp::RowId(i), &sol.primal);
            assert!(
                (act - c.rhs).abs() <= 1e-6 * (1.0 + c.rhs.abs()),
                "row {i} slack with dual {y}"
            );
        }
    }
    let dual = p.dual_objective(sol).unwrap();
    assert!((dual - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
}

fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(0..=max_rows);
    let mut p = LinearProgram::new();
    let mut x0 = Vec::new();
    let mut vars = Vec::new();
    let mut free_vars = Vec::new();
    for j in 0..n {
        let kind = rng.random_range(0..10);
        let (l, u) = match kind {
            0 | 1 => (f64::NEG_INFINITY, f64::INFINITY),
            2 => (-3.0, -3.0 + rng.random_range(0.0..2.0)),
            _ => {
                let l = rng.random_range(-5.0..2.0);
                (l, l + rng.random_range(0.5..6.0))
            }
        };
        let v = p.add_variable(l, u, format!("x{j}")).unwrap();
        let c: f64 = rng.random_range(-5.0..5.0);
        p.set_objective_coefficient(v, (c * 4.0).round() / 4.0)
            .unwrap();
        let point = if l.is_finite() {
            rng.random_range(l..=u)
        } else {
            rng.random_range(-3.0..3.0)
        };
        if !l.is_finite() {
            free_vars.push(v);
        }
        x0.push(point);
        vars.push(v);
    }
    let budget = m.saturating_sub(2 * free_vars.len().min(m / 2));
    for i in 0..budget {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.random_bool(0.7) {
                terms.push((v, rng.random_range(-4i32..=4) as f64));
            }
        }
        terms.retain(|&(_, a)| a != 0.0);
        let act: f64 = terms.iter().map(|&(v, a)| a * x0[v.0]).sum();
        let sense = match rng.random_range(0..7) {
            0 => Sense::Eq,
            1..=3 => Sense::Le,
            _ => Sense::Ge,
        };
        let slack = rng.random_range(0.0..3.0);
        let rhs = match sense {
            Sense::Le => act + slack,
            Sense::Ge => act - slack,
            Sense::Eq => act,
        };
        p.add_constraint(terms, sense, rhs, format!("r{i}"))
            .unwrap();
    }
    // Box free variables through rows so the LP stays bounded.
    for &v in &free_vars {
        p.add_constraint(vec![(v, 1.0)], Sense::Le, x0[v.0] + 4.0, "box_hi")
            .unwrap();
        p.add_constraint(vec![(v, 1.0)], Sense::Ge, x0[v.0] - 4.0, "box_lo")
            .unwrap();
    }
    p
}

#[test]
fn single_variable_with_dual() {
    let mut p = LinearProgram::new();
    let x = p.add_variable(0.0, f64::INFINITY, "x").unwrap();
    p.set_objective_coefficient(x, 1.0).unwrap();
    let r = p
        .add_constraint(vec![(x, 1.0)], Sense::Ge, 1.0, "x>=1")
        .unwrap();
    let sol = p.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-12);
    assert!((sol.dual(r) - 1.0).abs() < 1e-12);
    assert!((p.dual_objective(&sol).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn two_variable_vertex() {
    let mut p = LinearProgram::new();
    let x = p.add_variable(0.0, f64::INFINITY, "x").unwrap();
    let y = p.add_variable(0.0, f64::INFINITY, "y").unwrap();
    p.set_objective_coefficient(x, -1.0).unwrap();
    p.set_objective_coefficient(y, -2.0).unwrap();
    p.add_constraint(vec![(x, 1.0)], Sense::Le, 1.0, "cx")
        .unwrap();
    p.add_constraint(vec![(y, 1.0)], Sense::Le, 1.0, "cy")
        .unwrap();
    let oracle = vertex_enumeration(&p).unwrap();
    assert_eq!(oracle, -3.0);
    let sol = p.solve().unwrap();
    assert!((sol.objective - oracle).abs() < 1e-9);
    assert!((sol.value(x) - 1.0).abs() < 1e-9 && (sol.value(y) - 1.0).abs() < 1e-9);
    assert!((p.dual_objective(&sol).unwrap() + 3.0).abs() < 1e-9);
    assert!(sol.duals.iter().all(|&d| d <= 0.0));
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut p = LinearProgram::new();
    let x = p
        .add_variable(f64::NEG_INFINITY, f64::INFINITY, "x")
        .unwrap();
    p.add_constraint(vec![(x, 1.0)], Sense::Ge, 1.0, "lo")
        .unwrap();
    p.add_constraint(vec![(x, 1.0)], Sense::Le, 0.0, "hi")
        .unwrap();
    assert_eq!(p.solve().unwrap().status, LpStatus::Infeasible);
    assert!(p.dual_objective(&p.solve().unwrap()).is_err());
}

#[test]
fn zero_objective_dual_is_zero() {
    let mut p = LinearProgram::new();
    let x = p
        .add_variable(f64::NEG_INFINITY, f64::INFINITY, "x")
        .unwrap();
    p.add_constraint(vec![(x, 1.0)], Sense::Ge, 0.0, "x>=0")
        .unwrap();
    let sol = p.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert_eq!(sol.objective, 0.0);
    assert_eq!(p.dual_objective(&sol).unwrap(), 0.0);
}

#[test]
fn unbounded_with_ray() {
    let mut p = LinearProgram::new();
    let x = p.add_variable(0.0, f64::INFINITY, "x").unwrap();
    let y = p.add_variable(0.0, f64::INFINITY, "y").unwrap();
    p.set_objective_coefficient(x, -1.0).unwrap();
    p.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Le, 2.0, "r")
        .unwrap();
    let sol = p.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Unbounded);
    let ray = sol.ray.unwrap();
    // descent direction that stays feasible
    assert!(-ray[0] < 0.0);
    assert!(ray[0] - ray[1] <= 1e-12 && ray[0] >= 0.0 && ray[1] >= 0.0);
}

#[test]
fn empty_rows_are_checked_directly() {
    let mut p = LinearProgram::new();
    let x = p.add_variable(0.0, 1.0, "x").unwrap();
    p.set_objective_coefficient(x, 1.0).unwrap();
    p.add_constraint(vec![], Sense::Le, 1.0, "trivial").unwrap();
    assert_eq!(p.solve().unwrap().status, LpStatus::Optimal);
    p.add_constraint(vec![], Sense::Ge, 1.0, "impossible")
        .unwrap();
    assert_eq!(p.solve().unwrap().status, LpStatus::Infeasible);
}

#[test]
fn fixed_and_free_variables() {
    let mut p = LinearProgram::new();
    let f = p.add_variable(2.0, 2.0, "fixed").unwrap();
    let g = p
        .add_variable(f64::NEG_INFINITY, f64::INFINITY, "free")
        .unwrap();
    p.set_objective_coefficient(g, 1.0).unwrap();
    p.add_constraint(vec![(g, 1.0), (f, -1.0)], Sense::Ge, 0.5, "link")
        .unwrap();
    let sol = p.solve().unwrap();
    assert!((sol.value(g) - 2.5).abs() < 1e-12);
    assert_kkt(&p, &sol, 1e-9);
}

#[test]
fn solve_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_lp(&mut rng, 30, 40);
    let a = p.solve().unwrap();
    let b = p.solve().unwrap();
    assert_eq!(a, b);
}

#[test]
fn warm_start_reaches_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut solved = 0;
    for _ in 0..40 {
        let mut p = random_lp(&mut rng, 12, 16);
        let cold = p.solve().unwrap();
        if cold.status != LpStatus::Optimal || p.num_constraints() == 0 {
            continue;
        }
        let basis = cold.basis.clone().unwrap();
        let rhs = p.constraints()[0].rhs;
        p.set_rhs(vpp_lp::RowId(0), rhs + 0.25).unwrap();
        let fresh = p.solve().unwrap();
        let warm = p
            .solve_with(&SolverOptions::default(), Some(&basis))
            .unwrap();
        assert_eq!(fresh.status, warm.status);
        if fresh.status == LpStatus::Optimal {
            assert!(
                (fresh.objective - warm.objective).abs() <= 1e-7 * (1.0 + fresh.objective.abs())
            );
            solved += 1;
        }
    }
    assert!(solved > 10);
}

#[test]
fn basis_statuses_cover_structurals_and_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_lp(&mut rng, 8, 8);
    let sol = p.solve().unwrap();
    let basis = sol.basis.unwrap();
    assert_eq!(
        basis.statuses.len(),
        p.num_variables() + p.num_constraints()
    );
    let basic = basis
        .statuses
        .iter()
        .filter(|&&s| s == VarStatus::Basic)
        .count();
    assert_eq!(basic, p.num_constraints());
}

#[test]
fn larger_random_programs_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let p = random_lp(&mut rng, 60, 80);
        let sol = p.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_kkt(&p, &sol, 1e-7);
    }
}

#[test]
fn sparse_staircase_program() {
    // Storage-like chain: s_t = s_{t-1} + c_t - d_t, sell d at price, buy c.
    let steps = 300;
    let mut p = LinearProgram::new();
    let mut prev = None;
    for t in 0..steps {
        let price = 50.0 + 30.0 * ((t as f64) * 0.3).sin();
        let c = p.add_variable(0.0, 5.0, format!("c{t}")).unwrap();
        let d = p.add_variable(0.0, 5.0, format!("d{t}")).unwrap();
        let s = p.add_variable(0.0, 20.0, format!("s{t}")).unwrap();
        p.set_objective_coefficient(c, price).unwrap();
        p.set_objective_coefficient(d, -price * 0.9).unwrap();
        let mut terms = vec![(s, 1.0), (c, -0.95), (d, 1.0)];
        let rhs = match prev {
            Some(sp) => {
                terms.push((sp, -1.0));
                0.0
            }
            None => 10.0,
        };
        p.add_constraint(terms, Sense::Eq, rhs, format!("soc{t}"))
            .unwrap();
        prev = Some(s);
    }
    p.add_constraint(vec![(prev.unwrap(), 1.0)], Sense::Ge, 10.0, "terminal")
        .unwrap();
    let sol = p.solve().unwrap();
    assert_kkt(&p, &sol, 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]
    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lp(&mut rng, 5, 7);
        let sol = p.solve().unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_enumeration(&p).unwrap();
        prop_assert!((sol.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
            "simplex {} vs oracle {}", sol.objective, oracle);
        let dual = p.dual_objective(&sol).unwrap();
        prop_assert!((dual - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
        prop_assert!(dual_signs_ok(&p, &sol, 1e-9));
    }
}
