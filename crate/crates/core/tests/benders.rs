use vpp_core::benders::{solve_benders, solve_subproblem, BendersOptions, OptimalityCut};
use vpp_core::experiments::{solve, SolveMethod};
use vpp_core::market::FirstStageDecision;
use vpp_core::scenario::{build_scenarios, ErrorTable, ScenarioSet};
use vpp_core::stochastic::{solve_extensive, RiskMeasure};
use vpp_core::synthetic::{desk_instance, Instance};
use vpp_core::VppError;

fn desk(n: usize) -> (Instance, ScenarioSet) {
    let inst = desk_instance(3).unwrap();
    let set = build_scenarios(&inst.forecast, &ErrorTable::standard(), n, 17).unwrap();
    (inst, set)
}

#[test]
fn cuts_underestimate_recourse() {
    let (inst, set) = desk(3);
    let h = &inst.model.horizon;
    let at = FirstStageDecision::zeros(h);
    let mut other = FirstStageDecision::zeros(h);
    for (t, v) in other.dam_kw.iter_mut().enumerate() {
        *v = 10.0 * (t as f64 - 3.0);
    }
    other.rcm_up_kw[0] = 5.0;
    for sc in &set.scenarios {
        let r = solve_subproblem(&inst.model, sc, &at).unwrap();
        let exact = solve_subproblem(&inst.model, sc, &other).unwrap();
        let cut = OptimalityCut::from_point(0, &at.to_vec(), r.cost, r.gradient);
        let predicted = cut.value_at(&other.to_vec());
        assert!(
            predicted <= exact.cost + 1e-6,
            "cut {predicted} above recourse {}",
            exact.cost
        );
        assert!((cut.value_at(&at.to_vec()) - r.cost).abs() <= 1e-9 * r.cost.abs().max(1.0));
    }
}

#[test]
fn bounds_bracket_the_optimum() {
    let (inst, set) = desk(4);
    let opt = solve_extensive(&inst.model, &set, RiskMeasure::Expectation, None)
        .unwrap()
        .objective;
    let r = solve_benders(
        &inst.model,
        &set,
        RiskMeasure::Expectation,
        &BendersOptions::default(),
    )
    .unwrap();
    assert!(r.report.converged);
    let tol = 1e-6 * opt.abs().max(1.0);
    for (k, (lb, ub)) in r
        .report
        .lower_bounds
        .iter()
        .zip(&r.report.best_upper_bounds)
        .enumerate()
    {
        assert!(
            *lb <= opt + tol && *ub >= opt - tol,
            "iteration {k}: [{lb}, {ub}] misses {opt}"
        );
    }
    assert!(r.report.lower_bounds.windows(2).all(|w| w[1] >= w[0]));
    assert!(r.report.best_upper_bounds.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn iteration_limit_reports_non_convergence() {
    let (inst, set) = desk(4);
    let opts = BendersOptions {
        max_iterations: 2,
        ..BendersOptions::default()
    };
    let r = solve_benders(&inst.model, &set, RiskMeasure::Expectation, &opts).unwrap();
    assert!(!r.report.converged);
    assert_eq!(r.report.iterations, 2);
    assert!(r.report.final_gap > opts.tolerance);
}

#[test]
fn dispatch_agrees_with_extensive_under_cvar() {
    let (inst, set) = desk(5);
    let risk = RiskMeasure::Cvar { alpha: 0.8 };
    let (ext, none) = solve(
        &inst.model,
        &set,
        risk,
        &SolveMethod::Extensive { max_rows: None },
    )
    .unwrap();
    let (ben, report) = solve(
        &inst.model,
        &set,
        risk,
        &SolveMethod::Benders(BendersOptions::default()),
    )
    .unwrap();
    assert!(none.is_none() && report.is_some());
    assert!((ext.objective - ben.objective).abs() <= 1e-6 * ext.objective.abs().max(1.0));
    // Bids may differ between alternative optima; the risk value at them may not.
    assert!(
        (ben.cost_cvar(0.8).unwrap() - ben.objective).abs() <= 1e-9 * ben.objective.abs().max(1.0)
    );
}

#[test]
fn size_guard_refuses_large_extensive_forms() {
    let (inst, set) = desk(3);
    let err = solve(
        &inst.model,
        &set,
        RiskMeasure::Expectation,
        &SolveMethod::Extensive {
            max_rows: Some(100),
        },
    )
    .unwrap_err();
    assert!(
        matches!(err, VppError::SizeGuard { limit: 100, .. }),
        "{err}"
    );
}
