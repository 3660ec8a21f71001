use std::fs;

use vpp_core::experiments::{profit_report, reevaluate};
use vpp_core::io::{
    manifest_digest, model_hash, read_scenarios, read_solution, write_scenarios, write_solution,
    SolutionDump,
};
use vpp_core::scenario::{build_scenarios, ErrorTable};
use vpp_core::stochastic::{solve_extensive, RiskMeasure};
use vpp_core::synthetic::desk_instance;
use vpp_core::VppError;

#[test]
fn scenario_directory_round_trips_exactly() {
    let inst = desk_instance(2).unwrap();
    let table = ErrorTable::standard();
    let set = build_scenarios(&inst.forecast, &table, 7, 99).unwrap();
    let hash = model_hash(&inst.model, &inst.forecast).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let digest = write_scenarios(dir.path(), &inst.model, &set, &table, &hash).unwrap();
    assert_eq!(digest, manifest_digest(dir.path()).unwrap());

    let (back, manifest) = read_scenarios(dir.path(), &inst.model, Some(&hash)).unwrap();
    assert_eq!(back, set);
    assert_eq!(manifest.count, 7);
    assert_eq!(manifest.seed, 99);

    let err = read_scenarios(dir.path(), &inst.model, Some("0000")).unwrap_err();
    assert!(matches!(err, VppError::HashMismatch { .. }), "{err}");
}

#[test]
fn tampered_scenario_file_is_rejected() {
    let inst = desk_instance(2).unwrap();
    let table = ErrorTable::standard();
    let set = build_scenarios(&inst.forecast, &table, 3, 1).unwrap();
    let hash = model_hash(&inst.model, &inst.forecast).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scenarios(dir.path(), &inst.model, &set, &table, &hash).unwrap();
    let victim = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let mut text = fs::read_to_string(&victim).unwrap();
    text.push('\n');
    fs::write(&victim, text).unwrap();
    let err = read_scenarios(dir.path(), &inst.model, None).unwrap_err();
    assert!(matches!(err, VppError::HashMismatch { .. }), "{err}");
}

#[test]
fn model_hash_tracks_inputs() {
    let inst = desk_instance(2).unwrap();
    let a = model_hash(&inst.model, &inst.forecast).unwrap();
    assert_eq!(a, model_hash(&inst.model, &inst.forecast).unwrap());
    let changed = inst
        .model
        .with_prequalified(inst.model.market.prequalified_kw + 1.0)
        .unwrap();
    assert_ne!(a, model_hash(&changed, &inst.forecast).unwrap());
}

#[test]
fn stored_solution_reevaluates_to_solver_objective() {
    let inst = desk_instance(4).unwrap();
    let table = ErrorTable::standard();
    let set = build_scenarios(&inst.forecast, &table, 6, 8).unwrap();
    let hash = model_hash(&inst.model, &inst.forecast).unwrap();
    for risk in [RiskMeasure::Expectation, RiskMeasure::Cvar { alpha: 0.75 }] {
        let sol = solve_extensive(&inst.model, &set, risk, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = write_solution(
            dir.path(),
            &SolutionDump {
                model: &inst.model,
                solution: &sol,
                report: None,
                method: "extensive",
                model_hash: &hash,
                scenario_manifest_hash: "none",
            },
        )
        .unwrap();
        let stored = read_solution(dir.path(), &inst.model).unwrap();
        assert_eq!(stored.summary, summary);
        assert_eq!(stored.first_stage, sol.first_stage);
        let again =
            reevaluate(&inst.model, &set, stored.first_stage, stored.dispatch, risk).unwrap();
        assert!((again.objective - sol.objective).abs() <= 1e-6 * sol.objective.abs().max(1.0));
        if risk == RiskMeasure::Expectation {
            assert!(
                (again.objective - summary.expected_cost).abs()
                    <= 1e-6 * summary.expected_cost.abs().max(1.0)
            );
        }
        assert_eq!(again.expected_cost(), summary.expected_cost);
    }
}

#[test]
fn zero_prices_give_zero_statistics() {
    let mut inst = desk_instance(5).unwrap();
    let f = &mut inst.forecast;
    for series in [
        &mut f.day_ahead,
        &mut f.rcm_up,
        &mut f.rcm_dn,
        &mut f.ram_up,
        &mut f.ram_dn,
        &mut f.mfrr_up,
        &mut f.mfrr_dn,
    ] {
        series.iter_mut().for_each(|v| *v = 0.0);
    }
    let model = inst
        .model
        .with_tariff(vec![0.0; inst.model.horizon.steps])
        .unwrap();
    let mut table = ErrorTable::zero();
    // keep physical uncertainty; prices stay at zero
    for kind in [
        vpp_core::scenario::ErrorKind::Load,
        vpp_core::scenario::ErrorKind::Generation,
    ] {
        table.set(kind, *ErrorTable::standard().get(kind));
    }
    let set = build_scenarios(&inst.forecast, &table, 5, 3).unwrap();
    let sol = solve_extensive(&model, &set, RiskMeasure::Expectation, None).unwrap();
    let report = profit_report(&model, &set, &sol, 0.9, 5).unwrap();
    let e = &report.expected;
    for v in [
        report.expected_profit,
        report.profit_std,
        report.cost_cvar,
        e.dam_revenue,
        e.rcm_revenue,
        e.ram_revenue,
        e.tariff,
        e.imbalance,
        e.operations,
    ] {
        assert!(v.abs() <= 1e-9, "{report:?}");
    }
}
