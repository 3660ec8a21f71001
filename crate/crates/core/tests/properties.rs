use std::f64::consts::PI;

use proptest::prelude::*;

use vpp_core::der::DerPark;
use vpp_core::grid::{polygon_admits, synthetic_feeder, DEFAULT_POLYGON_SIDES};
use vpp_core::horizon::Horizon;
use vpp_core::market::MarketConfig;
use vpp_core::model::VppModel;
use vpp_core::scenario::{
    build_scenarios, inverse_transform, lhs_sample, Distribution, ErrorSpec, ErrorTable,
    ScenarioSet,
};
use vpp_core::stochastic::{build_extensive, cvar_of_samples, expectation, RiskMeasure};
use vpp_core::synthetic::{daily_forecast, desk_instance, DailyShape};
use vpp_lp::LpStatus;

fn distribution() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(|(c, w)| {
                let s: f64 = w.iter().sum();
                (c, w.iter().map(|v| v / s).collect())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lhs_hits_every_stratum_once(n in 1usize..300, dims in 1usize..12, seed in any::<u64>()) {
        let pts = lhs_sample(n, dims, seed).unwrap();
        prop_assert_eq!(pts.len(), n);
        for d in 0..dims {
            let mut hit = vec![false; n];
            for p in &pts {
                prop_assert!((0.0..1.0).contains(&p[d]));
                let k = (p[d] * n as f64).floor() as usize;
                prop_assert!(!hit[k], "stratum {} hit twice in dim {}", k, d);
                hit[k] = true;
            }
        }
    }

    #[test]
    fn cvar_lies_between_mean_and_max((costs, probs) in distribution(), a in 0.01f64..0.98, b in 0.01f64..0.98) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mean = expectation(&costs, &probs).unwrap();
        let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let c_lo = cvar_of_samples(&costs, &probs, lo).unwrap();
        let c_hi = cvar_of_samples(&costs, &probs, hi).unwrap();
        let tol = 1e-9;
        prop_assert!(c_lo >= mean - tol && c_hi <= max + tol);
        prop_assert!(c_hi >= c_lo - tol, "cvar({}) = {} < cvar({}) = {}", hi, c_hi, lo, c_lo);
    }

    #[test]
    fn cvar_is_translation_equivariant((costs, probs) in distribution(), shift in -50.0f64..50.0, alpha in 0.05f64..0.95) {
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let a = cvar_of_samples(&costs, &probs, alpha).unwrap();
        let b = cvar_of_samples(&shifted, &probs, alpha).unwrap();
        prop_assert!((b - a - shift).abs() <= 1e-9 * (1.0 + a.abs() + shift.abs()));
    }

    #[test]
    fn polygon_is_inside_circle_and_contains_inner_disc(
        s_max in 1.0f64..1000.0, r in 0.0f64..1.3, angle in 0.0f64..(2.0 * PI), sides in 4usize..64
    ) {
        let (p, q) = (r * s_max * angle.cos(), r * s_max * angle.sin());
        let admitted = polygon_admits(p, q, s_max, sides).unwrap();
        if admitted {
            prop_assert!(p * p + q * q <= s_max * s_max * (1.0 + 1e-12));
        }
        if r < (PI / sides as f64).cos() - 1e-12 {
            prop_assert!(admitted);
        }
    }

    #[test]
    fn inverse_transform_is_monotone(u in 0.0f64..1.0, v in 0.0f64..1.0, mean in -5.0f64..5.0, sd in 0.0f64..10.0, uniform: bool) {
        let spec = ErrorSpec {
            distribution: if uniform { Distribution::Uniform } else { Distribution::Normal },
            mean,
            std_dev: sd,
            relative: false,
        };
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let (a, b) = (inverse_transform(lo, &spec), inverse_transform(hi, &spec));
        prop_assert!(a.is_finite() && b.is_finite() && a <= b);
    }

    #[test]
    fn scenarios_are_equiprobable_and_reproducible(n in 1usize..40, seed in any::<u64>()) {
        let inst = desk_instance(1).unwrap();
        let a = build_scenarios(&inst.forecast, &ErrorTable::standard(), n, seed).unwrap();
        let b = build_scenarios(&inst.forecast, &ErrorTable::standard(), n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let total: f64 = a.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for sc in &a.scenarios {
            for t in 0..sc.imbalance_short.len() {
                prop_assert!(sc.imbalance_short[t] >= sc.series.day_ahead[t]);
                prop_assert!(sc.imbalance_long[t] <= sc.series.day_ahead[t]);
                prop_assert!(sc.imbalance_short[t] >= sc.imbalance_long[t]);
            }
            for cf in sc.series.capacity_factor.iter().flatten() {
                prop_assert!((0.0..=1.0).contains(cf));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distflow_is_lossless(buses in 2usize..40, seed in 0u64..10_000, scale in 0.05f64..1.0) {
        let mut network = synthetic_feeder(buses, seed).unwrap();
        for (i, b) in network.buses.iter_mut().enumerate().skip(1) {
            b.peak_load_kw = scale * (1.0 + (i % 3) as f64);
            b.peak_load_kvar = 0.2 * b.peak_load_kw;
        }
        let horizon = Horizon::new(2, 2.0, 4.0, 18.0).unwrap();
        let park = DerPark::default();
        let forecast = daily_forecast(&horizon, &network, &park, &DailyShape::default(), seed);
        let market = MarketConfig { prequalified_kw: 0.0, tariff: vec![100.0; 2], dam_bid_cap_kw: None };
        let model = VppModel::new(horizon, network, park, market, DEFAULT_POLYGON_SIDES).unwrap();
        let set = ScenarioSet::deterministic(&forecast);
        let ef = build_extensive(&model, &set, RiskMeasure::Expectation).unwrap();
        let sol = ef.program.solve().unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        let g = &ef.blocks[0].grid;
        for t in 0..2 {
            let inj: f64 = g.p_inj.iter().map(|b| sol.primal[b[t].0]).sum();
            let qinj: f64 = g.q_inj.iter().map(|b| sol.primal[b[t].0]).sum();
            prop_assert!((inj + sol.primal[g.pcc[t].0]).abs() <= 1e-9);
            prop_assert!((qinj + sol.primal[g.q_pcc[t].0]).abs() <= 1e-9);
            for (k, br) in model.network.branches.iter().enumerate() {
                let base = model.network.base_kva();
                let (p, q) = (sol.primal[g.p_flow[k][t].0] * base, sol.primal[g.q_flow[k][t].0] * base);
                prop_assert!(p.hypot(q) <= br.s_max_kva + 1e-9);
                let (up, down) = (sol.primal[g.v[model.topology().upstream[k]][t].0], sol.primal[g.v[model.topology().downstream[k]][t].0]);
                prop_assert!((up - down - 2.0 * (br.r * p + br.x * q) / base).abs() <= 1e-9);
            }
        }
    }
}
