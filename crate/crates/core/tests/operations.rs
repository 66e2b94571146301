use std::sync::Arc;

use typematch_core::dp::{for_each_decision, ExactSolver};
use typematch_core::models::{self, Arrivals, AssumptionCheck, LineLayout, PremierRegular, Prize, UpgradeParams};
use typematch_core::monge::audit_relations;
use typematch_core::policies::consolidated::consolidated_protection_policy;
use typematch_core::policies::horizontal::{
    compute_protection_levels_2x2, two_round_policy_2x2, ProtectionEntry, ProtectionTable,
};
use typematch_core::policies::iou::{best_iou_policy, iou_admissible};
use typematch_core::policies::vertical::{osa_policy, topdown_decision, OsaMode};
use typematch_core::policies::{greedy_policy, OptimalPolicy, VerticalRewards, ZeroPolicy};
use typematch_core::{
    audit_compatibility, build_dominance_graph, evaluate_policy_exact, is_perfect_pair, max_weight_transport,
    policy_trace, priority_tiers, solve_exact, tier_greedy_transport, weak_dominates, ArrivalModel, AuditMode,
    MatchingDecision, MatchingInstance, Pair, Policy, SystemState, TraceStep, TOL,
};

fn det(k: u32) -> ArrivalModel {
    ArrivalModel::deterministic(k)
}

fn iid(horizon: usize, m: usize, n: usize, a: ArrivalModel) -> Arrivals {
    Arrivals::iid(horizon, vec![a.clone(); m], vec![a; n])
}

fn horizontal(rate: f64, horizon: usize) -> MatchingInstance {
    let r = vec![vec![vec![6.0, 3.0], vec![2.0, 5.0]]; horizon];
    models::horizontal_2x2(&r, rate.into(), rate.into(), iid(horizon, 2, 2, ArrivalModel::uniform_upto(2)), AssumptionCheck::Enforce)
        .unwrap()
}

fn decision(rows: &[Vec<u32>]) -> MatchingDecision {
    MatchingDecision::from_rows(rows).unwrap()
}

fn state(x: &[u32], y: &[u32]) -> SystemState {
    SystemState::new(x.to_vec(), y.to_vec())
}

#[test]
fn vertical_better_types_dominate_worse() {
    let vr = VerticalRewards { r_d: vec![vec![4.0, 2.0, 1.0]; 3], r_s: vec![vec![3.0, 2.0, 0.5]; 3] };
    let inst = models::vertical_instance(&vr, 1.0.into(), 1.0.into(), iid(3, 3, 3, det(1)), AssumptionCheck::Enforce).unwrap();
    let g = build_dominance_graph(&inst);
    assert!(g.strong_valid);
    for j in 0..3 {
        for i in 0..3 {
            for k in i + 1..3 {
                assert!(g.strong.contains(&(Pair::new(i, j), Pair::new(k, j))));
                assert!(g.strong.contains(&(Pair::new(j, i), Pair::new(j, k))));
            }
        }
    }
}

#[test]
fn closer_demand_dominates_on_a_line() {
    let layout = LineLayout { demand_pos: vec![1.0, 3.0], supply_pos: vec![0.0], prize: Prize::Common(vec![5.0, 5.0]) };
    let inst = models::directed_line(&layout, 0.0.into(), 0.0.into(), iid(2, 2, 1, det(1))).unwrap();
    assert!(weak_dominates(&inst, Pair::new(0, 0), Pair::new(1, 0)).unwrap());
    assert!(!weak_dominates(&inst, Pair::new(1, 0), Pair::new(0, 0)).unwrap());
}

#[test]
fn horizontal_perfect_pairs_and_tiers() {
    let inst = horizontal(1.0, 3);
    let g = build_dominance_graph(&inst);
    assert!(g.strong_valid);
    for k in 0..2 {
        let p = Pair::new(k, k);
        assert!(g.strong.contains(&(p, Pair::new(k, 1 - k))));
        assert!(g.strong.contains(&(p, Pair::new(1 - k, k))));
        assert!(is_perfect_pair(&inst, &g, k, k).unwrap());
    }
    assert!(!is_perfect_pair(&inst, &g, 0, 1).unwrap());
    let tiers = priority_tiers(&g).unwrap();
    assert_eq!(tiers.tiers, vec![vec![Pair::new(0, 0), Pair::new(1, 1)], vec![Pair::new(0, 1), Pair::new(1, 0)]]);
}

#[test]
fn one_level_upgrade_can_break_intended_dominance() {
    let params = UpgradeParams { fares: vec![vec![10.0, 8.0, 6.0]; 2], costs: vec![3.0, 2.0, 1.0], one_level: true };
    let inst = models::upgrading_instance(&params, 0.0.into(), 1.0.into(), iid(2, 3, 3, det(1))).unwrap();
    assert!(!weak_dominates(&inst, Pair::new(1, 1), Pair::new(1, 0)).unwrap());
    let impatient = models::upgrading_instance(&params, 0.0.into(), 0.0.into(), iid(2, 3, 3, det(1))).unwrap();
    assert!(weak_dominates(&impatient, Pair::new(1, 1), Pair::new(1, 0)).unwrap());
}

#[test]
fn equal_rewards_tie_everywhere() {
    let inst = MatchingInstance::new(2, 2, 2, &vec![vec![vec![3.0; 2]; 2]; 2], 0.0.into(), 0.0.into(), vec![vec![det(1); 2]; 2], vec![vec![det(1); 2]; 2])
        .unwrap();
    let g = build_dominance_graph(&inst);
    assert!(g.strong_valid);
    assert_eq!(g.weak.len(), 8);
    assert_eq!(g.strong_oriented.len(), 4);
}

#[test]
fn colocated_line_pairs_form_tier_zero() {
    let layout = LineLayout {
        demand_pos: vec![0.0, 2.0, 4.0],
        supply_pos: vec![0.0, 2.0, 4.0],
        prize: Prize::Common(vec![10.0, 9.0]),
    };
    let inst = models::directed_line(&layout, 1.0.into(), 1.0.into(), iid(2, 3, 3, det(1))).unwrap();
    let g = build_dominance_graph(&inst);
    let tiers = priority_tiers(&g).unwrap();
    assert_eq!(tiers.tiers[0], vec![Pair::new(0, 0), Pair::new(1, 1), Pair::new(2, 2)]);
    for k in 0..3 {
        assert!(is_perfect_pair(&inst, &g, k, k).unwrap());
    }
}

#[test]
fn equally_spaced_line_tiers_follow_distance() {
    let pos = vec![0.0, 1.0, 2.0];
    let layout = LineLayout { demand_pos: pos.clone(), supply_pos: pos.clone(), prize: Prize::Common(vec![5.0]) };
    let inst = models::directed_line(&layout, 0.0.into(), 0.0.into(), iid(1, 3, 3, det(1))).unwrap();
    let tiers = priority_tiers(&build_dominance_graph(&inst)).unwrap();
    let reach = layout.reachability();
    let mut reachable: Vec<(f64, usize)> = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if reach[i][j] {
                reachable.push((pos[i] - pos[j], tiers.tier_of(Pair::new(i, j)).unwrap()));
            }
        }
    }
    for a in &reachable {
        for b in &reachable {
            if a.0 < b.0 {
                assert!(a.1 < b.1, "{a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn single_pair_single_tier() {
    let inst = MatchingInstance::new(1, 1, 1, &[vec![vec![2.0]]], 0.0.into(), 0.0.into(), vec![vec![det(1)]], vec![vec![det(1)]]).unwrap();
    let tiers = priority_tiers(&build_dominance_graph(&inst)).unwrap();
    assert_eq!(tiers.tiers, vec![vec![Pair::new(0, 0)]]);
}

#[test]
fn euclidean_colocated_pairs_are_perfect() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
    let inst = models::euclidean_instance(&pts, &pts, &[6.0, 5.0, 5.0], &[1.0, 1.0, 0.5], 1.0.into(), 1.0.into(), iid(3, 3, 3, det(1))).unwrap();
    let g = build_dominance_graph(&inst);
    for p in models::colocated_pairs(&pts, &pts) {
        assert!(is_perfect_pair(&inst, &g, p.i, p.j).unwrap());
    }
}

#[test]
fn steeply_growing_reward_is_not_perfect() {
    let inst = MatchingInstance::new(1, 1, 2, &[vec![vec![1.0]], vec![vec![5.0]]], 1.0.into(), 1.0.into(), vec![vec![det(1)]; 2], vec![vec![det(1)]; 2])
        .unwrap();
    let g = build_dominance_graph(&inst);
    assert!(!is_perfect_pair(&inst, &g, 0, 0).unwrap());
}

#[test]
fn greedy_two_by_two_trace_is_strongly_compatible() {
    let inst = horizontal(1.0, 3);
    let g = build_dominance_graph(&inst);
    let greedy = greedy_policy(&inst, Some(&g));
    let trace = policy_trace(&inst, &greedy).unwrap();
    assert!(audit_compatibility(&inst, &g, &trace, AuditMode::Strong).unwrap().is_compatible());
}

#[test]
fn tier_walk_examples() {
    let inst = horizontal(1.0, 1);
    let tiers = priority_tiers(&build_dominance_graph(&inst)).unwrap();
    let r = inst.rewards(0);
    assert_eq!(tier_greedy_transport(r, &state(&[1, 0], &[0, 1]), &tiers).q.to_rows(), vec![vec![0, 1], vec![0, 0]]);
    assert_eq!(tier_greedy_transport(r, &state(&[1, 1], &[1, 1]), &tiers).q.to_rows(), vec![vec![1, 0], vec![0, 1]]);
    assert_eq!(tier_greedy_transport(r, &state(&[2, 3], &[0, 0]), &tiers).q.total(), 0);
}

#[test]
fn single_period_value_is_transport_value() {
    let inst = MatchingInstance::new(
        2,
        3,
        1,
        &[vec![vec![4.0, -1.0, 2.0], vec![3.5, 2.0, 0.0]]],
        0.0.into(),
        0.0.into(),
        vec![vec![ArrivalModel::uniform_upto(2); 2]],
        vec![vec![ArrivalModel::uniform_upto(1); 3]],
    )
    .unwrap();
    let table = solve_exact(&inst).unwrap();
    let states = table.states(0);
    assert_eq!(states.len(), 9 * 8);
    for (s, v) in states {
        assert!((v - max_weight_transport(inst.rewards(0), &s).value).abs() <= TOL);
    }
}

/// Demand `i = 0` and `i'' = 1`; supply `j = 0` and `j' = 1`.
fn supply_side_counterexample() -> (MatchingInstance, f64) {
    let r0 = vec![vec![3.0, 2.0], vec![0.0, 0.0]];
    let r1 = vec![vec![3.0, 2.0], vec![5.0, 1.0]];
    let demand = vec![vec![det(1), det(0)], vec![det(0), det(1)]];
    let supply = vec![vec![det(1), det(1)], vec![det(0), det(0)]];
    let inst = MatchingInstance::new(2, 2, 2, &[r0, r1], 0.0.into(), 1.0.into(), demand, supply).unwrap();
    (inst, 2.0 + 5.0)
}

#[test]
fn patient_supply_prefers_the_dominated_pair() {
    let (inst, expected) = supply_side_counterexample();
    assert!(!weak_dominates(&inst, Pair::new(0, 0), Pair::new(0, 1)).unwrap());
    let table = solve_exact(&inst).unwrap();
    assert!((table.expected_value() - expected).abs() <= TOL);
    let s = state(&[1, 0], &[1, 1]);
    let actions = table.optimal_actions(0, &s).unwrap();
    assert_eq!(actions.decisions, vec![decision(&[vec![0, 1], vec![0, 0]])]);
    let policy = OptimalPolicy::new(Arc::new(table));
    let trace = policy_trace(&inst, &policy).unwrap();
    let relation = [(Pair::new(0, 0), Pair::new(0, 1))].into_iter().collect();
    assert!(!audit_relations(&relation, &trace, AuditMode::Weak).unwrap().is_compatible());
}

#[test]
fn zero_rewards_zero_values() {
    let inst = MatchingInstance::new(2, 2, 2, &vec![vec![vec![0.0; 2]; 2]; 2], 1.0.into(), 1.0.into(), vec![vec![ArrivalModel::uniform_upto(1); 2]; 2], vec![vec![ArrivalModel::uniform_upto(1); 2]; 2])
        .unwrap();
    let table = solve_exact(&inst).unwrap();
    assert!(table.states(0).iter().chain(table.states(1).iter()).all(|(_, v)| *v == 0.0));
}

#[test]
fn perfect_single_pair_matches_fully() {
    let inst = MatchingInstance::new(1, 1, 3, &[vec![vec![5.0]], vec![vec![4.0]], vec![vec![4.0]]], 1.0.into(), 1.0.into(), vec![vec![ArrivalModel::uniform_upto(2)]; 3], vec![vec![ArrivalModel::uniform_upto(2)]; 3])
        .unwrap();
    let table = solve_exact(&inst).unwrap();
    for t in 0..3 {
        for (s, _) in table.states(t) {
            let actions = table.optimal_actions(t, &s).unwrap();
            assert!(actions.decisions.iter().any(|q| q.get(0, 0) == s.x[0].min(s.y[0])));
        }
    }
    let zero = table.optimal_actions(0, &state(&[0], &[0])).unwrap();
    assert_eq!(zero.decisions, vec![MatchingDecision::zeros(1, 1)]);
}

#[test]
fn tied_vertical_qualities_give_several_optima() {
    let r = vec![vec![vec![5.0, 3.0], vec![5.0, 3.0]]];
    let inst = MatchingInstance::new(2, 2, 1, &r, 0.0.into(), 0.0.into(), vec![vec![det(1); 2]], vec![vec![det(1); 2]]).unwrap();
    let table = solve_exact(&inst).unwrap();
    let actions = table.optimal_actions(0, &state(&[1, 1], &[1, 1])).unwrap();
    assert!(actions.decisions.len() > 1);
    assert!(actions.decisions.iter().all(|q| q.total() == 2));
}

#[test]
fn transfers_restore_priority() {
    let r = vec![vec![vec![3.0, 2.0], vec![2.0, 1.0]]];
    let inst = MatchingInstance::new(2, 2, 1, &r, 0.0.into(), 0.0.into(), vec![vec![det(1); 2]], vec![vec![det(1); 2]]).unwrap();
    let g = build_dominance_graph(&inst);
    assert!(g.strong_valid);
    let table = solve_exact(&inst).unwrap();
    let s = state(&[1, 1], &[1, 1]);
    let crossed = decision(&[vec![0, 1], vec![1, 0]]);
    let fixed = table.make_compatible_from(&g, 0, &s, &crossed).unwrap();
    assert_eq!(fixed.to_rows(), vec![vec![1, 0], vec![0, 1]]);
    assert_eq!(table.make_compatible_from(&g, 0, &s, &fixed).unwrap(), fixed);

    let h = horizontal(1.0, 1);
    let hg = build_dominance_graph(&h);
    let ht = solve_exact(&h).unwrap();
    let mut solver = ht.into_solver();
    let hs = state(&[1, 0], &[1, 1]);
    let actions = solver.optimal_actions(0, &hs).unwrap();
    let out = solver.make_compatible(&hg, 0, &hs, &actions.decisions[0]).unwrap();
    assert_eq!(out.get(0, 0), 1);
}

#[test]
fn policy_evaluation_examples() {
    let inst = horizontal(1.0, 3);
    let table = Arc::new(solve_exact(&inst).unwrap());
    let optimum = table.expected_value();
    let optimal = evaluate_policy_exact(&inst, &OptimalPolicy::new(table.clone())).unwrap();
    assert!((optimal - optimum).abs() <= TOL);
    assert_eq!(evaluate_policy_exact(&inst, &ZeroPolicy).unwrap(), 0.0);
    let greedy = evaluate_policy_exact(&inst, &greedy_policy(&inst, None)).unwrap();
    assert!(greedy <= optimum + TOL);
}

#[test]
fn greedy_examples() {
    let vr = VerticalRewards { r_d: vec![vec![4.0, 2.0, 1.0]], r_s: vec![vec![3.0, 2.0]] };
    let inst = models::vertical_instance(&vr, 0.0.into(), 0.0.into(), iid(1, 3, 2, det(1)), AssumptionCheck::Enforce).unwrap();
    let g = build_dominance_graph(&inst);
    let greedy = greedy_policy(&inst, Some(&g));
    let s = state(&[1, 2, 1], &[2, 1]);
    assert_eq!(greedy.decide(0, &s).unwrap(), topdown_decision(&s, 3).unwrap());
    assert_eq!(greedy.decide(0, &state(&[0, 0, 0], &[0, 0])).unwrap().total(), 0);

    let h = horizontal(1.0, 2);
    let hg = build_dominance_graph(&h);
    let q = greedy_policy(&h, Some(&hg)).decide(0, &state(&[2, 0], &[1, 1])).unwrap();
    assert_eq!(q.to_rows(), vec![vec![1, 1], vec![0, 0]]);
}

fn manual_table(horizon: usize, ib_min: i64, ib_max: i64, p_s: u32) -> ProtectionTable {
    let entries = (0..horizon)
        .map(|_| {
            (ib_min..=ib_max)
                .map(|ib| {
                    let s = (p_s as i64).max(-ib);
                    ProtectionEntry {
                        p_d_plus: (s + ib) as u32,
                        p_s_plus: s as u32,
                        p_d_minus: (s + ib) as u32,
                        p_s_minus: s as u32,
                        plus_feasible: true,
                        minus_feasible: true,
                    }
                })
                .collect()
        })
        .collect();
    ProtectionTable { ib_min, entries }
}

#[test]
fn two_round_arithmetic() {
    let inst = horizontal(1.0, 1);
    let policy = two_round_policy_2x2(&inst, manual_table(1, -6, 6, 1)).unwrap();
    let q = policy.decide(0, &state(&[3, 0], &[1, 2])).unwrap();
    assert_eq!(q.to_rows(), vec![vec![1, 1], vec![0, 0]]);
    let q = policy.decide(0, &state(&[2, 3], &[2, 3])).unwrap();
    assert_eq!(q.to_rows(), vec![vec![2, 0], vec![0, 3]]);
}

#[test]
fn single_period_protects_nothing() {
    let table = compute_protection_levels_2x2(&horizontal(1.0, 1)).unwrap();
    for ib in table.ib_min..=table.ib_max() {
        let e = table.get(0, ib).unwrap();
        if e.plus_feasible {
            assert_eq!(e.p_d_plus.min(e.p_s_plus), 0);
        }
        if e.minus_feasible {
            assert_eq!(e.p_d_minus.min(e.p_s_minus), 0);
        }
    }
}

#[test]
fn lost_demand_supply_leftover_formula() {
    let r = vec![vec![vec![6.0, 4.0], vec![3.0, 5.0]], vec![vec![6.0, 4.0], vec![3.0, 5.0]], vec![vec![6.0, 4.0], vec![3.0, 5.0]]];
    let inst = models::horizontal_2x2(&r, 0.0.into(), 1.0.into(), iid(3, 2, 2, ArrivalModel::uniform_upto(2)), AssumptionCheck::Enforce).unwrap();
    let table = compute_protection_levels_2x2(&inst).unwrap();
    let policy = two_round_policy_2x2(&inst, table.clone()).unwrap();
    for t in 0..3 {
        let level = table.get(t, 0).unwrap().p_s_plus as i64;
        for x0 in 0..=4u32 {
            for y1 in 0..=4u32 {
                let s = state(&[x0, 0], &[0, y1]);
                let q = policy.decide(t, &s).unwrap();
                let (z1, z2) = (x0 as i64, y1 as i64);
                if z1 > 0 && z2 > 0 {
                    let left = z2 - q.get(0, 1) as i64;
                    assert_eq!(left, (z2 - z1).max(z2.min(level)), "t={t} z=({z1},{z2})");
                }
            }
        }
    }
}

#[test]
fn consolidation_of_two_by_two_is_identity() {
    let inst = horizontal(1.0, 3);
    let g = build_dominance_graph(&inst);
    let heuristic = consolidated_protection_policy(&inst, &g, 50, 3).unwrap();
    let two_round = two_round_policy_2x2(&inst, compute_protection_levels_2x2(&inst).unwrap()).unwrap();
    let plan = heuristic.plan(Pair::new(0, 1)).unwrap();
    assert!(plan.consolidation.exact);
    for t in 0..3 {
        for x in 0..=4u32 {
            for y in 0..=4u32 {
                for x2 in 0..=2u32 {
                    for y2 in 0..=2u32 {
                        let s = state(&[x, x2], &[y2, y]);
                        assert_eq!(heuristic.decide(t, &s).unwrap(), two_round.decide(t, &s).unwrap(), "t={t} {s:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn consolidation_weights_follow_samples() {
    let pos = vec![0.0, 1.0, 2.0];
    let layout = LineLayout { demand_pos: pos.clone(), supply_pos: pos, prize: Prize::Common(vec![6.0, 5.0, 5.0]) };
    let arrivals = Arrivals::iid(3, vec![ArrivalModel::uniform_upto(2); 3], vec![ArrivalModel::uniform_upto(2); 3]);
    let inst = models::directed_line(&layout, 1.0.into(), 1.0.into(), arrivals).unwrap();
    let g = build_dominance_graph(&inst);
    let heuristic = consolidated_protection_policy(&inst, &g, 200, 11).unwrap();
    let plan = heuristic.plan(Pair::new(2, 0)).unwrap();
    let c = &plan.consolidation;
    assert!(!c.exact);
    assert!(!c.supply_types.is_empty());
    for t in 0..3 {
        let samples = &c.samples[t];
        let mut num = 0.0;
        let mut den = 0.0;
        for s in samples {
            for (k, j) in c.supply_types.iter().enumerate() {
                num += inst.reward(t, 2, *j) * s.supply[k] as f64;
                den += s.supply[k] as f64;
            }
        }
        let expected = if den > 0.0 { num / den } else { 0.0 };
        assert!((c.r_i_jc[t] - expected).abs() <= 1e-9);
    }
    let lone = heuristic.plan(Pair::new(0, 0)).unwrap();
    assert!(lone.consolidation.demand_types.is_empty() && lone.consolidation.supply_types.is_empty());
}

#[test]
fn osa_last_period_is_greedy() {
    let vr = VerticalRewards { r_d: vec![vec![4.0, 2.0]; 2], r_s: vec![vec![3.0, 1.0]; 2] };
    let inst = models::vertical_instance(&vr, 1.0.into(), 1.0.into(), iid(2, 2, 2, ArrivalModel::uniform_upto(1)), AssumptionCheck::Enforce).unwrap();
    let osa = osa_policy(&inst, OsaMode::Exact).unwrap();
    let greedy = greedy_policy(&inst, None);
    for x in 0..=2u32 {
        for y in 0..=2u32 {
            let s = state(&[x, 1], &[1, y]);
            assert_eq!(osa.decide(1, &s).unwrap().total(), greedy.decide(1, &s).unwrap().total());
        }
    }
    let v_osa = evaluate_policy_exact(&inst, &osa).unwrap();
    let v_greedy = evaluate_policy_exact(&inst, &greedy).unwrap();
    assert!(v_osa >= v_greedy - TOL);
}

#[test]
fn patient_osa_keeps_imbalance_of_aggregates() {
    let vr = VerticalRewards { r_d: vec![vec![4.0, 2.0]; 3], r_s: vec![vec![3.0, 1.0]; 3] };
    let inst = models::vertical_instance(&vr, 1.0.into(), 1.0.into(), iid(3, 2, 2, ArrivalModel::uniform_upto(1)), AssumptionCheck::Enforce).unwrap();
    let osa = osa_policy(&inst, OsaMode::Exact).unwrap();
    let trace = policy_trace(&inst, &osa).unwrap();
    for TraceStep { state, decision, .. } in trace {
        let post = typematch_core::apply_decision(&state, &decision).unwrap();
        let ib = state.x.iter().sum::<u32>() as i64 - state.y.iter().sum::<u32>() as i64;
        assert_eq!(post.u.iter().sum::<u32>() as i64 - post.v.iter().sum::<u32>() as i64, ib);
    }
}

#[test]
fn iou_examples() {
    let equal_margin = UpgradeParams { fares: vec![vec![5.0, 4.0, 3.0]; 2], costs: vec![3.0, 2.0, 1.0], one_level: true };
    let inst = models::upgrading_instance(&equal_margin, 0.0.into(), 0.0.into(), iid(2, 3, 3, ArrivalModel::uniform_upto(1))).unwrap();
    let g = build_dominance_graph(&inst);
    let tiers = priority_tiers(&g).unwrap();
    assert_eq!(tiers.tiers[0], vec![Pair::new(0, 0), Pair::new(1, 1), Pair::new(2, 2)]);
    let (_, iou) = best_iou_policy(&inst).unwrap();
    let optimum = solve_exact(&inst).unwrap().expected_value();
    assert!((iou - optimum).abs() <= TOL);

    let params = UpgradeParams { fares: vec![vec![9.0, 6.0, 5.0]; 2], costs: vec![3.0, 2.0, 1.0], one_level: true };
    let arrivals = Arrivals {
        demand: vec![vec![ArrivalModel::uniform_upto(2); 3], vec![det(0); 3]],
        supply: vec![vec![ArrivalModel::uniform_upto(2); 3], vec![det(0); 3]],
    };
    let inst = models::upgrading_instance(&params, 1.0.into(), 1.0.into(), arrivals).unwrap();
    let (_, iou) = best_iou_policy(&inst).unwrap();
    let mut expected = 0.0;
    for o in inst.arrival_outcomes(0) {
        let s = SystemState::new(o.demand.clone(), o.supply.clone());
        let mut best = f64::NEG_INFINITY;
        for_each_decision(&s, &mut |q, _| {
            if iou_admissible(&s, q) {
                best = best.max(typematch_core::reward_of(inst.rewards(0), q)?);
            }
            Ok(())
        })
        .unwrap();
        expected += o.prob * best;
    }
    assert!((iou - expected).abs() <= TOL);
}

#[test]
fn premier_regular_is_horizontal() {
    let pr = PremierRegular { fare_premier: 12.0, fare_regular: 7.0, wage_premier: 5.0, wage_regular: 3.0, penalty: 1.0 };
    let inst = models::horizontal_2x2(&pr.rewards(2), 1.0.into(), 1.0.into(), iid(2, 2, 2, ArrivalModel::uniform_upto(1)), AssumptionCheck::Enforce)
        .unwrap();
    let g = build_dominance_graph(&inst);
    assert!(is_perfect_pair(&inst, &g, 0, 0).unwrap());
    assert!(is_perfect_pair(&inst, &g, 1, 1).unwrap());
    let mut solver = ExactSolver::new(&inst).unwrap();
    assert!(solver.expected_value().unwrap() > 0.0);
}
