use proptest::prelude::*;

use typematch_core::dp::ExactSolver;
use typematch_core::models::{self, Arrivals, AssumptionCheck, LineLayout, Prize, UpgradeParams};
use typematch_core::policies::horizontal::compute_protection_levels_2x2;
use typematch_core::{
    apply_decision, build_dominance_graph, fold_waiting_costs, max_weight_transport, priority_tiers,
    reward_of, tier_greedy_transport, weak_dominates, ArrivalModel, CarryOver, MatchingDecision,
    MatchingInstance, Pair, RewardMatrix, SystemState, WaitingCosts, TOL,
};

fn brute_force(r: &RewardMatrix, x: &[u32], y: &[u32]) -> f64 {
    fn go(r: &RewardMatrix, cell: usize, rows: &mut [u32], cols: &mut [u32]) -> f64 {
        let n = cols.len();
        if cell == rows.len() * n {
            return 0.0;
        }
        let (i, j) = (cell / n, cell % n);
        let mut best = f64::NEG_INFINITY;
        for k in 0..=rows[i].min(cols[j]) {
            rows[i] -= k;
            cols[j] -= k;
            best = best.max(k as f64 * r.get(i, j) + go(r, cell + 1, rows, cols));
            rows[i] += k;
            cols[j] += k;
        }
        best
    }
    go(r, 0, &mut x.to_vec(), &mut y.to_vec())
}

fn half_steps(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo * 2..=hi * 2).prop_map(|k| k as f64 / 2.0)
}

fn matrix(m: usize, n: usize) -> impl Strategy<Value = RewardMatrix> {
    prop::collection::vec(half_steps(-2, 5), m * n).prop_map(move |d| RewardMatrix::new(m, n, d).unwrap())
}

fn transport_case() -> impl Strategy<Value = (RewardMatrix, SystemState)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(m, n)| {
        (matrix(m, n), prop::collection::vec(0u32..=3, m), prop::collection::vec(0u32..=3, n))
            .prop_map(|(r, x, y)| (r, SystemState::new(x, y)))
    })
}

fn decision_for(x: Vec<u32>, y: Vec<u32>) -> impl Strategy<Value = (SystemState, MatchingDecision)> {
    let (m, n) = (x.len(), y.len());
    prop::collection::vec(0u32..=3, m * n).prop_map(move |raw| {
        let mut rows = x.clone();
        let mut cols = y.clone();
        let mut q = MatchingDecision::zeros(m, n);
        for (k, v) in raw.iter().enumerate() {
            let (i, j) = (k / n, k % n);
            let take = (*v).min(rows[i]).min(cols[j]);
            q.set(i, j, take);
            rows[i] -= take;
            cols[j] -= take;
        }
        (SystemState::new(x.clone(), y.clone()), q)
    })
}

fn small_instance(rates: &'static [f64]) -> impl Strategy<Value = MatchingInstance> {
    (1usize..=2, 1usize..=2, 1usize..=3, prop::sample::select(rates), prop::sample::select(rates)).prop_flat_map(
        |(m, n, horizon, a, b)| {
            (
                prop::collection::vec(prop::collection::vec(prop::collection::vec(half_steps(0, 4), n), m), horizon),
                prop::collection::vec(0u32..=1, m),
                prop::collection::vec(0u32..=1, n),
            )
                .prop_map(move |(r, dmax, smax)| {
                    let demand = vec![dmax.iter().map(|k| ArrivalModel::uniform_upto(*k)).collect(); horizon];
                    let supply = vec![smax.iter().map(|k| ArrivalModel::uniform_upto(*k)).collect(); horizon];
                    MatchingInstance::new(m, n, horizon, &r, a.into(), b.into(), demand, supply).unwrap()
                })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transport_matches_enumeration((r, s) in transport_case()) {
        let res = max_weight_transport(&r, &s);
        prop_assert!(res.q.is_feasible_for(&s));
        prop_assert!((res.value - brute_force(&r, &s.x, &s.y)).abs() <= TOL);
        prop_assert!((reward_of(&r, &res.q).unwrap() - res.value).abs() <= TOL);
    }

    #[test]
    fn transport_value_monotone_in_quantities((r, s) in transport_case(), side in 0usize..2, k in 0usize..3) {
        let base = max_weight_transport(&r, &s).value;
        let mut more = s.clone();
        if side == 0 {
            let k = k % more.x.len();
            more.x[k] += 1;
        } else {
            let k = k % more.y.len();
            more.y[k] += 1;
        }
        prop_assert!(max_weight_transport(&r, &more).value >= base - TOL);
    }

    #[test]
    fn conservation((s, q) in (prop::collection::vec(0u32..=3, 1..=3), prop::collection::vec(0u32..=3, 1..=3))
        .prop_flat_map(|(x, y)| decision_for(x, y)))
    {
        let post = apply_decision(&s, &q).unwrap();
        let total = q.total();
        prop_assert_eq!(post.u.iter().sum::<u32>() + total, s.x.iter().sum::<u32>());
        prop_assert_eq!(post.v.iter().sum::<u32>() + total, s.y.iter().sum::<u32>());
    }

    #[test]
    fn zero_costs_fold_to_identity(inst in small_instance(&[0.0, 0.5, 1.0])) {
        let costs = WaitingCosts {
            c: vec![vec![0.0; inst.m()]; inst.horizon()],
            h: vec![vec![0.0; inst.n()]; inst.horizon()],
        };
        prop_assert_eq!(fold_waiting_costs(&inst, &costs).unwrap().reward_tensor(), inst.reward_tensor());
    }

    #[test]
    fn strong_is_weak_and_ties_are_mutual(inst in small_instance(&[0.0, 1.0])) {
        let g = build_dominance_graph(&inst);
        prop_assert!(g.strong.is_subset(&g.weak));
        for (a, b) in &g.weak {
            prop_assert!(a.is_neighbor(b));
            prop_assert!(a != b);
            if g.weak.contains(&(*b, *a)) {
                for t in 0..inst.horizon() {
                    prop_assert!((inst.reward(t, a.i, a.j) - inst.reward(t, b.i, b.j)).abs() <= TOL);
                }
            }
        }
    }

    #[test]
    fn tiers_partition_all_pairs(inst in small_instance(&[0.0, 1.0])) {
        let g = build_dominance_graph(&inst);
        if let Ok(tiers) = priority_tiers(&g) {
            prop_assert!(tiers.tiers.len() <= inst.m() * inst.n());
            let mut all: Vec<Pair> = tiers.tiers.iter().flatten().copied().collect();
            all.sort();
            prop_assert_eq!(all, g.pairs().collect::<Vec<_>>());
        }
    }

    #[test]
    fn bellman_consistency_and_monotone_values(inst in small_instance(&[0.0, 1.0])) {
        let mut solver = ExactSolver::new(&inst).unwrap();
        solver.expected_value().unwrap();
        let table = solver.clone().freeze();
        for t in 0..inst.horizon() {
            for (s, v) in table.states(t) {
                let best = max_h(&mut solver, t, &s);
                prop_assert!((best - v).abs() <= TOL);
                for k in 0..s.x.len() + s.y.len() {
                    let mut more = s.clone();
                    if k < s.x.len() { more.x[k] += 1 } else { more.y[k - s.x.len()] += 1 }
                    prop_assert!(solver.value(t, &more).unwrap() >= v - TOL);
                }
            }
        }
    }

    #[test]
    fn directed_line_greedy_is_myopically_optimal(
        pos in prop::collection::vec(0u32..=6, 2..=3),
        spos in prop::collection::vec(0u32..=6, 2..=3),
        prize in 3u32..=8,
        x in prop::collection::vec(0u32..=3, 3),
        y in prop::collection::vec(0u32..=3, 3),
    ) {
        let layout = LineLayout {
            demand_pos: pos.iter().map(|p| *p as f64).collect(),
            supply_pos: spos.iter().map(|p| *p as f64).collect(),
            prize: Prize::Common(vec![prize as f64]),
        };
        let (m, n) = (pos.len(), spos.len());
        let arrivals = Arrivals::iid(1, vec![ArrivalModel::deterministic(1); m], vec![ArrivalModel::deterministic(1); n]);
        let inst = models::directed_line(&layout, 0.0.into(), 0.0.into(), arrivals).unwrap();
        let g = build_dominance_graph(&inst);
        prop_assume!(g.strong_valid);
        let tiers = priority_tiers(&g).unwrap();
        let s = SystemState::new(x[..m].to_vec(), y[..n].to_vec());
        let greedy = tier_greedy_transport(inst.rewards(0), &s, &tiers);
        prop_assert!((greedy.value - max_weight_transport(inst.rewards(0), &s).value).abs() <= TOL);
    }

    #[test]
    fn vertical_greedy_is_myopically_optimal(
        rd in prop::collection::btree_set(0u32..=10, 3),
        rs in prop::collection::btree_set(0u32..=10, 3),
        x in prop::collection::vec(0u32..=3, 3),
        y in prop::collection::vec(0u32..=3, 3),
    ) {
        let r_d: Vec<f64> = rd.iter().rev().map(|v| *v as f64).collect();
        let r_s: Vec<f64> = rs.iter().rev().map(|v| *v as f64).collect();
        let vr = typematch_core::policies::VerticalRewards { r_d: vec![r_d], r_s: vec![r_s] };
        let arrivals = Arrivals::iid(1, vec![ArrivalModel::deterministic(1); 3], vec![ArrivalModel::deterministic(1); 3]);
        let inst = models::vertical_instance(&vr, 0.0.into(), 0.0.into(), arrivals, AssumptionCheck::Enforce).unwrap();
        let g = build_dominance_graph(&inst);
        prop_assert!(g.strong_valid);
        let tiers = priority_tiers(&g).unwrap();
        let s = SystemState::new(x, y);
        let greedy = tier_greedy_transport(inst.rewards(0), &s, &tiers);
        prop_assert!((greedy.value - max_weight_transport(inst.rewards(0), &s).value).abs() <= TOL);
    }

    #[test]
    fn upgrading_equals_line_on_binary_grid(
        costs in prop::collection::btree_set(0u32..=40, 3),
        fares in prop::collection::vec(0u32..=80, 6),
        one_level in any::<bool>(),
    ) {
        let costs: Vec<f64> = costs.iter().rev().map(|c| *c as f64 / 4.0).collect();
        let fares: Vec<Vec<f64>> = fares.chunks(3).map(|f| f.iter().map(|v| *v as f64 / 4.0).collect()).collect();
        let params = UpgradeParams { fares, costs, one_level: false };
        let arrivals = Arrivals::iid(2, vec![ArrivalModel::deterministic(1); 3], vec![ArrivalModel::deterministic(1); 3]);
        let up = models::upgrading_instance(&params, 0.0.into(), 0.0.into(), arrivals.clone()).unwrap();
        let line = models::directed_line(&params.as_line(), 0.0.into(), 0.0.into(), arrivals.clone()).unwrap();
        let bits = |inst: &MatchingInstance| -> Vec<u64> {
            inst.reward_tensor().iter().flatten().flatten().map(|r| r.to_bits()).collect()
        };
        prop_assert_eq!(bits(&up), bits(&line));
        if one_level {
            let one = UpgradeParams { one_level: true, ..params };
            let inst = models::upgrading_instance(&one, 0.0.into(), 0.0.into(), arrivals).unwrap();
            prop_assert_eq!(inst.reward(0, 2, 0), 0.0);
        }
    }

    #[test]
    fn horizontal_builder_agrees_with_dominance(
        d in (4u32..=10, 4u32..=10),
        off in (0u32..=3, 0u32..=3),
        rate in prop::sample::select(vec![0.0, 1.0]),
    ) {
        let (r11, r22) = (d.0 as f64, d.1 as f64);
        let r12 = (r11.min(r22) - 1.0 - off.0 as f64).max(0.0);
        let r21 = (r11.min(r22) - 1.0 - off.1 as f64).max(0.0);
        let rewards = vec![vec![vec![r11, r12], vec![r21, r22]]; 3];
        let arrivals = Arrivals::iid(3, vec![ArrivalModel::uniform_upto(1); 2], vec![ArrivalModel::uniform_upto(1); 2]);
        let inst = models::horizontal_2x2(&rewards, rate.into(), rate.into(), arrivals, AssumptionCheck::Enforce).unwrap();
        let g = build_dominance_graph(&inst);
        prop_assert!(g.strong_valid);
        for k in 0..2 {
            prop_assert!(typematch_core::is_perfect_pair(&inst, &g, k, k).unwrap());
        }
    }

    #[test]
    fn protection_levels_monotone_in_imbalance(
        d in (4u32..=10, 4u32..=10),
        off in (1u32..=4, 1u32..=4),
        rate in prop::sample::select(vec![0.0, 1.0]),
        horizon in 2usize..=4,
    ) {
        let (r11, r22) = (d.0 as f64, d.1 as f64);
        let rewards = vec![vec![vec![r11, r11 - off.0 as f64], vec![r22 - off.1 as f64, r22]]; horizon];
        let arrivals = Arrivals::iid(horizon, vec![ArrivalModel::uniform_upto(2); 2], vec![ArrivalModel::uniform_upto(2); 2]);
        let Ok(inst) = models::horizontal_2x2(&rewards, rate.into(), rate.into(), arrivals, AssumptionCheck::Enforce) else {
            return Ok(());
        };
        let table = compute_protection_levels_2x2(&inst).unwrap();
        for t in 0..horizon {
            let mut prev: Option<(i64, typematch_core::policies::horizontal::ProtectionEntry)> = None;
            for ib in table.ib_min..=table.ib_max() {
                let e = *table.get(t, ib).unwrap();
                if e.plus_feasible {
                    prop_assert_eq!(e.p_d_plus as i64 - e.p_s_plus as i64, ib);
                }
                if e.minus_feasible {
                    prop_assert_eq!(e.p_d_minus as i64 - e.p_s_minus as i64, ib);
                }
                if let Some((pib, p)) = prev {
                    prop_assert_eq!(pib + 1, ib);
                    if p.plus_feasible && e.plus_feasible {
                        prop_assert!((0..=1).contains(&(e.p_d_plus as i64 - p.p_d_plus as i64)));
                        prop_assert!((0..=1).contains(&(p.p_s_plus as i64 - e.p_s_plus as i64)));
                    }
                    if p.minus_feasible && e.minus_feasible {
                        prop_assert!((0..=1).contains(&(e.p_d_minus as i64 - p.p_d_minus as i64)));
                        prop_assert!((0..=1).contains(&(p.p_s_minus as i64 - e.p_s_minus as i64)));
                    }
                }
                prev = Some((ib, e));
            }
        }
    }
}

fn max_h(solver: &mut ExactSolver, t: usize, s: &SystemState) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut decisions = Vec::new();
    typematch_core::dp::for_each_decision(s, &mut |q, _| {
        decisions.push(q.clone());
        Ok(())
    })
    .unwrap();
    for q in decisions {
        best = best.max(solver.h_value(t, s, &q).unwrap());
    }
    best
}

#[test]
fn weak_dominance_rejects_non_neighbors() {
    let inst = MatchingInstance::new(
        2,
        2,
        1,
        &[vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        CarryOver::Scalar(0.0),
        CarryOver::Scalar(0.0),
        vec![vec![ArrivalModel::deterministic(1); 2]],
        vec![vec![ArrivalModel::deterministic(1); 2]],
    )
    .unwrap();
    assert!(weak_dominates(&inst, Pair::new(0, 0), Pair::new(1, 1)).is_err());
    assert!(weak_dominates(&inst, Pair::new(0, 0), Pair::new(0, 0)).is_err());
}
