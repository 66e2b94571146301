use std::sync::Arc;

use typematch::generate::{horizontal_instance, Gen};
use typematch::registry::build_policy;
use typematch::simulate;
use typematch_core::policies::{greedy_policy, PolicyHandle, ZeroPolicy};
use typematch_core::rng::{draw_arrival, sample_path_for, SIDE_DEMAND};
use typematch_core::sim::run_path;
use typematch_core::{evaluate_policy_exact, ArrivalModel, CarryOver, MatchingInstance};

fn iid(support: &[u32], probs: &[f64], horizon: usize, k: usize) -> Vec<Vec<ArrivalModel>> {
    vec![vec![ArrivalModel::new(support.to_vec(), probs.to_vec()).unwrap(); k]; horizon]
}

fn two_by_two() -> MatchingInstance {
    let r = vec![vec![6.0, 3.0], vec![2.0, 5.0]];
    MatchingInstance::new(
        2,
        2,
        3,
        &vec![r; 3],
        1.0.into(),
        1.0.into(),
        iid(&[0, 1, 2], &[0.3, 0.4, 0.3], 3, 2),
        iid(&[0, 1, 2], &[0.4, 0.3, 0.3], 3, 2),
    )
    .unwrap()
}

#[test]
fn single_replication_matches_run_path() {
    let inst = two_by_two();
    let greedy: PolicyHandle = Arc::new(greedy_policy(&inst, None));
    let report = simulate(&inst, &[greedy.clone()], 1, 42, 1).unwrap();
    let path = sample_path_for(&inst, 42, 0);
    let out = run_path(&inst, greedy.as_ref(), &path, 42, 0).unwrap();
    let s = &report.policies[0];
    assert_eq!(s.mean, out.total_reward);
    assert_eq!(s.std_error, 0.0);
    assert_eq!(s.paths[0].matched, out.matched);
    assert_eq!(s.mean_abandoned_demand, f64::from(out.abandoned_demand));
}

#[test]
fn zero_replications_rejected() {
    let inst = two_by_two();
    assert!(simulate(&inst, &[Arc::new(ZeroPolicy)], 0, 1, 1).is_err());
}

#[test]
fn zero_rewards_give_zero_mean() {
    let r = vec![vec![vec![0.0, 0.0]]; 2];
    let inst = MatchingInstance::new(1, 2, 2, &r, 1.0.into(), 0.0.into(), iid(&[0, 1], &[0.5, 0.5], 2, 1), iid(&[0, 2], &[0.5, 0.5], 2, 2)).unwrap();
    let report = simulate(&inst, &[Arc::new(greedy_policy(&inst, None))], 500, 3, 2).unwrap();
    assert_eq!(report.policies[0].mean, 0.0);
    assert_eq!(report.policies[0].std_error, 0.0);
}

#[test]
fn optimal_not_beaten_by_greedy() {
    let inst = two_by_two();
    let policies: Vec<PolicyHandle> = ["greedy", "optimal"].iter().map(|p| build_policy(&inst, p, 100, 0).unwrap()).collect();
    let report = simulate(&inst, &policies, 4000, 5, 4).unwrap();
    let (g, o) = (report.summary("greedy").unwrap(), report.summary("optimal").unwrap());
    assert!(o.mean >= g.mean - 3.0 * g.std_error.max(o.std_error), "{} vs {}", o.mean, g.mean);
}

#[test]
fn simulated_means_converge_to_exact_values() {
    for (k, (alpha, beta)) in [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let inst = horizontal_instance(&mut Gen::new(100 + k as u64), alpha, beta);
        for name in ["greedy", "two-round", "optimal"] {
            let policy = build_policy(&inst, name, 100, 0).unwrap();
            let exact = evaluate_policy_exact(&inst, policy.as_ref()).unwrap();
            let report = simulate(&inst, &[policy], 10_000, 17 + k as u64, 4).unwrap();
            let s = &report.policies[0];
            assert!((s.mean - exact).abs() <= 3.0 * s.std_error + 1e-9, "{name} ({alpha},{beta}): {} vs {exact} (se {})", s.mean, s.std_error);
        }
    }
}

#[test]
fn fractional_carry_over_survival_probability() {
    // Two units wait one period with survival 1/2 each; one supply unit arrives later.
    let r = vec![vec![vec![1.0]]; 2];
    let demand = vec![vec![ArrivalModel::deterministic(2)], vec![ArrivalModel::deterministic(0)]];
    let supply = vec![vec![ArrivalModel::deterministic(0)], vec![ArrivalModel::deterministic(1)]];
    let inst = MatchingInstance::new(1, 1, 2, &r, CarryOver::Scalar(0.5), 0.0.into(), demand, supply).unwrap();
    let report = simulate(&inst, &[Arc::new(greedy_policy(&inst, None))], 20_000, 8, 3).unwrap();
    let s = &report.policies[0];
    let expected = 1.0 - 0.25;
    assert!((s.mean - expected).abs() <= 3.0 * s.std_error, "{} vs {expected}", s.mean);
}

#[test]
fn sample_paths_are_deterministic() {
    let inst = two_by_two();
    assert_eq!(sample_path_for(&inst, 9, 3), sample_path_for(&inst, 9, 3));
    assert_ne!(
        (0..20).map(|k| sample_path_for(&inst, 9, k)).collect::<Vec<_>>(),
        (0..20).map(|k| sample_path_for(&inst, 10, k)).collect::<Vec<_>>()
    );

    let fixed = MatchingInstance::new(
        1,
        2,
        2,
        &vec![vec![vec![1.0, 2.0]]; 2],
        0.0.into(),
        0.0.into(),
        vec![vec![ArrivalModel::deterministic(3)], vec![ArrivalModel::deterministic(1)]],
        vec![vec![ArrivalModel::deterministic(0), ArrivalModel::deterministic(2)]; 2],
    )
    .unwrap();
    let path = sample_path_for(&fixed, 123, 77);
    assert_eq!(path.demand, vec![vec![3], vec![1]]);
    assert_eq!(path.supply, vec![vec![0, 2], vec![0, 2]]);
}

#[test]
fn arrival_frequencies_match_pmf() {
    let probs = [0.2, 0.5, 0.3];
    let model = ArrivalModel::new(vec![0, 1, 4], probs.to_vec()).unwrap();
    let draws = 100_000u64;
    let mut counts = [0u64; 3];
    for rep in 0..draws {
        match draw_arrival(&model, 2024, rep, 0, SIDE_DEMAND, 0) {
            0 => counts[0] += 1,
            1 => counts[1] += 1,
            4 => counts[2] += 1,
            other => panic!("value {other} outside the support"),
        }
    }
    for (c, p) in counts.iter().zip(probs) {
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - draws as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
    }
}
