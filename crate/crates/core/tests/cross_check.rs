//! Independent procedures must agree on random lattice tasks.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use summoning::feasibility::{
    check_single_call, check_unrestricted, check_unrestricted_bruteforce, ordering_is_valid, Witness,
};
use summoning::generate::{random_task, random_tasks, TaskShape};
use summoning::oracle::{self, CausalStrategy, DEFAULT_CAP};
use summoning::protocol::{audit_no_signalling, plan_chain_protocol, simulate_all_patterns, verify_chain_run};
use summoning::task::{parse_task, serialize_task};
use summoning::{Exec, TaskMode};

#[test]
fn serialisation_round_trips() {
    for task in random_tasks(11, 100, 3, 6, TaskMode::UnrestrictedCalls) {
        let text = serialize_task(&task);
        assert_eq!(parse_task(&text).unwrap(), task, "{text}");
    }
}

#[test]
fn greedy_matches_bruteforce() {
    let tasks = random_tasks(3, 500, 3, 6, TaskMode::UnrestrictedCalls);
    let mut feasible = 0;
    for task in &tasks {
        let greedy = check_unrestricted(task).unwrap();
        let brute = check_unrestricted_bruteforce(task).unwrap();
        assert_eq!(greedy.feasible, brute.feasible, "{task:?}");
        if greedy.feasible {
            feasible += 1;
            assert!(ordering_is_valid(task, greedy.ordering.as_ref().unwrap()));
        }
    }
    // the generator must exercise both verdicts
    assert!(feasible > 50 && feasible < 450, "feasible: {feasible}");
}

#[test]
fn unrestricted_implies_single_call() {
    for task in random_tasks(5, 500, 3, 6, TaskMode::UnrestrictedCalls) {
        if check_unrestricted(&task).unwrap().feasible {
            let single = task.clone().with_mode(TaskMode::SingleCallGuaranteed);
            assert!(check_single_call(&single).unwrap().feasible, "{task:?}");
        }
    }
}

#[test]
fn oracle_agrees_with_checker() {
    for task in random_tasks(13, 200, 3, 3, TaskMode::UnrestrictedCalls) {
        let verdict = check_unrestricted(&task).unwrap();
        let found = oracle::exhaustive_search_with(&task, DEFAULT_CAP, Exec::default()).unwrap();
        assert_eq!(found.strategy.is_some(), verdict.feasible, "{task:?}");
        if let Some(Witness::NoDominant(set)) = verdict.witness {
            let cert = oracle::parity_certificate(&task, &set).unwrap();
            assert!(cert.pairing_verified);
            assert_eq!(cert.counts_even, Some(true));
            assert_eq!(cert.required_total, (1u64 << set.len()) - 1);
        }
    }
}

#[test]
fn simulator_matches_oracle_on_feasible_tasks() {
    let mut runs = 0;
    for task in random_tasks(17, 200, 3, 5, TaskMode::UnrestrictedCalls) {
        if !check_unrestricted(&task).unwrap().feasible {
            continue;
        }
        let plan = plan_chain_protocol(&task).unwrap();
        let results = simulate_all_patterns(&plan).unwrap();
        assert!(audit_no_signalling(&results, &task).passed(), "{task:?}");
        for &(pattern, _) in &results.outcomes {
            let run = summoning::protocol::simulate(&plan, pattern).unwrap();
            verify_chain_run(&plan, &run).unwrap();
        }
        if let Ok(strategy) = CausalStrategy::induced(&task, &results) {
            assert!(oracle::strategy_valid(&strategy, &task).unwrap(), "{task:?}");
        }
        runs += 1;
    }
    assert!(runs > 20, "runs: {runs}");
}

#[test]
fn parallel_and_sequential_agree() {
    for task in random_tasks(19, 60, 2, 3, TaskMode::UnrestrictedCalls) {
        let a = oracle::exhaustive_search_with(&task, DEFAULT_CAP, Exec::Sequential).unwrap();
        let b = oracle::exhaustive_search_with(&task, DEFAULT_CAP, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_matches_bruteforce_prop(seed in any::<u64>(), dim in 1usize..=3, pairs in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = random_task(&mut rng, TaskShape { dim, pairs, mode: TaskMode::UnrestrictedCalls });
        let greedy = check_unrestricted(&task).unwrap();
        let brute = check_unrestricted_bruteforce(&task).unwrap();
        prop_assert_eq!(greedy.feasible, brute.feasible);
    }

    #[test]
    fn dropping_a_pair_keeps_feasibility(seed in any::<u64>(), pairs in 2usize..=6, drop in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = random_task(&mut rng, TaskShape { dim: 2, pairs, mode: TaskMode::UnrestrictedCalls });
        if check_unrestricted(&task).unwrap().feasible {
            let mut sub = task.clone();
            sub.pairs.remove(drop % pairs);
            prop_assert!(check_unrestricted(&sub).unwrap().feasible);
        }
    }
}
