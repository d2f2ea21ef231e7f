use privocracy_simnet::explore::explore_votes;
use privocracy_simnet::scenario::AdversarySpec;
use privocracy_simnet::*;

fn with_adversary(n: usize, seed: u64, voter: u32, behavior: Behavior) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(n, seed);
    spec.adversary.push(AdversarySpec { voter, behavior });
    spec
}

#[test]
fn fault_free_decision_takes_a_few_rounds() {
    let m = run_scenario(&ScenarioSpec::new(4, 1)).unwrap();
    assert!(m.ok(), "{:?}", m.election.violations);
    let d = m.election.decision.unwrap();
    assert!(d.approved);
    assert_eq!((d.tally, d.weight_sum), (4, 4));
    // Propose, three broadcast hops for the dealing, at least three
    // agreement hops and the partial tally: eight link delays at least.
    let rounds = m.election.latency_ms.unwrap() / 5.0;
    assert!((8.0..40.0).contains(&rounds), "{rounds} rounds");
}

#[test]
fn silent_voter_does_not_block_termination() {
    for seed in 0..5 {
        let m = run_scenario(&with_adversary(4, seed, 3, Behavior::Silent)).unwrap();
        assert!(m.ok(), "{:?}", m.election.violations);
        let d = m.election.decision.unwrap();
        assert_eq!(d.weight_sum, 3);
        assert!(!m.election.accepted.contains(&3));
    }
}

#[test]
fn same_spec_and_seed_give_identical_metrics() {
    let mut spec = with_adversary(7, 42, 5, Behavior::Equivocate);
    spec.policy = Policy::Random;
    spec.gst_step = 200;
    let a = serde_json::to_string(&run_scenario(&spec).unwrap()).unwrap();
    let b = serde_json::to_string(&run_scenario(&spec).unwrap()).unwrap();
    assert_eq!(a, b);
    spec.seed = 43;
    let c = serde_json::to_string(&run_scenario(&spec).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn fault_budget_is_enforced() {
    let mut spec = with_adversary(4, 0, 1, Behavior::Silent);
    spec.adversary.push(AdversarySpec { voter: 2, behavior: Behavior::Silent });
    assert!(matches!(run_scenario(&spec), Err(scenario::ScenarioError::World(WorldError::FaultBudget { got: 2, f: 1 }))));
    let mut spec = ScenarioSpec::new(4, 0);
    spec.f = Some(2);
    assert!(matches!(run_scenario(&spec), Err(scenario::ScenarioError::World(WorldError::Resilience { .. }))));
}

#[test]
fn invalid_vote_is_never_counted() {
    let spec = with_adversary(4, 3, 2, Behavior::InvalidVote { value: 2 });
    let violations = explore_votes(&spec, 30);
    assert!(violations.is_empty(), "{violations:?}");
    let m = run_scenario(&spec).unwrap();
    assert_eq!(m.election.votes.get(&2), Some(&2));
    assert!(!m.election.accepted.contains(&2));
    assert_eq!(m.election.decision.unwrap().weight_sum, 3);
}

#[test]
fn equivocating_voter_cannot_split_agreement() {
    for seed in 0..10 {
        let mut spec = with_adversary(7, seed, 1 + seed as u32 % 7, Behavior::Equivocate);
        spec.adversary.push(AdversarySpec { voter: 1 + (seed as u32 + 3) % 7, behavior: Behavior::Equivocate });
        spec.policy = Policy::Random;
        let m = run_scenario(&spec).unwrap();
        assert!(m.ok(), "seed {seed}: {:?}", m.election.violations);
    }
}

#[test]
fn unanimous_rejection_survives_byzantine_approvals() {
    // Two Byzantine voters out of seven push approval through corrupted
    // shares; the tally still reflects only valid ballots.
    for behavior in [Behavior::InvalidShares, Behavior::InvalidVote { value: 1 }] {
        let mut spec = ScenarioSpec::new(7, 9);
        spec.policy = Policy::No;
        spec.adversary = vec![AdversarySpec { voter: 2, behavior }, AdversarySpec { voter: 6, behavior }];
        let m = run_scenario(&spec).unwrap();
        assert!(m.ok(), "{behavior}: {:?}", m.election.violations);
        assert!(!m.election.decision.unwrap().approved);
    }
}

#[test]
fn scenario_files_round_trip() {
    let text = r#"
        n = 7
        seed = 5
        group = "tiny83"
        policy = "no"
        threshold = "2/3"
        weights = [1, 1, 2, 2, 1, 1, 1]
        latency = { kind = "uniform", lo_ms = 5.0, hi_ms = 20.0 }

        [[voters]]
        voter = 3
        policy = "yes"

        [[adversary]]
        voter = 7
        behavior = "crash_at(40)"
    "#;
    let spec = ScenarioSpec::from_toml(text).unwrap();
    assert_eq!(spec.adversary[0].behavior, Behavior::CrashAt { step: 40 });
    assert_eq!(spec.policy_of(3), Policy::Yes);
    assert_eq!(ScenarioSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    let m = run_scenario(&spec).unwrap();
    assert!(m.ok(), "{:?}", m.election.violations);
    assert!(!m.election.decision.unwrap().approved);
}

#[test]
fn audit_recovers_votes_with_a_withholding_voter() {
    let mut spec = ScenarioSpec::new(4, 21);
    spec.policy = Policy::Random;
    spec.audit = true;
    spec.withhold_logs = vec![4];
    let m = run_scenario(&spec).unwrap();
    let audit = m.audit.as_ref().unwrap();
    assert!(audit.approved && audit.matches_ground_truth);
    let revealed = &audit.result.as_ref().unwrap().votes;
    assert_eq!(revealed.len(), 4);
}

#[test]
fn explorer_finds_nothing_in_fault_free_primitives() {
    use privocracy_simnet::explore::{explore_primitive, Primitive};
    for p in [Primitive::Brb, Primitive::Aba, Primitive::Avss] {
        let r = explore_primitive::<privocracy_crypto::Tiny83>(p, 7, 2, None, 200, 4);
        assert!(r.violations.is_empty(), "{p:?}: {:?}", r.violations[0]);
    }
}
