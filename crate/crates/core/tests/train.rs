mod common;

use std::collections::HashSet;

use common::{mol, random_tree, tid, Enumerator};
use pdvn_core::mcts::{MctsConfig, NodeStatus, SearchTree};
use pdvn_core::nnet::{checkpoint, Head, Mlp};
use pdvn_core::policy::TwoBranchPolicy;
use pdvn_core::train::{
    extract, extract_cost_targets, extract_policy_targets, extract_syn_targets, label_solved, log_to_csv, min_cost,
    min_costs, pdvn_train, Examples, Learner, TrainConfig, TrainMode, ValueExample,
};
use pdvn_core::values::{ValueMode, ValueNets};
use pdvn_core::world::{generate_world, sample_targets, FINGERPRINT_BITS};
use pdvn_core::CostModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_reaction_tree(cm: &CostModel) -> SearchTree {
    // root -> t5: (bb, bb)            cost 0.1
    // root -> t2: (X)  X -> t9: (bb)  cost 0.2
    // root -> t1: (dead)
    let mut tree = SearchTree::new(mol("ROOT"), NodeStatus::Open, (0.5, 1.0));
    tree.mols[0].expanded = true;
    tree.mols[0].proposals = vec![tid(5), tid(2), tid(1), tid(7)];
    let a = tree.add_molecule(mol("A"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
    let b = tree.add_molecule(mol("B"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
    tree.add_reaction(0, tid(5), 0.4, vec![a, b], cm);
    let x = tree.add_molecule(mol("XX"), None, 1, NodeStatus::Open, (0.5, 0.5));
    tree.add_reaction(0, tid(2), 0.4, vec![x], cm);
    tree.mols[x].expanded = true;
    tree.mols[x].proposals = vec![tid(9)];
    let c = tree.add_molecule(mol("C"), None, 2, NodeStatus::BuildingBlock, (1.0, 0.0));
    tree.add_reaction(x, tid(9), 1.0, vec![c], cm);
    let d = tree.add_molecule(mol("DDD"), None, 1, NodeStatus::DeadEnd, (0.0, 0.0));
    tree.add_reaction(0, tid(1), 0.2, vec![d], cm);
    let u = tree.add_molecule(mol("UUUU"), None, 1, NodeStatus::Open, (0.5, 0.7));
    tree.add_reaction(0, tid(7), 0.0, vec![u, d], cm);
    tree
}

#[test]
fn labels_and_costs_on_a_hand_built_tree() {
    let cm = CostModel::default();
    let tree = two_reaction_tree(&cm);
    let solved = label_solved(&tree);
    assert!(solved[0]);
    assert!(solved[1] && solved[2]);
    let dead = tree.mols.iter().position(|m| m.molecule.id() == "DDD").unwrap();
    assert!(!solved[dead]);
    let costs = min_costs(&tree, &solved, &cm);
    assert_eq!(min_cost(&costs, 1).unwrap(), 0.0);
    assert!((min_cost(&costs, 0).unwrap() - 0.1).abs() < 1e-15);
    assert!(min_cost(&costs, dead).is_err());

    let policy = extract_policy_targets(&tree, &solved, &costs, &cm);
    let root = policy.iter().find(|e| e.molecule.id() == "ROOT").unwrap();
    assert_eq!(root.target, 5, "0.1 beats 0.2");
    assert_eq!(root.mask, vec![5, 2, 1, 7]);
    let x = policy.iter().find(|e| e.molecule.id() == "XX").unwrap();
    assert_eq!(x.target, 9);
    assert_eq!(policy.len(), 2);

    let syn = extract_syn_targets(&tree, &solved, 0.8);
    let get = |id: &str| syn.iter().find(|e| e.molecule.id() == id).unwrap().target;
    assert_eq!(get("ROOT"), 1.0);
    assert_eq!(get("DDD"), 0.0);
    assert!((get("UUUU") - 0.4).abs() < 1e-15);

    let cost = extract_cost_targets(&tree, &costs);
    assert!(cost.iter().all(|e| e.molecule.id() != "UUUU" && e.molecule.id() != "DDD"));
    let c = |id: &str| cost.iter().find(|e| e.molecule.id() == id).unwrap().target;
    assert_eq!(c("A"), 0.0);
    assert!((c("XX") - 0.1).abs() < 1e-15);
}

#[test]
fn equal_cost_ties_go_to_the_lower_template() {
    let cm = CostModel::default();
    let mut tree = SearchTree::new(mol("ROOT"), NodeStatus::Open, (0.5, 1.0));
    tree.mols[0].expanded = true;
    tree.mols[0].proposals = vec![tid(8), tid(3)];
    for t in [8, 3] {
        let a = tree.add_molecule(mol("A"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
        tree.add_reaction(0, tid(t), 0.5, vec![a], &cm);
    }
    let solved = label_solved(&tree);
    let costs = min_costs(&tree, &solved, &cm);
    assert_eq!(extract_policy_targets(&tree, &solved, &costs, &cm)[0].target, 3);
}

#[test]
fn extraction_matches_enumeration_on_random_trees() {
    let cm = CostModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let tree = random_tree(&mut rng, 120, &cm);
        let solved = label_solved(&tree);
        let costs = min_costs(&tree, &solved, &cm);
        let mut oracle = Enumerator::new(&tree, cm);
        for m in tree.reachable() {
            let all = oracle.route_costs(m);
            assert_eq!(solved[m], !all.is_empty());
            if solved[m] {
                assert_eq!(costs[m].unwrap(), all.iter().copied().fold(f64::INFINITY, f64::min));
            }
        }
        for e in extract_syn_targets(&tree, &solved, 0.8) {
            assert!((0.0..=1.0).contains(&e.target));
        }
    }
}

fn tiny_world_and_policy() -> (pdvn_core::WorldSpec, Mlp, Vec<pdvn_core::Molecule>) {
    let world = generate_world(20, 5).unwrap();
    let reference = Mlp::new(FINGERPRINT_BITS, 16, world.vocab_size(), Head::Logits, 0.1, 4).unwrap();
    let targets = sample_targets(&world, 12, 5, 2, &HashSet::new()).unwrap();
    (world, reference, targets)
}

fn tiny_config(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        mode,
        epochs: 2,
        batch_size: 5,
        mini_batch: 16,
        hidden: 16,
        record_wall_time: false,
        mcts: MctsConfig {
            simulations: 8,
            ..MctsConfig::default()
        },
        imitation_budget: 20,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn update_leaves_reference_and_empty_heads_alone() {
    let (world, reference, targets) = tiny_world_and_policy();
    let policy = TwoBranchPolicy::new(reference.clone(), 50).unwrap();
    let values = ValueNets::dual(16, 0.1, 1).unwrap();
    let mut learner = Learner::new(policy, Some(values), 1e-3);
    let syn: Vec<ValueExample> = targets
        .iter()
        .map(|m| ValueExample {
            molecule: m.clone(),
            target: 1.0,
        })
        .collect();
    let examples = Examples {
        syn,
        ..Examples::default()
    };
    let before = learner.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let report = learner.update(&examples, 4, &mut rng).unwrap();
    assert!(report.policy.is_none() && report.cost.is_none() && report.syn.is_some());
    assert_eq!(learner.policy.learnable(), before.policy.learnable());
    assert_eq!(checkpoint::encode(learner.policy.reference()), checkpoint::encode(&reference));
    let nets_after = learner.values.as_ref().unwrap().nets();
    let nets_before = before.values.as_ref().unwrap().nets();
    assert_ne!(nets_after[0].1, nets_before[0].1);
    assert_eq!(nets_after[1].1, nets_before[1].1);
    let _ = world;
}

#[test]
fn repeated_updates_approach_the_bce_floor() {
    let (_, reference, targets) = tiny_world_and_policy();
    let policy = TwoBranchPolicy::new(reference, 50).unwrap();
    let mut values = ValueNets::syn_only(32, 0.0, 1).unwrap();
    if let ValueNets::SynOnly { syn } = &mut values {
        *syn = Mlp::new(FINGERPRINT_BITS, 32, 1, Head::Sigmoid, 0.0, 1).unwrap();
    }
    let mut learner = Learner::new(policy, Some(values), 1e-2);
    let syn: Vec<ValueExample> = targets
        .iter()
        .enumerate()
        .map(|(i, m)| ValueExample {
            molecule: m.clone(),
            target: if i % 2 == 0 { 1.0 } else { 0.0 },
        })
        .collect();
    let examples = Examples {
        syn,
        ..Examples::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let first = learner.update(&examples, 4, &mut rng).unwrap().syn.unwrap();
    let mut last = first;
    for _ in 0..300 {
        last = learner.update(&examples, 4, &mut rng).unwrap().syn.unwrap();
    }
    // hard 0/1 targets: the entropy floor is 0
    assert!(last < 0.05 && last < first, "first {first}, last {last}");
}

#[test]
fn training_is_deterministic_and_freezes_the_reference() {
    let (world, reference, targets) = tiny_world_and_policy();
    let cfg = tiny_config(TrainMode::Pdvn);
    let run = || pdvn_train(&world, &targets, &reference, &cfg, |_, _, _| Ok(())).unwrap();
    let a = run();
    let b = run();
    assert_eq!(log_to_csv(&a.log), log_to_csv(&b.log));
    assert_eq!(a.log.len(), 2 * 3);
    for row in &a.log {
        assert!(row.solve_rate.is_finite() && (0.0..=1.0).contains(&row.solve_rate));
        assert_eq!(row.wall_ms, 0);
    }
    assert_eq!(checkpoint::encode(a.learner.policy.reference()), checkpoint::encode(&reference));
    assert_ne!(a.learner.policy.learnable(), &reference);
}

#[test]
fn worker_count_does_not_change_results() {
    let (world, reference, targets) = tiny_world_and_policy();
    let one = tiny_config(TrainMode::Pdvn);
    let three = TrainConfig { workers: 3, ..one.clone() };
    let a = pdvn_train(&world, &targets, &reference, &one, |_, _, _| Ok(())).unwrap();
    let b = pdvn_train(&world, &targets, &reference, &three, |_, _, _| Ok(())).unwrap();
    assert_eq!(log_to_csv(&a.log), log_to_csv(&b.log));
}

#[test]
fn ablation_modes_touch_only_their_networks() {
    let (world, reference, targets) = tiny_world_and_policy();
    let cm = CostModel::default();

    let nocost = pdvn_train(&world, &targets, &reference, &tiny_config(TrainMode::NoCost), |_, _, _| Ok(())).unwrap();
    assert!(nocost.log.iter().all(|r| r.cost_loss.is_none()));
    assert_eq!(nocost.learner.values.as_ref().unwrap().mode(), ValueMode::SynOnly);

    let single_cfg = tiny_config(TrainMode::SingleValue);
    let single = pdvn_train(&world, &targets, &reference, &single_cfg, |_, _, _| Ok(())).unwrap();
    let nets = single.learner.values.as_ref().unwrap().nets();
    assert_eq!(nets.len(), 1);
    assert!(single.log.iter().all(|r| r.syn_loss.is_none()));

    let imitation = pdvn_train(&world, &targets, &reference, &tiny_config(TrainMode::SelfImitation), |_, _, _| Ok(())).unwrap();
    assert!(imitation.learner.values.is_none());
    assert!(imitation.log.iter().all(|r| r.syn_loss.is_none() && r.cost_loss.is_none()));

    // a no-cost tree never yields cost examples
    let policy = TwoBranchPolicy::new(reference.clone(), 50).unwrap();
    let values = ValueNets::syn_only(16, 0.1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = MctsConfig {
        simulations: 10,
        ..MctsConfig::default()
    };
    for t in &targets {
        let ep = pdvn_core::run_episode(t, &policy, &values, &world, &cfg, &mut rng).unwrap();
        let ex = extract(&ep.tree, ValueMode::SynOnly, 0.8, &cm);
        assert!(ex.cost.is_empty() && ex.single.is_empty());
    }
}

#[test]
fn bad_configs_are_rejected() {
    let (world, reference, targets) = tiny_world_and_policy();
    for cfg in [
        TrainConfig { alpha: 1.0, ..tiny_config(TrainMode::Pdvn) },
        TrainConfig { batch_size: 0, ..tiny_config(TrainMode::Pdvn) },
    ] {
        assert!(pdvn_train(&world, &targets, &reference, &cfg, |_, _, _| Ok(())).is_err());
    }
    assert!(pdvn_train(&world, &[], &reference, &tiny_config(TrainMode::Pdvn), |_, _, _| Ok(())).is_err());
    let wrong = Mlp::new(FINGERPRINT_BITS, 8, 3, Head::Logits, 0.0, 0).unwrap();
    assert!(pdvn_train(&world, &targets, &wrong, &tiny_config(TrainMode::Pdvn), |_, _, _| Ok(())).is_err());
    assert!("bogus".parse::<TrainMode>().is_err());
    assert_eq!("no-cost".parse::<TrainMode>().unwrap(), TrainMode::NoCost);
}
