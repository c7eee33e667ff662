//! Shared fixtures for the benchmarks.

use std::collections::HashSet;

use pdvn_core::nnet::{Head, Mlp, HIDDEN_UNITS};
use pdvn_core::world::{generate_world, sample_targets, FINGERPRINT_BITS};
use pdvn_core::{Molecule, TwoBranchPolicy, ValueNets, WorldSpec};

pub struct Fixture {
    pub world: WorldSpec,
    pub targets: Vec<Molecule>,
    pub policy: TwoBranchPolicy,
    pub values: ValueNets,
}

/// A 50-rule world with untrained full-size networks.
pub fn fixture() -> Fixture {
    let world = generate_world(50, 1).expect("world");
    let targets = sample_targets(&world, 16, 8, 2, &HashSet::new()).expect("targets");
    let reference = Mlp::new(FINGERPRINT_BITS, HIDDEN_UNITS, world.vocab_size(), Head::Logits, 0.1, 3).expect("policy");
    Fixture {
        policy: TwoBranchPolicy::new(reference, 50).expect("policy"),
        values: ValueNets::dual(HIDDEN_UNITS, 0.1, 4).expect("values"),
        world,
        targets,
    }
}
