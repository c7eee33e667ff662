use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::WorldSpec;
use crate::error::{Error, Result};
use crate::route::{LeafStatus, Molecule, RouteTree};
use crate::solver::Solver;

const ATTEMPTS_PER_ROUTE: usize = 200;

/// Samples `n` synthesizable routes with distinct, non-terminal roots and depth
/// at most `max_depth`.
///
/// Products are grown from random building blocks by inverting rules; each
/// grown product that has a route within the depth budget gets a random one,
/// picking uniformly among the templates that keep the route within budget.
/// Roots listed in `exclude` are skipped, which keeps held-out sets disjoint.
pub fn sample_training_routes(
    world: &WorldSpec,
    n: usize,
    max_depth: usize,
    seed: u64,
    exclude: &HashSet<Molecule>,
) -> Result<Vec<(RouteTree, Molecule)>> {
    if n == 0 || max_depth == 0 {
        return Err(Error::Parameter("need n >= 1 and max_depth >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solver = Solver::new(world);
    let mut seen: HashSet<Molecule> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > n * ATTEMPTS_PER_ROUTE {
            return Err(Error::DegenerateWorld(format!(
                "only {} of {n} routes found after {} attempts",
                out.len(),
                attempts - 1
            )));
        }
        let steps = rng.gen_range(1..=max_depth);
        let target = world.grow(steps, &mut rng);
        if world.is_terminal(&target)? || exclude.contains(&target) || seen.contains(&target) {
            continue;
        }
        match solver.min_height(&target)? {
            Some(h) if h <= max_depth => {}
            _ => continue,
        }
        let route = random_route(&mut solver, &target, max_depth, &mut rng)?;
        seen.insert(target.clone());
        out.push((route, target));
    }
    Ok(out)
}

/// Roots of freshly sampled routes.
pub fn sample_targets(
    world: &WorldSpec,
    n: usize,
    max_depth: usize,
    seed: u64,
    exclude: &HashSet<Molecule>,
) -> Result<Vec<Molecule>> {
    Ok(sample_training_routes(world, n, max_depth, seed, exclude)?
        .into_iter()
        .map(|(_, m)| m)
        .collect())
}

fn random_route<R: Rng>(
    solver: &mut Solver<'_>,
    m: &Molecule,
    budget: usize,
    rng: &mut R,
) -> Result<RouteTree> {
    let world = solver.world();
    if world.is_building_block(m)? {
        return Ok(RouteTree::leaf(m.clone(), LeafStatus::BuildingBlock));
    }
    let mut options = Vec::new();
    for t in world.applicable_templates(m)? {
        let reactants = world.reactants(m, t)?;
        let mut fits = true;
        for r in &reactants {
            if !solver.min_height(r)?.is_some_and(|h| h < budget) {
                fits = false;
                break;
            }
        }
        if fits {
            options.push((t, reactants));
        }
    }
    let (t, reactants) = options
        .choose(rng)
        .cloned()
        .ok_or_else(|| Error::Search(format!("{m} has no route within depth {budget}")))?;
    let children = reactants
        .iter()
        .map(|r| random_route(solver, r, budget - 1, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(RouteTree::reaction(m.clone(), t, children))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::route::route_is_synthesizable;
    use crate::world::generate_world;

    #[test]
    fn routes_are_synthesizable_replayable_and_shallow() {
        let w = generate_world(50, 5).unwrap();
        let routes = sample_training_routes(&w, 60, 5, 9, &HashSet::new()).unwrap();
        assert_eq!(routes.len(), 60);
        let roots: HashSet<_> = routes.iter().map(|(_, m)| m.clone()).collect();
        assert_eq!(roots.len(), 60);
        for (route, target) in &routes {
            assert_eq!(&route.molecule, target);
            assert!(route_is_synthesizable(route).unwrap());
            assert!(route.depth() <= 5);
            for (_, node) in route.walk() {
                if let crate::route::RouteNode::Reaction { template, children } = &node.node {
                    assert!(w.applicable_templates(&node.molecule).unwrap().contains(template));
                    let replay = w.reactants(&node.molecule, *template).unwrap();
                    let kids: Vec<_> = children.iter().map(|c| c.molecule.clone()).collect();
                    assert_eq!(replay, kids);
                }
            }
        }
    }

    #[test]
    fn excluded_roots_are_skipped() {
        let w = generate_world(30, 2).unwrap();
        let first = sample_targets(&w, 20, 4, 1, &HashSet::new()).unwrap();
        let exclude: HashSet<_> = first.iter().cloned().collect();
        let second = sample_targets(&w, 20, 4, 1, &exclude).unwrap();
        assert!(second.iter().all(|m| !exclude.contains(m)));
    }
}
