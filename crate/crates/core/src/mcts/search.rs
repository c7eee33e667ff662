use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::tree::{NodeStatus, SearchTree, SimulationPath};
use crate::error::{Error, Result};
use crate::policy::{TwoBranchPolicy, DEFAULT_TOP_K};
use crate::route::{CostModel, Expansion, LeafStatus, Molecule, RouteTree};
use crate::values::ValueNets;
use crate::world::WorldSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootOrder {
    Fifo,
    Lifo,
}

#[derive(Clone, Debug)]
pub struct MctsConfig {
    pub c_puct: f64,
    pub simulations: usize,
    pub max_depth: usize,
    /// Upper bound on reactions appended per expansion, on top of the policy's own k.
    pub top_k: usize,
    pub cost: CostModel,
    pub root_order: RootOrder,
    /// Keep the statistics below a committed reaction for the next root.
    pub reuse_tree: bool,
    /// Sample root moves in proportion to visit counts; otherwise take the most visited.
    pub sample_moves: bool,
    pub trace: bool,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            c_puct: 1.0,
            simulations: 100,
            max_depth: 15,
            top_k: DEFAULT_TOP_K,
            cost: CostModel::default(),
            root_order: RootOrder::Fifo,
            reuse_tree: true,
            sample_moves: true,
            trace: false,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_puct >= 0.0 && self.c_puct.is_finite()) {
            return Err(Error::Parameter(format!("c_puct must be finite and >= 0, got {}", self.c_puct)));
        }
        if self.simulations == 0 || self.max_depth == 0 || self.top_k == 0 {
            return Err(Error::Parameter("simulations, max depth and top-k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Solved,
    /// A committed reactant has no applicable template.
    DeadEnd,
    /// A committed reactant sits at the depth limit.
    DepthLimit,
    /// Some simulation root had no usable reaction.
    NoActions,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Solved
    }
}

/// Replay records. `Value` sets a node's value and resets its count (node
/// creation, a leaf turning dead, a discarded subtree); `Simulation` is one
/// backup with its per-path values.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceEvent {
    Value { node: usize, syn: f64, cost: f64 },
    Simulation { index: usize, path: SimulationPath, vt: Vec<(f64, f64)> },
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn trace_to_text(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        match e {
            TraceEvent::Value { node, syn, cost } => {
                let _ = writeln!(out, "value\t{node}\t{syn}\t{cost}");
            }
            TraceEvent::Simulation { index, path, vt } => {
                let _ = writeln!(
                    out,
                    "sim\t{index}\t{}\t{}\t{}\t{}",
                    join(&path.mols),
                    join(&path.rxns),
                    join(vt.iter().map(|v| v.0)),
                    join(vt.iter().map(|v| v.1)),
                );
            }
        }
    }
    out
}

pub fn trace_from_text(text: &str) -> Result<Vec<TraceEvent>> {
    fn list<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|x| {
                x.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad list item {x:?}"),
                })
            })
            .collect()
    }
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let f: Vec<&str> = raw.split('\t').collect();
        let bad = |msg: &str| Error::Parse { line, msg: msg.to_string() };
        match f.as_slice() {
            ["value", node, syn, cost] => out.push(TraceEvent::Value {
                node: node.parse().map_err(|_| bad("node id"))?,
                syn: syn.parse().map_err(|_| bad("syn value"))?,
                cost: cost.parse().map_err(|_| bad("cost value"))?,
            }),
            ["sim", index, mols, rxns, syn, cost] => {
                let syn: Vec<f64> = list(syn, line)?;
                let cost: Vec<f64> = list(cost, line)?;
                if syn.len() != cost.len() {
                    return Err(bad("value lists differ in length"));
                }
                out.push(TraceEvent::Simulation {
                    index: index.parse().map_err(|_| bad("simulation index"))?,
                    path: SimulationPath {
                        mols: list(mols, line)?,
                        rxns: list(rxns, line)?,
                    },
                    vt: syn.into_iter().zip(cost).collect(),
                });
            }
            _ => return Err(bad("unrecognised record")),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub tree: SearchTree,
    pub outcome: Outcome,
    /// Route formed by the committed reactions; failed branches end in
    /// DEAD or OPEN leaves.
    pub route: RouteTree,
    /// `(molecule node, reaction node)` in commit order.
    pub committed: Vec<(usize, usize)>,
    pub simulations: usize,
    /// Policy calls made while expanding.
    pub expansions: usize,
    pub trace: Vec<TraceEvent>,
}

/// Everything one episode reads; networks are shared read-only.
pub struct Episode<'a, R: Rng> {
    world: &'a WorldSpec,
    policy: &'a TwoBranchPolicy,
    values: &'a ValueNets,
    cfg: &'a MctsConfig,
    rng: &'a mut R,
    tree: SearchTree,
    value_cache: HashMap<Molecule, (f64, f64)>,
    proposal_cache: HashMap<Molecule, Vec<Expansion>>,
    trace: Vec<TraceEvent>,
    simulations: usize,
    expansions: usize,
}

impl<'a, R: Rng> Episode<'a, R> {
    pub fn new(
        target: &Molecule,
        world: &'a WorldSpec,
        policy: &'a TwoBranchPolicy,
        values: &'a ValueNets,
        cfg: &'a MctsConfig,
        rng: &'a mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        if world.is_terminal(target)? {
            return Err(Error::TerminalTarget(target.id().to_string()));
        }
        let mut ep = Episode {
            world,
            policy,
            values,
            cfg,
            rng,
            tree: SearchTree::new(target.clone(), NodeStatus::Open, (0.0, 0.0)),
            value_cache: HashMap::new(),
            proposal_cache: HashMap::new(),
            trace: Vec::new(),
            simulations: 0,
            expansions: 0,
        };
        let v = ep.evaluate(target)?;
        let root = &mut ep.tree.mols[SearchTree::ROOT];
        (root.v_syn, root.v_cost) = v;
        root.init = v;
        ep.log_value(SearchTree::ROOT);
        Ok(ep)
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    fn log_value(&mut self, mol: usize) {
        if self.cfg.trace {
            let m = &self.tree.mols[mol];
            self.trace.push(TraceEvent::Value {
                node: mol,
                syn: m.v_syn,
                cost: m.v_cost,
            });
        }
    }

    fn evaluate(&mut self, m: &Molecule) -> Result<(f64, f64)> {
        if let Some(&v) = self.value_cache.get(m) {
            return Ok(v);
        }
        let v = self.values.evaluate(m)?;
        self.value_cache.insert(m.clone(), v);
        Ok(v)
    }

    fn classify(&mut self, m: &Molecule) -> Result<(NodeStatus, (f64, f64))> {
        if self.world.is_building_block(m)? {
            Ok((NodeStatus::BuildingBlock, (1.0, 0.0)))
        } else if self.world.is_dead_end(m)? {
            Ok((NodeStatus::DeadEnd, self.values.mode().dead_values(&self.cfg.cost)))
        } else {
            Ok((NodeStatus::Open, self.evaluate(m)?))
        }
    }

    fn mark_dead(&mut self, mol: usize, status: NodeStatus) {
        let dead = self.values.mode().dead_values(&self.cfg.cost);
        let node = &mut self.tree.mols[mol];
        node.status = status;
        node.expanded = true;
        (node.v_syn, node.v_cost) = dead;
        node.n = 0;
        self.log_value(mol);
    }

    /// Appends one reaction per surviving proposal. A leaf left without
    /// reactions is marked dead.
    pub fn expand(&mut self, leaf: usize) -> Result<()> {
        let node = &self.tree.mols[leaf];
        if node.status != NodeStatus::Open || node.expanded {
            return Err(Error::Search(format!("cannot expand node {leaf} ({:?})", node.status)));
        }
        if node.depth >= self.cfg.max_depth {
            return Err(Error::Search(format!("node {leaf} is at the depth limit")));
        }
        let molecule = node.molecule.clone();
        let depth = node.depth;
        let proposals = match self.proposal_cache.get(&molecule) {
            Some(p) => p.clone(),
            None => {
                let mut p = self.policy.propose(self.world, &molecule)?;
                p.truncate(self.cfg.top_k);
                self.proposal_cache.insert(molecule.clone(), p.clone());
                p
            }
        };
        self.expansions += 1;
        let banned = self.tree.ancestor_templates(leaf);
        self.tree.mols[leaf].expanded = true;
        self.tree.mols[leaf].proposals = proposals.iter().map(|e| e.template).collect();
        for e in proposals.iter().filter(|e| !banned.contains(&e.template)) {
            let mut children = Vec::with_capacity(e.reactants().len());
            for r in e.reactants() {
                let (status, v) = self.classify(r)?;
                let id = self.tree.add_molecule(r.clone(), None, depth + 1, status, v);
                self.log_value(id);
                children.push(id);
            }
            self.tree.add_reaction(leaf, e.template, e.prior, children, &self.cfg.cost);
        }
        if self.tree.mols[leaf].children.is_empty() {
            self.mark_dead(leaf, NodeStatus::NoActions);
        }
        Ok(())
    }

    /// One select, expand, backup pass from `root`.
    pub fn simulate(&mut self, root: usize) -> Result<SimulationPath> {
        let mode = self.values.mode();
        let mut path = SimulationPath {
            mols: vec![root],
            rxns: Vec::new(),
        };
        let mut cur = root;
        while self.tree.mols[cur].expanded && !self.tree.mols[cur].children.is_empty() {
            let a = self.tree.puct_select(cur, self.cfg.c_puct, mode, &self.cfg.cost)?;
            cur = self.tree.select_child_molecule(a, &mut *self.rng);
            path.rxns.push(a);
            path.mols.push(cur);
        }
        let leaf = &self.tree.mols[cur];
        if leaf.status == NodeStatus::Open && !leaf.expanded {
            if leaf.depth >= self.cfg.max_depth {
                self.mark_dead(cur, NodeStatus::DepthLimit);
            } else {
                self.expand(cur)?;
            }
        }
        let vt = self.tree.backup(&path, &self.cfg.cost)?;
        self.refresh_above(root);
        if self.cfg.trace {
            self.trace.push(TraceEvent::Simulation {
                index: self.simulations,
                path: path.clone(),
                vt,
            });
        }
        self.simulations += 1;
        Ok(path)
    }

    /// Keeps reactions and solved flags above a simulation root consistent
    /// with the root's new value; averages and counts there are untouched.
    fn refresh_above(&mut self, mol: usize) {
        let mut cur = self.tree.mols[mol].parent;
        while let Some(rxn) = cur {
            self.tree.refresh_reaction(rxn, &self.cfg.cost);
            let parent = self.tree.rxns[rxn].parent;
            let solved = self.tree.mols[parent].status == NodeStatus::BuildingBlock
                || self.tree.mols[parent].children.iter().any(|&a| self.tree.rxns[a].solved);
            self.tree.mols[parent].solved = solved;
            cur = self.tree.mols[parent].parent;
        }
    }

    fn choose_move(&mut self, root: usize) -> Result<usize> {
        let children = &self.tree.mols[root].children;
        let counts: Vec<f64> = children.iter().map(|&a| self.tree.rxns[a].n as f64).collect();
        let weights = if counts.iter().sum::<f64>() > 0.0 {
            counts
        } else {
            children.iter().map(|&a| self.tree.rxns[a].prior).collect()
        };
        if self.cfg.sample_moves {
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| Error::Search(format!("move distribution: {e}")))?;
            Ok(children[dist.sample(&mut *self.rng)])
        } else {
            // first maximum; children are in descending prior order
            let mut best = 0;
            for (i, w) in weights.iter().enumerate() {
                if *w > weights[best] {
                    best = i;
                }
            }
            Ok(children[best])
        }
    }

    pub fn run(mut self) -> Result<EpisodeResult> {
        let mut queue = VecDeque::from([SearchTree::ROOT]);
        let mut committed = Vec::new();
        let mut outcome = Outcome::Solved;
        'roots: while let Some(root) = match self.cfg.root_order {
            RootOrder::Fifo => queue.pop_front(),
            RootOrder::Lifo => queue.pop_back(),
        } {
            if self.tree.mols[root].status == NodeStatus::Open && self.tree.mols[root].depth >= self.cfg.max_depth {
                self.mark_dead(root, NodeStatus::DepthLimit);
            }
            for _ in 0..self.cfg.simulations {
                self.simulate(root)?;
                if self.tree.mols[root].status.is_dead() {
                    break;
                }
            }
            match self.tree.mols[root].status {
                NodeStatus::Open => {}
                NodeStatus::DepthLimit => {
                    outcome = Outcome::DepthLimit;
                    break;
                }
                NodeStatus::DeadEnd => {
                    outcome = Outcome::DeadEnd;
                    break;
                }
                NodeStatus::NoActions => {
                    outcome = Outcome::NoActions;
                    break;
                }
                NodeStatus::BuildingBlock => continue,
            }
            let rxn = self.choose_move(root)?;
            committed.push((root, rxn));
            let reactants = self.tree.rxns[rxn].children.clone();
            for &c in &reactants {
                match self.tree.mols[c].status {
                    NodeStatus::BuildingBlock => {}
                    NodeStatus::Open => {
                        if !self.cfg.reuse_tree && self.tree.mols[c].expanded {
                            self.tree.detach_subtree(c);
                            self.log_value(c);
                            self.refresh_above(c);
                        }
                        queue.push_back(c);
                    }
                    NodeStatus::DeadEnd => {
                        outcome = Outcome::DeadEnd;
                        break 'roots;
                    }
                    NodeStatus::DepthLimit => {
                        outcome = Outcome::DepthLimit;
                        break 'roots;
                    }
                    NodeStatus::NoActions => {
                        outcome = Outcome::NoActions;
                        break 'roots;
                    }
                }
            }
        }
        let commit_map: HashMap<usize, usize> = committed.iter().copied().collect();
        let route = committed_route(&self.tree, SearchTree::ROOT, &commit_map);
        Ok(EpisodeResult {
            tree: self.tree,
            outcome,
            route,
            committed,
            simulations: self.simulations,
            expansions: self.expansions,
            trace: self.trace,
        })
    }
}

fn committed_route(tree: &SearchTree, mol: usize, commits: &HashMap<usize, usize>) -> RouteTree {
    let node = &tree.mols[mol];
    if let Some(&rxn) = commits.get(&mol) {
        let children = tree.rxns[rxn]
            .children
            .iter()
            .map(|&c| committed_route(tree, c, commits))
            .collect();
        return RouteTree::reaction(node.molecule.clone(), tree.rxns[rxn].template, children);
    }
    let status = match node.status {
        NodeStatus::BuildingBlock => LeafStatus::BuildingBlock,
        NodeStatus::Open => LeafStatus::Open,
        _ => LeafStatus::DeadEnd,
    };
    RouteTree::leaf(node.molecule.clone(), status)
}

/// Runs one planning episode for `target`.
pub fn run_episode<R: Rng>(
    target: &Molecule,
    policy: &TwoBranchPolicy,
    values: &ValueNets,
    world: &WorldSpec,
    cfg: &MctsConfig,
    rng: &mut R,
) -> Result<EpisodeResult> {
    Episode::new(target, world, policy, values, cfg, rng)?.run()
}
