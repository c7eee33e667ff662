use rand::Rng;

use crate::error::{Error, Result};
use crate::route::{CostModel, Molecule, TemplateId};
use crate::values::ValueMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Open,
    BuildingBlock,
    /// No template applies in the world.
    DeadEnd,
    /// Expansion produced no usable reaction: nothing realistic applied, or
    /// every proposal repeated an ancestor's template.
    NoActions,
    /// Open leaf at the depth limit.
    DepthLimit,
}

impl NodeStatus {
    pub fn is_dead(self) -> bool {
        matches!(self, NodeStatus::DeadEnd | NodeStatus::NoActions | NodeStatus::DepthLimit)
    }
}

#[derive(Clone, Debug)]
pub struct MoleculeNode {
    pub molecule: Molecule,
    pub parent: Option<usize>,
    pub depth: usize,
    pub status: NodeStatus,
    /// Expansion has been attempted.
    pub expanded: bool,
    pub v_syn: f64,
    pub v_cost: f64,
    /// Values assigned at creation, before any backup.
    pub init: (f64, f64),
    pub n: u32,
    pub children: Vec<usize>,
    /// Realistic template set returned by the policy at expansion.
    pub proposals: Vec<TemplateId>,
    pub solved: bool,
}

#[derive(Clone, Debug)]
pub struct ReactionNode {
    pub template: TemplateId,
    pub prior: f64,
    pub r: f64,
    pub q: f64,
    pub n: u32,
    pub parent: usize,
    pub children: Vec<usize>,
    pub solved: bool,
}

/// Alternating molecule (OR) and reaction (AND) nodes; molecule 0 is the root.
#[derive(Clone, Debug)]
pub struct SearchTree {
    pub mols: Vec<MoleculeNode>,
    pub rxns: Vec<ReactionNode>,
}

/// `mols[0], rxns[0], mols[1], ..., mols[L]` from a simulation root to the
/// leaf reached before expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationPath {
    pub mols: Vec<usize>,
    pub rxns: Vec<usize>,
}

impl SearchTree {
    pub fn new(root: Molecule, status: NodeStatus, values: (f64, f64)) -> Self {
        let mut tree = SearchTree {
            mols: Vec::new(),
            rxns: Vec::new(),
        };
        tree.add_molecule(root, None, 0, status, values);
        tree
    }

    pub const ROOT: usize = 0;

    pub fn add_molecule(
        &mut self,
        molecule: Molecule,
        parent: Option<usize>,
        depth: usize,
        status: NodeStatus,
        values: (f64, f64),
    ) -> usize {
        self.mols.push(MoleculeNode {
            molecule,
            parent,
            depth,
            status,
            expanded: false,
            v_syn: values.0,
            v_cost: values.1,
            init: values,
            n: 0,
            children: Vec::new(),
            proposals: Vec::new(),
            solved: status == NodeStatus::BuildingBlock,
        });
        self.mols.len() - 1
    }

    /// Adds a reaction under `parent` with the given reactant node ids already
    /// created, and initialises its R and Q.
    pub fn add_reaction(&mut self, parent: usize, template: TemplateId, prior: f64, children: Vec<usize>, cm: &CostModel) -> usize {
        let id = self.rxns.len();
        for &c in &children {
            self.mols[c].parent = Some(id);
        }
        self.rxns.push(ReactionNode {
            template,
            prior,
            r: 0.0,
            q: 0.0,
            n: 0,
            parent,
            children,
            solved: false,
        });
        self.refresh_reaction(id, cm);
        self.mols[parent].children.push(id);
        id
    }

    /// R = product of child V_syn, Q = c_rxn + sum of child V_cost.
    pub fn refresh_reaction(&mut self, rxn: usize, cm: &CostModel) {
        let (mut r, mut sum) = (1.0, 0.0);
        let mut solved = true;
        for &c in &self.rxns[rxn].children {
            let m = &self.mols[c];
            r *= m.v_syn;
            sum += m.v_cost;
            solved &= m.solved;
        }
        let q = cm.c_rxn + sum;
        let node = &mut self.rxns[rxn];
        node.r = r;
        node.q = q;
        node.solved = solved;
    }

    fn refresh_solved(&mut self, mol: usize) {
        let m = &self.mols[mol];
        let solved = m.status == NodeStatus::BuildingBlock || m.children.iter().any(|&a| self.rxns[a].solved);
        self.mols[mol].solved = solved;
    }

    /// Templates of the reactions on the chain from the root down to `mol`.
    pub fn ancestor_templates(&self, mol: usize) -> Vec<TemplateId> {
        let mut out = Vec::new();
        let mut cur = self.mols[mol].parent;
        while let Some(rxn) = cur {
            out.push(self.rxns[rxn].template);
            cur = self.mols[self.rxns[rxn].parent].parent;
        }
        out
    }

    /// Dual-value PUCT: argmax of `-U(s,a) + C * prior * sqrt(sum_b N(s,b)) / (1 + N(s,a))`,
    /// ties to the lower template index.
    pub fn puct_select(&self, mol: usize, c_puct: f64, mode: ValueMode, cm: &CostModel) -> Result<usize> {
        let node = &self.mols[mol];
        if node.children.is_empty() {
            return Err(Error::Search(format!("selection at unexpanded node {}", node.molecule)));
        }
        let total: u32 = node.children.iter().map(|&a| self.rxns[a].n).sum();
        let sqrt_total = (total as f64).sqrt();
        let mut best: Option<(f64, TemplateId, usize)> = None;
        for &a in &node.children {
            let rx = &self.rxns[a];
            let score = -mode.utility(rx.r, rx.q, cm) + c_puct * rx.prior * sqrt_total / (1.0 + rx.n as f64);
            let better = match best {
                None => true,
                Some((s, t, _)) => score > s || (score == s && rx.template < t),
            };
            if better {
                best = Some((score, rx.template, a));
            }
        }
        Ok(best.expect("non-empty children").2)
    }

    /// Open unexpanded reactants first, then expanded unsolved ones (each in
    /// canonical order), otherwise a uniformly random reactant.
    pub fn select_child_molecule<R: Rng>(&self, rxn: usize, rng: &mut R) -> usize {
        let children = &self.rxns[rxn].children;
        let by_id = |pred: &dyn Fn(&MoleculeNode) -> bool| {
            children
                .iter()
                .copied()
                .filter(|&c| pred(&self.mols[c]))
                .min_by(|&a, &b| self.mols[a].molecule.cmp(&self.mols[b].molecule))
        };
        if let Some(c) = by_id(&|m| m.status == NodeStatus::Open && !m.expanded) {
            return c;
        }
        if let Some(c) = by_id(&|m| !m.children.is_empty() && !m.solved) {
            return c;
        }
        children[rng.gen_range(0..children.len())]
    }

    /// Path backup. Computes the per-path values bottom-up from the leaf's
    /// current values, merges them into the running averages of every
    /// molecule on the path, increments visit counts, then refreshes R, Q and
    /// solved flags of the on-path reactions. Returns the per-path values,
    /// aligned with `path.mols`.
    pub fn backup(&mut self, path: &SimulationPath, cm: &CostModel) -> Result<Vec<(f64, f64)>> {
        let depth = path.rxns.len();
        if path.mols.len() != depth + 1 {
            return Err(Error::Search("path must alternate molecules and reactions".into()));
        }
        for (l, &a) in path.rxns.iter().enumerate() {
            if self.rxns[a].parent != path.mols[l] || !self.rxns[a].children.contains(&path.mols[l + 1]) {
                return Err(Error::Search(format!("path is broken at step {l}")));
            }
        }
        let leaf = &self.mols[path.mols[depth]];
        let mut vt = vec![(0.0, 0.0); depth + 1];
        vt[depth] = (leaf.v_syn, leaf.v_cost);
        for l in (0..depth).rev() {
            let next = path.mols[l + 1];
            let (mut syn, mut cost) = (vt[l + 1].0, cm.c_rxn + vt[l + 1].1);
            for &s in &self.rxns[path.rxns[l]].children {
                if s != next {
                    syn *= self.mols[s].v_syn;
                    cost += self.mols[s].v_cost;
                }
            }
            vt[l] = (syn, cost);
        }
        for (&m, &(syn, cost)) in path.mols.iter().zip(&vt) {
            let node = &mut self.mols[m];
            let n = node.n as f64;
            node.v_syn = (node.v_syn * n + syn) / (n + 1.0);
            node.v_cost = (node.v_cost * n + cost) / (n + 1.0);
            node.n += 1;
        }
        self.refresh_solved(path.mols[depth]);
        for l in (0..depth).rev() {
            let a = path.rxns[l];
            self.rxns[a].n += 1;
            self.refresh_reaction(a, cm);
            self.refresh_solved(path.mols[l]);
        }
        Ok(vt)
    }

    /// Molecule node ids reachable from the root, in preorder.
    pub fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![Self::ROOT];
        while let Some(m) = stack.pop() {
            out.push(m);
            for &a in self.mols[m].children.iter().rev() {
                for &c in self.rxns[a].children.iter().rev() {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Drops everything below `mol` and resets it to its creation values.
    pub(crate) fn detach_subtree(&mut self, mol: usize) {
        let node = &mut self.mols[mol];
        node.children.clear();
        node.proposals.clear();
        node.expanded = false;
        node.n = 0;
        (node.v_syn, node.v_cost) = node.init;
        if node.status != NodeStatus::BuildingBlock && node.status != NodeStatus::DeadEnd {
            node.status = NodeStatus::Open;
        }
        node.solved = node.status == NodeStatus::BuildingBlock;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(s: &str) -> Molecule {
        Molecule::new(s).unwrap()
    }

    fn t(i: usize) -> TemplateId {
        TemplateId::new(i, 100).unwrap()
    }

    /// root with reactions to (bb, bb) and to (dead).
    fn two_reactions(cm: &CostModel) -> SearchTree {
        let mut tree = SearchTree::new(m("ROOT"), NodeStatus::Open, (0.5, 1.0));
        tree.mols[0].expanded = true;
        let a = tree.add_molecule(m("AA"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
        let b = tree.add_molecule(m("BB"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
        tree.add_reaction(0, t(7), 0.5, vec![a, b], cm);
        let d = tree.add_molecule(m("DDDD"), None, 1, NodeStatus::DeadEnd, (0.0, 0.0));
        tree.add_reaction(0, t(3), 0.5, vec![d], cm);
        tree
    }

    #[test]
    fn unvisited_selection_is_argmin_utility() {
        let cm = CostModel::default();
        let tree = two_reactions(&cm);
        // U = 0.1 for the bb reaction, 5.0 for the dead one
        assert_eq!(tree.rxns[0].r, 1.0);
        assert!((tree.rxns[0].q - 0.1).abs() < 1e-15);
        assert_eq!(tree.puct_select(0, 1.0, ValueMode::Dual, &cm).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_lower_template() {
        let cm = CostModel::default();
        let mut tree = SearchTree::new(m("ROOT"), NodeStatus::Open, (0.5, 1.0));
        let a = tree.add_molecule(m("AA"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
        tree.add_reaction(0, t(9), 0.5, vec![a], &cm);
        let b = tree.add_molecule(m("AA"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
        tree.add_reaction(0, t(2), 0.5, vec![b], &cm);
        assert_eq!(tree.puct_select(0, 1.0, ValueMode::Dual, &cm).unwrap(), 1);
    }

    #[test]
    fn unexpanded_selection_is_an_error() {
        let tree = SearchTree::new(m("ROOT"), NodeStatus::Open, (0.5, 1.0));
        assert!(tree.puct_select(0, 1.0, ValueMode::Dual, &CostModel::default()).is_err());
    }

    #[test]
    fn backup_with_terminal_children() {
        let cm = CostModel::default();
        let mut tree = two_reactions(&cm);
        let path = SimulationPath { mols: vec![0, 1], rxns: vec![0] };
        let vt = tree.backup(&path, &cm).unwrap();
        assert_eq!(vt[0].0, 1.0);
        assert!((vt[0].1 - 0.1).abs() < 1e-15);
        assert_eq!(tree.mols[0].n, 1);
        assert_eq!(tree.mols[1].n, 1);
        assert_eq!(tree.rxns[0].n, 1);
        assert!(tree.mols[0].solved);
        // zero is absorbing
        let path = SimulationPath { mols: vec![0, 3], rxns: vec![1] };
        let vt = tree.backup(&path, &cm).unwrap();
        assert_eq!(vt[0].0, 0.0);
        assert_eq!(tree.mols[0].v_syn, 0.5);
    }

    #[test]
    fn broken_paths_are_rejected() {
        let cm = CostModel::default();
        let mut tree = two_reactions(&cm);
        let bad = SimulationPath { mols: vec![0, 3], rxns: vec![0] };
        assert!(tree.backup(&bad, &cm).is_err());
        let short = SimulationPath { mols: vec![0], rxns: vec![0] };
        assert!(tree.backup(&short, &cm).is_err());
    }

    #[test]
    fn child_molecule_preferences() {
        let cm = CostModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tree = SearchTree::new(m("ROOT"), NodeStatus::Open, (0.5, 1.0));
        let x = tree.add_molecule(m("XXXX"), None, 1, NodeStatus::Open, (0.5, 0.5));
        let y = tree.add_molecule(m("YYYY"), None, 1, NodeStatus::Open, (0.5, 0.5));
        let z = tree.add_molecule(m("ZZ"), None, 1, NodeStatus::BuildingBlock, (1.0, 0.0));
        let rxn = tree.add_reaction(0, t(0), 1.0, vec![x, y, z], &cm);
        tree.mols[x].expanded = true;
        assert_eq!(tree.select_child_molecule(rxn, &mut rng), y);

        // all expanded, only y unsolved
        let leaf = tree.add_molecule(m("QQ"), None, 2, NodeStatus::BuildingBlock, (1.0, 0.0));
        tree.add_reaction(x, t(1), 1.0, vec![leaf], &cm);
        tree.mols[x].solved = true;
        let leaf2 = tree.add_molecule(m("RRRRR"), None, 2, NodeStatus::Open, (0.5, 0.5));
        tree.add_reaction(y, t(2), 1.0, vec![leaf2], &cm);
        tree.mols[y].expanded = true;
        assert_eq!(tree.select_child_molecule(rxn, &mut rng), y);
    }
}
