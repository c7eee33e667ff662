//! Molecules, reactions, routes and the route cost model.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// A molecule, identified by its canonical string.
///
/// Whether a molecule is a building block or a dead end is a property of the
/// world it lives in, not of the identifier, so nothing else is stored here.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Molecule(String);

impl Molecule {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::MalformedMolecule(id));
        }
        Ok(Molecule(id))
    }

    pub fn id(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Molecule({})", self.0)
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Index of a reaction template in a world's rule vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemplateId(u32);

impl TemplateId {
    pub fn new(index: usize, vocab_size: usize) -> Result<Self> {
        if index >= vocab_size {
            return Err(Error::Parameter(format!(
                "template index {index} outside vocabulary of size {vocab_size}"
            )));
        }
        Ok(TemplateId(index as u32))
    }

    pub(crate) fn from_index(index: usize) -> Self {
        TemplateId(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One applicable reaction for a product molecule.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub template: TemplateId,
    reactants: Vec<Molecule>,
    pub prior: f64,
}

impl Expansion {
    /// Reactants are stored as a set: sorted by id and deduplicated.
    pub fn new(template: TemplateId, mut reactants: Vec<Molecule>, prior: f64) -> Result<Self> {
        if reactants.is_empty() {
            return Err(Error::Parameter("expansion without reactants".into()));
        }
        if !(0.0..=1.0).contains(&prior) {
            return Err(Error::Parameter(format!("prior {prior} outside [0,1]")));
        }
        reactants.sort();
        reactants.dedup();
        Ok(Expansion {
            template,
            reactants,
            prior,
        })
    }

    pub fn reactants(&self) -> &[Molecule] {
        &self.reactants
    }
}

/// Per-reaction cost and dead-end penalty.
///
/// The reaction cost is a single constant; a per-template cost function would
/// slot in here.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub c_rxn: f64,
    pub c_dead: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c_rxn: 0.1,
            c_dead: 5.0,
        }
    }
}

impl CostModel {
    pub fn new(c_rxn: f64, c_dead: f64) -> Result<Self> {
        if !(c_rxn.is_finite() && c_dead.is_finite()) || c_rxn < 0.0 || c_dead <= c_rxn {
            return Err(Error::Parameter(format!(
                "cost model requires 0 <= c_rxn < c_dead, got c_rxn={c_rxn} c_dead={c_dead}"
            )));
        }
        Ok(CostModel { c_rxn, c_dead })
    }

    /// Cost of one reaction with `dead_children` dead-end reactants.
    pub fn reaction_cost(&self, dead_children: usize) -> f64 {
        self.c_rxn + self.c_dead * dead_children as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafStatus {
    BuildingBlock,
    DeadEnd,
    Open,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RouteNode {
    Leaf(LeafStatus),
    Reaction {
        template: TemplateId,
        children: Vec<RouteTree>,
    },
}

/// A (possibly partial) synthesis route rooted at `molecule`.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteTree {
    pub molecule: Molecule,
    pub node: RouteNode,
}

impl RouteTree {
    pub fn leaf(molecule: Molecule, status: LeafStatus) -> Self {
        RouteTree {
            molecule,
            node: RouteNode::Leaf(status),
        }
    }

    pub fn reaction(molecule: Molecule, template: TemplateId, children: Vec<RouteTree>) -> Self {
        RouteTree {
            molecule,
            node: RouteNode::Reaction { template, children },
        }
    }

    pub fn children(&self) -> &[RouteTree] {
        match &self.node {
            RouteNode::Leaf(_) => &[],
            RouteNode::Reaction { children, .. } => children,
        }
    }

    /// Preorder walk, yielding each node with its depth.
    pub fn walk(&self) -> Vec<(usize, &RouteTree)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, self)];
        while let Some((depth, node)) = stack.pop() {
            out.push((depth, node));
            for child in node.children().iter().rev() {
                stack.push((depth + 1, child));
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.children()
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn is_resolved(&self) -> bool {
        self.first_open().is_none()
    }

    fn first_open(&self) -> Option<&Molecule> {
        self.walk().into_iter().find_map(|(_, n)| match n.node {
            RouteNode::Leaf(LeafStatus::Open) => Some(&n.molecule),
            _ => None,
        })
    }

    fn ensure_resolved(&self) -> Result<()> {
        match self.first_open() {
            Some(m) => Err(Error::UnresolvedRoute(m.id().to_string())),
            None => Ok(()),
        }
    }

    /// Checks that no molecule repeats along any root path.
    pub fn check_acyclic(&self) -> Result<()> {
        fn go<'a>(node: &'a RouteTree, path: &mut HashSet<&'a str>) -> Result<()> {
            if !path.insert(node.molecule.id()) {
                return Err(Error::Parameter(format!(
                    "molecule {} repeats along a root path",
                    node.molecule
                )));
            }
            for child in node.children() {
                go(child, path)?;
            }
            path.remove(node.molecule.id());
            Ok(())
        }
        go(self, &mut HashSet::new())
    }

    /// Preorder list of (molecule, template) pairs of the internal nodes.
    pub fn reactions(&self) -> Vec<(&Molecule, TemplateId)> {
        self.walk()
            .into_iter()
            .filter_map(|(_, n)| match &n.node {
                RouteNode::Reaction { template, .. } => Some((&n.molecule, *template)),
                RouteNode::Leaf(_) => None,
            })
            .collect()
    }

    /// Line-oriented dump, one node per line in preorder:
    /// `depth<TAB>molecule<TAB>template|BB|DEAD|OPEN`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (depth, node) in self.walk() {
            let tag = match &node.node {
                RouteNode::Leaf(LeafStatus::BuildingBlock) => "BB".to_string(),
                RouteNode::Leaf(LeafStatus::DeadEnd) => "DEAD".to_string(),
                RouteNode::Leaf(LeafStatus::Open) => "OPEN".to_string(),
                RouteNode::Reaction { template, .. } => template.to_string(),
            };
            out.push_str(&format!("{depth}\t{}\t{tag}\n", node.molecule));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        // (depth, molecule, template or leaf, children)
        struct Pending {
            depth: usize,
            molecule: Molecule,
            template: Option<TemplateId>,
            status: LeafStatus,
            children: Vec<RouteTree>,
        }
        fn close(p: Pending) -> Result<RouteTree> {
            match p.template {
                Some(t) => {
                    if p.children.is_empty() {
                        return Err(Error::Parse {
                            line: 0,
                            msg: format!("reaction node {} has no children", p.molecule),
                        });
                    }
                    Ok(RouteTree::reaction(p.molecule, t, p.children))
                }
                None => Ok(RouteTree::leaf(p.molecule, p.status)),
            }
        }

        let mut stack: Vec<Pending> = Vec::new();
        let mut root: Option<RouteTree> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line_err = |msg: String| Error::Parse {
                line: lineno + 1,
                msg,
            };
            if line.trim().is_empty() {
                continue;
            }
            if root.is_some() {
                return Err(line_err("content after the root route".into()));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(line_err(format!("expected 3 fields, got {}", fields.len())));
            }
            let depth: usize = fields[0]
                .parse()
                .map_err(|_| line_err(format!("bad depth {:?}", fields[0])))?;
            let molecule = Molecule::new(fields[1]).map_err(|e| line_err(e.to_string()))?;
            let (template, status) = match fields[2] {
                "BB" => (None, LeafStatus::BuildingBlock),
                "DEAD" => (None, LeafStatus::DeadEnd),
                "OPEN" => (None, LeafStatus::Open),
                t => {
                    let idx: u32 = t
                        .parse()
                        .map_err(|_| line_err(format!("bad node tag {t:?}")))?;
                    (Some(TemplateId(idx)), LeafStatus::Open)
                }
            };
            if stack.is_empty() && depth != 0 {
                return Err(line_err("first node must have depth 0".into()));
            }
            if depth > stack.len() {
                return Err(line_err(format!("depth jumps to {depth}")));
            }
            while stack.len() > depth {
                let done = close(stack.pop().expect("non-empty"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(done),
                    None => root = Some(done),
                }
            }
            if root.is_some() {
                return Err(line_err("second root".into()));
            }
            if let Some(parent) = stack.last() {
                if parent.template.is_none() {
                    return Err(line_err(format!("leaf {} has children", parent.molecule)));
                }
            }
            stack.push(Pending {
                depth,
                molecule,
                template,
                status,
                children: Vec::new(),
            });
        }
        while let Some(p) = stack.pop() {
            debug_assert!(p.depth == stack.len());
            let done = close(p)?;
            match stack.last_mut() {
                Some(parent) => parent.children.push(done),
                None => root = Some(done),
            }
        }
        root.ok_or(Error::Empty("route text"))
    }
}

/// Total route cost: every reaction pays `c_rxn` plus `c_dead` per dead-end reactant.
pub fn route_cost(route: &RouteTree, cm: &CostModel) -> Result<f64> {
    route.ensure_resolved()?;
    let mut total = 0.0;
    for (_, node) in route.walk() {
        if let RouteNode::Reaction { children, .. } = &node.node {
            let dead = children
                .iter()
                .filter(|c| c.node == RouteNode::Leaf(LeafStatus::DeadEnd))
                .count();
            total += cm.reaction_cost(dead);
        }
    }
    Ok(total)
}

/// Number of reactions in a resolved route.
pub fn route_length(route: &RouteTree) -> Result<usize> {
    route.ensure_resolved()?;
    Ok(route.reactions().len())
}

pub fn route_is_synthesizable(route: &RouteTree) -> Result<bool> {
    route.ensure_resolved()?;
    Ok(route
        .walk()
        .iter()
        .all(|(_, n)| !matches!(n.node, RouteNode::Leaf(LeafStatus::DeadEnd))))
}
