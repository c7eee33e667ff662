//! A deterministic string-rewriting reaction world.
//!
//! Molecules are strings over a small alphabet. A rule rewrites the leftmost
//! occurrence of its pattern into each of its fragments, producing one reactant
//! per fragment. Every fragment is strictly shorter than its pattern, so each
//! reactant is strictly shorter than its product and every route terminates.
//! Short strings are building blocks. Strings carrying the poison character
//! cannot be expanded, which makes them dead ends unless they are short.

mod fingerprint;
mod sampling;

pub use fingerprint::{fnv1a64, Fingerprint, FINGERPRINT_BITS};
pub use sampling::{sample_targets, sample_training_routes};

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::route::{Expansion, Molecule, TemplateId};
use crate::solver::Solver;

pub const DEFAULT_ALPHABET: &str = "ABCDEFGH";
pub const DEFAULT_POISON: char = 'Z';
pub const DEFAULT_BB_MAX_LEN: usize = 3;

const MAX_GENERATION_ATTEMPTS: usize = 1000;
const PROBE_TARGETS: usize = 100;
const PROBE_DEPTH: usize = 10;
const MIN_PROBE_SOLVED: usize = 50;

/// A template: the leftmost occurrence of `pattern` is replaced by each fragment.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RewriteRule {
    pub pattern: String,
    pub replacements: Vec<String>,
}

impl RewriteRule {
    pub fn is_poisoned(&self, poison: char) -> bool {
        self.replacements.iter().any(|f| f.contains(poison))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldSpec {
    alphabet: Vec<char>,
    poison: char,
    bb_max_len: usize,
    seed: u64,
    rules: Vec<RewriteRule>,
}

impl WorldSpec {
    /// Builds a world from explicit parts, checking every structural invariant.
    pub fn new(
        alphabet: &str,
        poison: char,
        bb_max_len: usize,
        seed: u64,
        rules: Vec<RewriteRule>,
    ) -> Result<Self> {
        let alphabet: Vec<char> = alphabet.chars().collect();
        let unique: BTreeSet<char> = alphabet.iter().copied().collect();
        if alphabet.is_empty() || unique.len() != alphabet.len() {
            return Err(Error::Parameter("alphabet must be non-empty and unique".into()));
        }
        if unique.contains(&poison) || !poison.is_ascii_graphic() {
            return Err(Error::Parameter(format!("bad poison character {poison:?}")));
        }
        if alphabet.iter().any(|c| !c.is_ascii_alphanumeric()) {
            return Err(Error::Parameter("alphabet must be ASCII alphanumeric".into()));
        }
        if bb_max_len == 0 {
            return Err(Error::Parameter("bb_max_len must be positive".into()));
        }
        if rules.is_empty() {
            return Err(Error::Parameter("world needs at least one rule".into()));
        }
        for (i, rule) in rules.iter().enumerate() {
            let in_alphabet = |s: &str, allow_poison: bool| {
                s.chars()
                    .all(|c| unique.contains(&c) || (allow_poison && c == poison))
            };
            let bad = |msg: &str| Error::Parameter(format!("rule {i}: {msg}"));
            if rule.pattern.len() < 2 || !in_alphabet(&rule.pattern, false) {
                return Err(bad("pattern must be >= 2 alphabet characters"));
            }
            if rule.replacements.is_empty() {
                return Err(bad("no replacements"));
            }
            for frag in &rule.replacements {
                if frag.is_empty() || frag.len() >= rule.pattern.len() || !in_alphabet(frag, true) {
                    return Err(bad("fragments must be non-empty and shorter than the pattern"));
                }
            }
        }
        Ok(WorldSpec {
            alphabet,
            poison,
            bb_max_len,
            seed,
            rules,
        })
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn poison(&self) -> char {
        self.poison
    }

    pub fn bb_max_len(&self) -> usize {
        self.bb_max_len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn vocab_size(&self) -> usize {
        self.rules.len()
    }

    pub fn rule(&self, t: TemplateId) -> Result<&RewriteRule> {
        self.rules
            .get(t.index())
            .ok_or_else(|| Error::Parameter(format!("template {t} outside vocabulary")))
    }

    pub fn template(&self, index: usize) -> Result<TemplateId> {
        TemplateId::new(index, self.vocab_size())
    }

    fn check(&self, m: &Molecule) -> Result<()> {
        if m.id()
            .chars()
            .all(|c| c == self.poison || self.alphabet.contains(&c))
        {
            Ok(())
        } else {
            Err(Error::MalformedMolecule(m.id().to_string()))
        }
    }

    pub fn molecule(&self, id: &str) -> Result<Molecule> {
        let m = Molecule::new(id)?;
        self.check(&m)?;
        Ok(m)
    }

    pub fn is_building_block(&self, m: &Molecule) -> Result<bool> {
        self.check(m)?;
        Ok(m.len() <= self.bb_max_len)
    }

    pub fn is_dead_end(&self, m: &Molecule) -> Result<bool> {
        Ok(!self.is_building_block(m)? && self.applicable_templates(m)?.is_empty())
    }

    pub fn is_terminal(&self, m: &Molecule) -> Result<bool> {
        Ok(self.is_building_block(m)? || self.is_dead_end(m)?)
    }

    /// Templates whose pattern occurs in `m`, ascending. Building blocks and
    /// poisoned molecules have none.
    pub fn applicable_templates(&self, m: &Molecule) -> Result<Vec<TemplateId>> {
        self.check(m)?;
        if m.len() <= self.bb_max_len || m.id().contains(self.poison) {
            return Ok(Vec::new());
        }
        Ok(self
            .rules
            .iter()
            .enumerate()
            .filter(|(_, r)| m.id().contains(r.pattern.as_str()))
            .map(|(i, _)| TemplateId::from_index(i))
            .collect())
    }

    /// Sorted, deduplicated reactants of applying `t` to `m`.
    pub fn reactants(&self, m: &Molecule, t: TemplateId) -> Result<Vec<Molecule>> {
        let mismatch = || Error::TemplateMismatch {
            molecule: m.id().to_string(),
            template: t.index() as u32,
        };
        self.check(m)?;
        let rule = self.rules.get(t.index()).ok_or_else(mismatch)?;
        if m.len() <= self.bb_max_len || m.id().contains(self.poison) {
            return Err(mismatch());
        }
        let at = m.id().find(rule.pattern.as_str()).ok_or_else(mismatch)?;
        let (head, tail) = (&m.id()[..at], &m.id()[at + rule.pattern.len()..]);
        let mut out: Vec<Molecule> = rule
            .replacements
            .iter()
            .map(|frag| Molecule::new(format!("{head}{frag}{tail}")))
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Applies `t` at the leftmost match. The prior is left at 1; policies
    /// assign their own.
    pub fn apply_template(&self, m: &Molecule, t: TemplateId) -> Result<Expansion> {
        Expansion::new(t, self.reactants(m, t)?, 1.0)
    }

    /// Total length is the reducible mass: every reactant is strictly shorter
    /// than its product.
    pub fn reducible_mass(m: &Molecule) -> usize {
        m.len()
    }

    /// Grows a product by inverting `steps` random rule applications starting
    /// from a random building block.
    pub(crate) fn grow<R: Rng>(&self, steps: usize, rng: &mut R) -> Molecule {
        let len = rng.gen_range(1..=self.bb_max_len);
        let mut s: String = (0..len)
            .map(|_| *self.alphabet.choose(rng).expect("non-empty alphabet"))
            .collect();
        for _ in 0..steps {
            let mut grown = false;
            for _ in 0..32 {
                let rule = self.rules.choose(rng).expect("non-empty rules");
                let frag = rule.replacements.choose(rng).expect("non-empty replacements");
                if frag.contains(self.poison) {
                    continue;
                }
                let hits: Vec<usize> = s.match_indices(frag.as_str()).map(|(i, _)| i).collect();
                if let Some(&at) = hits.choose(rng) {
                    s = format!("{}{}{}", &s[..at], rule.pattern, &s[at + frag.len()..]);
                    grown = true;
                    break;
                }
            }
            if !grown {
                break;
            }
        }
        Molecule::new(s).expect("grown molecules are non-empty")
    }

    /// Serialises to the `worldspec-v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("worldspec-v1\n");
        let alphabet: String = self.alphabet.iter().collect();
        let _ = writeln!(out, "alphabet\t{alphabet}");
        let _ = writeln!(out, "poison\t{}", self.poison);
        let _ = writeln!(out, "bb_max_len\t{}", self.bb_max_len);
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "rules\t{}", self.rules.len());
        for (i, r) in self.rules.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{}\t{}", r.pattern, r.replacements.join(","));
        }
        out
    }

    /// Lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
        let err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        match lines.next() {
            Some((_, "worldspec-v1")) => {}
            _ => return Err(err(0, "missing worldspec-v1 header")),
        }
        let mut meta = |key: &str| -> Result<String> {
            let (n, line) = lines.next().ok_or_else(|| err(0, "truncated header"))?;
            match line.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(err(n, &format!("expected {key} line"))),
            }
        };
        let alphabet = meta("alphabet")?;
        let poison = meta("poison")?;
        let bb_max_len = meta("bb_max_len")?;
        let seed = meta("seed")?;
        let n_rules = meta("rules")?;
        let mut poison_chars = poison.chars();
        let poison = match (poison_chars.next(), poison_chars.next()) {
            (Some(c), None) => c,
            _ => return Err(err(2, "poison must be one character")),
        };
        let bb_max_len: usize = bb_max_len.parse().map_err(|_| err(3, "bad bb_max_len"))?;
        let seed: u64 = seed.parse().map_err(|_| err(4, "bad seed"))?;
        let n_rules: usize = n_rules.parse().map_err(|_| err(5, "bad rule count"))?;
        let mut rules = Vec::with_capacity(n_rules);
        for (n, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(n, "rule lines have 3 tab-separated fields"));
            }
            if fields[0].parse::<usize>().ok() != Some(rules.len()) {
                return Err(err(n, "rule indices must be consecutive from 0"));
            }
            rules.push(RewriteRule {
                pattern: fields[1].to_string(),
                replacements: fields[2].split(',').map(str::to_string).collect(),
            });
        }
        if rules.len() != n_rules {
            return Err(err(5, "rule count does not match header"));
        }
        WorldSpec::new(&alphabet, poison, bb_max_len, seed, rules)
    }
}

/// Generates a seeded world with `n_rules` rules. Candidate rule sets are
/// rejected until a probe of random grown targets is at least half solvable
/// within depth 10.
pub fn generate_world(n_rules: usize, seed: u64) -> Result<WorldSpec> {
    if n_rules < 10 {
        return Err(Error::Parameter(format!("n_rules must be >= 10, got {n_rules}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<char> = DEFAULT_ALPHABET.chars().collect();
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let rules = candidate_rules(n_rules, &alphabet, &mut rng);
        let world = WorldSpec::new(
            DEFAULT_ALPHABET,
            DEFAULT_POISON,
            DEFAULT_BB_MAX_LEN,
            seed,
            rules,
        )?;
        if probe_solvable(&world, &mut rng) >= MIN_PROBE_SOLVED {
            return Ok(world);
        }
    }
    Err(Error::GenerationFailure(MAX_GENERATION_ATTEMPTS))
}

fn candidate_rules<R: Rng>(n_rules: usize, alphabet: &[char], rng: &mut R) -> Vec<RewriteRule> {
    let n_poisoned = (n_rules + 4) / 5;
    let mut poisoned = vec![false; n_rules];
    poisoned[..n_poisoned].iter_mut().for_each(|p| *p = true);
    poisoned.shuffle(rng);

    let mut seen = BTreeSet::new();
    let mut rules = Vec::with_capacity(n_rules);
    let word = |len: usize, rng: &mut R| -> String {
        (0..len)
            .map(|_| *alphabet.choose(rng).expect("non-empty alphabet"))
            .collect()
    };
    while rules.len() < n_rules {
        let plen = match rng.gen_range(0..20) {
            0..=9 => 2,
            10..=16 => 3,
            _ => 4,
        };
        let pattern = word(plen, rng);
        let n_frags = match rng.gen_range(0..20) {
            0..=8 => 1,
            9..=17 => 2,
            _ => 3,
        };
        let mut replacements: Vec<String> = (0..n_frags)
            .map(|_| {
                let flen = rng.gen_range(1..plen);
                word(flen, rng)
            })
            .collect();
        if poisoned[rules.len()] {
            let which = rng.gen_range(0..replacements.len());
            let frag = &mut replacements[which];
            let pos = rng.gen_range(0..frag.len());
            frag.replace_range(pos..pos + 1, &DEFAULT_POISON.to_string());
        }
        let rule = RewriteRule {
            pattern,
            replacements,
        };
        if seen.insert((rule.pattern.clone(), rule.replacements.clone())) {
            rules.push(rule);
        }
    }
    rules
}

fn probe_solvable<R: Rng>(world: &WorldSpec, rng: &mut R) -> usize {
    let mut solver = Solver::new(world);
    (0..PROBE_TARGETS)
        .filter(|_| {
            let steps = rng.gen_range(1..=PROBE_DEPTH);
            let target = world.grow(steps, rng);
            solver
                .min_height(&target)
                .map(|h| h.is_some_and(|h| h <= PROBE_DEPTH))
                .unwrap_or(false)
        })
        .count()
}
