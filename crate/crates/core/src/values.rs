//! Value networks and the utility they induce for selection.

use crate::error::{Error, Result};
use crate::nnet::{Head, Mlp};
use crate::route::{CostModel, Molecule};
use crate::world::{Fingerprint, FINGERPRINT_BITS};

/// Which value estimates the search carries.
#[derive(Clone, Debug)]
pub enum ValueNets {
    /// Synthesizability (sigmoid) and conditional cost (softplus).
    Dual { syn: Mlp, cost: Mlp },
    /// Synthesizability only; costs are ignored by selection.
    SynOnly { syn: Mlp },
    /// One network for the expected total cost including dead-end penalties.
    Single { value: Mlp },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueMode {
    Dual,
    SynOnly,
    Single,
}

impl ValueNets {
    pub fn dual(hidden: usize, dropout: f64, seed: u64) -> Result<Self> {
        Ok(ValueNets::Dual {
            syn: Mlp::new(FINGERPRINT_BITS, hidden, 1, Head::Sigmoid, dropout, seed)?,
            cost: Mlp::new(FINGERPRINT_BITS, hidden, 1, Head::Softplus, dropout, seed.wrapping_add(1))?,
        })
    }

    pub fn syn_only(hidden: usize, dropout: f64, seed: u64) -> Result<Self> {
        Ok(ValueNets::SynOnly {
            syn: Mlp::new(FINGERPRINT_BITS, hidden, 1, Head::Sigmoid, dropout, seed)?,
        })
    }

    pub fn single(hidden: usize, dropout: f64, seed: u64) -> Result<Self> {
        Ok(ValueNets::Single {
            value: Mlp::new(FINGERPRINT_BITS, hidden, 1, Head::Softplus, dropout, seed)?,
        })
    }

    pub fn from_nets(syn: Option<Mlp>, cost: Option<Mlp>, single: Option<Mlp>) -> Result<Self> {
        match (syn, cost, single) {
            (Some(syn), Some(cost), None) => Ok(ValueNets::Dual { syn, cost }),
            (Some(syn), None, None) => Ok(ValueNets::SynOnly { syn }),
            (None, None, Some(value)) => Ok(ValueNets::Single { value }),
            _ => Err(Error::Parameter("unsupported value-network combination".into())),
        }
    }

    pub fn mode(&self) -> ValueMode {
        match self {
            ValueNets::Dual { .. } => ValueMode::Dual,
            ValueNets::SynOnly { .. } => ValueMode::SynOnly,
            ValueNets::Single { .. } => ValueMode::Single,
        }
    }

    /// `(syn, cost)` estimate for an open molecule. In single-value mode the
    /// syn channel is fixed at 1 and the cost channel carries the value.
    pub fn evaluate(&self, m: &Molecule) -> Result<(f64, f64)> {
        let x = Fingerprint::of(m).active();
        Ok(match self {
            ValueNets::Dual { syn, cost } => (syn.predict(&x)?[0], cost.predict(&x)?[0]),
            ValueNets::SynOnly { syn } => (syn.predict(&x)?[0], 0.0),
            ValueNets::Single { value } => (1.0, value.predict(&x)?[0]),
        })
    }

    pub fn nets(&self) -> Vec<(&'static str, &Mlp)> {
        match self {
            ValueNets::Dual { syn, cost } => vec![("syn", syn), ("cost", cost)],
            ValueNets::SynOnly { syn } => vec![("syn", syn)],
            ValueNets::Single { value } => vec![("single", value)],
        }
    }

    pub fn nets_mut(&mut self) -> Vec<(&'static str, &mut Mlp)> {
        match self {
            ValueNets::Dual { syn, cost } => vec![("syn", syn), ("cost", cost)],
            ValueNets::SynOnly { syn } => vec![("syn", syn)],
            ValueNets::Single { value } => vec![("single", value)],
        }
    }
}

impl ValueMode {
    /// Expected cost of committing to an action with synthesizability `r`
    /// and cost `q`.
    pub fn utility(self, r: f64, q: f64, cm: &CostModel) -> f64 {
        match self {
            ValueMode::Dual => r * q + (1.0 - r) * cm.c_dead,
            ValueMode::SynOnly => (1.0 - r) * cm.c_dead,
            ValueMode::Single => q,
        }
    }

    /// `(syn, cost)` of a dead molecule. The single-value channel carries the
    /// dead-end penalty itself.
    pub fn dead_values(self, cm: &CostModel) -> (f64, f64) {
        match self {
            ValueMode::Single => (0.0, cm.c_dead),
            _ => (0.0, 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_arithmetic() {
        let cm = CostModel::default();
        assert!((ValueMode::Dual.utility(1.0, 0.2, &cm) - 0.2).abs() < 1e-15);
        assert_eq!(ValueMode::Dual.utility(0.0, 0.2, &cm), 5.0);
        assert_eq!(ValueMode::SynOnly.utility(0.5, 9.0, &cm), 2.5);
        assert_eq!(ValueMode::Single.utility(0.5, 0.7, &cm), 0.7);
    }

    #[test]
    fn evaluation_ranges() {
        let m = Molecule::new("ABCDE").unwrap();
        let (s, c) = ValueNets::dual(8, 0.1, 3).unwrap().evaluate(&m).unwrap();
        assert!(s > 0.0 && s < 1.0 && c > 0.0);
        assert_eq!(ValueNets::syn_only(8, 0.1, 3).unwrap().evaluate(&m).unwrap().1, 0.0);
        assert_eq!(ValueNets::single(8, 0.1, 3).unwrap().evaluate(&m).unwrap().0, 1.0);
    }
}
