//! BRICS link environments as graph predicates, and the table of
//! environment pairs whose connecting bond may be cleaved.
//!
//! Every predicate reads the intact molecule; aromaticity is taken as
//! written. Element tests follow SMARTS conventions: uppercase means
//! aliphatic, lowercase aromatic, `#n` either.

use crate::chem::{BondOrder, MolecularGraph};

/// One of the BRICS link-atom environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Environment {
    L1,
    L3,
    L4,
    L5,
    L6,
    L8,
    L9,
    L10,
    L11,
    L12,
    L13,
    L14,
    L15,
    L16,
}

/// A cleavable pairing of two environments across an acyclic single bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleavageRule {
    pub rule_id: &'static str,
    pub left_env: Environment,
    pub right_env: Environment,
}

macro_rules! rules {
    ($(($id:literal, $l:ident, $r:ident)),* $(,)?) => {
        &[$(CleavageRule { rule_id: $id, left_env: Environment::$l, right_env: Environment::$r }),*]
    };
}

/// The single-bond BRICS compatibility table.
pub const CLEAVAGE_RULES: &[CleavageRule] = rules![
    ("1-3", L1, L3),
    ("1-5", L1, L5),
    ("1-10", L1, L10),
    ("3-4", L3, L4),
    ("3-13", L3, L13),
    ("3-14", L3, L14),
    ("3-15", L3, L15),
    ("3-16", L3, L16),
    ("4-5", L4, L5),
    ("4-11", L4, L11),
    ("5-12", L5, L12),
    ("5-14", L5, L14),
    ("5-16", L5, L16),
    ("5-13", L5, L13),
    ("5-15", L5, L15),
    ("6-13", L6, L13),
    ("6-14", L6, L14),
    ("6-15", L6, L15),
    ("6-16", L6, L16),
    ("8-9", L8, L9),
    ("8-10", L8, L10),
    ("8-13", L8, L13),
    ("8-14", L8, L14),
    ("8-15", L8, L15),
    ("8-16", L8, L16),
    ("9-13", L9, L13),
    ("9-14", L9, L14),
    ("9-15", L9, L15),
    ("9-16", L9, L16),
    ("10-13", L10, L13),
    ("10-14", L10, L14),
    ("10-15", L10, L15),
    ("10-16", L10, L16),
    ("11-13", L11, L13),
    ("11-14", L11, L14),
    ("11-15", L11, L15),
    ("11-16", L11, L16),
    ("13-14", L13, L14),
    ("13-15", L13, L15),
    ("13-16", L13, L16),
    ("14-14", L14, L14),
    ("14-15", L14, L15),
    ("14-16", L14, L16),
    ("15-16", L15, L16),
    ("16-16", L16, L16),
];

struct View<'a>(&'a MolecularGraph);

impl View<'_> {
    fn aliphatic(&self, a: usize, symbols: &[&str]) -> bool {
        let atom = &self.0.atoms[a];
        !atom.aromatic && symbols.contains(&atom.element.as_str())
    }

    fn aromatic(&self, a: usize, symbols: &[&str]) -> bool {
        let atom = &self.0.atoms[a];
        atom.aromatic && symbols.contains(&atom.element.as_str())
    }

    fn any_form(&self, a: usize, symbols: &[&str]) -> bool {
        symbols.contains(&self.0.atoms[a].element.as_str())
    }

    fn degree(&self, a: usize) -> usize {
        self.0.atoms[a].degree
    }

    fn in_ring(&self, a: usize) -> bool {
        self.0.atoms[a].in_ring
    }

    /// Neighbors reached through bonds satisfying `bond_ok`, filtered by `atom_ok`.
    fn matching(
        &self,
        a: usize,
        bond_ok: impl Fn(BondOrder, bool) -> bool,
        atom_ok: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        self.0
            .neighbors(a)
            .filter(|&(b, e)| {
                let bond = &self.0.bonds[e];
                bond_ok(bond.order, bond.in_ring) && atom_ok(b)
            })
            .map(|(b, _)| b)
            .collect()
    }

    fn has_double_to_o(&self, a: usize) -> bool {
        !self
            .matching(a, |o, _| o == BondOrder::Double, |b| self.aliphatic(b, &["O"]))
            .is_empty()
    }

    fn has_double(&self, a: usize) -> bool {
        !self.matching(a, |o, _| o == BondOrder::Double, |_| true).is_empty()
    }

    /// Two distinct neighbors, the first from `first`, the second from `second`.
    fn distinct_pair(first: &[usize], second: &[usize]) -> bool {
        first.iter().any(|x| second.iter().any(|y| x != y))
    }
}

fn single(o: BondOrder, _: bool) -> bool {
    o == BondOrder::Single
}
fn single_acyclic(o: BondOrder, ring: bool) -> bool {
    o == BondOrder::Single && !ring
}
fn single_ring(o: BondOrder, ring: bool) -> bool {
    o == BondOrder::Single && ring
}
fn single_or_aromatic(o: BondOrder, _: bool) -> bool {
    matches!(o, BondOrder::Single | BondOrder::Aromatic)
}
fn aromatic_bond(o: BondOrder, _: bool) -> bool {
    o == BondOrder::Aromatic
}
fn ring_bond(_: BondOrder, ring: bool) -> bool {
    ring
}

impl Environment {
    pub fn matches(self, graph: &MolecularGraph, a: usize) -> bool {
        let v = View(graph);
        let carbon_any = |b: usize| v.any_form(b, &["C"]);
        match self {
            // [C;D3]([#0,#6,#7,#8])(=O)
            Environment::L1 => {
                v.aliphatic(a, &["C"])
                    && v.degree(a) == 3
                    && v.has_double_to_o(a)
                    && !v
                        .matching(a, single_or_aromatic, |b| v.any_form(b, &["C", "N", "O"]))
                        .is_empty()
            }
            // [O;D2]-;!@[#0,#6,#1]
            Environment::L3 => {
                v.aliphatic(a, &["O"])
                    && v.degree(a) == 2
                    && !v.matching(a, single_acyclic, carbon_any).is_empty()
            }
            // [C;!D1;!$(C=*)]-;!@[#6]
            Environment::L4 => {
                v.aliphatic(a, &["C"])
                    && v.degree(a) != 1
                    && !v.has_double(a)
                    && !v.matching(a, single_acyclic, carbon_any).is_empty()
            }
            // [N;!D1;!$(N=*);!$(N-[!#6;!#16;!#0;!#1]);!$([N;R]@[C;R]=O)]
            Environment::L5 => {
                v.aliphatic(a, &["N"])
                    && v.degree(a) != 1
                    && !v.has_double(a)
                    && v
                        .matching(a, single, |b| !v.any_form(b, &["C", "S"]))
                        .is_empty()
                    && !(v.in_ring(a)
                        && !v
                            .matching(a, ring_bond, |b| {
                                v.aliphatic(b, &["C"]) && v.in_ring(b) && v.has_double_to_o(b)
                            })
                            .is_empty())
            }
            // [C;D3;!R](=O)-;!@[#0,#6,#7,#8]
            Environment::L6 => {
                v.aliphatic(a, &["C"])
                    && v.degree(a) == 3
                    && !v.in_ring(a)
                    && v.has_double_to_o(a)
                    && !v
                        .matching(a, single_acyclic, |b| v.any_form(b, &["C", "N", "O"]))
                        .is_empty()
            }
            // [C;!R;!D1;!$(C!-*)]
            Environment::L8 => {
                v.aliphatic(a, &["C"])
                    && !v.in_ring(a)
                    && v.degree(a) != 1
                    && v.matching(a, |o, _| o != BondOrder::Single, |_| true).is_empty()
            }
            // [n;+0;$(n(:[c,n,o,s]):[c,n,o,s])]
            Environment::L9 => {
                let hetero = v.matching(a, aromatic_bond, |b| v.aromatic(b, &["C", "N", "O", "S"]));
                v.aromatic(a, &["N"])
                    && graph.atoms[a].formal_charge == 0
                    && View::distinct_pair(&hetero, &hetero)
            }
            // [N;R;$(N(@C(=O))@[C,N,O,S])]
            Environment::L10 => {
                let carbonyl = v.matching(a, ring_bond, |b| {
                    v.aliphatic(b, &["C"]) && v.has_double_to_o(b)
                });
                let other = v.matching(a, ring_bond, |b| v.aliphatic(b, &["C", "N", "O", "S"]));
                v.aliphatic(a, &["N"]) && v.in_ring(a) && View::distinct_pair(&carbonyl, &other)
            }
            // [S;D2](-;!@[#0,#6])
            Environment::L11 => {
                v.aliphatic(a, &["S"])
                    && v.degree(a) == 2
                    && !v.matching(a, single_acyclic, carbon_any).is_empty()
            }
            // [S;D4]([#6,#0])(=O)(=O)
            Environment::L12 => {
                let oxo = v.matching(a, |o, _| o == BondOrder::Double, |b| v.aliphatic(b, &["O"]));
                v.aliphatic(a, &["S"])
                    && v.degree(a) == 4
                    && oxo.len() >= 2
                    && !v.matching(a, single_or_aromatic, carbon_any).is_empty()
            }
            // [C;$(C(-;@[C,N,O,S])-;@[N,O,S])]
            Environment::L13 => {
                let first = v.matching(a, single_ring, |b| v.aliphatic(b, &["C", "N", "O", "S"]));
                let second = v.matching(a, single_ring, |b| v.aliphatic(b, &["N", "O", "S"]));
                v.aliphatic(a, &["C"]) && View::distinct_pair(&first, &second)
            }
            // [c;$(c(:[c,n,o,s]):[n,o,s])]
            Environment::L14 => {
                let first = v.matching(a, aromatic_bond, |b| v.aromatic(b, &["C", "N", "O", "S"]));
                let second = v.matching(a, aromatic_bond, |b| v.aromatic(b, &["N", "O", "S"]));
                v.aromatic(a, &["C"]) && View::distinct_pair(&first, &second)
            }
            // [C;$(C(-;@C)-;@C)]
            Environment::L15 => {
                let ring_c = v.matching(a, single_ring, |b| v.aliphatic(b, &["C"]));
                v.aliphatic(a, &["C"]) && View::distinct_pair(&ring_c, &ring_c)
            }
            // [c;$(c(:c):c)]
            Environment::L16 => {
                let ring_c = v.matching(a, aromatic_bond, |b| v.aromatic(b, &["C"]));
                v.aromatic(a, &["C"]) && View::distinct_pair(&ring_c, &ring_c)
            }
        }
    }
}

/// The first rule matching bond `e`, if the bond is cleavable at all.
pub fn matching_rule(graph: &MolecularGraph, e: usize) -> Option<&'static CleavageRule> {
    let bond = &graph.bonds[e];
    if bond.order != BondOrder::Single || bond.in_ring {
        return None;
    }
    CLEAVAGE_RULES.iter().find(|rule| {
        (rule.left_env.matches(graph, bond.a) && rule.right_env.matches(graph, bond.b))
            || (rule.left_env.matches(graph, bond.b) && rule.right_env.matches(graph, bond.a))
    })
}
