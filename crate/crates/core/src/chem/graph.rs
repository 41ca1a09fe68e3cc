use serde::{Deserialize, Serialize};

use super::{element, ChemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chirality {
    None,
    /// `@@`
    Clockwise,
    /// `@`
    CounterClockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Quadruple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as one.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Quadruple => 4,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Quadruple => 4,
            BondOrder::Aromatic => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondStereo {
    None,
    /// `/`
    Up,
    /// `\`
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogen count written inside brackets; `Some` exactly for bracket atoms.
    pub explicit_h: Option<u8>,
    pub implicit_h: u8,
    pub degree: usize,
    pub chirality: Chirality,
    pub in_ring: bool,
    pub source_token: usize,
}

impl Atom {
    pub fn organic(element: &str, aromatic: bool, source_token: usize) -> Self {
        Atom {
            element: element.to_string(),
            aromatic,
            formal_charge: 0,
            explicit_h: None,
            implicit_h: 0,
            degree: 0,
            chirality: Chirality::None,
            in_ring: false,
            source_token,
        }
    }

    pub fn total_h(&self) -> u8 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }

    pub fn atomic_number(&self) -> u8 {
        element::atomic_number(&self.element).unwrap_or(0)
    }

    pub fn is(&self, symbol: &str) -> bool {
        self.element == symbol
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub in_ring: bool,
    pub stereo: BondStereo,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond {
            a,
            b,
            order,
            in_ring: false,
            stereo: BondStereo::None,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Atoms and bonds with per-atom incident-bond lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    adjacency: Vec<Vec<usize>>,
}

impl MolecularGraph {
    /// Builds a graph, checking bond sanity and deriving degrees and ring flags.
    ///
    /// Implicit hydrogens are left as supplied; see [`MolecularGraph::assign_implicit_h`].
    pub fn new(mut atoms: Vec<Atom>, mut bonds: Vec<Bond>) -> Result<Self, ChemError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (id, bond) in bonds.iter().enumerate() {
            let (a, b) = (bond.a, bond.b);
            if a == b || a >= atoms.len() || b >= atoms.len() {
                return Err(ChemError::DuplicateBond(a, b));
            }
            if adjacency[a].iter().any(|&e: &usize| bonds[e].other(a) == b) {
                return Err(ChemError::DuplicateBond(a.min(b), a.max(b)));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[a].aromatic && atoms[b].aromatic) {
                return Err(ChemError::InvalidAromaticBond(a, b));
            }
            adjacency[a].push(id);
            adjacency[b].push(id);
        }
        for (atom, adj) in atoms.iter_mut().zip(&adjacency) {
            atom.degree = adj.len();
        }
        let ring = ring_bonds(atoms.len(), &bonds, &adjacency);
        for (bond, r) in bonds.iter_mut().zip(&ring) {
            bond.in_ring = *r;
        }
        for (i, atom) in atoms.iter_mut().enumerate() {
            atom.in_ring = adjacency[i].iter().any(|&e| ring[e]);
        }
        Ok(MolecularGraph {
            atoms,
            bonds,
            adjacency,
        })
    }

    /// Fills `implicit_h` for every non-bracket atom from the valence table.
    pub fn assign_implicit_h(&mut self) -> Result<(), ChemError> {
        for i in 0..self.atoms.len() {
            if self.atoms[i].is_bracket() {
                self.atoms[i].implicit_h = 0;
                continue;
            }
            let sum: u8 = self.adjacency[i]
                .iter()
                .map(|&e| self.bonds[e].order.valence())
                .sum();
            let atom = &self.atoms[i];
            let h = implicit_hydrogens(&atom.element, atom.aromatic, sum).ok_or_else(|| {
                ChemError::ValenceOverflow {
                    atom: i,
                    element: atom.element.clone(),
                }
            })?;
            self.atoms[i].implicit_h = h;
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn incident_bonds(&self, atom: usize) -> &[usize] {
        &self.adjacency[atom]
    }

    /// `(neighbor atom, bond id)` pairs.
    pub fn neighbors(&self, atom: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency[atom]
            .iter()
            .map(move |&e| (self.bonds[e].other(atom), e))
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .copied()
            .find(|&e| self.bonds[e].other(a) == b)
    }

    pub fn bond_order_sum(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|&e| self.bonds[e].order.valence())
            .sum()
    }

    /// Induced subgraph on `keep`, with implicit hydrogens recomputed.
    ///
    /// Returns the subgraph and the old index of each kept atom.
    pub fn induced_subgraph(&self, keep: &[bool]) -> (MolecularGraph, Vec<usize>) {
        let kept: Vec<usize> = (0..self.atoms.len()).filter(|&i| keep[i]).collect();
        let mut new_index = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in kept.iter().enumerate() {
            new_index[old] = new;
        }
        let atoms = kept.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| keep[b.a] && keep[b.b])
            .map(|b| Bond {
                a: new_index[b.a],
                b: new_index[b.b],
                order: b.order,
                in_ring: false,
                stereo: b.stereo,
            })
            .collect();
        let mut graph = MolecularGraph::new(atoms, bonds)
            .expect("subgraph of a valid graph is valid");
        graph
            .assign_implicit_h()
            .expect("removing bonds cannot overflow a valence");
        (graph, kept)
    }

    /// Connected component id per atom, numbered by smallest member index.
    pub fn components(&self, skip_bond: impl Fn(usize) -> bool) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.atoms.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.atoms.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(a) = stack.pop() {
                for (b, e) in self.neighbors(a) {
                    if !skip_bond(e) && label[b] == usize::MAX {
                        label[b] = count;
                        stack.push(b);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }
}

/// Implicit hydrogen count for an unbracketed atom, `None` on overflow.
///
/// Aromatic atoms spend one valence unit on the delocalized system and never
/// receive a negative count (furan `o`, thiophene `s`).
pub fn implicit_hydrogens(symbol: &str, aromatic: bool, bond_sum: u8) -> Option<u8> {
    let vals = element::valences(symbol);
    let max = *vals.last()?;
    if bond_sum > max {
        return None;
    }
    if aromatic {
        return Some(vals[0].saturating_sub(bond_sum + 1));
    }
    vals.iter().find(|&&v| v >= bond_sum).map(|v| v - bond_sum)
}

/// Marks bonds that lie on a cycle (non-bridges).
fn ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<usize>]) -> Vec<bool> {
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, parent bond, next adjacency index)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(frame) = stack.last_mut() {
            let (v, parent_edge, idx) = *frame;
            if idx < adjacency[v].len() {
                frame.2 += 1;
                let e = adjacency[v][idx];
                if e == parent_edge {
                    continue;
                }
                let w = bonds[e].other(v);
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, e, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|b| !b).collect()
}
