//! SMILES writer driven by the canonical atom order.

use super::canon::canonical_order;
use super::graph::{Atom, Bond, BondOrder, BondStereo, Chirality, MolecularGraph};

/// Writes a SMILES string that reparses to a graph isomorphic to `graph`.
///
/// Traversal starts at the lowest-ranked atom of each component and visits
/// neighbors in rank order, so isomorphic inputs give the same string.
/// Tetrahedral marks are copied verbatim; their parity is not recomputed for
/// the new neighbor order.
pub fn write_smiles(graph: &MolecularGraph) -> String {
    let n = graph.atom_count();
    if n == 0 {
        return String::new();
    }
    let rank = canonical_order(graph);
    let sorted_neighbors: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|a| {
            let mut nb: Vec<(usize, usize)> = graph.neighbors(a).collect();
            nb.sort_by_key(|&(b, _)| rank[b]);
            nb
        })
        .collect();

    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&a| rank[a]);

    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut ring_bonds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut tree_bond = vec![false; graph.bond_count()];
    let mut roots = Vec::new();
    for &s in &starts {
        if visited[s] {
            continue;
        }
        roots.push(s);
        plan(
            s,
            usize::MAX,
            &sorted_neighbors,
            &mut visited,
            &mut children,
            &mut tree_bond,
        );
    }
    for (e, bond) in graph.bonds.iter().enumerate() {
        if !tree_bond[e] {
            ring_bonds[bond.a].push(e);
            ring_bonds[bond.b].push(e);
        }
    }
    for (atom, list) in ring_bonds.iter_mut().enumerate() {
        list.sort_by_key(|&e| rank[graph.bonds[e].other(atom)]);
    }

    let mut writer = Writer {
        graph,
        children: &children,
        ring_bonds: &ring_bonds,
        emitted: vec![false; n],
        open_digit: vec![None; graph.bond_count()],
        digits_in_use: Vec::new(),
        out: String::new(),
    };
    for (i, &root) in roots.iter().enumerate() {
        if i > 0 {
            writer.out.push('.');
        }
        writer.emit(root, None);
    }
    writer.out
}

fn plan(
    atom: usize,
    parent_bond: usize,
    sorted_neighbors: &[Vec<(usize, usize)>],
    visited: &mut [bool],
    children: &mut [Vec<(usize, usize)>],
    tree_bond: &mut [bool],
) {
    visited[atom] = true;
    for &(next, e) in &sorted_neighbors[atom] {
        if e == parent_bond || visited[next] {
            continue;
        }
        tree_bond[e] = true;
        children[atom].push((next, e));
        plan(next, e, sorted_neighbors, visited, children, tree_bond);
    }
}

struct Writer<'a> {
    graph: &'a MolecularGraph,
    children: &'a [Vec<(usize, usize)>],
    ring_bonds: &'a [Vec<usize>],
    emitted: Vec<bool>,
    open_digit: Vec<Option<u32>>,
    digits_in_use: Vec<u32>,
    out: String,
}

impl Writer<'_> {
    fn emit(&mut self, atom: usize, via: Option<(usize, usize)>) {
        if let Some((from, e)) = via {
            self.out
                .push_str(bond_symbol(self.graph, &self.graph.bonds[e], from));
        }
        self.out.push_str(&atom_symbol(&self.graph.atoms[atom]));
        self.emitted[atom] = true;

        let mut closed = Vec::new();
        for &e in &self.ring_bonds[atom] {
            let bond = &self.graph.bonds[e];
            let other = bond.other(atom);
            if self.emitted[other] && other != atom {
                if let Some(d) = self.open_digit[e].take() {
                    push_digit(&mut self.out, d);
                    closed.push(d);
                    continue;
                }
            }
            if !self.emitted[other] {
                let d = (1..)
                    .find(|d| !self.digits_in_use.contains(d))
                    .expect("free ring digit");
                self.digits_in_use.push(d);
                self.open_digit[e] = Some(d);
                self.out.push_str(bond_symbol(self.graph, bond, atom));
                push_digit(&mut self.out, d);
            }
        }
        self.digits_in_use.retain(|d| !closed.contains(d));

        let kids = &self.children[atom];
        for (i, &(child, e)) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if !last {
                self.out.push('(');
            }
            self.emit(child, Some((atom, e)));
            if !last {
                self.out.push(')');
            }
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from_digit(d, 10).unwrap());
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}

fn bond_symbol(graph: &MolecularGraph, bond: &Bond, from: usize) -> &'static str {
    let both_aromatic = graph.atoms[bond.a].aromatic && graph.atoms[bond.b].aromatic;
    match bond.order {
        BondOrder::Single => {
            let forward = bond.a == from;
            match (bond.stereo, forward) {
                (BondStereo::Up, true) | (BondStereo::Down, false) => "/",
                (BondStereo::Down, true) | (BondStereo::Up, false) => "\\",
                (BondStereo::None, _) if both_aromatic => "-",
                (BondStereo::None, _) => "",
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Quadruple => "$",
        BondOrder::Aromatic => {
            if both_aromatic {
                ""
            } else {
                ":"
            }
        }
    }
}

fn atom_symbol(atom: &Atom) -> String {
    let symbol = if atom.aromatic {
        atom.element.to_ascii_lowercase()
    } else {
        atom.element.clone()
    };
    let Some(h) = atom.explicit_h else {
        return symbol;
    };
    let mut s = String::with_capacity(8);
    s.push('[');
    s.push_str(&symbol);
    match atom.chirality {
        Chirality::None => {}
        Chirality::CounterClockwise => s.push('@'),
        Chirality::Clockwise => s.push_str("@@"),
    }
    match h {
        0 => {}
        1 => s.push('H'),
        k => s.push_str(&format!("H{k}")),
    }
    match atom.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        q if q > 0 => s.push_str(&format!("+{q}")),
        q => s.push_str(&format!("-{}", -q)),
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{are_isomorphic, parse_smiles};

    fn round_trip(s: &str) -> String {
        let g = parse_smiles(s).unwrap().0;
        let out = write_smiles(&g);
        let g2 = parse_smiles(&out).unwrap_or_else(|e| panic!("{s} -> {out}: {e}")).0;
        assert!(are_isomorphic(&g, &g2).unwrap(), "{s} -> {out}");
        out
    }

    #[test]
    fn single_carbon() {
        assert_eq!(round_trip("C"), "C");
    }

    #[test]
    fn round_trips() {
        for s in [
            "CCO",
            "c1ccccc1O",
            "C1CCCCC1",
            "c1ccc2ccccc2c1",
            "C12C3C1C4C2C34",
            "[NH4+].[Cl-]",
            "CC(=O)Oc1ccccc1C(=O)O",
            "F/C=C/F",
            "c1ccccc1-c1ccccc1",
            "C1CC2CCC1CC2",
            "N#Cc1ccc(cc1)[N+](=O)[O-]",
            "C1CCCCCCCCCCCC1",
        ] {
            round_trip(s);
        }
    }

    #[test]
    fn permuted_inputs_write_identically() {
        assert_eq!(round_trip("OCC"), round_trip("CCO"));
        assert_eq!(round_trip("Oc1ccccc1"), round_trip("c1ccccc1O"));
    }
}
