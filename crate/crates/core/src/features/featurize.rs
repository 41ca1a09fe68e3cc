use crate::chem::{BondOrder, Chirality, MolecularGraph};

/// Elements with a dedicated one-hot slot; everything else shares `Other`.
pub const ELEMENT_VOCAB: [&str; 16] = [
    "C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se", "Na", "K", "Li", "H",
];

const ELEMENT_SLOTS: usize = ELEMENT_VOCAB.len() + 1;
const DEGREE_SLOTS: usize = 6;
const CHARGE_SLOTS: usize = 5;
const H_SLOTS: usize = 5;
const CHIRALITY_SLOTS: usize = 3;

const DEGREE_OFFSET: usize = ELEMENT_SLOTS;
const CHARGE_OFFSET: usize = DEGREE_OFFSET + DEGREE_SLOTS;
const AROMATIC_SLOT: usize = CHARGE_OFFSET + CHARGE_SLOTS;
const H_OFFSET: usize = AROMATIC_SLOT + 1;
const CHIRALITY_OFFSET: usize = H_OFFSET + H_SLOTS;
pub const ATOM_MASK_SLOT: usize = CHIRALITY_OFFSET + CHIRALITY_SLOTS;
pub const ATOM_FEATURE_WIDTH: usize = ATOM_MASK_SLOT + 1;

const BOND_RING_SLOT: usize = 4;
pub const BOND_MASK_SLOT: usize = 5;
pub const BOND_FEATURE_WIDTH: usize = 6;

/// Per-atom and per-bond feature rows for the graph encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedGraph {
    pub atoms: Vec<[f64; ATOM_FEATURE_WIDTH]>,
    pub bonds: Vec<[f64; BOND_FEATURE_WIDTH]>,
}

impl FeaturizedGraph {
    /// Sets the mask flag on the given atoms and every bond touching them.
    pub fn mask_atoms(&mut self, graph: &MolecularGraph, atoms: &[usize]) {
        for &a in atoms {
            let row = &mut self.atoms[a];
            *row = [0.0; ATOM_FEATURE_WIDTH];
            row[ATOM_MASK_SLOT] = 1.0;
            for &e in graph.incident_bonds(a) {
                self.bonds[e][BOND_MASK_SLOT] = 1.0;
            }
        }
    }
}

pub fn featurize(graph: &MolecularGraph) -> FeaturizedGraph {
    let atoms = graph
        .atoms
        .iter()
        .map(|atom| {
            let mut row = [0.0; ATOM_FEATURE_WIDTH];
            let element = ELEMENT_VOCAB
                .iter()
                .position(|&e| e == atom.element)
                .unwrap_or(ELEMENT_VOCAB.len());
            row[element] = 1.0;
            row[DEGREE_OFFSET + atom.degree.min(DEGREE_SLOTS - 1)] = 1.0;
            row[CHARGE_OFFSET + (atom.formal_charge.clamp(-2, 2) + 2) as usize] = 1.0;
            if atom.aromatic {
                row[AROMATIC_SLOT] = 1.0;
            }
            row[H_OFFSET + (atom.total_h() as usize).min(H_SLOTS - 1)] = 1.0;
            let chirality = match atom.chirality {
                Chirality::None => 0,
                Chirality::CounterClockwise => 1,
                Chirality::Clockwise => 2,
            };
            row[CHIRALITY_OFFSET + chirality] = 1.0;
            row
        })
        .collect();
    let bonds = graph
        .bonds
        .iter()
        .map(|bond| {
            let mut row = [0.0; BOND_FEATURE_WIDTH];
            let slot = match bond.order {
                BondOrder::Single => 0,
                BondOrder::Double => 1,
                BondOrder::Triple | BondOrder::Quadruple => 2,
                BondOrder::Aromatic => 3,
            };
            row[slot] = 1.0;
            if bond.in_ring {
                row[BOND_RING_SLOT] = 1.0;
            }
            row
        })
        .collect();
    FeaturizedGraph { atoms, bonds }
}
