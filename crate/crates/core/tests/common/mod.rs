#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use smigraph::chem::{Bond, MolecularGraph};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn read_lines(name: &str) -> Vec<String> {
    std::fs::read_to_string(data_path(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn golden_corpus() -> Vec<String> {
    read_lines("golden_500.smi")
}

/// Same molecule with atoms renumbered by `perm` (new index of old atom `i` is `perm[i]`).
pub fn permuted(graph: &MolecularGraph, perm: &[usize]) -> MolecularGraph {
    let mut atoms = vec![None; graph.atom_count()];
    for (old, atom) in graph.atoms.iter().enumerate() {
        atoms[perm[old]] = Some(atom.clone());
    }
    let mut bonds: Vec<Bond> = graph
        .bonds
        .iter()
        .map(|b| Bond {
            a: perm[b.a],
            b: perm[b.b],
            ..b.clone()
        })
        .collect();
    bonds.reverse();
    MolecularGraph::new(atoms.into_iter().map(Option::unwrap).collect(), bonds).unwrap()
}

pub fn tiny_model() -> smigraph::model::ModelConfig {
    smigraph::model::ModelConfig {
        d_model: 16,
        transformer_layers: 1,
        heads: 2,
        ffn_width: 16,
        gnn_layers: 1,
        gnn_width: 8,
        max_positions: 64,
        fingerprint_width: 64,
        ..Default::default()
    }
}
