//! Murcko scaffolds and scaffold-grouped dataset splits.

use std::collections::BTreeMap;

use super::FeatureError;
use crate::chem::{write_smiles, MolecularGraph};

/// Ring systems plus linkers: degree-1 acyclic atoms are pruned until none
/// remain. Acyclic molecules collapse to the empty graph.
pub fn murcko_scaffold(graph: &MolecularGraph) -> MolecularGraph {
    let n = graph.atom_count();
    let mut keep = vec![true; n];
    let mut degree: Vec<usize> = graph.atoms.iter().map(|a| a.degree).collect();
    let mut stack: Vec<usize> = (0..n)
        .filter(|&a| !graph.atoms[a].in_ring && degree[a] <= 1)
        .collect();
    while let Some(a) = stack.pop() {
        if !keep[a] {
            continue;
        }
        keep[a] = false;
        for (b, _) in graph.neighbors(a) {
            if keep[b] {
                degree[b] -= 1;
                if !graph.atoms[b].in_ring && degree[b] <= 1 {
                    stack.push(b);
                }
            }
        }
    }
    graph.induced_subgraph(&keep).0
}

/// Canonical SMILES of the scaffold; empty for acyclic molecules.
pub fn scaffold_key(graph: &MolecularGraph) -> String {
    write_smiles(&murcko_scaffold(graph))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn scaffold_split(
    corpus: &[MolecularGraph],
    fractions: (f64, f64, f64),
) -> Result<SplitIndices, FeatureError> {
    let keys: Vec<String> = corpus.iter().map(scaffold_key).collect();
    scaffold_split_keys(&keys, fractions)
}

/// Groups indices by key, orders groups by descending size then key, and
/// fills train, then valid, then test, each until it reaches its share.
pub fn scaffold_split_keys(
    keys: &[String],
    (train_f, valid_f, test_f): (f64, f64, f64),
) -> Result<SplitIndices, FeatureError> {
    if keys.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let fractions_ok = [train_f, valid_f, test_f].iter().all(|f| *f >= 0.0)
        && (train_f + valid_f + test_f - 1.0).abs() < 1e-6;
    if !fractions_ok {
        return Err(FeatureError::InvalidFractions);
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_str()).or_default().push(i);
    }
    let mut groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));

    let n = keys.len() as f64;
    let (train_target, valid_target) = (train_f * n - 1e-9, valid_f * n - 1e-9);
    let mut split = SplitIndices::default();
    for (_, members) in groups {
        let dest = if (split.train.len() as f64) < train_target {
            &mut split.train
        } else if (split.valid.len() as f64) < valid_target {
            &mut split.valid
        } else {
            &mut split.test
        };
        dest.extend(members);
    }
    for part in [&mut split.train, &mut split.valid, &mut split.test] {
        part.sort_unstable();
    }
    Ok(split)
}
