//! Morgan-style iterative partition refinement.

use super::graph::MolecularGraph;

/// Dense ranks of `keys`: equal keys share a rank, ranks follow key order.
pub(crate) fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

fn class_count(classes: &[u32]) -> usize {
    let mut seen: Vec<u32> = classes.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Refines `classes` by neighbor class multisets until the partition is stable.
///
/// `neighbors(i)` yields `(bond code, neighbor)` pairs.
pub(crate) fn refine<F>(mut classes: Vec<u32>, neighbors: F) -> Vec<u32>
where
    F: Fn(usize) -> Vec<(u8, usize)>,
{
    let mut count = class_count(&classes);
    loop {
        let keys: Vec<(u32, Vec<(u8, u32)>)> = (0..classes.len())
            .map(|i| {
                let mut env: Vec<(u8, u32)> = neighbors(i)
                    .into_iter()
                    .map(|(code, j)| (code, classes[j]))
                    .collect();
                env.sort_unstable();
                (classes[i], env)
            })
            .collect();
        let next = dense_rank(&keys);
        let next_count = class_count(&next);
        if next_count == count {
            return next;
        }
        classes = next;
        count = next_count;
    }
}

fn graph_neighbors(graph: &MolecularGraph) -> impl Fn(usize) -> Vec<(u8, usize)> + '_ {
    move |i| {
        graph
            .neighbors(i)
            .map(|(j, e)| (graph.bonds[e].order.code(), j))
            .collect()
    }
}

/// Initial atom invariant: element, aromaticity, degree, charge, hydrogens.
fn atom_invariants(graph: &MolecularGraph) -> Vec<u32> {
    let keys: Vec<(u8, bool, usize, i8, u8)> = graph
        .atoms
        .iter()
        .map(|a| {
            (
                a.atomic_number(),
                a.aromatic,
                a.degree,
                a.formal_charge,
                a.total_h(),
            )
        })
        .collect();
    dense_rank(&keys)
}

/// Symmetry classes of atoms; invariant under atom renumbering.
///
/// Symmetry-equivalent atoms share a rank.
pub fn canonical_ranks(graph: &MolecularGraph) -> Vec<u32> {
    refine(atom_invariants(graph), graph_neighbors(graph))
}

/// A total order of atoms (distinct ranks `0..m`) obtained by breaking
/// remaining ties and refining again.
///
/// Ties are broken at the lowest atom index of the smallest tied class, so
/// the order is canonical whenever tied atoms are graph automorphs.
pub fn canonical_order(graph: &MolecularGraph) -> Vec<u32> {
    let neighbors = graph_neighbors(graph);
    let mut classes = refine(atom_invariants(graph), &neighbors);
    let n = classes.len();
    while class_count(&classes) < n {
        let mut sizes = vec![0usize; n];
        for &c in &classes {
            sizes[c as usize] += 1;
        }
        let tied = (0..n as u32)
            .find(|&c| sizes[c as usize] > 1)
            .expect("some class is tied");
        let chosen = classes.iter().position(|&c| c == tied).unwrap();
        let split: Vec<u32> = classes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if c == tied && i != chosen {
                    2 * c + 1
                } else {
                    2 * c
                }
            })
            .collect();
        classes = refine(dense_rank(&split), &neighbors);
    }
    classes
}
