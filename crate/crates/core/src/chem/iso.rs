//! Backtracking isomorphism check, used as a test oracle.

use super::canon::{dense_rank, refine};
use super::graph::MolecularGraph;
use super::ChemError;

pub const ISOMORPHISM_ATOM_LIMIT: usize = 64;

/// True iff an element- and bond-order-preserving bijection exists.
///
/// Aromatic and aliphatic forms of an element count as different elements.
pub fn are_isomorphic(g1: &MolecularGraph, g2: &MolecularGraph) -> Result<bool, ChemError> {
    for g in [g1, g2] {
        if g.atom_count() > ISOMORPHISM_ATOM_LIMIT {
            return Err(ChemError::SizeLimitExceeded(
                g.atom_count(),
                ISOMORPHISM_ATOM_LIMIT,
            ));
        }
    }
    let n = g1.atom_count();
    if n != g2.atom_count() || g1.bond_count() != g2.bond_count() {
        return Ok(false);
    }
    if n == 0 {
        return Ok(true);
    }

    // refine both graphs as one disjoint union so classes are comparable
    let graph_of = |i: usize| if i < n { (g1, i) } else { (g2, i - n) };
    let keys: Vec<(u8, bool, usize)> = (0..2 * n)
        .map(|i| {
            let (g, a) = graph_of(i);
            let atom = &g.atoms[a];
            (atom.atomic_number(), atom.aromatic, atom.degree)
        })
        .collect();
    let classes = refine(dense_rank(&keys), |i| {
        let (g, a) = graph_of(i);
        let offset = if i < n { 0 } else { n };
        g.neighbors(a)
            .map(|(j, e)| (g.bonds[e].order.code(), j + offset))
            .collect()
    });
    let (c1, c2) = classes.split_at(n);
    let mut h1: Vec<u32> = c1.to_vec();
    let mut h2: Vec<u32> = c2.to_vec();
    h1.sort_unstable();
    h2.sort_unstable();
    if h1 != h2 {
        return Ok(false);
    }

    // visit g1 atoms in BFS order so each new atom touches mapped ones
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        order.push(start);
        let mut head = order.len() - 1;
        while head < order.len() {
            let a = order[head];
            head += 1;
            for (b, _) in g1.neighbors(a) {
                if !seen[b] {
                    seen[b] = true;
                    order.push(b);
                }
            }
        }
    }

    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    Ok(extend(g1, g2, c1, c2, &order, 0, &mut mapping, &mut used))
}

#[allow(clippy::too_many_arguments)]
fn extend(
    g1: &MolecularGraph,
    g2: &MolecularGraph,
    c1: &[u32],
    c2: &[u32],
    order: &[usize],
    depth: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&u) = order.get(depth) else {
        return true;
    };
    for v in 0..g2.atom_count() {
        if used[v] || c2[v] != c1[u] {
            continue;
        }
        let mut mapped_neighbors = 0;
        let consistent = g1.neighbors(u).all(|(u2, e1)| {
            let v2 = mapping[u2];
            if v2 == usize::MAX {
                return true;
            }
            mapped_neighbors += 1;
            g2.bond_between(v, v2)
                .is_some_and(|e2| g2.bonds[e2].order == g1.bonds[e1].order)
        });
        if !consistent {
            continue;
        }
        let image_neighbors = g2.neighbors(v).filter(|&(v2, _)| used[v2]).count();
        if image_neighbors != mapped_neighbors {
            continue;
        }
        mapping[u] = v;
        used[v] = true;
        if extend(g1, g2, c1, c2, order, depth + 1, mapping, used) {
            return true;
        }
        mapping[u] = usize::MAX;
        used[v] = false;
    }
    false
}
