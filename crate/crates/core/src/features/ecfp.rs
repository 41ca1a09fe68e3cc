//! ECFP-style circular fingerprints.

use std::collections::HashSet;

use crate::chem::{canonical_order, MolecularGraph};

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_WIDTH: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    pub radius: usize,
}

impl Fingerprint {
    fn empty(width: usize, radius: usize) -> Self {
        Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
        }
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn on_bits(&self) -> Vec<usize> {
        (0..self.width).filter(|&b| self.get(b)).collect()
    }

    /// Bits as 0.0 / 1.0 regression targets.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.width).map(|b| self.get(b) as u8 as f64).collect()
    }

    /// Lowercase hex; byte `j` holds bits `8j..8j+8`, least significant first.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.width / 4);
        for byte in 0..self.width / 8 {
            let value = (self.words[byte / 8] >> ((byte % 8) * 8)) as u8;
            s.push_str(&format!("{value:02x}"));
        }
        s
    }
}

/// 64-bit mixing step (splitmix64 finalizer).
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence.
pub(crate) fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x9e37_79b9_7f4a_7c15, |h, &w| {
        mix(h.rotate_left(5) ^ w.wrapping_add(0x9e37_79b9_7f4a_7c15))
    })
}

/// Per-radius environments in visiting order: `(root atom, bond set)`.
///
/// The bond set of an environment of radius `r > 0` is every bond touching an
/// atom within distance `r - 1` of the root. An environment is kept only if
/// no earlier one (lower radius, or the same radius at an atom earlier in
/// canonical order) covers the same bond set; radius-0 environments are
/// keyed by their root atom.
pub(crate) fn distinct_environments(graph: &MolecularGraph, radius: usize) -> Vec<Vec<usize>> {
    let n = graph.atom_count();
    let rank = canonical_order(graph);
    let mut visit: Vec<usize> = (0..n).collect();
    visit.sort_by_key(|&a| rank[a]);

    let mut kept = vec![(0..n).collect::<Vec<_>>()];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut reached: Vec<Vec<bool>> = (0..n)
        .map(|a| {
            let mut r = vec![false; n];
            r[a] = true;
            r
        })
        .collect();
    for _ in 1..=radius {
        let mut layer = Vec::new();
        for &a in &visit {
            let mut bonds: Vec<usize> = (0..n)
                .filter(|&x| reached[a][x])
                .flat_map(|x| graph.incident_bonds(x).iter().copied())
                .collect();
            bonds.sort_unstable();
            bonds.dedup();
            let key = if bonds.is_empty() { vec![usize::MAX, a] } else { bonds };
            let fresh = if key[0] == usize::MAX {
                false
            } else {
                seen.insert(key)
            };
            if fresh {
                layer.push(a);
            }
        }
        for a in 0..n {
            let frontier: Vec<usize> = (0..n).filter(|&x| reached[a][x]).collect();
            for x in frontier {
                for (y, _) in graph.neighbors(x) {
                    reached[a][y] = true;
                }
            }
        }
        kept.push(layer);
    }
    kept
}

/// Circular fingerprint folded to `width` bits.
///
/// # Panics
/// If `width` is not a power of two of at least 64.
pub fn morgan_fingerprint(graph: &MolecularGraph, radius: usize, width: usize) -> Fingerprint {
    assert!(
        width >= 64 && width.is_power_of_two(),
        "fingerprint width must be a power of two >= 64"
    );
    let mut fp = Fingerprint::empty(width, radius);
    let mut ids: Vec<u64> = graph
        .atoms
        .iter()
        .map(|a| {
            hash_words(&[
                a.atomic_number() as u64,
                a.degree as u64,
                a.formal_charge as i64 as u64,
                a.total_h() as u64,
                a.aromatic as u64,
            ])
        })
        .collect();
    let layers = distinct_environments(graph, radius);
    for &a in &layers[0] {
        fp.set((ids[a] % width as u64) as usize);
    }
    for (r, layer) in layers.iter().enumerate().skip(1) {
        ids = (0..graph.atom_count())
            .map(|a| {
                let mut env: Vec<(u64, u64)> = graph
                    .neighbors(a)
                    .map(|(b, e)| (graph.bonds[e].order.code() as u64, ids[b]))
                    .collect();
                env.sort_unstable();
                let mut words = vec![r as u64, ids[a]];
                words.extend(env.into_iter().flat_map(|(c, id)| [c, id]));
                hash_words(&words)
            })
            .collect();
        for &a in layer {
            fp.set((ids[a] % width as u64) as usize);
        }
    }
    fp
}
