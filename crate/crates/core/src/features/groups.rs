//! A fixed catalog of functional groups, each a structural predicate.

use crate::chem::{BondOrder, MolecularGraph};

pub const GROUP_COUNT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionalGroup {
    /// Aliphatic O–H on a non-aromatic carbon that carries no C=O.
    Hydroxyl,
    /// O–H on an aromatic carbon.
    Phenol,
    /// C(=O) bearing an O–H or O⁻.
    CarboxylicAcid,
    /// C(=O)–O–C.
    Ester,
    /// C(=O)–N.
    Amide,
    /// C(=O) with a hydrogen and no heteroatom besides the carbonyl O.
    Aldehyde,
    /// C(=O) with exactly two carbon neighbors.
    Ketone,
    /// Aliphatic C–O–C where neither carbon is a carbonyl.
    Ether,
    /// Amine nitrogen (aliphatic, single bonds only, no carbonyl, sulfonyl or
    /// nitrogen-oxygen neighbor) with one, two or three carbon neighbors.
    PrimaryAmine,
    SecondaryAmine,
    TertiaryAmine,
    /// N bonded to two oxygens with at least one N=O.
    Nitro,
    /// C#N with a terminal nitrogen.
    Nitrile,
    /// Aliphatic S–H on carbon.
    Thiol,
    /// Aliphatic C–S–C with single bonds.
    Thioether,
    /// S(=O)(=O)–N.
    Sulfonamide,
    /// S(=O)(=O) with two carbon neighbors.
    Sulfone,
    /// Halogen bonded to carbon.
    Fluoro,
    Chloro,
    Bromo,
    Iodo,
    /// Any aromatic atom.
    AromaticRing,
    /// Any ring bond that is not aromatic.
    NonAromaticRing,
    /// C=C between aliphatic carbons.
    Alkene,
}

impl FunctionalGroup {
    pub const ALL: [FunctionalGroup; GROUP_COUNT] = [
        Self::Hydroxyl,
        Self::Phenol,
        Self::CarboxylicAcid,
        Self::Ester,
        Self::Amide,
        Self::Aldehyde,
        Self::Ketone,
        Self::Ether,
        Self::PrimaryAmine,
        Self::SecondaryAmine,
        Self::TertiaryAmine,
        Self::Nitro,
        Self::Nitrile,
        Self::Thiol,
        Self::Thioether,
        Self::Sulfonamide,
        Self::Sulfone,
        Self::Fluoro,
        Self::Chloro,
        Self::Bromo,
        Self::Iodo,
        Self::AromaticRing,
        Self::NonAromaticRing,
        Self::Alkene,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hydroxyl => "hydroxyl",
            Self::Phenol => "phenol",
            Self::CarboxylicAcid => "carboxylic_acid",
            Self::Ester => "ester",
            Self::Amide => "amide",
            Self::Aldehyde => "aldehyde",
            Self::Ketone => "ketone",
            Self::Ether => "ether",
            Self::PrimaryAmine => "primary_amine",
            Self::SecondaryAmine => "secondary_amine",
            Self::TertiaryAmine => "tertiary_amine",
            Self::Nitro => "nitro",
            Self::Nitrile => "nitrile",
            Self::Thiol => "thiol",
            Self::Thioether => "thioether",
            Self::Sulfonamide => "sulfonamide",
            Self::Sulfone => "sulfone",
            Self::Fluoro => "fluoro",
            Self::Chloro => "chloro",
            Self::Bromo => "bromo",
            Self::Iodo => "iodo",
            Self::AromaticRing => "aromatic_ring",
            Self::NonAromaticRing => "non_aromatic_ring",
            Self::Alkene => "alkene",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&g| g == self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FunctionalGroupVector(pub [bool; GROUP_COUNT]);

impl FunctionalGroupVector {
    pub fn has(&self, group: FunctionalGroup) -> bool {
        self.0[group.index()]
    }

    pub fn present(&self) -> Vec<FunctionalGroup> {
        FunctionalGroup::ALL
            .into_iter()
            .filter(|&g| self.has(g))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as u8 as f64).collect()
    }
}

struct Matcher<'a>(&'a MolecularGraph);

impl Matcher<'_> {
    fn is(&self, a: usize, element: &str) -> bool {
        self.0.atoms[a].element == element
    }

    fn aliphatic(&self, a: usize, element: &str) -> bool {
        self.is(a, element) && !self.0.atoms[a].aromatic
    }

    fn nbrs(&self, a: usize, order: BondOrder) -> Vec<usize> {
        self.0
            .neighbors(a)
            .filter(|&(_, e)| self.0.bonds[e].order == order)
            .map(|(b, _)| b)
            .collect()
    }

    fn all_single(&self, a: usize) -> bool {
        self.0
            .incident_bonds(a)
            .iter()
            .all(|&e| self.0.bonds[e].order == BondOrder::Single)
    }

    fn double_o_count(&self, a: usize) -> usize {
        self.nbrs(a, BondOrder::Double)
            .into_iter()
            .filter(|&b| self.is(b, "O"))
            .count()
    }

    fn is_carbonyl(&self, a: usize) -> bool {
        self.aliphatic(a, "C") && self.double_o_count(a) >= 1
    }

    fn is_sulfonyl(&self, a: usize) -> bool {
        self.is(a, "S") && self.double_o_count(a) >= 2
    }

    /// Aliphatic O with a hydrogen or negative charge and a single neighbor.
    fn is_oh_or_oxide(&self, a: usize) -> bool {
        let atom = &self.0.atoms[a];
        self.aliphatic(a, "O")
            && atom.degree == 1
            && self.all_single(a)
            && (atom.total_h() >= 1 || atom.formal_charge < 0)
    }

    fn amine_carbons(&self, n: usize) -> Option<usize> {
        let atom = &self.0.atoms[n];
        if !self.aliphatic(n, "N") || !self.all_single(n) || atom.formal_charge != 0 {
            return None;
        }
        let mut carbons = 0;
        for (b, _) in self.0.neighbors(n) {
            if !self.is(b, "C") || self.is_carbonyl(b) {
                return None;
            }
            let thio_carbonyl = self
                .nbrs(b, BondOrder::Double)
                .into_iter()
                .any(|x| self.is(x, "S") || self.is(x, "N"));
            if thio_carbonyl {
                return None;
            }
            carbons += 1;
        }
        (carbons >= 1).then_some(carbons)
    }

    fn matches(&self, group: FunctionalGroup) -> bool {
        let g = self.0;
        let atoms = 0..g.atom_count();
        use FunctionalGroup::*;
        match group {
            Hydroxyl => atoms.into_iter().any(|o| {
                self.is_oh_or_oxide(o) && g.atoms[o].total_h() >= 1 && {
                    let c = g.neighbors(o).next().unwrap().0;
                    self.aliphatic(c, "C") && !self.is_carbonyl(c)
                }
            }),
            Phenol => atoms.into_iter().any(|o| {
                self.is_oh_or_oxide(o) && g.atoms[o].total_h() >= 1 && {
                    let c = g.neighbors(o).next().unwrap().0;
                    self.is(c, "C") && g.atoms[c].aromatic
                }
            }),
            CarboxylicAcid => atoms.into_iter().any(|c| {
                self.is_carbonyl(c)
                    && self
                        .nbrs(c, BondOrder::Single)
                        .into_iter()
                        .any(|o| self.is_oh_or_oxide(o))
            }),
            Ester => atoms.into_iter().any(|c| {
                self.is_carbonyl(c)
                    && self.nbrs(c, BondOrder::Single).into_iter().any(|o| {
                        self.aliphatic(o, "O")
                            && g.atoms[o].degree == 2
                            && self.all_single(o)
                            && g.neighbors(o).any(|(x, _)| x != c && self.is(x, "C"))
                    })
            }),
            Amide => atoms.into_iter().any(|c| {
                self.is_carbonyl(c)
                    && self
                        .nbrs(c, BondOrder::Single)
                        .into_iter()
                        .any(|n| self.is(n, "N"))
            }),
            Aldehyde => atoms.into_iter().any(|c| {
                self.is_carbonyl(c)
                    && g.atoms[c].total_h() >= 1
                    && self
                        .nbrs(c, BondOrder::Single)
                        .into_iter()
                        .all(|x| self.is(x, "C"))
            }),
            Ketone => atoms.into_iter().any(|c| {
                self.is_carbonyl(c) && g.atoms[c].degree == 3 && {
                    let singles = self.nbrs(c, BondOrder::Single);
                    singles.len() == 2 && singles.iter().all(|&x| self.is(x, "C"))
                }
            }),
            Ether => atoms.into_iter().any(|o| {
                self.aliphatic(o, "O")
                    && g.atoms[o].degree == 2
                    && self.all_single(o)
                    && g.neighbors(o)
                        .all(|(c, _)| self.is(c, "C") && !self.is_carbonyl(c))
            }),
            PrimaryAmine | SecondaryAmine | TertiaryAmine => {
                let want = match group {
                    PrimaryAmine => 1,
                    SecondaryAmine => 2,
                    _ => 3,
                };
                atoms.into_iter().any(|n| self.amine_carbons(n) == Some(want))
            }
            Nitro => atoms.into_iter().any(|n| {
                self.is(n, "N")
                    && !g.atoms[n].aromatic
                    && self.double_o_count(n) >= 1
                    && g.neighbors(n).filter(|&(o, _)| self.is(o, "O")).count() == 2
            }),
            Nitrile => atoms.into_iter().any(|c| {
                self.is(c, "C")
                    && self
                        .nbrs(c, BondOrder::Triple)
                        .into_iter()
                        .any(|n| self.is(n, "N") && g.atoms[n].degree == 1)
            }),
            Thiol => atoms.into_iter().any(|s| {
                self.aliphatic(s, "S")
                    && g.atoms[s].total_h() >= 1
                    && self.all_single(s)
                    && g.neighbors(s).any(|(c, _)| self.is(c, "C"))
            }),
            Thioether => atoms.into_iter().any(|s| {
                self.aliphatic(s, "S")
                    && g.atoms[s].degree == 2
                    && self.all_single(s)
                    && g.neighbors(s).all(|(c, _)| self.is(c, "C"))
            }),
            Sulfonamide => atoms.into_iter().any(|s| {
                self.is_sulfonyl(s)
                    && self
                        .nbrs(s, BondOrder::Single)
                        .into_iter()
                        .any(|n| self.is(n, "N"))
            }),
            Sulfone => atoms.into_iter().any(|s| {
                self.is_sulfonyl(s) && {
                    let singles = self.nbrs(s, BondOrder::Single);
                    singles.len() == 2 && singles.iter().all(|&x| self.is(x, "C"))
                }
            }),
            Fluoro | Chloro | Bromo | Iodo => {
                let element = match group {
                    Fluoro => "F",
                    Chloro => "Cl",
                    Bromo => "Br",
                    _ => "I",
                };
                atoms
                    .into_iter()
                    .any(|x| self.is(x, element) && g.neighbors(x).any(|(c, _)| self.is(c, "C")))
            }
            AromaticRing => g.atoms.iter().any(|a| a.aromatic),
            NonAromaticRing => g
                .bonds
                .iter()
                .any(|b| b.in_ring && b.order != BondOrder::Aromatic),
            Alkene => g.bonds.iter().any(|b| {
                b.order == BondOrder::Double && self.aliphatic(b.a, "C") && self.aliphatic(b.b, "C")
            }),
        }
    }
}

pub fn detect_functional_groups(graph: &MolecularGraph) -> FunctionalGroupVector {
    let m = Matcher(graph);
    FunctionalGroupVector(FunctionalGroup::ALL.map(|g| m.matches(g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use FunctionalGroup::*;

    fn groups(s: &str) -> Vec<FunctionalGroup> {
        detect_functional_groups(&parse_smiles(s).unwrap().0).present()
    }

    #[test]
    fn ethanol_is_hydroxyl_only() {
        assert_eq!(groups("CCO"), [Hydroxyl]);
    }

    #[test]
    fn acetic_acid() {
        assert_eq!(groups("CC(=O)O"), [CarboxylicAcid]);
    }

    #[test]
    fn methane_has_nothing() {
        assert!(groups("C").is_empty());
    }

    #[test]
    fn names_round_trip() {
        for g in FunctionalGroup::ALL {
            assert_eq!(FunctionalGroup::from_name(g.name()), Some(g));
        }
        assert_eq!(FunctionalGroup::Alkene.index(), GROUP_COUNT - 1);
    }

    #[test]
    fn amine_classes() {
        assert_eq!(groups("CN"), [PrimaryAmine]);
        assert_eq!(groups("CNC"), [SecondaryAmine]);
        assert_eq!(groups("CN(C)C"), [TertiaryAmine]);
        assert_eq!(groups("CC(=O)N"), [Amide]);
    }
}
