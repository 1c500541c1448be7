use smallvec::SmallVec;

pub type PredId = u32;
pub type ObjId = u32;

/// A ground atom; ids are relative to the owning [`ProblemInstance`](super::ProblemInstance).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: PredId,
    pub args: SmallVec<[ObjId; 2]>,
}

impl Atom {
    pub fn new(pred: PredId, args: impl IntoIterator<Item = ObjId>) -> Self {
        Atom {
            pred,
            args: args.into_iter().collect(),
        }
    }
}

/// A set of ground atoms, kept sorted so equality and hashing are set semantics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GroundState {
    atoms: Vec<Atom>,
}

impl GroundState {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let mut atoms: Vec<Atom> = atoms.into_iter().collect();
        atoms.sort_unstable();
        atoms.dedup();
        GroundState { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.binary_search(atom).is_ok()
    }

    /// All atoms of one predicate, as a contiguous sorted slice.
    pub fn with_pred(&self, pred: PredId) -> &[Atom] {
        let lo = self.atoms.partition_point(|a| a.pred < pred);
        let hi = self.atoms.partition_point(|a| a.pred <= pred);
        &self.atoms[lo..hi]
    }

    pub fn is_superset_of(&self, atoms: &[Atom]) -> bool {
        atoms.iter().all(|a| self.contains(a))
    }

    /// `(self \ del) ∪ add`.
    pub fn apply(&self, add: &[Atom], del: &[Atom]) -> GroundState {
        if add.is_empty() && del.is_empty() {
            return self.clone();
        }
        let mut atoms: Vec<Atom> = self
            .atoms
            .iter()
            .filter(|a| !del.contains(a))
            .cloned()
            .collect();
        atoms.extend(add.iter().cloned());
        GroundState::new(atoms)
    }
}
