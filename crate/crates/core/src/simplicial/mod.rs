//! Abstract simplicial complexes over integer vertex ids.
//!
//! A [`SimplicialComplex`] is kept face-closed at all times: inserting a
//! simplex inserts every non-empty face, removing one removes every coface.
//! Homology is computed over GF(2) in [`homology`].

mod gf2;
pub mod homology;
pub mod text;

use std::collections::BTreeSet;
use std::fmt;

pub use gf2::Gf2Matrix;
pub use homology::{betti_numbers, boundary_matrix, euler_characteristic, BettiVector, BoundaryMatrix};

use thiserror::Error;

/// Simplices wider than this are refused by [`SimplicialComplex::insert`];
/// closing one inserts `2^n - 1` faces.
pub const MAX_CLOSURE_VERTICES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimplexError {
    #[error("a simplex needs at least one vertex")]
    Empty,
    #[error("vertex {vertex} appears more than once")]
    Duplicate { vertex: VertexId },
    #[error("vertices are not strictly ascending at position {position}")]
    NotAscending { position: usize },
    #[error("simplex with {vertices} vertices exceeds the closure limit of {MAX_CLOSURE_VERTICES}")]
    TooLarge { vertices: usize },
    #[error("boundary dimension {k} out of range 1..={max}")]
    DimensionOutOfRange { k: usize, max: isize },
}

/// A set of vertices stored as a strictly ascending list.
///
/// Ordering is by dimension first, then lexicographic on the vertex list, so a
/// `BTreeSet<Simplex>` iterates dimension by dimension in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Simplex {
    vertices: Vec<VertexId>,
}

impl Simplex {
    /// Builds a simplex from an already ascending vertex list.
    pub fn new(vertices: Vec<VertexId>) -> Result<Self, SimplexError> {
        if vertices.is_empty() {
            return Err(SimplexError::Empty);
        }
        for (i, w) in vertices.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(SimplexError::Duplicate { vertex: w[0] });
            }
            if w[0] > w[1] {
                return Err(SimplexError::NotAscending { position: i + 1 });
            }
        }
        Ok(Self { vertices })
    }

    /// Sorts the given vertices; duplicates are still rejected.
    pub fn from_unsorted<I: IntoIterator<Item = VertexId>>(vertices: I) -> Result<Self, SimplexError> {
        let mut v: Vec<VertexId> = vertices.into_iter().collect();
        v.sort_unstable();
        Self::new(v)
    }

    pub fn from_ids(ids: &[u32]) -> Result<Self, SimplexError> {
        Self::new(ids.iter().copied().map(VertexId).collect())
    }

    pub fn vertex(v: u32) -> Self {
        Self { vertices: vec![VertexId(v)] }
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn dimension(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// True if every vertex of `self` is a vertex of `other`.
    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.len() <= other.len() && self.vertices.iter().all(|v| other.contains(*v))
    }

    /// The codimension-1 faces, in the order obtained by dropping vertex 0, 1, ...
    pub fn boundary_faces(&self) -> Vec<Simplex> {
        if self.vertices.len() == 1 {
            return Vec::new();
        }
        (0..self.vertices.len())
            .map(|skip| Simplex {
                vertices: self
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect(),
            })
            .collect()
    }

    /// Every non-empty subset, including `self`.
    pub fn all_faces(&self) -> Vec<Simplex> {
        let n = self.vertices.len();
        (1u64..(1u64 << n))
            .map(|mask| Simplex {
                vertices: (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| self.vertices[i])
                    .collect(),
            })
            .collect()
    }

    /// Applies a vertex relabeling; the map must be injective on this simplex.
    pub fn relabel(&self, f: impl Fn(VertexId) -> VertexId) -> Result<Simplex, SimplexError> {
        Simplex::from_unsorted(self.vertices.iter().map(|v| f(*v)))
    }
}

impl Ord for Simplex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.vertices
            .len()
            .cmp(&other.vertices.len())
            .then_with(|| self.vertices.cmp(&other.vertices))
    }
}

impl PartialOrd for Simplex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// What happens to the faces of a removed simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FacePolicy {
    /// Keep every proper face.
    #[default]
    Retain,
    /// Also drop faces that no remaining simplex contains.
    Prune,
}

/// Result of [`SimplicialComplex::remove`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[must_use]
pub enum Removal {
    Removed(Vec<Simplex>),
    NotMember,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimplicialComplex {
    simplices: BTreeSet<Simplex>,
}

impl SimplicialComplex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps an arbitrary set without closing it. Use [`is_valid`](Self::is_valid)
    /// to check face-closure.
    pub fn from_raw<I: IntoIterator<Item = Simplex>>(simplices: I) -> Self {
        Self { simplices: simplices.into_iter().collect() }
    }

    /// Closure of the given generators.
    pub fn from_generators<'a, I>(generators: I) -> Result<Self, SimplexError>
    where
        I: IntoIterator<Item = &'a Simplex>,
    {
        let mut c = Self::new();
        for s in generators {
            c.insert(s)?;
        }
        Ok(c)
    }

    /// Inserts `s` and all of its faces. Idempotent.
    pub fn insert(&mut self, s: &Simplex) -> Result<(), SimplexError> {
        if self.simplices.contains(s) {
            return Ok(());
        }
        if s.len() > MAX_CLOSURE_VERTICES {
            return Err(SimplexError::TooLarge { vertices: s.len() });
        }
        // Walk downward so that already-present faces cut the recursion short.
        let mut stack = vec![s.clone()];
        while let Some(t) = stack.pop() {
            if self.simplices.contains(&t) {
                continue;
            }
            stack.extend(t.boundary_faces());
            self.simplices.insert(t);
        }
        Ok(())
    }

    /// Removes `s` together with every simplex that contains it.
    pub fn remove(&mut self, s: &Simplex, policy: FacePolicy) -> Removal {
        if !self.simplices.contains(s) {
            log::info!("remove: simplex [{s}] is not a member; complex unchanged");
            return Removal::NotMember;
        }
        let cofaces: Vec<Simplex> = self
            .simplices
            .iter()
            .filter(|t| s.is_face_of(t))
            .cloned()
            .collect();
        for t in &cofaces {
            self.simplices.remove(t);
        }
        let mut removed = cofaces;
        if policy == FacePolicy::Prune {
            // Largest first, so a face is only dropped once nothing above it remains.
            let mut faces = s.all_faces();
            faces.sort_by(|a, b| b.cmp(a));
            for f in faces {
                if !self.simplices.contains(&f) {
                    continue;
                }
                let covered = self.simplices.iter().any(|t| t.len() > f.len() && f.is_face_of(t));
                if !covered {
                    self.simplices.remove(&f);
                    removed.push(f);
                }
            }
        }
        removed.sort();
        Removal::Removed(removed)
    }

    /// Keeps only the simplices for which `keep` returns true. The caller is
    /// responsible for keeping the result face-closed.
    pub(crate) fn retain(&mut self, keep: impl FnMut(&Simplex) -> bool) {
        self.simplices.retain(keep);
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.simplices.contains(s)
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Highest simplex dimension, or −1 for the empty complex.
    pub fn dimension(&self) -> isize {
        self.simplices.iter().next_back().map_or(-1, |s| s.dimension() as isize)
    }

    /// Members in canonical order (dimension, then lexicographic).
    pub fn iter(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter()
    }

    /// The `k`-simplices in canonical order.
    pub fn simplices_of_dim(&self, k: usize) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter().filter(move |s| s.dimension() == k)
    }

    pub fn count_of_dim(&self, k: usize) -> usize {
        self.simplices_of_dim(k).count()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.simplices_of_dim(0).map(|s| s.vertices()[0])
    }

    /// Members of dimension at most `k`.
    pub fn skeleton(&self, k: usize) -> SimplicialComplex {
        Self { simplices: self.simplices.iter().filter(|s| s.dimension() <= k).cloned().collect() }
    }

    /// Face-closure check: every codimension-1 face of every member is a
    /// member (which implies the same for all faces).
    pub fn is_valid(&self) -> bool {
        self.simplices
            .iter()
            .all(|s| s.boundary_faces().iter().all(|f| self.simplices.contains(f)))
    }

    /// Inclusion-maximal members.
    pub fn facets(&self) -> Vec<Simplex> {
        self.simplices
            .iter()
            .filter(|s| !self.simplices.iter().any(|t| t.len() > s.len() && s.is_face_of(t)))
            .cloned()
            .collect()
    }

    pub fn betti_numbers(&self) -> BettiVector {
        betti_numbers(self)
    }

    pub fn euler_characteristic(&self) -> i64 {
        euler_characteristic(self)
    }
}

/// Free-function form of [`SimplicialComplex::is_valid`].
pub fn is_valid_complex(complex: &SimplicialComplex) -> bool {
    complex.is_valid()
}
