use std::collections::BTreeSet;

use proptest::prelude::*;
use topocbt_core::simplicial::{boundary_matrix, Simplex, SimplicialComplex, VertexId};

/// Generator vertex sets, each non-empty, on vertices below 10.
fn generators() -> impl Strategy<Value = Vec<BTreeSet<u32>>> {
    prop::collection::vec(prop::collection::btree_set(0u32..10, 1..=5), 1..8)
}

/// Face closure computed by brute-force subset enumeration.
fn closure(gens: &[BTreeSet<u32>]) -> BTreeSet<Vec<u32>> {
    let mut out = BTreeSet::new();
    for g in gens {
        let v: Vec<u32> = g.iter().copied().collect();
        for mask in 1u32..(1 << v.len()) {
            out.insert((0..v.len()).filter(|i| mask & (1 << i) != 0).map(|i| v[i]).collect());
        }
    }
    out
}

fn build(gens: &[BTreeSet<u32>]) -> SimplicialComplex {
    let simplices: Vec<Simplex> =
        gens.iter().map(|g| Simplex::from_unsorted(g.iter().map(|v| VertexId(*v))).unwrap()).collect();
    SimplicialComplex::from_generators(&simplices).unwrap()
}

fn components(faces: &BTreeSet<Vec<u32>>) -> usize {
    let mut parent: Vec<usize> = (0..10).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let vertices: BTreeSet<u32> = faces.iter().filter(|f| f.len() == 1).map(|f| f[0]).collect();
    for f in faces.iter().filter(|f| f.len() == 2) {
        let (a, b) = (find(&mut parent, f[0] as usize), find(&mut parent, f[1] as usize));
        parent[a] = b;
    }
    vertices.iter().map(|v| find(&mut parent, *v as usize)).collect::<BTreeSet<_>>().len()
}

proptest! {
    #[test]
    fn closure_matches_brute_force(gens in generators()) {
        let c = build(&gens);
        let got: BTreeSet<Vec<u32>> = c.iter().map(|s| s.vertices().iter().map(|v| v.0).collect()).collect();
        prop_assert_eq!(got, closure(&gens));
        prop_assert!(c.is_valid());
    }

    #[test]
    fn betti_alternating_sum_is_euler(gens in generators()) {
        let faces = closure(&gens);
        let euler: i64 = faces.iter().map(|f| if f.len() % 2 == 1 { 1 } else { -1 }).sum();
        let betti = build(&gens).betti_numbers();
        prop_assert_eq!(betti.alternating_sum(), euler);
    }

    #[test]
    fn beta0_counts_components(gens in generators()) {
        let faces = closure(&gens);
        prop_assert_eq!(build(&gens).betti_numbers().get(0), components(&faces));
    }

    #[test]
    fn boundary_of_boundary_vanishes(gens in generators()) {
        let c = build(&gens);
        for k in 2..=c.dimension().max(0) as usize {
            let lower = boundary_matrix(&c, k - 1).unwrap();
            let upper = boundary_matrix(&c, k).unwrap();
            prop_assert!(lower.matrix.mul(&upper.matrix).is_zero());
        }
    }

    #[test]
    fn relabelling_keeps_betti_numbers(gens in generators(), shift in 0u32..7) {
        let permuted: Vec<BTreeSet<u32>> =
            gens.iter().map(|g| g.iter().map(|v| (v * 3 + shift) % 10).collect()).collect();
        prop_assert_eq!(build(&gens).betti_numbers(), build(&permuted).betti_numbers());
    }

    #[test]
    fn cones_are_acyclic(gens in generators()) {
        let coned: Vec<BTreeSet<u32>> = gens.iter().map(|g| g.iter().copied().chain([10]).collect()).collect();
        let b = build(&coned).betti_numbers();
        prop_assert_eq!(b.get(0), 1);
        prop_assert!(b.as_slice()[1..].iter().all(|x| *x == 0), "{}", b);
    }
}

#[test]
fn hollow_simplices_are_spheres() {
    for n in 2..=5u32 {
        let gens: Vec<BTreeSet<u32>> = (0..=n).map(|skip| (0..=n).filter(|v| *v != skip).collect()).collect();
        let b = build(&gens).betti_numbers();
        let mut expected = vec![0; n as usize];
        expected[0] = 1;
        expected[n as usize - 1] += 1;
        assert_eq!(b.0, expected, "boundary of the {n}-simplex");
    }
}
