use std::collections::{BTreeSet, HashMap};

use lerwlab::experiments::sampler_gof;
use lerwlab::lattice::{Edge, LatticeDomain, Site};
use lerwlab::lerw::{exact_distribution, loop_erase, one_point_frequency, parametrize, Target};
use lerwlab::{rng, Saw};
use proptest::prelude::*;
use rand::Rng;

/// Law of the loop erasure of simple random walk from 0 stopped on leaving
/// the domain, accumulated over walks of at most `len` steps, keyed by the
/// exit edge and the erased path.
fn erased_walk_law(d: &LatticeDomain, len: usize) -> HashMap<(Edge, Vec<Site>), f64> {
    let mut states: HashMap<Vec<Site>, f64> = HashMap::from([(vec![Site::ORIGIN], 1.0)]);
    let mut out = HashMap::new();
    for _ in 0..len {
        let mut next: HashMap<Vec<Site>, f64> = HashMap::new();
        for (path, p) in states {
            let here = *path.last().unwrap();
            for n in here.neighbors() {
                if d.contains(n) {
                    let mut q = path.clone();
                    match q.iter().position(|s| *s == n) {
                        Some(k) => q.truncate(k + 1),
                        None => q.push(n),
                    }
                    *next.entry(q).or_default() += p / 4.0;
                } else {
                    *out.entry((Edge::new(here, n), path.clone())).or_default() += p / 4.0;
                }
            }
        }
        states = next;
    }
    out
}

fn check_radial_against_walks(d: &LatticeDomain, len: usize, tol: f64) {
    let law = erased_walk_law(d, len);
    for &a in d.boundary_edges() {
        let mut expect: HashMap<Vec<Site>, f64> = HashMap::new();
        for ((e, path), p) in &law {
            if *e == a {
                let mut v = vec![a.outer];
                v.extend(path.iter().rev());
                *expect.entry(v).or_default() += p;
            }
        }
        let total: f64 = expect.values().sum();
        let exact = exact_distribution(d, a, Target::Origin).unwrap();
        assert_eq!(exact.len(), expect.len());
        for (saw, p) in exact {
            let q = expect[saw.vertices()] / total;
            assert!((p - q).abs() < tol, "{a:?}: {p} vs {q}");
        }
    }
}

#[test]
fn radial_law_matches_erased_walks_on_two_sites() {
    check_radial_against_walks(&LatticeDomain::rectangle(0, 1, 0, 0).unwrap(), 40, 1e-12);
}

#[test]
fn radial_law_matches_erased_walks_on_small_blocks() {
    check_radial_against_walks(&LatticeDomain::rectangle(0, 1, 0, 1).unwrap(), 200, 1e-12);
    check_radial_against_walks(&LatticeDomain::rectangle(-1, 1, -1, 1).unwrap(), 200, 1e-12);
}

#[test]
fn single_site_sampler_is_trivial() {
    let d = LatticeDomain::single_site();
    let e = d.boundary_edges();
    let c = sampler_gof(&d, e[0], Target::Origin, 1000, 1).unwrap();
    assert_eq!(c.dof, 0);
    let c = sampler_gof(&d, e[0], Target::Edge(e[1]), 1000, 1).unwrap();
    assert_eq!(c.dof, 0);
}

#[test]
fn two_site_and_block_samplers_pass_chi_square() {
    let two = LatticeDomain::rectangle(0, 1, 0, 0).unwrap();
    let e = two.boundary_edges();
    assert!(sampler_gof(&two, e[0], Target::Origin, 100_000, 3).unwrap().p_value > 1e-3);
    let block = LatticeDomain::rectangle(0, 1, 0, 1).unwrap();
    let e = block.boundary_edges();
    let c = sampler_gof(&block, e[0], Target::Edge(e[5]), 100_000, 4).unwrap();
    assert!(c.dof >= 1);
    assert!(c.p_value > 1e-3);
    assert!(sampler_gof(&block, e[3], Target::Origin, 100_000, 5).unwrap().p_value > 1e-3);
}

#[test]
fn chordal_law_is_reversible() {
    let block = LatticeDomain::rectangle(0, 1, 0, 1).unwrap();
    let edges = block.boundary_edges();
    for &a in edges {
        for &b in edges {
            if a == b {
                continue;
            }
            let fwd = exact_distribution(&block, a, Target::Edge(b)).unwrap();
            let back: HashMap<Vec<Site>, f64> = exact_distribution(&block, b, Target::Edge(a))
                .unwrap()
                .into_iter()
                .map(|(s, p)| (s.vertices().iter().rev().copied().collect(), p))
                .collect();
            assert_eq!(fwd.len(), back.len());
            for (s, p) in fwd {
                assert!((p - back[s.vertices()]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn one_point_frequency_edge_cases() {
    let d = LatticeDomain::rectangle(-3, 3, -3, 3).unwrap();
    let a = d.boundary_edges()[2];
    let f = one_point_frequency(&d, a, &[Site::ORIGIN, Site::new(9, 9), a.inner], 500, 2).unwrap();
    assert_eq!(f[0].frequency, 1.0);
    assert_eq!(f[1].frequency, 0.0);
    assert_eq!(f[2].frequency, 1.0);
}

fn straight(k: i32) -> (LatticeDomain, Saw) {
    let d = LatticeDomain::rectangle(-1, k, -1, 1).unwrap();
    let a = Edge::new(Site::new(k, 0), Site::new(k + 1, 0));
    let v = (0..=k + 1).rev().map(|x| Site::new(x, 0)).collect();
    let saw = Saw::radial(&d, a, v).unwrap();
    (d, saw)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn erased_walks_are_self_avoiding(seed in any::<u64>()) {
        let mut r = rng::seeded(seed);
        let mut walk = vec![Site::ORIGIN];
        for _ in 0..10_000 {
            let n = walk.last().unwrap().neighbors()[r.random_range(0..4)];
            walk.push(n);
        }
        let eta = loop_erase(&walk).unwrap();
        let v = eta.vertices();
        prop_assert_eq!(v[0], walk[0]);
        prop_assert_eq!(*v.last().unwrap(), *walk.last().unwrap());
        prop_assert_eq!(v.iter().collect::<BTreeSet<_>>().len(), v.len());
        prop_assert!(v.windows(2).all(|w| w[0].is_adjacent(w[1])));
        let again = loop_erase(v).unwrap();
        prop_assert_eq!(again.vertices(), v);
    }

    #[test]
    fn lattice_time_is_exact(k in 1i32..40, n in 1u32..500, c in 0.1f64..10.0) {
        let (_, saw) = straight(k);
        let steps = saw.steps() as f64;
        let curve = parametrize(&saw, n, c).unwrap();
        let lattice = curve.duration() * c * (n as f64).powf(1.25);
        prop_assert!((lattice - (steps - 0.5)).abs() < 1e-9 * steps);
        let doubled = parametrize(&saw, n, 2.0 * c).unwrap();
        prop_assert!((doubled.duration() * 2.0 - curve.duration()).abs() < 1e-12 * curve.duration());
    }
}
