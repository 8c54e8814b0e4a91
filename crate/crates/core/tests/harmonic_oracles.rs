use lerwlab::harmonic::{boundary_poisson, green, loop_mass, poisson_kernel};
use lerwlab::lattice::{enumerate_domains, Edge, LatticeDomain, Site};
use lerwlab::lerw::sample_radial_lerw;
use lerwlab::Saw;
use proptest::prelude::*;

/// Walk sums truncated at `len` steps: occupation of every site and the mass
/// leaving through every boundary edge, for the walk started at `z`.
fn walk_sums(d: &LatticeDomain, z: Site, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; d.len()];
    p[d.index_of(z).unwrap()] = 1.0;
    let mut occupation = p.clone();
    let mut exits = vec![0.0; d.boundary_edges().len()];
    for _ in 0..len {
        let mut next = vec![0.0; d.len()];
        for (i, s) in d.sites().iter().enumerate() {
            if p[i] == 0.0 {
                continue;
            }
            for n in s.neighbors() {
                match d.index_of(n) {
                    Some(j) => next[j] += p[i] / 4.0,
                    None => {
                        let k = d.boundary_edges().iter().position(|e| *e == Edge::new(*s, n)).unwrap();
                        exits[k] += p[i] / 4.0;
                    }
                }
            }
        }
        for (o, q) in occupation.iter_mut().zip(&next) {
            *o += q;
        }
        p = next;
    }
    (occupation, exits)
}

fn e(ix: i32, iy: i32, ox: i32, oy: i32) -> Edge {
    Edge::new(Site::new(ix, iy), Site::new(ox, oy))
}

#[test]
fn two_site_kernels_match_walk_sums() {
    let d = LatticeDomain::rectangle(0, 1, 0, 0).unwrap();
    let (occ, exits) = walk_sums(&d, Site::ORIGIN, 40);
    let left = e(0, 0, -1, 0);
    let right = e(1, 0, 2, 0);
    let k = d.boundary_edges().iter().position(|x| *x == left).unwrap();
    assert!((exits[k] - 4.0 / 15.0).abs() < 1e-12);
    let h = poisson_kernel(&d, &left).unwrap();
    assert!((h.at(&d, Site::ORIGIN) - exits[k]).abs() < 1e-12);
    let g = green(&d).unwrap();
    let o = d.origin_index();
    assert!((g.get(o, o) - occ[o]).abs() < 1e-12);
    assert!((occ[o] - 16.0 / 15.0).abs() < 1e-12);
    // boundary kernel: step in through `left`, then leave through `right`
    let k = d.boundary_edges().iter().position(|x| *x == right).unwrap();
    let via_walks = exits[k] / 4.0;
    assert!((boundary_poisson(&d, &left, &right).unwrap() - via_walks).abs() < 1e-10);
}

#[test]
fn single_path_has_unit_loop_mass() {
    let d = LatticeDomain::single_site();
    let eta = Saw::new(vec![Site::ORIGIN]).unwrap();
    assert!((loop_mass(&d, &eta).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn loop_mass_is_reversal_invariant() {
    let d = LatticeDomain::rectangle(-4, 3, -3, 4).unwrap();
    for seed in 0..12 {
        let a = d.boundary_edges()[(7 * seed as usize) % d.boundary_edges().len()];
        let saw = sample_radial_lerw(&d, a, seed).unwrap();
        let inner = Saw::new(saw.interior_sites().to_vec()).unwrap();
        let l1 = loop_mass(&d, &inner).unwrap();
        let l2 = loop_mass(&d, &inner.reversed()).unwrap();
        assert!((l1 - l2).abs() < 1e-12 * l1, "{l1} {l2}");
    }
}

fn small_domain() -> impl Strategy<Value = LatticeDomain> {
    let all = enumerate_domains(7);
    prop_oneof![
        (0..all.len()).prop_map(move |i| all[i].clone()),
        (1i32..4, 1i32..4, 0i32..4, 0i32..4).prop_map(|(w, h, x, y)| LatticeDomain::rectangle(-x, w, -y, h).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_is_symmetric(d in small_domain()) {
        let g = green(&d).unwrap();
        for i in 0..d.len() {
            for j in 0..i {
                prop_assert!((g.get(i, j) - g.get(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_kernel_is_symmetric(d in small_domain()) {
        let edges = d.boundary_edges();
        for (i, a) in edges.iter().enumerate() {
            for b in &edges[..i] {
                let ab = boundary_poisson(&d, a, b).unwrap();
                let ba = boundary_poisson(&d, b, a).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernels_have_the_mean_value_property(d in small_domain(), k in any::<prop::sample::Index>()) {
        let a = d.boundary_edges()[k.index(d.boundary_edges().len())];
        let h = poisson_kernel(&d, &a).unwrap();
        for (i, s) in d.sites().iter().enumerate() {
            let avg: f64 = s
                .neighbors()
                .iter()
                .map(|n| match d.index_of(*n) {
                    Some(j) => h.values[j],
                    None => f64::from(Edge::new(*s, *n) == a),
                })
                .sum::<f64>()
                / 4.0;
            prop_assert!((h.values[i] - avg).abs() < 1e-12);
        }
        prop_assert!(h.values.iter().all(|v| *v >= 0.0 && *v <= 1.0));
    }
}
