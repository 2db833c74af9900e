use std::collections::{HashMap, HashSet};

use mdla_lab::aggregate::{cube_distance, distance_field, Aggregate, GridSpec, Seed};
use mdla_lab::lattice::{Boundary, Connectivity, LatticeSpec, Point, Site};
use mdla_lab::Error;
use proptest::prelude::*;

fn spec2(n: u32) -> LatticeSpec {
    LatticeSpec::new(2, n).unwrap()
}

fn pt(x: f64, y: f64) -> Point {
    [x, y, 0.0]
}

fn occupied(sites: &[(i32, i32)]) -> HashMap<Site, u32> {
    sites.iter().enumerate().map(|(i, &(a, b))| (Site::d2(a, b), i as u32)).collect()
}

#[test]
fn distance_examples() {
    let agg = Aggregate::new(&spec2(4), Seed::cubes([Site::d2(0, 0)]));
    assert!((agg.distance(&pt(0.25, 0.0)).unwrap() - 0.125).abs() < 1e-15);
    assert!((agg.distance(&pt(0.25, 0.25)).unwrap() - 0.125 * 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(agg.distance(&pt(0.05, -0.1)).unwrap(), 0.0);
}

#[test]
fn empty_aggregate_rejected() {
    let agg = Aggregate::new(&spec2(4), Seed::default());
    assert_eq!(agg.distance(&pt(0.0, 0.0)), Err(Error::EmptyAggregate));
}

#[test]
fn distance_field_half_plane() {
    let n = 8;
    let spec = spec2(n);
    let s = spec.spacing();
    let agg = Aggregate::new(&spec, Seed::half_space(0, 0));
    let grid = GridSpec { lo: pt(2.0 * s, -1.0), hi: pt(2.0 * s, 1.0), counts: [1, 5, 1] };
    for d in distance_field(&agg, &grid).unwrap() {
        assert!((d - 1.5 * s).abs() < 1e-15);
    }
}

#[test]
fn distance_field_around_a_cube() {
    let spec = spec2(4);
    let s = spec.spacing();
    let agg = Aggregate::new(&spec, Seed::cubes([Site::d2(0, 0)]));
    let grid = GridSpec { lo: pt(-s, -s), hi: pt(s, s), counts: [3, 3, 1] };
    let field = distance_field(&agg, &grid).unwrap();
    let expect = [
        s / 2.0 * 2f64.sqrt(), s / 2.0, s / 2.0 * 2f64.sqrt(),
        s / 2.0, 0.0, s / 2.0,
        s / 2.0 * 2f64.sqrt(), s / 2.0, s / 2.0 * 2f64.sqrt(),
    ];
    for (d, e) in field.iter().zip(expect) {
        assert!((d - e).abs() < 1e-15);
    }
}

#[test]
fn distance_field_rejects_grid_outside_domain() {
    let spec = LatticeSpec::with_box(2, 4, Site::d2(0, 0), Site::d2(3, 3), Boundary::Reflecting).unwrap();
    let agg = Aggregate::new(&spec, Seed::cubes([Site::d2(0, 0)]));
    let grid = GridSpec { lo: pt(0.0, 0.0), hi: pt(2.0, 0.5), counts: [3, 3, 1] };
    assert!(matches!(distance_field(&agg, &grid), Err(Error::GridOutsideRegion(_))));
}

#[test]
fn cascade_single_and_chain() {
    let spec = spec2(8);
    let mut agg = Aggregate::new(&spec, Seed::half_space(0, 0));
    let e = agg.cascade_attach(&occupied(&[(1, 5)]), Site::d2(1, 5), 0.3, Connectivity::ClosedCube).unwrap();
    assert_eq!(e.cubes, vec![Site::d2(1, 5)]);
    assert_eq!(e.time, 0.3);

    let mut agg = Aggregate::new(&spec, Seed::half_space(0, 0));
    let occ = occupied(&[(1, 5), (2, 5), (3, 5)]);
    let e = agg.cascade_attach(&occ, Site::d2(1, 5), 0.0, Connectivity::FaceOnly).unwrap();
    assert_eq!(e.cubes.len(), 3);
    assert_eq!(agg.log().len(), 1);
}

#[test]
fn cascade_diagonal_depends_on_connectivity() {
    let spec = spec2(8);
    let occ = occupied(&[(1, 5), (2, 6)]);
    let mut closed = Aggregate::new(&spec, Seed::half_space(0, 0));
    assert_eq!(closed.cascade_attach(&occ, Site::d2(1, 5), 0.0, Connectivity::ClosedCube).unwrap().cubes.len(), 2);
    let mut face = Aggregate::new(&spec, Seed::half_space(0, 0));
    assert_eq!(face.cascade_attach(&occ, Site::d2(1, 5), 0.0, Connectivity::FaceOnly).unwrap().cubes, vec![Site::d2(1, 5)]);
}

#[test]
fn cascade_rejects_non_adjacent_trigger() {
    let spec = spec2(8);
    let mut agg = Aggregate::new(&spec, Seed::half_space(0, 0));
    let occ = occupied(&[(2, 5)]);
    let err = agg.cascade_attach(&occ, Site::d2(2, 5), 0.0, Connectivity::ClosedCube).unwrap_err();
    assert!(matches!(err, Error::CascadePrecondition(_)));
    assert!(err.to_string().contains("cascade precondition violated"));
}

#[test]
fn ring_around_cube_absorbed_at_once() {
    let spec = spec2(8);
    let mut agg = Aggregate::new(&spec, Seed::cubes([Site::d2(0, 0)]));
    let ring: Vec<(i32, i32)> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))).filter(|p| *p != (0, 0)).collect();
    let occ = occupied(&ring);
    let e = agg.cascade_attach(&occ, Site::d2(1, 0), 0.0, Connectivity::FaceOnly).unwrap();
    assert_eq!(e.cubes.len(), 8);
}

#[test]
fn corner_touching_component_joins_the_cascade() {
    // Closed cubes meeting the aggregate at a corner belong to a component C
    // with C ∩ Γ nonempty, so they attach at the next hitting time even when
    // they are not connected to the trigger.
    let spec = spec2(8);
    let mut agg = Aggregate::new(&spec, Seed::cubes([Site::d2(0, 0)]));
    let occ = occupied(&[(1, 0), (-1, -1)]);
    let e = agg.cascade_attach(&occ, Site::d2(1, 0), 0.0, Connectivity::ClosedCube).unwrap();
    assert_eq!(e.cubes, vec![Site::d2(-1, -1), Site::d2(1, 0)]);
}

/// Brute-force cascade: grow A from the trigger and all touching sites by
/// rescanning every occupied site until nothing changes.
fn cascade_oracle(members: &HashSet<Site>, occ: &HashSet<Site>, trigger: Site, conn: Connectivity) -> HashSet<Site> {
    let adj = |a: Site, b: Site| {
        let dx = (a.0[0] - b.0[0]).abs();
        let dy = (a.0[1] - b.0[1]).abs();
        match conn {
            Connectivity::ClosedCube => dx.max(dy) == 1,
            Connectivity::FaceOnly => dx + dy == 1,
        }
    };
    let mut attached: HashSet<Site> = HashSet::from([trigger]);
    loop {
        let mut grew = false;
        for &x in occ {
            if attached.contains(&x) || members.contains(&x) {
                continue;
            }
            let meets_seed = members.iter().any(|m| adj(x, *m));
            let meets_new = attached.iter().any(|a| adj(x, *a));
            if meets_seed || meets_new {
                attached.insert(x);
                grew = true;
            }
        }
        if !grew {
            return attached;
        }
    }
}

fn small_site() -> impl Strategy<Value = (i32, i32)> {
    (-5..6i32, -5..6i32)
}

proptest! {
    #[test]
    fn distance_matches_brute_force(
        cubes in proptest::collection::vec(small_site(), 1..12),
        px in -1.5f64..1.5, py in -1.5f64..1.5,
    ) {
        let spec = spec2(4);
        let agg = Aggregate::new(&spec, Seed::cubes(cubes.iter().map(|&(a, b)| Site::d2(a, b))));
        let p = pt(px, py);
        let brute = cubes.iter().map(|&(a, b)| cube_distance(&p, &spec.center(Site::d2(a, b)), 2, 0.125)).fold(f64::INFINITY, f64::min);
        prop_assert!((agg.distance(&p).unwrap() - brute).abs() < 1e-14);
    }

    #[test]
    fn face_adjacency_is_distance_half_spacing(
        cubes in proptest::collection::vec(small_site(), 1..12),
        q in small_site(),
    ) {
        let spec = spec2(4);
        let agg = Aggregate::new(&spec, Seed::cubes(cubes.iter().map(|&(a, b)| Site::d2(a, b))));
        let site = Site::d2(q.0, q.1);
        let d = agg.distance(&spec.center(site)).unwrap();
        prop_assert_eq!(agg.is_face_adjacent(site), !agg.contains(site) && (d - 0.125).abs() < 1e-14);
    }

    #[test]
    fn cascade_matches_oracle_and_is_idempotent(
        seed in proptest::collection::vec(small_site(), 1..6),
        occ in proptest::collection::vec(small_site(), 1..30),
        closed in any::<bool>(),
    ) {
        let spec = spec2(4);
        let conn = if closed { Connectivity::ClosedCube } else { Connectivity::FaceOnly };
        let seed: HashSet<Site> = seed.iter().map(|&(a, b)| Site::d2(a, b)).collect();
        let occ: HashSet<Site> = occ.iter().map(|&(a, b)| Site::d2(a, b)).filter(|k| !seed.contains(k)).collect();
        let mut agg = Aggregate::new(&spec, Seed::cubes(seed.iter().copied()));
        let mut sorted: Vec<Site> = occ.iter().copied().collect();
        sorted.sort();
        let Some(&trigger) = sorted.iter().find(|k| agg.is_face_adjacent(**k)) else { return Ok(()) };
        let map: HashMap<Site, u32> = sorted.iter().enumerate().map(|(i, k)| (*k, i as u32)).collect();
        let before = agg.attached_count();
        let entry = agg.cascade_attach(&map, trigger, 1.0, conn).unwrap().clone();
        let expect = cascade_oracle(&seed, &occ, trigger, conn);
        prop_assert_eq!(entry.cubes.iter().copied().collect::<HashSet<_>>(), expect);
        prop_assert_eq!(entry.cubes.len(), entry.particles.len());
        prop_assert_eq!(agg.attached_count(), before + entry.cubes.len());
        // Monotone: old members remain members.
        for k in &seed { prop_assert!(agg.contains(*k)); }
        // Nothing left touches the aggregate, so a rerun has no trigger.
        let rest: Vec<Site> = sorted.iter().copied().filter(|k| !agg.contains(*k)).collect();
        prop_assert!(rest.iter().all(|k| !agg.touches(*k, conn)));
    }
}
