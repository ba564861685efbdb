use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::candidates::{build_knn, propose_candidates};
use crate::geom::Vector;
use crate::shapes;

fn p(x: f64, y: f64, z: f64) -> Point {
    Point::new(x, y, z)
}

fn tri(ids: [u32; 3], pts: [Point; 3]) -> Tri {
    Tri::new(ids, pts)
}

fn hit(a: &Tri, b: &Tri) -> bool {
    let x = triangles_intersect(a, b, 1e-12).unwrap();
    assert_eq!(x, triangles_intersect(b, a, 1e-12).unwrap(), "asymmetric result");
    x
}

fn cand(verts: [u32; 3], edge: f64, label: Label) -> CandidateTriangle {
    CandidateTriangle {
        verts,
        longest_edge: edge,
        ier: Some(1.0),
        dist_to_ref: Some(0.0),
        label: Some(label),
    }
}

#[test]
fn label_then_edge_order() {
    let c = vec![
        cand([0, 1, 2], 0.1, Label::Correct),
        cand([1, 2, 3], 0.3, Label::NearSurface),
        cand([2, 3, 4], 0.2, Label::NearSurface),
    ];
    let order: Vec<[u32; 3]> = sort_candidates(&c, BinSource::Label).unwrap().iter().map(|k| k.verts).collect();
    assert_eq!(order, vec![[2, 3, 4], [1, 2, 3], [0, 1, 2]]);

    let ties = vec![cand([3, 4, 5], 0.5, Label::Correct), cand([0, 4, 9], 0.5, Label::Correct), cand([0, 2, 9], 0.5, Label::Correct)];
    let order: Vec<[u32; 3]> = sort_candidates(&ties, BinSource::Label).unwrap().iter().map(|k| k.verts).collect();
    assert_eq!(order, vec![[0, 2, 9], [0, 4, 9], [3, 4, 5]]);
    assert!(sort_candidates(&[], BinSource::Label).unwrap().is_empty());
    assert!(sort_candidates(&[cand([0, 1, 2], 0.1, Label::Incorrect)], BinSource::Label).is_err());

    let mut far = cand([0, 1, 2], 0.1, Label::Incorrect);
    far.dist_to_ref = Some(0.01);
    let near = cand([1, 2, 3], 0.9, Label::Incorrect);
    let keys = sort_candidates(&[far, near], BinSource::RefDistance(0.005)).unwrap();
    assert_eq!(keys[0].verts, [1, 2, 3]);
    assert_eq!(keys[1].bin, 1);
}

#[test]
fn edge_adjacent_triangles_do_not_intersect() {
    let a = tri([0, 1, 2], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, 1.0, 0.0)]);
    // Step 18 folds `b` flat onto `a`, the one overlapping configuration.
    for k in (0..36).filter(|&k| k != 18) {
        let ang = k as f64 * std::f64::consts::PI / 18.0;
        let other = p(0.5, -ang.cos(), ang.sin());
        let b = tri([0, 1, 3], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), other]);
        assert!(!hit(&a, &b), "dihedral step {k}");
    }
    // Folded flat onto itself: coplanar and on the same side.
    let b = tri([0, 1, 3], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.3, 0.4, 0.0)]);
    assert!(hit(&a, &b));
}

#[test]
fn coplanar_and_parallel_cases() {
    let a = tri([0, 1, 2], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]);
    let overlapping = tri([3, 4, 5], [p(0.2, 0.2, 0.0), p(1.2, 0.2, 0.0), p(0.2, 1.2, 0.0)]);
    assert!(hit(&a, &overlapping));
    let inside = tri([3, 4, 5], [p(0.1, 0.1, 0.0), p(0.3, 0.1, 0.0), p(0.1, 0.3, 0.0)]);
    assert!(hit(&a, &inside));
    let apart = tri([3, 4, 5], [p(2.0, 2.0, 0.0), p(3.0, 2.0, 0.0), p(2.0, 3.0, 0.0)]);
    assert!(!hit(&a, &apart));
    let lifted = tri([3, 4, 5], [p(0.0, 0.0, 1.0), p(1.0, 0.0, 1.0), p(0.0, 1.0, 1.0)]);
    assert!(!hit(&a, &lifted));
    // Corner exactly on the other triangle's edge.
    let touching = tri([3, 4, 5], [p(0.5, 0.5, 0.0), p(1.5, 1.0, 0.0), p(1.0, 1.5, 0.0)]);
    assert!(hit(&a, &touching));
}

#[test]
fn crossing_and_touching_without_shared_vertices() {
    let a = tri([0, 1, 2], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]);
    let piercing = tri([3, 4, 5], [p(0.2, 0.2, -1.0), p(0.2, 0.2, 1.0), p(0.9, 0.9, 1.0)]);
    assert!(hit(&a, &piercing));
    let poke = tri([3, 4, 5], [p(0.25, 0.25, 0.0), p(0.25, 0.5, 1.0), p(0.5, 0.25, 1.0)]);
    assert!(hit(&a, &poke));
    let miss = tri([3, 4, 5], [p(0.8, 0.8, -1.0), p(0.8, 0.8, 1.0), p(1.5, 1.5, 1.0)]);
    assert!(!hit(&a, &miss));
}

#[test]
fn vertex_sharing_cases() {
    let s = p(0.0, 0.0, 0.0);
    let a = tri([0, 1, 2], [s, p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]);
    // Flat fan neighbor on the other side of the apex.
    let fan = tri([0, 3, 4], [s, p(-1.0, 0.0, 0.0), p(-0.5, -1.0, 0.0)]);
    assert!(!hit(&a, &fan));
    // Coplanar and overlapping sectors.
    let over = tri([0, 3, 4], [s, p(1.0, 0.5, 0.0), p(0.5, 1.0, 0.0)]);
    assert!(hit(&a, &over));
    // Tilted away: touches only at the apex.
    let away = tri([0, 3, 4], [s, p(-1.0, -1.0, 1.0), p(-1.0, 0.0, 1.0)]);
    assert!(!hit(&a, &away));
    // Crosses through the plane of `a` inside its interior.
    let through = tri([0, 3, 4], [s, p(0.5, 0.4, 1.0), p(0.4, 0.5, -1.0)]);
    assert!(hit(&a, &through));
    // Crosses the plane of `a`, but outside its sector.
    let outside = tri([0, 3, 4], [s, p(-0.5, -0.4, 1.0), p(-0.4, -0.5, -1.0)]);
    assert!(!hit(&a, &outside));
}

#[test]
fn degenerate_input_is_an_error() {
    let a = tri([0, 1, 2], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0)]);
    let b = tri([3, 4, 5], [p(0.0, 0.0, 0.0), p(1.0, 0.0, 1.0), p(0.0, 1.0, 0.0)]);
    assert!(triangles_intersect(&a, &b, 1e-12).is_err());
}

/// Segment-triangle crossing point (Möller-Trumbore), if any.
fn segment_hits(a: &Point, b: &Point, t: &[Point; 3]) -> Option<Point> {
    let d = b - a;
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let h = d.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let s = a - t[0];
    let u = s.dot(&h) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    let w = e2.dot(&q) / det;
    (u >= 0.0 && v >= 0.0 && u + v <= 1.0 && (0.0..=1.0).contains(&w)).then(|| a + d * w)
}

/// Independent predicate for generic (non-coplanar) positions: the contact
/// set is spanned by edge-triangle crossings, so the triangles intersect
/// beyond their shared vertices iff some crossing is not a shared vertex.
fn crossing_oracle(a: &Tri, b: &Tri) -> bool {
    let shared: Vec<Point> = (0..3).filter(|&i| b.ids.contains(&a.ids[i])).map(|i| a.p[i]).collect();
    let mut pts = Vec::new();
    for (x, y) in [(a, b), (b, a)] {
        for k in 0..3 {
            if let Some(q) = segment_hits(&x.p[k], &x.p[(k + 1) % 3], &y.p) {
                pts.push(q);
            }
        }
    }
    pts.iter().any(|q| shared.iter().all(|s| (q - s).norm() > 1e-9))
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn disjoint_triangles_match_crossing_oracle(seed in 0u64..u64::MAX) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = tri([0, 1, 2], std::array::from_fn(|_| random_point(&mut rng)));
        let b = tri([3, 4, 5], std::array::from_fn(|_| random_point(&mut rng)));
        prop_assert_eq!(hit(&a, &b), crossing_oracle(&a, &b));
    }

    #[test]
    fn vertex_sharing_matches_crossing_oracle(seed in 0u64..u64::MAX) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_point(&mut rng);
        let a = tri([0, 1, 2], [s, random_point(&mut rng), random_point(&mut rng)]);
        let b = tri([3, 0, 4], [random_point(&mut rng), s, random_point(&mut rng)]);
        prop_assert_eq!(hit(&a, &b), crossing_oracle(&a, &b));
    }

    #[test]
    fn edge_sharing_never_intersects_off_plane(seed in 0u64..u64::MAX) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = (random_point(&mut rng), random_point(&mut rng));
        let a = tri([0, 1, 2], [u, v, random_point(&mut rng)]);
        let b = tri([1, 3, 0], [v, random_point(&mut rng), u]);
        prop_assert!(!hit(&a, &b));
    }
}

fn pts(v: &[[f64; 3]]) -> Vec<Point> {
    v.iter().map(|c| Point::new(c[0], c[1], c[2])).collect()
}

fn keys(faces: &[[u32; 3]]) -> Vec<SortKey> {
    faces
        .iter()
        .map(|&verts| SortKey {
            bin: 0,
            longest_edge: 1.0,
            verts,
        })
        .collect()
}

#[test]
fn merge_examples() {
    let points = pts(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.3], [0.5, -1.0, 0.5], [0.5, 0.5, 1.0], [9.0, 9.0, 9.0]]);
    let out = merge(&keys(&[[0, 1, 2], [1, 2, 3]]), &points).unwrap();
    assert_eq!(out.mesh.faces, vec![[0, 1, 2], [1, 2, 3]]);
    assert_eq!(out.mesh.vertex_count(), points.len());
    assert_eq!(out.unreferenced_count(), 3);

    let out = merge(&keys(&[[0, 1, 2], [0, 1, 4], [0, 1, 5]]), &points).unwrap();
    assert_eq!(out.mesh.face_count(), 2);
    assert_eq!(
        out.rejections,
        vec![Rejection {
            verts: [0, 1, 5],
            reason: RejectReason::NonManifold
        }]
    );

    let crossing = pts(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.2, 0.2, -1.0], [0.2, 0.2, 1.0], [0.9, 0.9, 1.0]]);
    let out = merge(&keys(&[[0, 1, 2], [3, 4, 5]]), &crossing).unwrap();
    assert_eq!(out.mesh.face_count(), 1);
    assert_eq!(out.rejections[0].reason, RejectReason::Intersection);

    let mut csv = Vec::new();
    write_rejections_csv(&mut csv, &out.rejections).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "v0,v1,v2,reason\n3,4,5,intersection\n");
}

fn noisy_sphere(seed: u64, n: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v = Vector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r = 0.5 + rng.random_range(-0.02..0.02);
            Point::from(v.normalize() * r)
        })
        .collect()
}

fn all_candidates_order(points: &[Point], k: usize) -> Vec<SortKey> {
    let knn = build_knn(points, k).unwrap();
    let mut keys: Vec<SortKey> = propose_candidates(&knn, points)
        .iter()
        .map(|c| SortKey {
            bin: 0,
            longest_edge: c.longest_edge,
            verts: c.verts,
        })
        .collect();
    keys.sort();
    keys
}

#[test]
fn adversarial_merge_keeps_invariants() {
    for seed in 0..3 {
        let points = noisy_sphere(seed, 300);
        let order = all_candidates_order(&points, 12);
        let out = merge(&order, &points).unwrap();
        assert!(out.mesh.face_count() > 100);
        assert!(out.mesh.non_manifold_edges().is_empty());
        assert!(brute_force_intersections(&out.mesh).unwrap().is_empty());
    }
}

/// Fan check by brute force: group the faces at `v` into fans joined
/// through shared edges; a closed fan (every spoke used twice) must be alone.
fn fan_ok_oracle(faces: &[[u32; 3]], v: u32) -> bool {
    let at: Vec<[u32; 3]> = faces.iter().copied().filter(|f| f.contains(&v)).collect();
    let spokes = |f: &[u32; 3]| -> Vec<u32> { f.iter().copied().filter(|&x| x != v).collect() };
    let mut comp = vec![usize::MAX; at.len()];
    let mut n_comp = 0;
    for s in 0..at.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = n_comp;
        while let Some(i) = stack.pop() {
            for j in 0..at.len() {
                if comp[j] == usize::MAX && spokes(&at[i]).iter().any(|x| at[j].contains(x)) {
                    comp[j] = n_comp;
                    stack.push(j);
                }
            }
        }
        n_comp += 1;
    }
    let closed = (0..n_comp).any(|c| {
        let members: Vec<&[u32; 3]> = (0..at.len()).filter(|&i| comp[i] == c).map(|i| &at[i]).collect();
        members
            .iter()
            .flat_map(|f| spokes(f))
            .all(|x| members.iter().filter(|f| f.contains(&x)).count() == 2)
    });
    n_comp == 1 || !closed
}

fn exhaustive_check(points: &[Point], faces: &[[u32; 3]], verts: [u32; 3], rules: AssemblyRules) -> Option<RejectReason> {
    let eps = INTERSECT_REL_EPS * Aabb::from_points(points).diagonal();
    let t = Tri::new(verts, verts.map(|v| points[v as usize]));
    let others = || faces.iter().map(|f| Tri::new(*f, f.map(|v| points[v as usize])));
    let manifold_ok = face_edges(&verts)
        .iter()
        .all(|e| faces.iter().filter(|f| face_edges(f).contains(e)).count() < 2);
    let mut with: Vec<[u32; 3]> = faces.to_vec();
    with.push(verts);
    if !manifold_ok {
        Some(RejectReason::NonManifold)
    } else if rules.vertex_manifold && !verts.iter().all(|&v| fan_ok_oracle(&with, v)) {
        Some(RejectReason::NonManifoldVertex)
    } else if others().any(|o| triangles_intersect(&t, &o, eps).unwrap()) {
        Some(RejectReason::Intersection)
    } else if rules.fold_angle.is_some_and(|a| others().any(|o| triangles_fold(&t, &o, a))) {
        Some(RejectReason::Fold)
    } else {
        None
    }
}

#[test]
fn grid_queries_match_exhaustive_checks() {
    let points = noisy_sphere(11, 250);
    let order = all_candidates_order(&points, 10);
    for rules in [AssemblyRules::edges_only(), AssemblyRules::default()] {
        let mut state = AssemblyState::new(&points, 0.05).with_rules(rules);
        let mut seen = std::collections::HashSet::new();
        for k in &order {
            let want = exhaustive_check(&points, state.faces(), k.verts, rules);
            let got = state.check(k.verts).unwrap();
            assert_eq!(got, want, "{:?} under {rules:?}", k.verts);
            seen.insert(got);
            state.offer(k.verts).unwrap();
        }
        assert!(seen.len() >= 3, "{seen:?}");
    }
}

#[test]
fn closed_fan_takes_no_more_faces() {
    // Hexagonal disk around vertex 0, then a face hanging off the centre.
    let mut pts = vec![p(0.0, 0.0, 0.0)];
    for i in 0..6 {
        let a = i as f64 * std::f64::consts::FRAC_PI_3;
        pts.push(p(a.cos(), a.sin(), 0.0));
    }
    pts.extend([p(0.3, 0.0, -1.0), p(0.0, 0.3, -1.0)]);
    let disk: Vec<[u32; 3]> = (0..6).map(|i| [0, 1 + i, 1 + (i + 1) % 6]).collect();
    let mut faces = disk.clone();
    faces.push([0, 7, 8]);
    let out = merge(&keys(&faces), &pts).unwrap();
    assert_eq!(out.mesh.faces, disk);
    assert_eq!(out.rejections[0].reason, RejectReason::NonManifoldVertex);
    let out = merge_with(&keys(&faces), &pts, AssemblyRules::edges_only()).unwrap();
    assert_eq!(out.mesh.face_count(), 7);

    // Two open fans may coexist, but closing one of them is refused.
    let open = [[0, 1, 2], [0, 2, 3], [0, 4, 5], [0, 5, 6]];
    let out = merge(&keys(&open), &pts).unwrap();
    assert_eq!(out.mesh.face_count(), 4);
    let mut more = open.to_vec();
    more.push([0, 7, 8]);
    assert_eq!(merge(&keys(&more), &pts).unwrap().mesh.face_count(), 5);
}

#[test]
fn folded_faces_are_rejected() {
    let pts = pts(&[
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.8, 0.2, -0.1],
        [0.2, 0.8, -0.1],
        [0.3, 0.3, -0.05],
        [-0.6, -0.6, -0.05],
        [0.8, 0.2, -2.0],
        [0.2, 0.8, -2.0],
    ]);
    let rules = AssemblyRules::default();
    let a = |ids: [u32; 3]| Tri::new(ids, ids.map(|v| pts[v as usize]));
    let angle = rules.fold_angle.unwrap();
    // Sharing a vertex, lying just under the first face.
    assert!(triangles_fold(&a([0, 1, 2]), &a([0, 3, 4]), angle));
    assert!(triangles_fold(&a([0, 3, 4]), &a([0, 1, 2]), angle));
    // Steep enough to be a real crease.
    assert!(!triangles_fold(&a([0, 1, 2]), &a([0, 7, 8]), angle));
    // Sharing an edge: same side folds, opposite side is a normal neighbour.
    assert!(triangles_fold(&a([1, 2, 0]), &a([1, 2, 5]), angle));
    assert!(!triangles_fold(&a([0, 1, 2]), &a([0, 1, 6]), angle));
    // Nothing shared never folds.
    assert!(!triangles_fold(&a([0, 1, 2]), &a([3, 4, 5]), angle));

    let out = merge(&keys(&[[0, 1, 2], [0, 3, 4]]), &pts).unwrap();
    assert_eq!(out.rejections[0].reason, RejectReason::Fold);
    let out = merge_with(&keys(&[[0, 1, 2], [0, 3, 4]]), &pts, AssemblyRules::edges_only()).unwrap();
    assert_eq!(out.mesh.face_count(), 2);
}

#[test]
fn order_determines_output_and_prefixes_are_stable() {
    let points = noisy_sphere(5, 200);
    let knn = build_knn(&points, 10).unwrap();
    let mut cands = propose_candidates(&knn, &points);
    for c in &mut cands {
        c.label = Some(Label::Correct);
    }
    let full = merge(&sort_candidates(&cands, BinSource::Label).unwrap(), &points).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in (1..cands.len()).rev() {
        cands.swap(i, rng.random_range(0..=i));
    }
    let order = sort_candidates(&cands, BinSource::Label).unwrap();
    let shuffled = merge(&order, &points).unwrap();
    assert_eq!(full.mesh.faces, shuffled.mesh.faces);

    // Dropping a suffix never changes decisions on the kept prefix.
    let m = order.len() / 3;
    let prefix = merge(&order[..m], &points).unwrap();
    let kept: std::collections::HashSet<[u32; 3]> = order[..m].iter().map(|k| k.verts).collect();
    let full_on_prefix: Vec<[u32; 3]> = full.mesh.faces.iter().copied().filter(|f| kept.contains(f)).collect();
    assert_eq!(prefix.mesh.faces, full_on_prefix);
}

#[test]
fn icosphere_faces_reassemble() {
    let s = shapes::icosphere(0.5, 2);
    let order = keys(&s.faces.iter().map(|f| { let mut t = *f; t.sort(); t }).collect::<Vec<_>>());
    let out = merge(&order, &s.vertices).unwrap();
    assert_eq!(out.mesh.face_count(), s.face_count());
    assert!(out.rejections.is_empty());
}
