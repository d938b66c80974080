use proptest::prelude::*;
use reachnet_core::lpsolve::{LinearProgram, LpOutcome};
use reachnet_core::polytope::HPolytope;

/// Andrew's monotone chain; returns hull vertices without collinear points.
fn hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut p: Vec<(f64, f64)> = points.iter().map(|v| (v[0], v[1])).collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 3 {
        return p.into_iter().map(|(x, y)| vec![x, y]).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 1e-12 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 1e-12 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower.into_iter().map(|(x, y)| vec![x, y]).collect()
}

fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = |p: &Vec<f64>, q: &Vec<f64>| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let one = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| d(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

fn cloud(dim: usize, coords: &[f64]) -> Vec<Vec<f64>> {
    coords.chunks(dim).map(|c| c.to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hull_vertices_match_monotone_chain(coords in prop::collection::vec(-10.0f64..10.0, 2 * 12)) {
        let pts = cloud(2, &coords);
        let p = HPolytope::from_vertices(&pts).unwrap();
        let v = p.vertices().unwrap();
        prop_assert!(hausdorff(&v, &hull_2d(&pts)) <= 1e-7);
        for q in &pts {
            prop_assert!(p.contains(q, 1e-9));
        }
    }

    #[test]
    fn hull_round_trip_3d(coords in prop::collection::vec(-10.0f64..10.0, 3 * 10)) {
        let pts = cloud(3, &coords);
        let p = HPolytope::from_vertices(&pts).unwrap();
        let v = p.vertices().unwrap();
        let q = HPolytope::from_vertices(&v).unwrap();
        prop_assert!(p.support_gap(&q).unwrap() <= 1e-7);
        // every recovered vertex is one of the input points
        for x in &v {
            prop_assert!(pts.iter().any(|y| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-7)));
        }
    }

    #[test]
    fn simplex_membership(coords in prop::collection::vec(-10.0f64..10.0, 3 * 4), w in prop::collection::vec(0.0f64..1.0, 4)) {
        let pts = cloud(3, &coords);
        let p = HPolytope::from_vertices(&pts).unwrap();
        let total: f64 = w.iter().sum::<f64>().max(1e-9);
        let inside: Vec<f64> = (0..3).map(|c| pts.iter().zip(&w).map(|(q, wi)| q[c] * wi / total).sum()).collect();
        prop_assert!(p.contains(&inside, 1e-9));
        let far: Vec<f64> = vec![100.0, 100.0, 100.0];
        prop_assert!(!p.contains(&far, 1e-9));
    }

    #[test]
    fn intersect_commutes_and_is_idempotent(a in prop::collection::vec(-5.0f64..5.0, 2 * 6), b in prop::collection::vec(-5.0f64..5.0, 2 * 6)) {
        let p = HPolytope::from_vertices(&cloud(2, &a)).unwrap();
        let q = HPolytope::from_vertices(&cloud(2, &b)).unwrap();
        let pq = p.intersect(&q).unwrap();
        let qp = q.intersect(&p).unwrap();
        prop_assert!(pq.set_eq(&qp, 1e-9).unwrap());
        prop_assert!(p.intersect(&p).unwrap().set_eq(&p, 1e-9).unwrap());
    }

    #[test]
    fn includes_is_reflexive_and_transitive(a in prop::collection::vec(-5.0f64..5.0, 2 * 6), s1 in 0.2f64..1.0, s2 in 0.2f64..1.0) {
        let pts = cloud(2, &a);
        let c: Vec<f64> = (0..2).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64).collect();
        let scaled = |s: f64| -> HPolytope {
            let v: Vec<Vec<f64>> = pts.iter().map(|p| (0..2).map(|k| c[k] + s * (p[k] - c[k])).collect()).collect();
            HPolytope::from_vertices(&v).unwrap()
        };
        let big = scaled(1.0);
        let mid = scaled(s1);
        let small = scaled(s1 * s2);
        prop_assert!(big.includes(&big, 1e-9).unwrap());
        prop_assert!(big.includes(&mid, 1e-9).unwrap());
        prop_assert!(mid.includes(&small, 1e-9).unwrap());
        prop_assert!(big.includes(&small, 1e-9).unwrap());
    }
}

/// Random bounded LP: box rows keep it bounded, extra rows cut it.
fn bounded_lp(n: usize, cuts: &[f64], rhs: &[f64], obj: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        lp.push_ineq(e.clone(), 3.0);
        e[k] = -1.0;
        lp.push_ineq(e, 3.0);
    }
    for (row, b) in cuts.chunks(n).zip(rhs) {
        lp.push_ineq(row.to_vec(), *b);
    }
    lp.with_objective(obj.to_vec())
}

/// Maximum over all basic feasible points by brute force in 2-D/3-D.
fn vertex_max(lp: &LinearProgram) -> Option<f64> {
    let rows: Vec<(Vec<f64>, f64)> = lp.ineq_rows.iter().cloned().zip(lp.ineq_rhs.iter().copied()).collect();
    let n = lp.num_vars;
    let mut best: Option<f64> = None;
    let idx: Vec<usize> = (0..rows.len()).collect();
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                let start = c.last().map_or(0, |&l| l + 1);
                idx[start..].iter().map(move |&k| {
                    let mut d = c.clone();
                    d.push(k);
                    d
                })
            })
            .collect();
    }
    for c in combos {
        let m = nalgebra::DMatrix::from_fn(n, n, |r, col| rows[c[r]].0[col]);
        let b = nalgebra::DVector::from_fn(n, |r, _| rows[c[r]].1);
        let Some(x) = m.lu().solve(&b) else { continue };
        if rows.iter().all(|(a, rhs)| a.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9) {
            let v: f64 = lp.objective.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lp_agrees_with_vertex_enumeration(
        n in 2usize..=3,
        cuts in prop::collection::vec(-1.0f64..1.0, 3 * 5),
        rhs in prop::collection::vec(-0.5f64..2.0, 5),
        obj in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let lp = bounded_lp(n, &cuts[..n * 5], &rhs, &obj[..n]);
        match (lp.solve().unwrap(), vertex_max(&lp)) {
            (LpOutcome::Optimal { value, point }, Some(best)) => {
                prop_assert!((value - best).abs() <= 1e-7, "{value} vs {best}");
                prop_assert!(lp.violation(&point) <= 1e-8);
            }
            (LpOutcome::Infeasible, None) => {}
            (got, want) => prop_assert!(false, "solver {got:?} oracle {want:?}"),
        }
    }

    #[test]
    fn lp_duality_gap(
        n in 2usize..=10,
        cuts in prop::collection::vec(-1.0f64..1.0, 10 * 10),
        obj in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        // rhs = 1 keeps the origin feasible
        let m = 10;
        let lp = bounded_lp(n, &cuts[..n * m], &vec![1.0; m], &obj[..n]);
        let LpOutcome::Optimal { value, .. } = lp.solve().unwrap() else {
            return Err(TestCaseError::fail("bounded feasible LP not optimal"));
        };
        // dual: min bᵀy s.t. Aᵀy = c, y ≥ 0, as max -bᵀy
        let rows: Vec<(Vec<f64>, f64)> = lp.ineq_rows.iter().cloned().zip(lp.ineq_rhs.iter().copied()).collect();
        let mut dual = LinearProgram::new(rows.len());
        for k in 0..n {
            dual.push_eq(rows.iter().map(|(a, _)| a[k]).collect(), obj[k]);
        }
        for r in 0..rows.len() {
            let mut e = vec![0.0; rows.len()];
            e[r] = -1.0;
            dual.push_ineq(e, 0.0);
        }
        let dual = dual.with_objective(rows.iter().map(|(_, b)| -b).collect());
        let LpOutcome::Optimal { value: dv, .. } = dual.solve().unwrap() else {
            return Err(TestCaseError::fail("dual not optimal"));
        };
        prop_assert!((value + dv).abs() <= 1e-7, "primal {value} dual {}", -dv);
    }
}
