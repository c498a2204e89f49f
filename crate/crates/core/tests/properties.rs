use proptest::prelude::*;
use usemo::baselines::{scalarize, ScalarizationWeights};
use usemo::gp::{GpModel, Normalizer, SeKernelParams};
use usemo::metrics::{hypervolume, r2_distance, IdealFront, ReferencePoint};
use usemo::moo::{solve_vector, Nsga2Config};
use usemo::pareto::{dominates, pareto_filter, BoxDomain, Evaluation, InputPoint, ObjectiveVector, ParetoArchive};

fn grid_vec(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..6).prop_map(f64::from), k)
}

fn front(k: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(grid_vec(k), 0..max)
}

fn ovs(points: &[Vec<f64>]) -> Vec<ObjectiveVector> {
    points.iter().map(|p| ObjectiveVector::new(p.clone()).unwrap()).collect()
}

fn sorted(mut v: Vec<ObjectiveVector>) -> Vec<Vec<f64>> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.into_iter().map(ObjectiveVector::into_inner).collect()
}

proptest! {
    #[test]
    fn dominance_is_a_strict_partial_order(a in grid_vec(3), b in grid_vec(3), c in grid_vec(3)) {
        prop_assert!(!dominates(&a, &a).unwrap());
        if dominates(&a, &b).unwrap() {
            prop_assert!(!dominates(&b, &a).unwrap());
            if dominates(&b, &c).unwrap() {
                prop_assert!(dominates(&a, &c).unwrap());
            }
        }
    }

    #[test]
    fn pareto_filter_is_idempotent_and_sound(points in front(3, 25)) {
        let pts = ovs(&points);
        let f = pareto_filter(&pts).unwrap();
        prop_assert_eq!(pareto_filter(&f).unwrap(), f.clone());
        for p in &pts {
            let covered = f.iter().any(|q| dominates(q, p).unwrap() || q == p);
            prop_assert!(covered);
        }
        for (i, a) in f.iter().enumerate() {
            for b in &f[i + 1..] {
                prop_assert!(!dominates(a, b).unwrap() && !dominates(b, a).unwrap() && a != b);
            }
        }
    }

    #[test]
    fn archive_front_independent_of_insert_order(points in front(2, 20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let evals: Vec<Evaluation> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Evaluation {
                input: InputPoint(vec![i as f64]),
                output: ObjectiveVector::new(p.clone()).unwrap(),
                iteration: i,
            })
            .collect();
        let mut shuffled = evals.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = ParetoArchive::from_evaluations(&evals).unwrap();
        let b = ParetoArchive::from_evaluations(&shuffled).unwrap();
        prop_assert_eq!(sorted(a.front()), sorted(b.front()));
        prop_assert_eq!(sorted(a.front()), sorted(pareto_filter(&ovs(&points)).unwrap()));
    }

    #[test]
    fn hypervolume_monotone_and_filter_invariant(points in front(3, 12), extra in grid_vec(3)) {
        let r = ReferencePoint(vec![6.0; 3]);
        let hv = hypervolume(&points, &r).unwrap();
        let filtered = pareto_filter(&ovs(&points)).unwrap();
        prop_assert!((hypervolume(&filtered, &r).unwrap() - hv).abs() <= 1e-9);
        let mut more = points.clone();
        more.push(extra);
        prop_assert!(hypervolume(&more, &r).unwrap() >= hv - 1e-9);
        let mut rev = points.clone();
        rev.reverse();
        prop_assert!((hypervolume(&rev, &r).unwrap() - hv).abs() <= 1e-9);
        prop_assert!(hv <= 6f64.powi(3) + 1e-9);
    }

    #[test]
    fn r2_is_zero_on_the_ideal_front(points in front(2, 10)) {
        prop_assume!(!points.is_empty());
        let ideal = IdealFront::filtered(ovs(&points));
        prop_assert_eq!(r2_distance(ideal.points(), &ideal).unwrap(), 0.0);
    }

    #[test]
    fn normalizer_round_trips(values in prop::collection::vec(-1e3f64..1e3, 1..20), y in -1e3f64..1e3) {
        let n = Normalizer::from_values(&values);
        prop_assert!((n.denormalize(n.normalize(y)) - y).abs() <= 1e-9 * y.abs().max(1.0));
    }

    #[test]
    fn unit_cube_round_trips(u in prop::collection::vec(0.0f64..=1.0, 3)) {
        let b = BoxDomain::new(vec![-5.0, 0.0, 2.0], vec![10.0, 15.0, 2.5]).unwrap();
        let x = b.from_unit(&u);
        prop_assert!(b.contains(&x));
        for (a, c) in b.to_unit(&x).iter().zip(&u) {
            prop_assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn scalarization_is_monotone(y in prop::collection::vec(0.0f64..1.0, 3), l in prop::collection::vec(0.05f64..1.0, 3), i in 0usize..3, eps in 1e-3f64..0.5) {
        let s: f64 = l.iter().sum();
        let mut lambda: Vec<f64> = l.iter().map(|v| v / s).collect();
        let resid = 1.0 - lambda.iter().sum::<f64>();
        lambda[0] += resid;
        let w = ScalarizationWeights::new(lambda, 0.05).unwrap();
        let mut better = y.clone();
        better[i] -= eps;
        prop_assert!(scalarize(&better, &w).unwrap() < scalarize(&y, &w).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gp_variance_shrinks_with_more_data(
        xs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 2..10),
        extra in prop::collection::vec(0.0f64..1.0, 2),
        probe in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let f = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1];
        let params = SeKernelParams::new(1.3, vec![0.3, 0.5], 1e-4).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| f(x)).collect();
        let small = GpModel::fit(&xs, &ys, params.clone()).unwrap();
        let mut xs2 = xs.clone();
        xs2.push(extra.clone());
        let mut ys2 = ys.clone();
        ys2.push(f(&extra));
        let big = GpModel::fit(&xs2, &ys2, params).unwrap();
        // with the kernel fixed, the posterior variance does not depend on targets
        let v = |m: &GpModel| m.posterior(&probe).stddev.powi(2);
        prop_assert!(v(&big) <= v(&small) * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn nsga2_returns_mutually_nondominated_points(seed in 0u64..1000) {
        let cfg = Nsga2Config::with_budget(20, 200, seed);
        let mut f = |x: &[f64]| vec![x[0], (1.0 - x[0]).powi(2) + x[1]];
        let out = solve_vector(&mut f, &BoxDomain::unit(2), &cfg).unwrap();
        prop_assert!(!out.is_empty());
        for a in &out {
            for b in &out {
                prop_assert!(!dominates(&a.objectives, &b.objectives).unwrap());
            }
        }
    }
}
