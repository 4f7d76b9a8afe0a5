use hnc_icl::associative::{
    hnc_retrieve, softmax, ClassicHopfield, ContextSet, HncModel, QueryState, Schedule,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, f64)> {
    (1usize..5, 1usize..8).prop_flat_map(|(d, m)| {
        (
            Just(d),
            Just(m),
            prop::collection::vec(-3.0f64..3.0, d * m),
            prop::collection::vec(-3.0f64..3.0, d),
            0.01f64..20.0,
        )
    })
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(xs in prop::collection::vec(-500.0f64..500.0, 1..20)) {
        let w = softmax(&xs);
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retrieval_stays_in_the_convex_hull((d, m, ctx, sigma, gamma) in instance()) {
        let model = HncModel::identity(d, gamma).unwrap();
        let lambda = DMatrix::from_column_slice(d, m, &ctx);
        let c = ContextSet::new(lambda.clone()).unwrap();
        let q = QueryState::from_slice(&model, &sigma).unwrap();
        let r = hnc_retrieve(&model, &c, &q).unwrap();
        prop_assert!((r.weights.sum() - 1.0).abs() < 1e-12);
        for i in 0..d {
            let row = lambda.row(i);
            prop_assert!(r.u_new[i] >= row.min() - 1e-9 && r.u_new[i] <= row.max() + 1e-9);
        }
    }

    #[test]
    fn retrieval_ignores_context_order((d, m, ctx, sigma, gamma) in instance(), seed in any::<u64>()) {
        let model = HncModel::identity(d, gamma).unwrap();
        let c = ContextSet::new(DMatrix::from_column_slice(d, m, &ctx)).unwrap();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let q = QueryState::from_slice(&model, &sigma).unwrap();
        let a = hnc_retrieve(&model, &c, &q).unwrap();
        let b = hnc_retrieve(&model, &c.permuted(&perm).unwrap(), &q).unwrap();
        prop_assert!((a.u_new - b.u_new).amax() < 1e-12);
    }

    #[test]
    fn classic_energy_never_increases(
        patterns in prop::collection::vec(prop::collection::vec(prop::bool::ANY, 12), 1..4),
        start in prop::collection::vec(prop::bool::ANY, 12),
    ) {
        let to_spins = |v: &Vec<bool>| v.iter().map(|&b| if b { 1i8 } else { -1 }).collect::<Vec<i8>>();
        let net = ClassicHopfield::store(&patterns.iter().map(to_spins).collect::<Vec<_>>()).unwrap();
        let mut state = to_spins(&start);
        let mut e = net.energy(&state).unwrap();
        for _ in 0..3 {
            for i in 0..12 {
                net.step(&mut state, i).unwrap();
                let next = net.energy(&state).unwrap();
                prop_assert!(next <= e + 1e-12);
                e = next;
            }
        }
        let out = net.update(&to_spins(&start), Schedule::Sequential, 50).unwrap();
        prop_assert!(out.converged);
    }
}
