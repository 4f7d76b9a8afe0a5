mod common;

use hnc_icl::associative::{
    attention_view, context_patterns, hnc_retrieve, ClassicHopfield, ContextSet, HncModel,
    QueryState, Schedule,
};
use hnc_icl::rng;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_pattern(r: &mut impl Rng, n: usize) -> Vec<i8> {
    (0..n)
        .map(|_| if r.gen::<bool>() { 1 } else { -1 })
        .collect()
}

#[test]
fn seed7_hebbian_weights_match_brute_force() {
    let mut r = rng::stream(7);
    let patterns: Vec<Vec<i8>> = (0..2).map(|_| random_pattern(&mut r, 20)).collect();
    let net = ClassicHopfield::store(&patterns).unwrap();
    for i in 0..20 {
        for j in 0..20 {
            let mut w = 0.0;
            if i != j {
                for p in &patterns {
                    w += (p[i] as f64) * (p[j] as f64);
                }
                w /= 20.0;
            }
            assert!((net.weights()[(i, j)] - w).abs() < 1e-15);
            assert_eq!(net.weights()[(i, j)], net.weights()[(j, i)]);
        }
    }
}

#[test]
fn seed7_recovers_pattern_from_two_flipped_bits() {
    let mut r = rng::stream(7);
    let patterns: Vec<Vec<i8>> = (0..2).map(|_| random_pattern(&mut r, 20)).collect();
    let net = ClassicHopfield::store(&patterns).unwrap();
    let mut cue = patterns[0].clone();
    cue[3] = -cue[3];
    cue[11] = -cue[11];
    let out = net.update(&cue, Schedule::Sequential, 20).unwrap();
    assert!(out.converged);
    assert_eq!(out.state, patterns[0]);
}

#[test]
fn seed7_energy_matches_quadratic_form() {
    let mut r = rng::stream(7);
    let patterns: Vec<Vec<i8>> = (0..2).map(|_| random_pattern(&mut r, 20)).collect();
    let net = ClassicHopfield::store(&patterns).unwrap();
    let state = random_pattern(&mut r, 20);
    let mut q = 0.0;
    for i in 0..20 {
        for j in 0..20 {
            if i == j {
                continue;
            }
            let mut w = 0.0;
            for p in &patterns {
                w += (p[i] * p[j]) as f64 / 20.0;
            }
            q += state[i] as f64 * w * state[j] as f64;
        }
    }
    assert!((net.energy(&state).unwrap() + 0.5 * q).abs() < 1e-12);
}

#[test]
fn synchronous_schedule_can_fail_to_converge() {
    // two-cycle: W = [[0,1],[1,0]] via pattern (1,1); state (1,-1) flips both each step
    let net = ClassicHopfield::store(&[vec![1, 1]]).unwrap();
    let out = net.update(&[1, -1], Schedule::Synchronous, 10).unwrap();
    assert!(!out.converged);
    let seq = net.update(&[1, -1], Schedule::Sequential, 10).unwrap();
    assert!(seq.converged);
}

fn gaussian(r: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

#[test]
fn seed3_attention_equivalence_and_eq2_oracle() {
    let mut r = rng::stream(3);
    let (d_m, d_q, m) = (5, 4, 7);
    let xi_q = gaussian(&mut r, d_m, d_q);
    let xi_k = gaussian(&mut r, d_m, d_q);
    let w_v = gaussian(&mut r, d_q, d_q);
    let model = HncModel::new(xi_q.clone(), xi_k.clone(), Some(w_v.clone()), 0.7).unwrap();
    let ctx = ContextSet::new(gaussian(&mut r, d_m, m)).unwrap();
    let sigma: Vec<f64> = (0..d_m).map(|_| r.sample(StandardNormal)).collect();
    let q = QueryState::from_slice(&model, &sigma).unwrap();

    let res = hnc_retrieve(&model, &ctx, &q).unwrap();
    let att = attention_view(&model, &ctx, &q).unwrap();
    let via = res.u_new.transpose() * &w_v;
    assert!((via - &att.output).amax() <= 1e-12);

    // plain-loop Eq. 2 on the same instance
    let rows = |mtx: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..mtx.nrows())
            .map(|i| mtx.row(i).iter().copied().collect())
            .collect()
    };
    let u = common::mat_t_vec(&rows(&xi_q), &sigma);
    let patterns: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let col: Vec<f64> = ctx.lambda().column(j).iter().copied().collect();
            common::mat_t_vec(&rows(&xi_k), &col)
        })
        .collect();
    let (w, u_new) = common::eq2(0.7, &u, &patterns);
    for j in 0..m {
        assert!((res.weights[j] - w[j]).abs() < 1e-12);
    }
    for i in 0..d_q {
        assert!((res.u_new[i] - u_new[i]).abs() < 1e-12);
        assert!((q.u()[i] - u[i]).abs() < 1e-12);
    }
    let z = context_patterns(&model, &ctx).unwrap();
    assert_eq!(z, att.k_t);
}
