//! Random HN-C instances for bound verification.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::associative::{context_patterns, ContextSet, HncModel, QueryState};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub d_m: usize,
    pub d_q: usize,
    pub m: usize,
    /// Copies of the target context vector, `1..=m`.
    pub t: usize,
    pub gamma: f64,
    pub delta_z_norm: f64,
}

impl InstanceShape {
    /// Multiplicity for a duplicate fraction: `max(1, round(f·M))`.
    pub fn multiplicity(m: usize, dup_fraction: f64) -> usize {
        ((dup_fraction * m as f64).round() as usize).clamp(1, m)
    }
}

#[derive(Debug, Clone)]
pub struct BoundInstance {
    pub model: HncModel,
    pub context: ContextSet,
    pub query: QueryState,
    pub u_star: Vec<f64>,
    pub target_index: usize,
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Gaussian memories, context and query; the target vector is repeated `t`
/// times at random positions and `u* = z_target + Δz` with `‖Δz‖` fixed.
pub fn random_instance(seed: u64, shape: InstanceShape) -> Result<BoundInstance> {
    let mut r = rng::stream(seed);
    let scale = 1.0 / (shape.d_m as f64).sqrt();
    let xi_q = gaussian_matrix(&mut r, shape.d_m, shape.d_q, scale);
    let xi_k = gaussian_matrix(&mut r, shape.d_m, shape.d_q, scale);
    let model = HncModel::new(xi_q, xi_k, None, shape.gamma)?;

    let target = gaussian_matrix(&mut r, shape.d_m, 1, 1.0);
    let others = gaussian_matrix(&mut r, shape.d_m, shape.m - shape.t, 1.0);
    let order = rng::fisher_yates_prefix(&mut r, shape.m, shape.m);
    let lambda = DMatrix::from_fn(shape.d_m, shape.m, |i, j| {
        let src = order[j];
        if src < shape.t {
            target[(i, 0)]
        } else {
            others[(i, src - shape.t)]
        }
    });
    let target_index = order.iter().position(|&s| s < shape.t).expect("t >= 1");
    let context = ContextSet::new(lambda)?;

    let sigma = DVector::from_fn(shape.d_m, |_, _| r.sample::<f64, _>(StandardNormal));
    let query = QueryState::new(&model, sigma)?;

    let z = context_patterns(&model, &context)?;
    let dir = DVector::from_fn(shape.d_q, |_, _| r.sample::<f64, _>(StandardNormal));
    let dir = dir.normalize();
    let u_star = z
        .column(target_index)
        .iter()
        .zip(dir.iter())
        .map(|(a, b)| a + shape.delta_z_norm * b)
        .collect();
    Ok(BoundInstance {
        model,
        context,
        query,
        u_star,
        target_index,
    })
}

/// Shape drawn from the soundness ranges: `d_m, d_q ∈ 2..=8`, `M ∈ 1..=32`,
/// log-uniform `γ ∈ [0.1, 10]`, duplicate fraction in `[0, 1]`,
/// `‖Δz‖ ∈ [0, max_delta_z]`.
pub fn random_shape(seed: u64, max_delta_z: f64) -> InstanceShape {
    let mut r = rng::stream(seed);
    let d_m = r.gen_range(2..=8);
    let d_q = r.gen_range(2..=8);
    let m = r.gen_range(1..=32);
    let gamma = 10f64.powf(r.gen_range(-1.0..=1.0));
    let t = InstanceShape::multiplicity(m, r.gen_range(0.0..=1.0));
    let delta_z_norm = r.gen_range(0.0..=max_delta_z);
    InstanceShape {
        d_m,
        d_q,
        m,
        t,
        gamma,
        delta_z_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::separation;

    #[test]
    fn multiplicity_matches_request() {
        for seed in 0..50 {
            let shape = random_shape(seed, 0.3);
            let inst = random_instance(seed, shape).unwrap();
            let sep =
                separation(&inst.query, &inst.context, &inst.model, inst.target_index).unwrap();
            assert_eq!(sep.duplicate_count, shape.t);
            assert_eq!(inst.context.len(), shape.m);
        }
    }

    #[test]
    fn multiplicity_rounding() {
        assert_eq!(InstanceShape::multiplicity(8, 0.0), 1);
        assert_eq!(InstanceShape::multiplicity(8, 0.5), 4);
        assert_eq!(InstanceShape::multiplicity(8, 1.0), 8);
        assert_eq!(InstanceShape::multiplicity(1, 0.3), 1);
    }
}
