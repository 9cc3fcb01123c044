use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::ParameterSet;

/// Weighted average `Σ (n_k / n) · w_k` of client weights, `n = Σ n_k`.
///
/// Accumulates in f64. Per coordinate, the exact products `n_k · w_k` are
/// summed in sorted order, so the result is independent of update order and
/// identical updates reproduce themselves exactly.
pub fn fedavg_aggregate(updates: &[(usize, &ParameterSet)]) -> Result<ParameterSet> {
    let Some(&(_, first)) = updates.first() else {
        return Err(Error::protocol("no client updates to aggregate"));
    };
    for (k, &(n_k, w)) in updates.iter().enumerate() {
        if n_k == 0 {
            return Err(Error::protocol(format!("update {k} has zero samples")));
        }
        if !first.congruent(w) {
            return Err(Error::protocol(format!("update {k} is not shape-congruent with update 0")));
        }
    }
    let n: f64 = updates.iter().map(|&(n_k, _)| n_k as f64).sum();
    let mut out = first.clone();
    let mut terms: Vec<f64> = Vec::with_capacity(updates.len());
    for (t, target) in out.tensors_mut().enumerate() {
        let sources: Vec<(f64, &[f32])> = updates
            .iter()
            .map(|&(n_k, w)| (n_k as f64, w.tensors().nth(t).unwrap().data()))
            .collect();
        for (j, value) in target.data_mut().iter_mut().enumerate() {
            terms.clear();
            terms.extend(sources.iter().map(|&(n_k, data)| n_k * f64::from(data[j])));
            terms.sort_unstable_by(f64::total_cmp);
            *value = (terms.iter().sum::<f64>() / n) as f32;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{InputShape, LayerKind, ModelSpec};
    use alloc::vec;

    fn spec() -> ModelSpec {
        ModelSpec::new(
            InputShape::square(1, 1),
            2,
            vec![LayerKind::Flatten, LayerKind::Dense { units: 2 }, LayerKind::Softmax],
        )
    }

    fn params(v: [f32; 4]) -> ParameterSet {
        ParameterSet::from_flat(&spec(), &v).unwrap()
    }

    #[test]
    fn weighted_mean_by_hand() {
        let a = params([1.0; 4]);
        let b = params([2.0; 4]);
        let out = fedavg_aggregate(&[(2, &a), (6, &b)]).unwrap();
        assert!(out.flat().iter().all(|&v| (v - 1.75).abs() < 1e-7));
    }

    #[test]
    fn single_and_identical_updates_are_fixed_points() {
        let a = params([0.1, -3.3, 7.77, 1e-8]);
        assert_eq!(fedavg_aggregate(&[(5, &a)]).unwrap(), a);
        assert_eq!(fedavg_aggregate(&[(3, &a), (11, &a), (1, &a)]).unwrap(), a);
    }

    #[test]
    fn contract_violations() {
        assert!(matches!(fedavg_aggregate(&[]), Err(Error::Protocol(_))));
        let a = params([1.0; 4]);
        assert!(matches!(fedavg_aggregate(&[(0, &a)]), Err(Error::Protocol(_))));
        let other_spec = ModelSpec::new(
            InputShape::square(1, 2),
            2,
            vec![LayerKind::Flatten, LayerKind::Dense { units: 2 }, LayerKind::Softmax],
        );
        let b = ParameterSet::zeros(&other_spec).unwrap();
        assert!(matches!(fedavg_aggregate(&[(1, &a), (1, &b)]), Err(Error::Protocol(_))));
    }
}
