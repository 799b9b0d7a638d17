use std::collections::BTreeMap;

use super::LossValue;
use crate::error::{Error, Result};

/// `Σ_t ‖β_t − β_mean‖` (unsquared); gradient block `betas`. The subgradient
/// of a term whose frame sits exactly at the mean is taken as zero.
pub fn shape_consistency(betas: &[Vec<f64>]) -> Result<LossValue> {
    let t = betas.len();
    if t == 0 {
        return Err(Error::Empty("shape sequence".into()));
    }
    let dims = betas[0].len();
    if betas.iter().any(|b| b.len() != dims) {
        return Err(Error::Format("shape vectors differ in length".into()));
    }
    let mut mean = vec![0.0; dims];
    for b in betas {
        for (m, x) in mean.iter_mut().zip(b) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);

    let mut value = 0.0;
    let mut units = vec![vec![0.0; dims]; t];
    for (b, u) in betas.iter().zip(units.iter_mut()) {
        let norm = b.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>().sqrt();
        value += norm;
        if norm > 0.0 {
            for ((ui, x), m) in u.iter_mut().zip(b).zip(&mean) {
                *ui = (x - m) / norm;
            }
        }
    }
    let mut unit_mean = vec![0.0; dims];
    for u in &units {
        for (a, x) in unit_mean.iter_mut().zip(u) {
            *a += x / t as f64;
        }
    }
    let grad = units
        .iter()
        .flat_map(|u| u.iter().zip(&unit_mean).map(|(x, m)| x - m))
        .collect();
    Ok(LossValue {
        value,
        gradients: BTreeMap::from([("betas", grad)]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let same = vec![vec![0.3, -1.0, 2.0]; 4];
        let l = shape_consistency(&same).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad("betas").iter().all(|&g| g == 0.0));

        let pair = vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]];
        assert_eq!(shape_consistency(&pair).unwrap().value, 2.0);

        let single = vec![vec![4.0, 5.0]];
        assert_eq!(shape_consistency(&single).unwrap().value, 0.0);
    }

    proptest! {
        #[test]
        fn permutation_invariant(rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..8), rot in 0usize..8) {
            let mut shuffled = rows.clone();
            let k = rot % rows.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = shape_consistency(&rows).unwrap().value;
            let b = shape_consistency(&shuffled).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
