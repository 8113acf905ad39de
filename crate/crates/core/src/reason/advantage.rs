use crate::math::{mean, population_std};

/// Group-normalized advantages. Constant groups return exact zeros rather
/// than rounding noise divided by epsilon.
pub fn group_advantages(rewards: &[f64], adv_epsilon: f64) -> Vec<f64> {
    let m = mean(rewards);
    if rewards.iter().all(|&r| r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let denom = population_std(rewards) + adv_epsilon;
    let mut adv: Vec<f64> = rewards.iter().map(|r| (r - m) / denom).collect();
    // Fold the residual of the floating-point mean back in so the group sums
    // to zero as tightly as the representation allows.
    let residual = adv.iter().sum::<f64>() / adv.len() as f64;
    for a in &mut adv {
        *a -= residual;
    }
    adv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = group_advantages(&[2.0, 2.0, 0.0, 0.0], 1e-6);
        for (x, y) in a.iter().zip([1.0, 1.0, -1.0, -1.0]) {
            assert!((x - y).abs() < 2e-6);
        }
        assert_eq!(group_advantages(&[5.0; 4], 1e-6), vec![0.0; 4]);
        let a = group_advantages(&[1.0, 0.0], 1e-6);
        assert!((a[0] - 1.0).abs() < 2e-6 && (a[1] + 1.0).abs() < 2e-6);
    }

    #[test]
    fn zero_sum_on_awkward_values() {
        let r = [0.1, 0.7, -1.3, 2.0, 0.9, -0.45, 1e-3];
        assert!(group_advantages(&r, 1e-6).iter().sum::<f64>().abs() < 1e-12);
    }
}
