/// Step-decayed learning rate: `lr0` until 3/5 of the run, `lr0 / 2` until
/// 4/5, then `lr0 / 4`.
pub fn lr_at_step(step: usize, total_steps: usize, lr0: f64) -> f64 {
    // integer comparisons keep the boundaries exact
    if 5 * step < 3 * total_steps {
        lr0
    } else if 5 * step < 4 * total_steps {
        lr0 / 2.0
    } else {
        lr0 / 4.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        assert_eq!(lr_at_step(0, 100, 1e-4), 1e-4);
        assert_eq!(lr_at_step(59, 100, 1e-4), 1e-4);
        assert_eq!(lr_at_step(60, 100, 1e-4), 5e-5);
        assert_eq!(lr_at_step(79, 100, 1e-4), 5e-5);
        assert_eq!(lr_at_step(80, 100, 1e-4), 2.5e-5);
        assert_eq!(lr_at_step(99, 100, 1e-4), 2.5e-5);
    }

    #[test]
    fn non_increasing() {
        for total in [1, 7, 10, 33, 250] {
            let lrs: Vec<f64> = (0..total).map(|s| lr_at_step(s, total, 1e-3)).collect();
            assert!(lrs.windows(2).all(|w| w[1] <= w[0]), "total {total}");
        }
    }
}
