use super::network::NetworkParams;
use crate::error::{Error, Result};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// accumulator += g²; value −= lr·g / (√accumulator + ε)
pub fn adagrad_step(params: &mut NetworkParams, grads: &[f64], lr: f64) -> Result<()> {
    if grads.len() != params.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gradients for {} parameters",
            grads.len(),
            params.values.len()
        )));
    }
    for ((v, acc), &g) in params.values.iter_mut().zip(params.accumulators.iter_mut()).zip(grads) {
        *acc += g * g;
        *v -= lr * g / (acc.sqrt() + ADAGRAD_EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::config::NetworkConfig;
    use crate::sampling::RandomSource;

    fn params() -> NetworkParams {
        let cfg = NetworkConfig { filters: 2, dense: [8, 4], ..NetworkConfig::new(2) };
        NetworkParams::init(&cfg, &mut RandomSource::new(1)).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = params();
        let before = p.clone();
        let zeros = vec![0.0; p.len()];
        adagrad_step(&mut p, &zeros, 0.01).unwrap();
        assert_eq!(p.values(), before.values());
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = params();
        let before = p.values().to_vec();
        let grads: Vec<f64> = (0..p.len()).map(|i| if i % 2 == 0 { 0.3 } else { -2.0 }).collect();
        adagrad_step(&mut p, &grads, 0.01).unwrap();
        for ((a, b), g) in p.values().iter().zip(&before).zip(&grads) {
            assert!(((b - a) - 0.01 * g.signum()).abs() <= 1e-9);
        }
    }

    #[test]
    fn accumulators_never_decrease() {
        let mut p = params();
        let mut rng = RandomSource::new(2);
        let mut prev = p.accumulators().to_vec();
        for _ in 0..100 {
            let grads: Vec<f64> = (0..p.len()).map(|_| rng.standard_normal()).collect();
            adagrad_step(&mut p, &grads, 0.01).unwrap();
            assert!(p.accumulators().iter().zip(&prev).all(|(a, b)| a >= b && *a >= 0.0));
            prev = p.accumulators().to_vec();
        }
    }

    #[test]
    fn length_mismatch() {
        let mut p = params();
        assert!(adagrad_step(&mut p, &[1.0], 0.01).is_err());
    }
}
