use crate::error::{Error, Result};

pub const KERNEL: usize = 2;
pub const POOL: usize = 2;

/// Hyperparameters of the conv-pool-conv-dense-dense-dropout-linear network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub num_qubits: usize,
    pub filters: usize,
    pub dense: [usize; 2],
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            filters: 25,
            dense: [512, 256],
            dropout: 0.5,
            learning_rate: 0.01,
            batch_size: 100,
            max_epochs: 300,
            seed: 0,
        }
    }

    /// Input grid: 6^⌈m/2⌉ rows × 6^⌊m/2⌋ columns.
    pub fn input_shape(&self) -> (usize, usize) {
        let m = self.num_qubits as u32;
        (6usize.pow(m.div_ceil(2)), 6usize.pow(m / 2))
    }

    pub fn conv1_shape(&self) -> (usize, usize) {
        let (h, w) = self.input_shape();
        (h.saturating_sub(KERNEL - 1), w.saturating_sub(KERNEL - 1))
    }

    pub fn pool_shape(&self) -> (usize, usize) {
        let (h, w) = self.conv1_shape();
        (h / POOL, w / POOL)
    }

    pub fn conv2_shape(&self) -> (usize, usize) {
        let (h, w) = self.pool_shape();
        (h.saturating_sub(KERNEL - 1), w.saturating_sub(KERNEL - 1))
    }

    pub fn flat_len(&self) -> usize {
        let (h, w) = self.conv2_shape();
        h * w * self.filters
    }

    pub fn output_len(&self) -> usize {
        4usize.pow(self.num_qubits as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(1..=4).contains(&self.num_qubits) {
            return bad(format!("num_qubits must be in 1..=4, got {}", self.num_qubits));
        }
        let (h, w) = self.input_shape();
        let (ph, pw) = self.pool_shape();
        if h < KERNEL || w < KERNEL || ph < KERNEL || pw < KERNEL {
            return bad(format!(
                "{}-qubit input grid {h}x{w} is too small for two {KERNEL}x{KERNEL} convolutions",
                self.num_qubits
            ));
        }
        if self.filters == 0 || self.dense.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout rate must be in [0, 1), got {}", self.dropout));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_per_qubit_count() {
        let c2 = NetworkConfig::new(2);
        assert_eq!(c2.input_shape(), (6, 6));
        assert_eq!(c2.conv1_shape(), (5, 5));
        assert_eq!(c2.pool_shape(), (2, 2));
        assert_eq!(c2.conv2_shape(), (1, 1));
        assert_eq!(c2.flat_len(), 25);
        assert_eq!(c2.output_len(), 16);

        let c3 = NetworkConfig::new(3);
        assert_eq!(c3.input_shape(), (36, 6));
        assert_eq!(c3.conv2_shape(), (16, 1));

        let c4 = NetworkConfig::new(4);
        assert_eq!(c4.input_shape(), (36, 36));
        assert_eq!(c4.conv2_shape(), (16, 16));
        for c in [c2, c3, c4] {
            c.validate().unwrap();
        }
    }

    #[test]
    fn single_qubit_is_rejected() {
        assert!(NetworkConfig::new(1).validate().is_err());
    }

    #[test]
    fn bad_hyperparameters_are_rejected() {
        let mut c = NetworkConfig::new(2);
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::new(2);
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }
}
