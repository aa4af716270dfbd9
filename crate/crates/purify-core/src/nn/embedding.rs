//! Sinusoidal timestep embeddings for conditioning the noise predictor.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::DenseTensor;

/// Element `2i` is `sin(t / 10000^(2i/dim))`, element `2i+1` the matching cos.
pub fn sinusoidal_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::InvalidParameter {
            context: "sinusoidal_embedding",
            message: String::from("dimension must be even and positive"),
        });
    }
    let mut out = vec![0.0; dim];
    for i in 0..dim / 2 {
        let freq = math::powf(10000.0, 2.0 * i as f64 / dim as f64);
        let angle = t as f64 / freq;
        out[2 * i] = math::sin(angle);
        out[2 * i + 1] = math::cos(angle);
    }
    Ok(out)
}

/// One embedding row per step index.
pub fn embedding_matrix(steps: &[usize], dim: usize) -> Result<DenseTensor> {
    let mut out = DenseTensor::zeros(steps.len(), dim);
    for (r, &t) in steps.iter().enumerate() {
        let row = sinusoidal_embedding(t, dim)?;
        out.row_mut(r).copy_from_slice(&row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_zero_alternates_zero_one() {
        let e = sinusoidal_embedding(0, 8).unwrap();
        assert_eq!(e, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn values_stay_in_unit_interval() {
        for t in [1usize, 17, 999, 100_000] {
            let e = sinusoidal_embedding(t, 16).unwrap();
            assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn nearby_steps_are_distinct() {
        let a = sinusoidal_embedding(1, 8).unwrap();
        let b = sinusoidal_embedding(2, 8).unwrap();
        let dist: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        assert!(math::sqrt(dist) > 0.1);
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(sinusoidal_embedding(3, 7).is_err());
    }
}
