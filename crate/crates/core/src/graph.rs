//! Band-similarity graph and its Laplacian quadratic form.

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

#[derive(Clone, Debug)]
pub struct SpectralGraph {
    weights: Matrix,
    laplacian: Matrix,
    pub sigma: f64,
    pub half_width: usize,
}

impl SpectralGraph {
    /// Weights `exp(-‖Y_i − Y_j‖²_F / σ²)` between bands at most `half_width`
    /// apart; zero elsewhere. `y` is an `m×n×S` cube.
    pub fn build(y: &DenseTensor, sigma: f64, half_width: usize) -> Result<Self> {
        let bands = match y.shape() {
            [_, _, s] => *s,
            shape => return Err(Error::shape(format!("expected an m×n×S cube, got {shape:?}"))),
        };
        if bands < 2 {
            return Err(Error::invalid(format!("a band graph needs at least 2 bands, got {bands}")));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if half_width == 0 {
            return Err(Error::invalid("adjacency half-width must be at least 1"));
        }
        let pixels = y.len() / bands;
        let band = |b: usize| &y.data()[b * pixels..(b + 1) * pixels];
        let mut weights = Matrix::zeros(bands, bands);
        for i in 0..bands {
            for j in i + 1..bands.min(i + half_width + 1) {
                let dist: f64 = band(i).iter().zip(band(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                let w = (-dist / (sigma * sigma)).exp();
                weights.set(i, j, w);
                weights.set(j, i, w);
            }
        }
        Ok(SpectralGraph::from_weights(weights, sigma, half_width))
    }

    /// Graph from explicit symmetric weights.
    pub fn from_weights(weights: Matrix, sigma: f64, half_width: usize) -> Self {
        let s = weights.rows();
        let mut laplacian = weights.clone().scaled(-1.0);
        for i in 0..s {
            let degree: f64 = weights.row(i).iter().sum();
            laplacian.set(i, i, degree - weights.get(i, i));
        }
        SpectralGraph { weights, laplacian, sigma, half_width }
    }

    pub fn bands(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// `trace(uᵀ L u)` for a `S×q` matrix `u`.
    pub fn wgr_value(&self, u: &Matrix) -> Result<f64> {
        if u.rows() != self.bands() {
            return Err(Error::shape(format!("matrix has {} rows, graph has {} bands", u.rows(), self.bands())));
        }
        let lu = self.laplacian.matmul(u)?;
        Ok(u.dot(&lu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(bands: &[Vec<f64>]) -> DenseTensor {
        let data: Vec<f64> = bands.iter().flatten().copied().collect();
        DenseTensor::new(vec![2, 2, bands.len()], data).unwrap()
    }

    #[test]
    fn identical_adjacent_bands_have_unit_weight() {
        let y = cube(&[vec![1., 2., 3., 4.], vec![1., 2., 3., 4.]]);
        let g = SpectralGraph::build(&y, 10.0, 1).unwrap();
        assert_eq!(g.weights().get(0, 1), 1.0);
        assert_eq!(g.weights().get(0, 0), 0.0);
    }

    #[test]
    fn far_bands_get_zero_weight() {
        let y = cube(&[vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]]);
        let g = SpectralGraph::build(&y, 1.0, 1).unwrap();
        assert_eq!(g.weights().get(0, 2), 0.0);
        let g2 = SpectralGraph::build(&y, 1.0, 2).unwrap();
        assert_eq!(g2.weights().get(0, 2), 1.0);
    }

    #[test]
    fn three_band_hand_example() {
        // Y3 = Y1 + δ with ‖δ‖² = σ² = 4
        let y1 = vec![0.3, 0.1, 0.5, 0.9];
        let y3: Vec<f64> = y1.iter().zip([1.0, 1.0, -1.0, 1.0]).map(|(a, d)| a + d).collect();
        let g = SpectralGraph::build(&cube(&[y1.clone(), y1, y3]), 2.0, 1).unwrap();
        assert_eq!(g.weights().get(0, 1), 1.0);
        assert!((g.weights().get(1, 2) - (-1f64).exp()).abs() < 1e-15);
        for i in 0..3 {
            assert!(g.laplacian().row(i).iter().sum::<f64>().abs() < 1e-15);
        }

        let u = Matrix::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let v = g.wgr_value(&u).unwrap();
        assert!((v - (1.0 + (-1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn null_space_and_zero_weights() {
        let y = cube(&[vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]]);
        let g = SpectralGraph::build(&y, 3.0, 1).unwrap();
        let constant = Matrix::from_fn(3, 2, |_, j| j as f64 + 0.5);
        assert!(g.wgr_value(&constant).unwrap().abs() < 1e-14);

        let empty = SpectralGraph::from_weights(Matrix::zeros(3, 3), 1.0, 1);
        let u = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(empty.wgr_value(&u).unwrap(), 0.0);
        assert!(g.wgr_value(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let one = DenseTensor::zeros(vec![2, 2, 1]).unwrap();
        assert!(SpectralGraph::build(&one, 1.0, 1).is_err());
        let two = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        assert!(SpectralGraph::build(&two, 0.0, 1).is_err());
        assert!(SpectralGraph::build(&two, 1.0, 0).is_err());
    }
}
