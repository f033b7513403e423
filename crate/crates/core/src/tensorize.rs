//! Multiscale tensorization of image cubes and the observation model.
//!
//! An `M×N×S` cube with `M = M₁⋯M_d`, `N = N₁⋯N_d` becomes an order-`d+1`
//! tensor of shape `M₁N₁ × ⋯ × M_dN_d × S`. Row index `i` splits as
//! `i = i₁ + M₁(i₂ + M₂(…))` and likewise for columns, so scale 1 holds the
//! finest pixel offsets. Merged mode `t` has index `i_t + M_t·j_t`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{inverse_permutation, DenseTensor, Matrix};

/// Factorization of the two spatial extents into `d` scales.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorizationPlan {
    pub m_factors: Vec<usize>,
    pub n_factors: Vec<usize>,
}

/// Formats as `"8x8,5x5"`, the syntax [`TensorizationPlan::parse`] accepts.
impl std::fmt::Display for TensorizationPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, (m, n)) in self.m_factors.iter().zip(&self.n_factors).enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}x{n}")?;
        }
        Ok(())
    }
}

impl TensorizationPlan {
    pub fn new(m_factors: Vec<usize>, n_factors: Vec<usize>) -> Result<Self> {
        if m_factors.is_empty() || m_factors.len() != n_factors.len() {
            return Err(Error::invalid(format!(
                "row and column factorizations must have the same nonzero length, got {m_factors:?} and {n_factors:?}"
            )));
        }
        if m_factors.iter().chain(&n_factors).any(|&f| f == 0) {
            return Err(Error::invalid("scale factors must be at least 1"));
        }
        Ok(TensorizationPlan { m_factors, n_factors })
    }

    /// Parses `"8x8,5x5,2x2"`: one `MₜxNₜ` pair per scale.
    pub fn parse(s: &str) -> Result<Self> {
        let mut m = Vec::new();
        let mut n = Vec::new();
        for part in s.split(',') {
            let (a, b) = part
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| Error::Config(format!("plan entry {part:?} is not of the form MxN")))?;
            let parse = |v: &str| {
                v.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad plan factor {v:?} in {s:?}")))
            };
            m.push(parse(a)?);
            n.push(parse(b)?);
        }
        TensorizationPlan::new(m, n).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn scales(&self) -> usize {
        self.m_factors.len()
    }

    pub fn rows(&self) -> usize {
        self.m_factors.iter().product()
    }

    pub fn cols(&self) -> usize {
        self.n_factors.iter().product()
    }

    /// Extents of the tensorized cube: `[M₁N₁, …, M_dN_d, bands]`.
    pub fn tensor_shape(&self, bands: usize) -> Vec<usize> {
        self.m_factors.iter().zip(&self.n_factors).map(|(m, n)| m * n).chain(std::iter::once(bands)).collect()
    }

    /// Plan of a cube downsampled by `p`; the first scale absorbs the factor.
    pub fn downsampled(&self, p: usize) -> Result<Self> {
        if p == 0 || !self.m_factors[0].is_multiple_of(p) || !self.n_factors[0].is_multiple_of(p) {
            return Err(Error::invalid(format!(
                "downsampling factor {p} must divide the first scale {}x{}",
                self.m_factors[0], self.n_factors[0]
            )));
        }
        let mut lr = self.clone();
        lr.m_factors[0] /= p;
        lr.n_factors[0] /= p;
        Ok(lr)
    }

    fn check_cube(&self, x: &DenseTensor) -> Result<usize> {
        match x.shape() {
            [m, n, s] if *m == self.rows() && *n == self.cols() => Ok(*s),
            shape => Err(Error::shape(format!(
                "cube of shape {shape:?} does not match plan {}x{} ({:?} / {:?})",
                self.rows(),
                self.cols(),
                self.m_factors,
                self.n_factors
            ))),
        }
    }

    /// Mode order that interleaves `(M₁, N₁, M₂, N₂, …, S)` from `(M₁…M_d, N₁…N_d, S)`.
    fn interleave(&self) -> Vec<usize> {
        let d = self.scales();
        (0..d).flat_map(|t| [t, d + t]).chain(std::iter::once(2 * d)).collect()
    }
}

/// `T{x}`: `M×N×S` cube to its `M₁N₁×⋯×M_dN_d×S` tensor.
pub fn tensorize(x: &DenseTensor, plan: &TensorizationPlan) -> Result<DenseTensor> {
    let bands = plan.check_cube(x)?;
    let split: Vec<usize> =
        plan.m_factors.iter().chain(&plan.n_factors).copied().chain(std::iter::once(bands)).collect();
    x.reshape(&split)?.permute(&plan.interleave())?.into_reshape(&plan.tensor_shape(bands))
}

/// `T⁻¹{t}`: exact inverse of [`tensorize`].
pub fn detensorize(t: &DenseTensor, plan: &TensorizationPlan) -> Result<DenseTensor> {
    let d = plan.scales();
    if t.order() != d + 1 || t.shape()[..d] != plan.tensor_shape(1)[..d] {
        return Err(Error::shape(format!(
            "tensor of shape {:?} does not match plan {:?}",
            t.shape(),
            plan.tensor_shape(0)
        )));
    }
    let bands = t.shape()[d];
    let interleaved: Vec<usize> =
        plan.m_factors.iter().zip(&plan.n_factors).flat_map(|(&m, &n)| [m, n]).chain(std::iter::once(bands)).collect();
    t.reshape(&interleaved)?.permute(&inverse_permutation(&plan.interleave()))?.into_reshape(&[
        plan.rows(),
        plan.cols(),
        bands,
    ])
}

/// Mean over disjoint `p×p` spatial blocks, per band.
pub fn spatial_downsample(x: &DenseTensor, p: usize) -> Result<DenseTensor> {
    let (m, n, s) = match x.shape() {
        [m, n, s] => (*m, *n, *s),
        shape => return Err(Error::shape(format!("expected an M×N×S cube, got {shape:?}"))),
    };
    if p == 0 || m % p != 0 || n % p != 0 {
        return Err(Error::invalid(format!("downsampling factor {p} does not divide the spatial extents {m}x{n}")));
    }
    let (lm, ln) = (m / p, n / p);
    let mut out = DenseTensor::zeros(vec![lm, ln, s])?;
    let scale = 1.0 / (p * p) as f64;
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..s {
        for j in 0..n {
            for i in 0..m {
                dst[i / p + lm * (j / p + ln * b)] += src[i + m * (j + n * b)];
            }
        }
    }
    dst.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Band mixing `Z₍₃₎ = R X₍₃₎`.
pub fn spectral_downsample(x: &DenseTensor, srf: &Matrix) -> Result<DenseTensor> {
    if x.order() != 3 {
        return Err(Error::shape(format!("expected an M×N×S cube, got {:?}", x.shape())));
    }
    x.mode_product(srf, 2)
}

/// Adds i.i.d. Gaussian noise at the given signal-to-noise ratio (dB).
pub fn add_noise(x: &DenseTensor, snr_db: f64, seed: u64) -> Result<DenseTensor> {
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite, got {snr_db}")));
    }
    let signal = x.data().iter().map(|v| v * v).sum::<f64>();
    let variance = signal / (x.len() as f64 * 10f64.powf(snr_db / 10.0));
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(y)
}

/// Realized signal-to-noise ratio of `noisy` against `clean`, in dB.
pub fn empirical_snr_db(clean: &DenseTensor, noisy: &DenseTensor) -> Result<f64> {
    let noise = noisy.sub(clean)?;
    Ok(10.0 * (clean.frobenius_norm().powi(2) / noise.frobenius_norm().powi(2)).log10())
}

/// Averages the data mode of a first-scale factor over the `p×p` pixel
/// blocks its index map induces. `u1` has the data mode first, of extent
/// `M₁N₁`; the result has data extent `(M₁/p)(N₁/p)`.
pub fn downsample_first_factor(u1: &DenseTensor, p: usize, plan: &TensorizationPlan) -> Result<DenseTensor> {
    let (m1, n1) = (plan.m_factors[0], plan.n_factors[0]);
    if u1.shape()[0] != m1 * n1 {
        return Err(Error::shape(format!("first factor data extent {} is not {m1}x{n1}", u1.shape()[0])));
    }
    plan.downsampled(p)?;
    let rest = u1.len() / (m1 * n1);
    let as_image = u1.reshape(&[m1, n1, rest])?;
    let small = spatial_downsample(&as_image, p)?;
    let mut shape = u1.shape().to_vec();
    shape[0] = (m1 / p) * (n1 / p);
    small.into_reshape(&shape)
}

/// Spectral response and spatial degradation applied to a reference cube.
#[derive(Clone, Debug)]
pub struct DegradationModel {
    srf: Matrix,
    pub p: usize,
    pub snr_hsi_db: Option<f64>,
    pub snr_msi_db: Option<f64>,
}

impl DegradationModel {
    pub fn new(srf: Matrix, p: usize, snr_hsi_db: Option<f64>, snr_msi_db: Option<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("downsampling factor must be positive"));
        }
        Ok(DegradationModel { srf: normalize_srf(srf)?, p, snr_hsi_db, snr_msi_db })
    }

    pub fn srf(&self) -> &Matrix {
        &self.srf
    }

    /// Low-resolution HSI: block mean, then optional noise.
    pub fn observe_hsi(&self, x: &DenseTensor, seed: u64) -> Result<DenseTensor> {
        let y = spatial_downsample(x, self.p)?;
        match self.snr_hsi_db {
            Some(snr) => add_noise(&y, snr, seed),
            None => Ok(y),
        }
    }

    /// High-resolution MSI: spectral response, then optional noise.
    pub fn observe_msi(&self, x: &DenseTensor, seed: u64) -> Result<DenseTensor> {
        let z = spectral_downsample(x, &self.srf)?;
        match self.snr_msi_db {
            Some(snr) => add_noise(&z, snr, seed),
            None => Ok(z),
        }
    }
}

/// Rescales SRF rows to unit sum. Negative entries and all-zero rows are errors.
pub fn normalize_srf(srf: Matrix) -> Result<Matrix> {
    let mut srf = srf;
    for i in 0..srf.rows() {
        let row = srf.row(i);
        if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!("SRF row {i} has negative or non-finite entries")));
        }
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid(format!("SRF row {i} sums to zero")));
        }
        if (sum - 1.0).abs() > 1e-6 {
            log::warn!("SRF row {i} sums to {sum}; renormalizing");
        }
        for (j, v) in row.iter().enumerate() {
            srf.set(i, j, v / sum);
        }
    }
    Ok(srf)
}

/// Reads an SRF from headerless CSV: one row per MSI band, one column per HSI band.
pub fn read_srf_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Config(format!("{}: bad number {f:?}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: empty SRF file", path.display())));
    }
    Matrix::from_rows(&rows).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_srf_csv(path: &Path, srf: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| Error::Io(e.into()))?;
    for i in 0..srf.rows() {
        w.write_record(srf.row(i).iter().map(|v| format!("{v:e}"))).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: &[usize]) -> DenseTensor {
        let n: usize = shape.iter().product();
        DenseTensor::new(shape.to_vec(), (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn tensorize_index_map_4x4() {
        let plan = TensorizationPlan::new(vec![2, 2], vec![2, 2]).unwrap();
        let x = ramp(&[4, 4, 1]);
        let t = tensorize(&x, &plan).unwrap();
        assert_eq!(t.shape(), &[4, 4, 1]);
        // pixel (row 2, col 1), one-based → mode-1 index 2, mode-2 index 1
        assert_eq!(t.get(&[1, 0, 0]), x.get(&[1, 0, 0]));
        // every pixel, against the digit decomposition
        for i in 0..4 {
            for j in 0..4 {
                let (i1, i2) = (i % 2, i / 2);
                let (j1, j2) = (j % 2, j / 2);
                assert_eq!(t.get(&[i1 + 2 * j1, i2 + 2 * j2, 0]), x.get(&[i, j, 0]));
            }
        }
    }

    #[test]
    fn single_scale_is_a_reshape() {
        let plan = TensorizationPlan::new(vec![3], vec![4]).unwrap();
        let x = ramp(&[3, 4, 2]);
        assert_eq!(tensorize(&x, &plan).unwrap(), x.reshape(&[12, 2]).unwrap());
    }

    #[test]
    fn tensorize_rejects_mismatch() {
        let plan = TensorizationPlan::new(vec![2, 2], vec![2, 2]).unwrap();
        assert!(tensorize(&ramp(&[4, 6, 1]), &plan).is_err());
        assert!(detensorize(&ramp(&[4, 3, 1]), &plan).is_err());
    }

    #[test]
    fn plan_display_round_trips() {
        let plan = TensorizationPlan::parse("8x8, 5x4,2x3").unwrap();
        assert_eq!(plan.to_string(), "8x8,5x4,2x3");
        assert_eq!(TensorizationPlan::parse(&plan.to_string()).unwrap(), plan);
    }

    #[test]
    fn plan_parse() {
        let plan = TensorizationPlan::parse("8x8, 5x5,2x3").unwrap();
        assert_eq!(plan.m_factors, vec![8, 5, 2]);
        assert_eq!(plan.n_factors, vec![8, 5, 3]);
        assert_eq!(plan.tensor_shape(7), vec![64, 25, 6, 7]);
        assert!(TensorizationPlan::parse("8-8").is_err());
        assert!(TensorizationPlan::parse("0x2").is_err());
    }

    #[test]
    fn spatial_downsample_examples() {
        let c = DenseTensor::new(vec![4, 4, 2], vec![0.7; 32]).unwrap();
        let cd = spatial_downsample(&c, 2).unwrap();
        assert!(cd.data().iter().all(|v| (v - 0.7).abs() < 1e-15));

        let x = ramp(&[4, 4, 1]);
        assert_eq!(spatial_downsample(&x, 1).unwrap(), x);

        let y = spatial_downsample(&x, 2).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1]);
        assert_eq!(y.get(&[0, 0, 0]), 3.5);
        assert_eq!(y.get(&[0, 1, 0]), 11.5);
        assert_eq!(y.get(&[1, 0, 0]), 5.5);
        assert_eq!(y.get(&[1, 1, 0]), 13.5);

        assert!(spatial_downsample(&x, 3).is_err());
    }

    #[test]
    fn spectral_downsample_examples() {
        let x = ramp(&[2, 2, 4]);
        assert_eq!(spectral_downsample(&x, &Matrix::identity(4)).unwrap(), x);

        let mean = Matrix::new(1, 4, vec![0.25; 4]).unwrap();
        let z = spectral_downsample(&x, &mean).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let m: f64 = (0..4).map(|b| x.get(&[i, j, b])).sum::<f64>() / 4.0;
                assert!((z.get(&[i, j, 0]) - m).abs() < 1e-12);
            }
        }
        assert!(spectral_downsample(&x, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn spectral_downsample_matches_per_pixel_product() {
        let x =
            DenseTensor::from_fn(vec![2, 2, 4], |ix| ((ix[0] * 5 + ix[1] * 3 + ix[2] * 7) % 11) as f64 / 10.0).unwrap();
        let r = normalize_srf(Matrix::from_rows(&[vec![1., 2., 1., 0.], vec![0., 1., 3., 4.]]).unwrap()).unwrap();
        let z = spectral_downsample(&x, &r).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for s in 0..2 {
                    let e: f64 = (0..4).map(|b| r.get(s, b) * x.get(&[i, j, b])).sum();
                    assert!((z.get(&[i, j, s]) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn noise_limits_and_determinism() {
        let x = ramp(&[4, 4, 3]);
        let quiet = add_noise(&x, 300.0, 5).unwrap();
        let d = quiet.sub(&x).unwrap();
        assert!(d.frobenius_norm() <= 1e-10 * x.frobenius_norm());
        assert_eq!(add_noise(&x, 25.0, 9).unwrap(), add_noise(&x, 25.0, 9).unwrap());
        assert_ne!(add_noise(&x, 25.0, 9).unwrap(), add_noise(&x, 25.0, 10).unwrap());
        assert!(add_noise(&x, f64::INFINITY, 1).is_err());
    }

    #[test]
    fn downsample_first_factor_limits() {
        let plan = TensorizationPlan::new(vec![2, 3], vec![2, 1]).unwrap();
        let u1 = DenseTensor::from_fn(vec![4, 3, 2], |ix| (ix[0] * 6 + ix[1] * 2 + ix[2]) as f64).unwrap();
        assert_eq!(downsample_first_factor(&u1, 1, &plan).unwrap(), u1);

        let full = downsample_first_factor(&u1, 2, &plan).unwrap();
        assert_eq!(full.shape(), &[1, 3, 2]);
        for a in 0..3 {
            for b in 0..2 {
                let m: f64 = (0..4).map(|i| u1.get(&[i, a, b])).sum::<f64>() / 4.0;
                assert!((full.get(&[0, a, b]) - m).abs() < 1e-14);
            }
        }
        assert!(downsample_first_factor(&u1, 3, &plan).is_err());
    }

    #[test]
    fn srf_normalization() {
        let r = normalize_srf(Matrix::from_rows(&[vec![1., 3.], vec![2., 2.]]).unwrap()).unwrap();
        assert_eq!(r.row(0), vec![0.25, 0.75]);
        assert_eq!(r.row(1), vec![0.5, 0.5]);
        assert!(normalize_srf(Matrix::from_rows(&[vec![1., -1.]]).unwrap()).is_err());
        assert!(normalize_srf(Matrix::from_rows(&[vec![0., 0.]]).unwrap()).is_err());
    }

    #[test]
    fn srf_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("srf.csv");
        let r = Matrix::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.25, 0.75]]).unwrap();
        write_srf_csv(&path, &r).unwrap();
        assert_eq!(read_srf_csv(&path).unwrap(), r);
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_srf_csv(&path).is_err());
    }
}
