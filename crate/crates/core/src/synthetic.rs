//! Synthetic scenes with an exact FCTN structure.
//!
//! Spatial factors are uniform `[0, 1)`; every fibre of the spectral factor
//! along its band mode is a sum of Gaussian bumps, so spectra are smooth and
//! positive. The cube is scaled so its largest entry is 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fctn::{random_init_with, FctnFactorSet, RankMatrix};
use crate::tensor::{DenseTensor, Matrix};
use crate::tensorize::{detensorize, TensorizationPlan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub plan: TensorizationPlan,
    pub bands: usize,
    pub ranks: RankMatrix,
    /// Gaussian bumps per spectral fibre.
    pub components: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(plan: TensorizationPlan, bands: usize, ranks: RankMatrix, seed: u64) -> Self {
        SceneSpec { plan, bands, ranks, components: 2, seed }
    }

    pub fn benchmark(seed: u64) -> Self {
        let plan = TensorizationPlan::parse(benchmark::PLAN).expect("valid plan");
        let ranks = RankMatrix::from_upper(3, &benchmark::RANKS).expect("valid ranks");
        SceneSpec::new(plan, benchmark::BANDS, ranks, seed)
    }
}

/// The bundled benchmark: 32×32×8 cubes tensorized as 4×4 then 8×8, bond
/// ranks `(r₁₂, r₁₃, r₂₃) = (3, 2, 2)`, four Gaussian MSI bands and `p = 4`.
pub mod benchmark {
    pub const PLAN: &str = "4x4,8x8";
    pub const RANKS: [usize; 3] = [3, 2, 2];
    pub const BANDS: usize = 8;
    pub const MSI_BANDS: usize = 4;
    pub const P: usize = 4;
    /// Ridge weight matched to the data scale of a 32×32 scene.
    pub const MU: f64 = 1e-3;
    pub const MAX_ITER: usize = 100;
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    /// `M×N×S` cube.
    pub x: DenseTensor,
    /// Generating factors of `T{X}`.
    pub factors: FctnFactorSet,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    let n = spec.plan.scales() + 1;
    if spec.ranks.factor_count() != n {
        return Err(Error::Config(format!(
            "{} scales need {n} factors, rank matrix has {}",
            n - 1,
            spec.ranks.factor_count()
        )));
    }
    if spec.bands == 0 || spec.components == 0 {
        return Err(Error::invalid("scene needs at least one band and one spectral component"));
    }
    let extents = spec.plan.tensor_shape(spec.bands);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut factors = random_init_with(&spec.ranks, &extents, &mut rng)?;

    let last = n - 1;
    let shape = factors.factor(last).shape().to_vec();
    let fibres = factors.factor(last).len() / spec.bands;
    let mut spectra = Matrix::zeros(spec.bands, fibres);
    for c in 0..fibres {
        let fibre = smooth_spectrum(spec.bands, spec.components, &mut rng);
        for (b, v) in fibre.into_iter().enumerate() {
            spectra.set(b, c, v);
        }
    }
    let spectral = DenseTensor::fold(&spectra, last, &shape)?;
    factors.replace_factor(last, spectral)?;

    let peak = factors.contract_full()?.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let mut scaled = factors.factor(last).clone();
        scaled.scale(1.0 / peak);
        factors.replace_factor(last, scaled)?;
    }
    let x = detensorize(&factors.contract_full()?, &spec.plan)?;
    Ok(SyntheticScene { x, factors })
}

fn smooth_spectrum(bands: usize, components: usize, rng: &mut impl Rng) -> Vec<f64> {
    let s = bands as f64;
    let bumps: Vec<(f64, f64, f64)> = (0..components)
        .map(|_| {
            let amplitude = 0.2 + 0.8 * rng.random::<f64>();
            let centre = s * rng.random::<f64>();
            let width = (s / 8.0 + (s / 3.0 - s / 8.0) * rng.random::<f64>()).max(0.5);
            (amplitude, centre, width)
        })
        .collect();
    (0..bands)
        .map(|b| bumps.iter().map(|&(a, c, w)| a * (-(b as f64 - c).powi(2) / (2.0 * w * w)).exp()).sum())
        .collect()
}

/// `msi_bands × bands` response with Gaussian rows centred on equal slices
/// of the band axis, each row summing to one.
pub fn gaussian_srf(msi_bands: usize, bands: usize) -> Result<Matrix> {
    if msi_bands == 0 || bands == 0 {
        return Err(Error::invalid("SRF extents must be positive"));
    }
    let slice = bands as f64 / msi_bands as f64;
    let width = (slice / 2.0).max(0.5);
    let mut srf = Matrix::from_fn(msi_bands, bands, |i, b| {
        let centre = (i as f64 + 0.5) * slice - 0.5;
        (-(b as f64 - centre).powi(2) / (2.0 * width * width)).exp()
    });
    for i in 0..msi_bands {
        let sum: f64 = srf.row(i).iter().sum();
        for b in 0..bands {
            srf.set(i, b, srf.get(i, b) / sum);
        }
    }
    Ok(srf)
}

/// Replicates each low-resolution pixel over its `p×p` block.
pub fn nearest_upsample(y: &DenseTensor, p: usize) -> Result<DenseTensor> {
    if y.order() != 3 || p == 0 {
        return Err(Error::shape(format!("expected an m×n×S cube and p ≥ 1, got {:?}, p={p}", y.shape())));
    }
    let s = y.shape();
    DenseTensor::from_fn(vec![s[0] * p, s[1] * p, s[2]], |ix| y.get(&[ix[0] / p, ix[1] / p, ix[2]]))
}
