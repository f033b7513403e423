#![allow(dead_code)]

use fctn_hsr::synthetic::{gaussian_srf, generate_scene, SceneSpec, SyntheticScene};
use fctn_hsr::tensorize::downsample_first_factor;
use fctn_hsr::{
    DegradationModel, DenseTensor, FusionConfig, FusionProblem, FusionState, Matrix, RankMatrix, TensorizationPlan,
};

pub struct Fixture {
    pub scene: SyntheticScene,
    pub problem: FusionProblem,
    pub cfg: FusionConfig,
    pub srf: Matrix,
    pub p: usize,
}

/// Noiseless observations of a synthetic scene.
pub fn fixture(plan: &str, ranks: &[usize], bands: usize, msi_bands: usize, p: usize, seed: u64) -> Fixture {
    let plan = TensorizationPlan::parse(plan).unwrap();
    let ranks = RankMatrix::from_upper(plan.scales() + 1, ranks).unwrap();
    let scene = generate_scene(&SceneSpec::new(plan.clone(), bands, ranks.clone(), seed)).unwrap();
    let srf = gaussian_srf(msi_bands, bands).unwrap();
    let model = DegradationModel::new(srf.clone(), p, None, None).unwrap();
    let y = model.observe_hsi(&scene.x, 0).unwrap();
    let z = model.observe_msi(&scene.x, 0).unwrap();
    let problem = FusionProblem::new(&y, &z, &srf, &plan).unwrap();
    let mut cfg = FusionConfig::new(plan, ranks);
    cfg.seed = seed + 100;
    Fixture { scene, problem, cfg, srf, p }
}

pub fn tiny(seed: u64) -> Fixture {
    fixture("2x2,3x2", &[2, 2, 2], 4, 2, 2, seed)
}

pub fn small(seed: u64) -> Fixture {
    fixture("4x4,4x4", &[2, 2, 2], 6, 3, 4, seed)
}

/// State holding the generating factors and the matching `Q`.
pub fn true_state(f: &Fixture) -> FusionState {
    let mut state = FusionState::initialize(&f.problem, &f.cfg).unwrap();
    state.factors = f.scene.factors.clone();
    state.q = downsample_first_factor(f.scene.factors.factor(0), f.p, &f.problem.plan).unwrap();
    state
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

pub fn rel_t(a: &DenseTensor, b: &DenseTensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    rel(a.data(), b.data())
}
