//! Coupled FCTN fusion by alternating block minimization.
//!
//! With `T{Y}` the tensorized low-resolution HSI and `T{Z}` the tensorized
//! high-resolution MSI, the solver minimizes
//!
//! ```text
//! w_Y/2 ‖T{Y} − F(Q, U₂, …, U_{d+1})‖² + w_Z/2 ‖T{Z} − F(U₁, …, U_{d+1} ×_{d+1} R)‖²
//!   + β/2 tr(U_{d+1(d+1)}ᵀ L U_{d+1(d+1)}) + μ/2 (Σ_{t≤d} ‖U_t‖² + ‖Q‖²)
//! ```
//!
//! cycling through `Q`, `U₁`, `U₂…U_d` (exact ridge solves) and `U_{d+1}`
//! (a Sylvester-type equation solved by warm-started conjugate gradients).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cg::cg_solve_from;
use crate::error::{Error, Result};
use crate::fctn::{random_init_with, uniform_tensor, FctnFactorSet, RankMatrix};
use crate::graph::SpectralGraph;
use crate::linalg::solve_right_spd;
use crate::tensor::{DenseTensor, Matrix};
use crate::tensorize::{detensorize, tensorize, TensorizationPlan};

/// Which data term carries `λ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `λ` weights the MSI term: `(w_Y, w_Z) = (1, λ)`.
    #[default]
    Objective,
    /// `λ` weights the HSI term: `(w_Y, w_Z) = (λ, 1)`.
    UpdateEquations,
}

impl Weighting {
    /// `(w_Y, w_Z)`.
    pub fn weights(self, lambda: f64) -> (f64, f64) {
        match self {
            Weighting::Objective => (1.0, lambda),
            Weighting::UpdateEquations => (lambda, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub sigma: f64,
    pub graph_half_width: usize,
    pub max_iter: usize,
    pub ranks: RankMatrix,
    pub plan: TensorizationPlan,
    pub seed: u64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub objective_log_every: usize,
    #[serde(default)]
    pub weighting: Weighting,
    /// Stop once the objective falls by a relative 1e-8 or less over 10 iterations.
    #[serde(default)]
    pub early_stop: bool,
}

impl FusionConfig {
    /// λ=0.1, μ=120, β=0.1, σ=10, 480 iterations; CG tolerance 1e-8 within 500 steps.
    pub fn new(plan: TensorizationPlan, ranks: RankMatrix) -> Self {
        FusionConfig {
            lambda: 0.1,
            mu: 120.0,
            beta: 0.1,
            sigma: 10.0,
            graph_half_width: 1,
            max_iter: 480,
            ranks,
            plan,
            seed: 0,
            cg_tol: 1e-8,
            cg_max_iter: 500,
            objective_log_every: 1,
            weighting: Weighting::Objective,
            early_stop: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.cg_tol.is_nan() || self.cg_tol <= 0.0 || self.cg_max_iter == 0 {
            return Err(Error::Config("CG tolerance and budget must be positive".into()));
        }
        if self.objective_log_every == 0 {
            return Err(Error::Config("objective_log_every must be at least 1".into()));
        }
        if self.ranks.factor_count() != self.plan.scales() + 1 {
            return Err(Error::Config(format!(
                "{} scales need {} factors, rank matrix has {}",
                self.plan.scales(),
                self.plan.scales() + 1,
                self.ranks.factor_count()
            )));
        }
        Ok(())
    }

    pub fn data_weights(&self) -> (f64, f64) {
        self.weighting.weights(self.lambda)
    }
}

/// Tensorized observations, ready for the solver.
#[derive(Clone, Debug)]
pub struct FusionProblem {
    /// The low-resolution HSI cube `m×n×S`.
    pub y: DenseTensor,
    pub ty: DenseTensor,
    pub tz: DenseTensor,
    pub srf: Matrix,
    pub plan: TensorizationPlan,
    pub lr_plan: TensorizationPlan,
    pub p: usize,
    ty_unfolded: Vec<Matrix>,
    tz_unfolded: Vec<Matrix>,
}

impl FusionProblem {
    pub fn new(y: &DenseTensor, z: &DenseTensor, srf: &Matrix, plan: &TensorizationPlan) -> Result<Self> {
        let (m, n, bands) = match y.shape() {
            [m, n, s] => (*m, *n, *s),
            s => return Err(Error::shape(format!("HSI must be m×n×S, got {s:?}"))),
        };
        let msi_bands = match z.shape() {
            [mm, nn, s] if *mm == plan.rows() && *nn == plan.cols() => *s,
            s => {
                return Err(Error::shape(format!(
                    "MSI must be {}×{}×s to match the plan, got {s:?}",
                    plan.rows(),
                    plan.cols()
                )))
            }
        };
        if (srf.rows(), srf.cols()) != (msi_bands, bands) {
            return Err(Error::shape(format!(
                "SRF is {}x{}, observations need {msi_bands}x{bands}",
                srf.rows(),
                srf.cols()
            )));
        }
        if !plan.rows().is_multiple_of(m) || !plan.cols().is_multiple_of(n) || plan.rows() / m != plan.cols() / n {
            return Err(Error::shape(format!(
                "HSI {m}x{n} is not an integer downsampling of {}x{}",
                plan.rows(),
                plan.cols()
            )));
        }
        let p = plan.rows() / m;
        let lr_plan = plan.downsampled(p)?;
        let ty = tensorize(y, &lr_plan)?;
        let tz = tensorize(z, plan)?;
        let order = ty.order();
        let ty_unfolded = (0..order).map(|k| ty.unfold(k)).collect::<Result<_>>()?;
        let tz_unfolded = (0..order).map(|k| tz.unfold(k)).collect::<Result<_>>()?;
        Ok(FusionProblem {
            y: y.clone(),
            ty,
            tz,
            srf: srf.clone(),
            plan: plan.clone(),
            lr_plan,
            p,
            ty_unfolded,
            tz_unfolded,
        })
    }

    pub fn bands(&self) -> usize {
        self.srf.cols()
    }

    /// Data extents of the high-resolution network.
    pub fn data_extents(&self) -> Vec<usize> {
        self.plan.tensor_shape(self.bands())
    }

    /// Data extent of `Q`.
    pub fn q_extent(&self) -> usize {
        self.lr_plan.m_factors[0] * self.lr_plan.n_factors[0]
    }
}

#[derive(Clone, Debug)]
pub struct FusionState {
    pub factors: FctnFactorSet,
    pub q: DenseTensor,
    pub graph: SpectralGraph,
    pub objective_history: Vec<f64>,
    /// Spectral solves that stopped on the iteration budget.
    pub cg_unconverged: usize,
}

impl FusionState {
    /// Seeded uniform `[0, 1)` factors and `Q`; the band graph from `Y`.
    /// The history starts with the objective at initialization.
    pub fn initialize(problem: &FusionProblem, cfg: &FusionConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let factors = random_init_with(&cfg.ranks, &problem.data_extents(), &mut rng)?;
        let q = uniform_tensor(cfg.ranks.factor_shape(0, problem.q_extent()), &mut rng)?;
        let graph = SpectralGraph::build(&problem.y, cfg.sigma, cfg.graph_half_width)?;
        let mut state = FusionState { factors, q, graph, objective_history: Vec::new(), cg_unconverged: 0 };
        let f0 = objective(&state, problem, cfg)?;
        state.objective_history.push(f0);
        Ok(state)
    }

    /// Network generating `T{Y}`: `Q` in place of `U₁`.
    pub fn hsi_network(&self) -> Result<FctnFactorSet> {
        self.factors.with_factor(0, self.q.clone())
    }

    /// `T⁻¹{F(U₁, …, U_{d+1})}`.
    pub fn reconstruct(&self, plan: &TensorizationPlan) -> Result<DenseTensor> {
        detensorize(&self.factors.contract_full()?, plan)
    }
}

/// Full objective at the current state.
pub fn objective(state: &FusionState, problem: &FusionProblem, cfg: &FusionConfig) -> Result<f64> {
    let (wy, wz) = cfg.data_weights();
    let n = state.factors.factor_count();
    let last = n - 1;

    let fy = state.hsi_network()?.contract_full()?;
    let y_fit = problem.ty.sub(&fy)?.frobenius_norm().powi(2);

    let mapped = state.factors.factor(last).mode_product(&problem.srf, last)?;
    let fz = state.factors.with_factor(last, mapped)?.contract_full()?;
    let z_fit = problem.tz.sub(&fz)?.frobenius_norm().powi(2);

    let graph_term = state.graph.wgr_value(&state.factors.factor_unfold(last)?)?;
    let ridge: f64 = state.factors.factors()[..last].iter().map(|u| u.frobenius_norm().powi(2)).sum::<f64>()
        + state.q.frobenius_norm().powi(2);

    let value = 0.5 * wy * y_fit + 0.5 * wz * z_fit + 0.5 * cfg.beta * graph_term + 0.5 * cfg.mu * ridge;
    if !value.is_finite() {
        return Err(Error::numeric("objective is not finite"));
    }
    Ok(value)
}

/// One variable block of the alternating scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Q,
    /// Factor `t`, zero-based; the last one is the spectral factor.
    Factor(usize),
}

/// Linear operator of the spectral subproblem,
/// `U ↦ RᵀR·U·A + U·B + β·L·U` with `A = w_Z OᵀO`, `B = w_Y HᵀH`.
#[derive(Clone, Debug)]
pub struct SpectralSystem {
    pub rtr: Matrix,
    pub a: Matrix,
    pub b: Matrix,
    pub laplacian: Matrix,
    pub beta: f64,
    pub ridge: f64,
    pub rhs: Matrix,
}

impl SpectralSystem {
    pub fn apply(&self, u: &Matrix) -> Matrix {
        let mut out = self.rtr.matmul(u).and_then(|ru| ru.matmul(&self.a)).expect("conforming");
        out.axpy(1.0, &u.matmul(&self.b).expect("conforming"));
        if self.beta != 0.0 {
            out.axpy(self.beta, &self.laplacian.matmul(u).expect("conforming"));
        }
        if self.ridge != 0.0 {
            out.axpy(self.ridge, u);
        }
        out
    }

    /// Mean diagonal of the operator, used to size a stabilizing ridge.
    fn diagonal_scale(&self) -> f64 {
        let (s, q) = (self.rtr.rows(), self.a.rows());
        (self.rtr.trace() * self.a.trace() + s as f64 * self.b.trace() + self.beta * self.laplacian.trace() * q as f64)
            / (s * q) as f64
    }
}

/// Normal equations of one block.
#[derive(Clone, Debug)]
pub enum BlockSystem {
    /// `X · gram = rhs`.
    Ridge {
        gram: Matrix,
        rhs: Matrix,
    },
    Spectral(SpectralSystem),
}

impl BlockSystem {
    pub fn rhs(&self) -> &Matrix {
        match self {
            BlockSystem::Ridge { rhs, .. } => rhs,
            BlockSystem::Spectral(s) => &s.rhs,
        }
    }

    /// Gradient of the objective with respect to the unfolded block variable.
    pub fn gradient(&self, x: &Matrix) -> Result<Matrix> {
        let mut g = match self {
            BlockSystem::Ridge { gram, .. } => x.matmul(gram)?,
            BlockSystem::Spectral(s) => s.apply(x),
        };
        g.axpy(-1.0, self.rhs());
        Ok(g)
    }
}

fn check_block(state: &FusionState, block: Block) -> Result<()> {
    match block {
        Block::Factor(t) if t >= state.factors.factor_count() => {
            Err(Error::invalid(format!("factor {t} out of range for {} factors", state.factors.factor_count())))
        }
        _ => Ok(()),
    }
}

pub fn block_system(
    state: &FusionState,
    problem: &FusionProblem,
    cfg: &FusionConfig,
    block: Block,
) -> Result<BlockSystem> {
    check_block(state, block)?;
    let (wy, wz) = cfg.data_weights();
    let last = state.factors.factor_count() - 1;

    let ridge = |gram_parts: Vec<(f64, &Matrix)>, rhs_parts: Vec<(f64, Matrix)>| -> Result<BlockSystem> {
        let k = gram_parts[0].1.cols();
        let mut gram = Matrix::zeros(k, k);
        for (w, c) in gram_parts {
            if w != 0.0 {
                gram.axpy(w, &c.t_matmul(c)?);
            }
        }
        gram.add_diagonal(cfg.mu);
        let mut rhs_iter = rhs_parts.into_iter();
        let (w0, first) = rhs_iter.next().expect("at least one data term");
        let mut rhs = first.scaled(w0);
        for (w, r) in rhs_iter {
            rhs.axpy(w, &r);
        }
        Ok(BlockSystem::Ridge { gram, rhs })
    };

    match block {
        Block::Q => {
            let h = state.hsi_network()?.composite_except(0, None)?;
            let rhs = problem.ty_unfolded[0].matmul(&h)?;
            ridge(vec![(wy, &h)], vec![(wy, rhs)])
        }
        Block::Factor(0) => {
            let o = state.factors.composite_except(0, Some(&problem.srf))?;
            let rhs = problem.tz_unfolded[0].matmul(&o)?;
            ridge(vec![(wz, &o)], vec![(wz, rhs)])
        }
        Block::Factor(t) if t < last => {
            let o = state.factors.composite_except(t, Some(&problem.srf))?;
            let h = state.hsi_network()?.composite_except(t, None)?;
            let rz = problem.tz_unfolded[t].matmul(&o)?;
            let ry = problem.ty_unfolded[t].matmul(&h)?;
            ridge(vec![(wz, &o), (wy, &h)], vec![(wz, rz), (wy, ry)])
        }
        Block::Factor(_) => {
            let o = state.factors.composite_except(last, None)?;
            let h = state.hsi_network()?.composite_except(last, None)?;
            let rtr = problem.srf.t_matmul(&problem.srf)?;
            let a = o.t_matmul(&o)?.scaled(wz);
            let b = h.t_matmul(&h)?.scaled(wy);
            let mut rhs = problem.srf.t_matmul(&problem.tz_unfolded[last])?.matmul(&o)?.scaled(wz);
            rhs.axpy(wy, &problem.ty_unfolded[last].matmul(&h)?);
            Ok(BlockSystem::Spectral(SpectralSystem {
                rtr,
                a,
                b,
                laplacian: state.graph.laplacian().clone(),
                beta: cfg.beta,
                ridge: 0.0,
                rhs,
            }))
        }
    }
}

/// Current value of a block, unfolded along its data mode.
pub fn block_variable(state: &FusionState, block: Block) -> Result<Matrix> {
    check_block(state, block)?;
    match block {
        Block::Q => state.q.unfold(0),
        Block::Factor(t) => state.factors.factor_unfold(t),
    }
}

/// Overwrites a block from its unfolded value.
pub fn set_block_variable(state: &mut FusionState, block: Block, value: &Matrix) -> Result<()> {
    check_block(state, block)?;
    match block {
        Block::Q => {
            state.q = DenseTensor::fold(value, 0, state.q.shape())?;
        }
        Block::Factor(t) => {
            let shape = state.factors.factor(t).shape().to_vec();
            let folded = DenseTensor::fold(value, t, &shape)?;
            state.factors.replace_factor(t, folded)?;
        }
    }
    Ok(())
}

/// `(‖∇‖_F, ‖rhs‖_F)` of a block's normal equations at the current state.
pub fn block_residual(
    state: &FusionState,
    problem: &FusionProblem,
    cfg: &FusionConfig,
    block: Block,
) -> Result<(f64, f64)> {
    let system = block_system(state, problem, cfg, block)?;
    let g = system.gradient(&block_variable(state, block)?)?;
    Ok((g.frobenius_norm(), system.rhs().frobenius_norm()))
}

/// Minimizes the objective over one block with all others fixed.
pub fn update_block(state: &mut FusionState, problem: &FusionProblem, cfg: &FusionConfig, block: Block) -> Result<()> {
    let value = match block_system(state, problem, cfg, block)? {
        BlockSystem::Ridge { gram, rhs } => solve_right_spd(&rhs, &gram)?,
        BlockSystem::Spectral(mut system) => {
            let x0 = block_variable(state, block)?;
            let outcome = match cg_solve_from(|u| system.apply(u), &system.rhs, x0.clone(), cfg.cg_tol, cfg.cg_max_iter)
            {
                Ok(out) => out,
                Err(e) if e.is_numeric() => {
                    system.ridge = 1e-10 * system.diagonal_scale();
                    log::warn!("spectral operator is numerically singular ({e}); adding ridge {:e}", system.ridge);
                    cg_solve_from(|u| system.apply(u), &system.rhs, x0, cfg.cg_tol, cfg.cg_max_iter)?
                }
                Err(e) => return Err(e),
            };
            if !outcome.converged {
                state.cg_unconverged += 1;
                log::warn!(
                    "spectral CG stopped after {} iterations at relative residual {:e}",
                    outcome.iterations,
                    outcome.relative_residual
                );
            }
            outcome.x
        }
    };
    set_block_variable(state, block, &value)
}

pub fn update_q(state: &mut FusionState, problem: &FusionProblem, cfg: &FusionConfig) -> Result<()> {
    update_block(state, problem, cfg, Block::Q)
}

pub fn update_u1(state: &mut FusionState, problem: &FusionProblem, cfg: &FusionConfig) -> Result<()> {
    update_block(state, problem, cfg, Block::Factor(0))
}

/// Updates an intermediate spatial factor, `0 < t < d` (zero-based).
pub fn update_ut(state: &mut FusionState, problem: &FusionProblem, cfg: &FusionConfig, t: usize) -> Result<()> {
    let last = state.factors.factor_count() - 1;
    if t == 0 || t >= last {
        return Err(Error::invalid(format!("intermediate factor index must be in 1..{last}, got {t}")));
    }
    update_block(state, problem, cfg, Block::Factor(t))
}

pub fn update_spectral(state: &mut FusionState, problem: &FusionProblem, cfg: &FusionConfig) -> Result<()> {
    let last = state.factors.factor_count() - 1;
    update_block(state, problem, cfg, Block::Factor(last))
}

/// Blocks in sweep order: `Q`, `U₁`, `U₂ … U_d`, `U_{d+1}`.
pub fn sweep_order(factor_count: usize) -> Vec<Block> {
    std::iter::once(Block::Q).chain((0..factor_count).map(Block::Factor)).collect()
}

/// One pass over every block.
pub fn sweep(state: &mut FusionState, problem: &FusionProblem, cfg: &FusionConfig) -> Result<()> {
    for block in sweep_order(state.factors.factor_count()) {
        update_block(state, problem, cfg, block)?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FusionOutput {
    /// Reconstructed `M×N×S` cube.
    pub estimate: DenseTensor,
    pub state: FusionState,
    pub iterations: usize,
}

const EARLY_STOP_WINDOW: usize = 10;
const EARLY_STOP_REL: f64 = 1e-8;

/// Fuses an `m×n×S` HSI and an `M×N×s` MSI.
pub fn fuse(y: &DenseTensor, z: &DenseTensor, srf: &Matrix, cfg: &FusionConfig) -> Result<FusionOutput> {
    cfg.validate()?;
    let problem = FusionProblem::new(y, z, srf, &cfg.plan)?;
    fuse_problem(&problem, cfg)
}

pub fn fuse_problem(problem: &FusionProblem, cfg: &FusionConfig) -> Result<FusionOutput> {
    let mut state = FusionState::initialize(problem, cfg)?;
    let mut recent = vec![state.objective_history[0]];
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        sweep(&mut state, problem, cfg).map_err(|e| Error::AtIteration { iteration: it, source: Box::new(e) })?;
        iterations = it;
        let log_now = it % cfg.objective_log_every == 0 || it == cfg.max_iter;
        if log_now || cfg.early_stop {
            let f = objective(&state, problem, cfg)
                .map_err(|e| Error::AtIteration { iteration: it, source: Box::new(e) })?;
            if log_now {
                state.objective_history.push(f);
            }
            if cfg.early_stop {
                recent.push(f);
                if recent.len() > EARLY_STOP_WINDOW {
                    let past = recent[recent.len() - 1 - EARLY_STOP_WINDOW];
                    if (past - f) <= EARLY_STOP_REL * past.abs() {
                        if !log_now {
                            state.objective_history.push(f);
                        }
                        log::info!("objective settled after {it} iterations");
                        break;
                    }
                }
            }
        }
    }
    let estimate = state.reconstruct(&problem.plan)?;
    Ok(FusionOutput { estimate, state, iterations })
}
