//! Brute-force reference evaluations for tiny instances.
//!
//! These enumerate definitions term by term and share no code path with the
//! contraction engine beyond the tensor container. They refuse inputs above
//! [`MAX_TERMS`] summands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cg::cg_solve;
use crate::error::{Error, Result};
use crate::fctn::{random_init, FctnFactorSet, RankMatrix};
use crate::graph::SpectralGraph;
use crate::metrics;
use crate::solver::SpectralSystem;
use crate::tensor::{increment, DenseTensor, Matrix};
use crate::tensorize::{detensorize, downsample_first_factor, spatial_downsample, tensorize, TensorizationPlan};

pub const MAX_TERMS: usize = 5_000_000;

/// Evaluates the FCTN multi-sum entry by entry: for every data index and
/// every assignment of all bond indices, the product of one entry per factor.
pub fn contract_brute_force(f: &FctnFactorSet) -> Result<DenseTensor> {
    let n = f.factor_count();
    let ranks = f.ranks();
    let bonds: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let bond_extents: Vec<usize> = bonds.iter().map(|&(i, j)| ranks.get(i, j)).collect();
    let bond_count: usize = bond_extents.iter().product();
    let entries: usize = f.data_extents().iter().product();
    if entries.saturating_mul(bond_count).saturating_mul(n) > MAX_TERMS {
        return Err(Error::invalid("instance too large for brute-force contraction"));
    }

    let bond_slot =
        |a: usize, b: usize| bonds.iter().position(|&p| p == (a.min(b), a.max(b))).expect("every pair is a bond");
    let slots: Vec<Vec<Option<usize>>> =
        (0..n).map(|t| (0..n).map(|k| (k != t).then(|| bond_slot(t, k))).collect()).collect();

    DenseTensor::from_fn(f.data_extents().to_vec(), |data_idx| {
        let mut bond_idx = vec![0usize; bonds.len().max(1)];
        let mut factor_idx = vec![0usize; n];
        let mut total = 0.0;
        for _ in 0..bond_count {
            let mut prod = 1.0;
            for (t, factor) in f.factors().iter().enumerate() {
                for k in 0..n {
                    factor_idx[k] = match slots[t][k] {
                        Some(s) => bond_idx[s],
                        None => data_idx[t],
                    };
                }
                prod *= factor.get(&factor_idx);
            }
            total += prod;
            if !bonds.is_empty() {
                increment(&mut bond_idx, &bond_extents);
            }
        }
        total
    })
}

/// Mode unfolding by explicit index arithmetic.
pub fn unfold_brute_force(t: &DenseTensor, mode: usize) -> Matrix {
    let shape = t.shape();
    let rows = shape[mode];
    let cols = t.len() / rows;
    let mut m = Matrix::zeros(rows, cols);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..t.len() {
        let mut col = 0;
        let mut stride = 1;
        for (k, (&i, &e)) in idx.iter().zip(shape).enumerate() {
            if k != mode {
                col += i * stride;
                stride *= e;
            }
        }
        m.set(idx[mode], col, t.get(&idx));
        increment(&mut idx, shape);
    }
    m
}

/// Solves a dense square system by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::shape("dense_solve needs a square system"));
    }
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).expect("non-empty");
        if m[pivot][col] == 0.0 {
            return Err(Error::numeric("singular system"));
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        let pivot_row = m[col].clone();
        for r in col + 1..n {
            let factor = m[r][col] / pivot_row[col];
            for (v, p) in m[r].iter_mut().zip(&pivot_row).skip(col) {
                *v -= factor * p;
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let tail: f64 = (col + 1..n).map(|c| m[col][c] * x[c]).sum();
        x[col] = (x[col] - tail) / m[col][col];
    }
    Ok(x)
}

/// Materializes a linear map on `rows×cols` matrices as a dense matrix acting
/// on column-major vectorizations.
pub fn operator_matrix(rows: usize, cols: usize, apply: impl Fn(&Matrix) -> Matrix) -> Matrix {
    let dim = rows * cols;
    let mut out = Matrix::zeros(dim, dim);
    for k in 0..dim {
        let mut e = Matrix::zeros(rows, cols);
        e.data_mut()[k] = 1.0;
        let col = apply(&e);
        for (i, v) in col.data().iter().enumerate() {
            out.set(i, k, *v);
        }
    }
    out
}

/// Deliberate defects for exercising the self-check's failure path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Negates every composite matrix before the factorization identity is checked.
    CompositeSign,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub tolerance: f64,
    /// Worst deviation observed over all instances.
    pub worst: f64,
    pub instances: usize,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Random network with `n` factors, data extents in `1..=4` and ranks in `1..=3`.
pub fn random_instance(n: usize, rng: &mut impl Rng) -> Result<FctnFactorSet> {
    let upper: Vec<usize> = (0..n * (n - 1) / 2).map(|_| rng.random_range(1..=3)).collect();
    let ranks = RankMatrix::from_upper(n, &upper)?;
    let extents: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    random_init(&ranks, &extents, rng.random())
}

/// Runs every self-check on tiny seeded instances.
pub fn run_checks(fault: Option<Fault>) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let instances = (0..60).map(|i| random_instance(2 + i % 3, &mut rng)).collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for f in &instances {
        worst = worst.max(relative(f.contract_full()?.data(), contract_brute_force(f)?.data()));
    }
    checks.push(Check {
        name: "contraction matches brute-force multi-sum",
        tolerance: 1e-10,
        worst,
        instances: instances.len(),
    });

    let mut worst = 0.0f64;
    for f in &instances {
        let full = f.contract_full()?;
        for t in 0..f.factor_count() {
            let mut c = f.composite_except(t, None)?;
            if fault == Some(Fault::CompositeSign) {
                c = c.scaled(-1.0);
            }
            let rebuilt = f.factor_unfold(t)?.matmul_t(&c)?;
            worst = worst.max(relative(rebuilt.data(), full.unfold(t)?.data()));
        }
    }
    checks.push(Check {
        name: "factorization identity per factor",
        tolerance: 1e-10,
        worst,
        instances: instances.len(),
    });

    let mut worst = 0.0f64;
    let mut count = 0;
    for order in 1..=5 {
        let shape: Vec<usize> = (0..order).map(|_| rng.random_range(1..=4)).collect();
        let t = crate::fctn::uniform_tensor(shape.clone(), &mut rng)?;
        for mode in 0..order {
            let u = t.unfold(mode)?;
            worst = worst.max(relative(u.data(), unfold_brute_force(&t, mode).data()));
            worst = worst.max(relative(DenseTensor::fold(&u, mode, &shape)?.data(), t.data()));
            count += 1;
        }
    }
    checks.push(Check { name: "unfolding matches index rule and folds back", tolerance: 0.0, worst, instances: count });

    let mut worst_bij = 0.0f64;
    let mut worst_comm = 0.0f64;
    let plans = [("4x4", 2), ("4x4,3x2", 2), ("4x6,2x3,2x2", 2), ("6x6,2x2", 3), ("8x8", 8)];
    for (spec, p) in plans {
        let plan = TensorizationPlan::parse(spec)?;
        let x = crate::fctn::uniform_tensor(vec![plan.rows(), plan.cols(), 3], &mut rng)?;
        let tx = tensorize(&x, &plan)?;
        worst_bij = worst_bij.max(relative(detensorize(&tx, &plan)?.data(), x.data()));
        let lr = tensorize(&spatial_downsample(&x, p)?, &plan.downsampled(p)?)?;
        let averaged = downsample_first_factor(&tx, p, &plan)?;
        worst_comm = worst_comm.max(relative(averaged.data(), lr.data()));
    }
    checks.push(Check {
        name: "detensorize inverts tensorize",
        tolerance: 0.0,
        worst: worst_bij,
        instances: plans.len(),
    });
    checks.push(Check {
        name: "block downsampling commutes with tensorization",
        tolerance: 1e-12,
        worst: worst_comm,
        instances: plans.len(),
    });

    let mut worst_adj = 0.0f64;
    let mut worst_psd = 0.0f64;
    let mut worst_cg = 0.0f64;
    let systems = 10;
    for i in 0..systems {
        let (s, q) = (rng.random_range(2..=5), rng.random_range(2..=4));
        let identity_srf = i % 2 == 0;
        let system = random_spectral_system(s, q, identity_srf, &mut rng)?;
        let u = crate::fctn::uniform_tensor(vec![s, q], &mut rng)?;
        let v = crate::fctn::uniform_tensor(vec![s, q], &mut rng)?;
        let (u, v) = (Matrix::from_tensor(&u)?, Matrix::from_tensor(&v)?);
        let (au, av) = (system.apply(&u), system.apply(&v));
        let lhs = au.dot(&v);
        let rhs = u.dot(&av);
        worst_adj = worst_adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE));
        let curvature = u.dot(&au) / (u.frobenius_norm().powi(2) * au.frobenius_norm().max(1.0));
        worst_psd = worst_psd.max(-curvature);
        if identity_srf {
            let mut plain = system.clone();
            plain.beta = 0.0;
            let dense = operator_matrix(s, q, |m| plain.apply(m));
            let direct = dense_solve(&dense, plain.rhs.data())?;
            let cg = cg_solve(|m| plain.apply(m), &plain.rhs, 1e-12, 1000)?;
            worst_cg = worst_cg.max(relative(cg.x.data(), &direct));
        }
    }
    checks.push(Check {
        name: "spectral operator is self-adjoint",
        tolerance: 1e-10,
        worst: worst_adj,
        instances: systems,
    });
    checks.push(Check {
        name: "spectral operator has non-negative curvature",
        tolerance: 1e-12,
        worst: worst_psd,
        instances: systems,
    });
    checks.push(Check {
        name: "spectral CG matches dense solve",
        tolerance: 1e-6,
        worst: worst_cg,
        instances: systems / 2,
    });

    let x = crate::fctn::uniform_tensor(vec![8, 8, 4], &mut rng)?;
    let mut scaled = x.clone();
    scaled.scale(3.0);
    let mut worst = 0.0f64;
    worst = worst.max((metrics::psnr(&x, &x)?.mean_db - metrics::PSNR_CAP_DB).abs());
    worst = worst.max(metrics::sam(&x, &scaled)?.mean_deg.abs());
    worst = worst.max(metrics::ergas(&x, &x, 4.0)?.abs());
    worst = worst.max((metrics::uiqi(&x, &x, 4)? - 1.0).abs());
    checks.push(Check { name: "metrics on identical and rescaled cubes", tolerance: 1e-9, worst, instances: 1 });

    Ok(checks)
}

fn random_spectral_system(s: usize, q: usize, identity_srf: bool, rng: &mut impl Rng) -> Result<SpectralSystem> {
    let mut gaussian = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random::<f64>() - 0.5);
    let srf = if identity_srf { Matrix::identity(s) } else { gaussian(s.div_ceil(2), s) };
    let o = gaussian(q + 3, q);
    let h = gaussian(q + 1, q);
    let rhs = gaussian(s, q);
    let weights = gaussian(s, s);
    let weights =
        Matrix::from_fn(s, s, |i, j| if i == j { 0.0 } else { (weights.get(i, j) + weights.get(j, i)).abs() });
    let graph = SpectralGraph::from_weights(weights, 1.0, s);
    Ok(SpectralSystem {
        rtr: srf.t_matmul(&srf)?,
        a: o.t_matmul(&o)?,
        b: h.t_matmul(&h)?,
        laplacian: graph.laplacian().clone(),
        beta: 0.1,
        ridge: 0.0,
        rhs,
    })
}
