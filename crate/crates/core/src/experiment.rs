//! Batch experiments: simulate observations, fuse, ablate the band graph,
//! self-check.
//!
//! Settings come from a TOML file overlaid by command-line values; every run
//! writes `manifest.json` holding the fully resolved settings, which can be
//! passed back as `--config` to repeat the run.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fctn::RankMatrix;
use crate::metrics::MetricReport;
use crate::npy;
use crate::oracle::{self, Check, Fault};
use crate::solver::{fuse, FusionConfig, Weighting};
use crate::synthetic::{benchmark, gaussian_srf, generate_scene, SceneSpec};
use crate::tensor::{DenseTensor, Matrix};
use crate::tensorize::{read_srf_csv, write_srf_csv, DegradationModel, TensorizationPlan};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_P: usize = 8;
const DEFAULT_MSI_BANDS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Fuse,
    Ablate,
    OracleCheck,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Fuse => "fuse",
            Mode::Ablate => "ablate",
            Mode::OracleCheck => "oracle-check",
        }
    }
}

/// Experiment settings as written in a config file; every field is optional.
/// [`ExperimentFile::overlay`] merges two layers, and
/// [`ExperimentFile::resolve`] fills defaults and validates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(rename = "ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hsi: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msi: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub srf: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,

    /// Use the bundled synthetic scene as the reference cube.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene_ranks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msi_bands: Option<usize>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_hsi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_msi: Option<f64>,
    /// HSI noise uses this seed, MSI noise the next one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_half_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_log_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighting: Option<Weighting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_stop: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ExperimentFile {
    /// Reads TOML, or the `config` section of a JSON manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: Manifest =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Ok(manifest.config)
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ExperimentFile) -> Self {
        overlay_fields!(self, top;
            reference, hsi, msi, srf, out, run_id,
            synthetic, scene_seed, scene_ranks, bands, msi_bands,
            p, snr_hsi, snr_msi, noise_seed,
            plan, ranks, lambda, mu, beta, sigma, graph_half_width, max_iter, seed,
            cg_tol, cg_max_iter, objective_log_every, weighting, early_stop,
        );
        self
    }

    pub fn resolve(&self, mode: Mode) -> Result<ExperimentSpec> {
        let synthetic = self.synthetic.unwrap_or(false);
        let observed = self.hsi.is_some() || self.msi.is_some();

        let source = match (mode, synthetic, &self.reference, observed) {
            (Mode::OracleCheck, ..) => Source::None,
            (_, true, Some(_), _) => {
                return Err(Error::Config("use either a reference cube or the synthetic scene, not both".into()))
            }
            (_, _, _, true) if synthetic => {
                return Err(Error::Config("observed HSI/MSI cannot be combined with the synthetic scene".into()))
            }
            (Mode::Simulate, _, _, true) => {
                return Err(Error::Config("simulate takes a reference cube, not observations".into()))
            }
            (_, _, reference, true) => match (&self.hsi, &self.msi) {
                (Some(hsi), Some(msi)) => {
                    Source::Observed { hsi: hsi.clone(), msi: msi.clone(), reference: reference.clone() }
                }
                _ => return Err(Error::Config("both --hsi and --msi are required".into())),
            },
            (_, true, None, false) => Source::Synthetic,
            (_, false, Some(r), false) => Source::Reference(r.clone()),
            (_, false, None, false) => {
                return Err(Error::Config("no input: give --ref, --hsi with --msi, or --synthetic".into()))
            }
        };
        if mode == Mode::Ablate && matches!(source, Source::Observed { reference: None, .. }) {
            return Err(Error::Config("ablate scores both runs and needs a reference cube".into()));
        }

        let plan_text = self.plan.clone().or_else(|| synthetic.then(|| benchmark::PLAN.to_string()));
        let ranks_list = self.ranks.clone().or_else(|| synthetic.then(|| benchmark::RANKS.to_vec()));
        let fusion = match (mode, plan_text, ranks_list) {
            (Mode::OracleCheck, ..) | (Mode::Simulate, None, _) => None,
            (_, Some(plan_text), Some(ranks_list)) => {
                let plan = TensorizationPlan::parse(&plan_text).map_err(config_error)?;
                let ranks = RankMatrix::from_upper(plan.scales() + 1, &ranks_list).map_err(config_error)?;
                let mut cfg = FusionConfig::new(plan, ranks);
                if synthetic {
                    cfg.mu = benchmark::MU;
                    cfg.max_iter = benchmark::MAX_ITER;
                }
                macro_rules! set {
                    ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
                }
                set!(
                    lambda,
                    mu,
                    beta,
                    sigma,
                    graph_half_width,
                    max_iter,
                    seed,
                    cg_tol,
                    cg_max_iter,
                    objective_log_every,
                    weighting,
                    early_stop
                );
                cfg.validate()?;
                Some(cfg)
            }
            (Mode::Simulate, Some(_), None) => None,
            (_, None, _) => return Err(Error::Config("a tensorization plan (--plan) is required".into())),
            (_, Some(_), None) => return Err(Error::Config("bond ranks (--ranks) are required".into())),
        };

        let scene = if matches!(source, Source::Synthetic) {
            let plan_text = self.plan.clone().unwrap_or_else(|| benchmark::PLAN.to_string());
            let plan = TensorizationPlan::parse(&plan_text).map_err(config_error)?;
            let scene_ranks =
                self.scene_ranks.clone().or_else(|| self.ranks.clone()).unwrap_or_else(|| benchmark::RANKS.to_vec());
            let ranks = RankMatrix::from_upper(plan.scales() + 1, &scene_ranks).map_err(config_error)?;
            let bands = self.bands.unwrap_or(benchmark::BANDS);
            Some(SceneSpec::new(plan, bands, ranks, self.scene_seed.unwrap_or(0)))
        } else {
            None
        };

        let p = self.p.unwrap_or(if synthetic { benchmark::P } else { DEFAULT_P });
        if p == 0 {
            return Err(Error::Config("p must be positive".into()));
        }
        for snr in [self.snr_hsi, self.snr_msi].into_iter().flatten() {
            if !snr.is_finite() {
                return Err(Error::Config(format!("SNR must be finite, got {snr}")));
            }
        }

        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let run_id = self
            .run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", mode.name(), fusion.as_ref().map_or(0, |c| c.seed)));
        let spec = ExperimentSpec {
            mode,
            source,
            scene,
            srf: self.srf.clone(),
            msi_bands: self.msi_bands.unwrap_or(if synthetic { benchmark::MSI_BANDS } else { DEFAULT_MSI_BANDS }),
            p,
            snr_hsi: self.snr_hsi,
            snr_msi: self.snr_msi,
            noise_seed: self.noise_seed.unwrap_or(0),
            fusion,
            out,
            run_id,
        };
        Ok(spec)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    None,
    Synthetic,
    Reference(PathBuf),
    Observed { hsi: PathBuf, msi: PathBuf, reference: Option<PathBuf> },
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub source: Source,
    pub scene: Option<SceneSpec>,
    pub srf: Option<PathBuf>,
    /// Rows of the generated SRF when no SRF file is given.
    pub msi_bands: usize,
    pub p: usize,
    pub snr_hsi: Option<f64>,
    pub snr_msi: Option<f64>,
    pub noise_seed: u64,
    /// Absent for `oracle-check`, and for `simulate` without a plan.
    pub fusion: Option<FusionConfig>,
    pub out: PathBuf,
    pub run_id: String,
}

impl ExperimentSpec {
    /// Settings file that reproduces this run.
    pub fn to_file(&self) -> ExperimentFile {
        let mut f = ExperimentFile {
            srf: self.srf.clone(),
            out: Some(self.out.clone()),
            run_id: Some(self.run_id.clone()),
            msi_bands: Some(self.msi_bands),
            p: Some(self.p),
            snr_hsi: self.snr_hsi,
            snr_msi: self.snr_msi,
            noise_seed: Some(self.noise_seed),
            ..Default::default()
        };
        match &self.source {
            Source::None => {}
            Source::Synthetic => f.synthetic = Some(true),
            Source::Reference(r) => f.reference = Some(r.clone()),
            Source::Observed { hsi, msi, reference } => {
                f.hsi = Some(hsi.clone());
                f.msi = Some(msi.clone());
                f.reference = reference.clone();
            }
        }
        if let Some(scene) = &self.scene {
            f.scene_seed = Some(scene.seed);
            f.scene_ranks = Some(scene.ranks.upper());
            f.bands = Some(scene.bands);
            f.plan = Some(scene.plan.to_string());
        }
        if let Some(c) = &self.fusion {
            f.plan = Some(c.plan.to_string());
            f.ranks = Some(c.ranks.upper());
            f.lambda = Some(c.lambda);
            f.mu = Some(c.mu);
            f.beta = Some(c.beta);
            f.sigma = Some(c.sigma);
            f.graph_half_width = Some(c.graph_half_width);
            f.max_iter = Some(c.max_iter);
            f.seed = Some(c.seed);
            f.cg_tol = Some(c.cg_tol);
            f.cg_max_iter = Some(c.cg_max_iter);
            f.objective_log_every = Some(c.objective_log_every);
            f.weighting = Some(c.weighting);
            f.early_stop = Some(c.early_stop);
        }
        f
    }

    fn fusion(&self) -> Result<&FusionConfig> {
        self.fusion.as_ref().ok_or_else(|| Error::Config("fusion settings are missing".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: ExperimentFile,
    pub outputs: Vec<String>,
}

/// One row of a metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub psnr_db: f64,
    pub sam_deg: f64,
    pub ergas: f64,
    pub uiqi: f64,
    pub iterations: usize,
    pub seconds: f64,
}

impl MetricRow {
    fn new(run_id: String, report: &MetricReport, iterations: usize, seconds: f64) -> Self {
        MetricRow {
            run_id,
            psnr_db: report.psnr_db,
            sam_deg: report.sam_deg,
            ergas: report.ergas,
            uiqi: report.uiqi,
            iterations,
            seconds,
        }
    }
}

pub const METRICS_CSV: &str = "metrics.csv";
pub const OBJECTIVE_CSV: &str = "objective.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ESTIMATE_NPY: &str = "estimate.npy";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Reference cube (if any), HSI, MSI and SRF for a run.
struct Inputs {
    reference: Option<DenseTensor>,
    y: DenseTensor,
    z: DenseTensor,
    srf: Matrix,
}

fn reference_cube(spec: &ExperimentSpec) -> Result<Option<DenseTensor>> {
    match (&spec.source, &spec.scene) {
        (Source::Synthetic, Some(scene)) => Ok(Some(generate_scene(scene)?.x)),
        (Source::Reference(path), _) => Ok(Some(npy::load(path)?)),
        (Source::Observed { reference: Some(path), .. }, _) => Ok(Some(npy::load(path)?)),
        _ => Ok(None),
    }
}

fn srf_for(spec: &ExperimentSpec, bands: usize) -> Result<Matrix> {
    match &spec.srf {
        Some(path) => read_srf_csv(path),
        None => gaussian_srf(spec.msi_bands, bands),
    }
}

fn degrade(spec: &ExperimentSpec, x: &DenseTensor, srf: Matrix) -> Result<(DenseTensor, DenseTensor, Matrix)> {
    let model = DegradationModel::new(srf, spec.p, spec.snr_hsi, spec.snr_msi)?;
    let y = model.observe_hsi(x, spec.noise_seed)?;
    let z = model.observe_msi(x, spec.noise_seed.wrapping_add(1))?;
    Ok((y, z, model.srf().clone()))
}

fn load_inputs(spec: &ExperimentSpec) -> Result<Inputs> {
    let reference = reference_cube(spec)?;
    match &spec.source {
        Source::Observed { hsi, msi, .. } => {
            let y = npy::load(hsi)?;
            let z = npy::load(msi)?;
            let srf = match &spec.srf {
                Some(path) => read_srf_csv(path)?,
                None => gaussian_srf(*z.shape().last().unwrap_or(&0), *y.shape().last().unwrap_or(&0))?,
            };
            Ok(Inputs { reference, y, z, srf })
        }
        _ => {
            let x = reference.ok_or_else(|| Error::Config("no reference cube".into()))?;
            let bands = *x.shape().last().unwrap_or(&0);
            let (y, z, srf) = degrade(spec, &x, srf_for(spec, bands)?)?;
            Ok(Inputs { reference: Some(x), y, z, srf })
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))
}

fn write_manifest(spec: &ExperimentSpec, outputs: &[&str]) -> Result<()> {
    let manifest = Manifest {
        version: VERSION.to_string(),
        command: spec.mode.name().to_string(),
        config: spec.to_file(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(spec.out.join(MANIFEST_JSON), text + "\n")?;
    Ok(())
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("CSV: {other:?}")),
    }
}

/// Iteration number of each recorded objective value; entry 0 is the initial state.
pub fn history_iterations(len: usize, every: usize, iterations: usize) -> Vec<usize> {
    (0..len).map(|i| (i * every).min(iterations)).collect()
}

fn write_objective_csv(path: &Path, history: &[f64], every: usize, iterations: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["iteration", "objective"]).map_err(csv_error)?;
    for (it, f) in history_iterations(history.len(), every, iterations).into_iter().zip(history) {
        w.write_record([it.to_string(), f.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SimulateOutput {
    pub y: DenseTensor,
    pub z: DenseTensor,
    pub srf: Matrix,
}

/// Writes `hsi.npy`, `msi.npy`, `srf.csv` (and `reference.npy` for the
/// synthetic scene).
pub fn run_simulate(spec: &ExperimentSpec) -> Result<SimulateOutput> {
    let x = reference_cube(spec)?.ok_or_else(|| Error::Config("simulate needs a reference cube".into()))?;
    let bands = *x.shape().last().unwrap_or(&0);
    let (y, z, srf) = degrade(spec, &x, srf_for(spec, bands)?)?;
    prepare_out(&spec.out)?;
    let mut outputs = vec!["hsi.npy", "msi.npy", "srf.csv"];
    npy::save(&spec.out.join("hsi.npy"), &y)?;
    npy::save(&spec.out.join("msi.npy"), &z)?;
    write_srf_csv(&spec.out.join("srf.csv"), &srf)?;
    if matches!(spec.source, Source::Synthetic) {
        npy::save(&spec.out.join("reference.npy"), &x)?;
        outputs.push("reference.npy");
    }
    write_manifest(spec, &outputs)?;
    log::info!("HSI {:?}, MSI {:?} written to {}", y.shape(), z.shape(), spec.out.display());
    Ok(SimulateOutput { y, z, srf })
}

#[derive(Clone, Debug)]
pub struct FuseOutput {
    pub estimate: DenseTensor,
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub seconds: f64,
    /// Present when a reference cube was available.
    pub row: Option<MetricRow>,
}

fn fuse_once(inputs: &Inputs, cfg: &FusionConfig, p: usize, run_id: String) -> Result<FuseOutput> {
    let start = Instant::now();
    let out = fuse(&inputs.y, &inputs.z, &inputs.srf, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let row = match &inputs.reference {
        Some(x) => {
            let report = MetricReport::compute(x, &out.estimate, p as f64)?;
            Some(MetricRow::new(run_id, &report, out.iterations, seconds))
        }
        None => None,
    };
    Ok(FuseOutput {
        estimate: out.estimate,
        objective_history: out.state.objective_history,
        iterations: out.iterations,
        seconds,
        row,
    })
}

/// Writes `estimate.npy` and `objective.csv`, appends to `metrics.csv` when
/// a reference is available.
pub fn run_fuse(spec: &ExperimentSpec) -> Result<FuseOutput> {
    let cfg = spec.fusion()?;
    let inputs = load_inputs(spec)?;
    prepare_out(&spec.out)?;
    let result = fuse_once(&inputs, cfg, spec.p, spec.run_id.clone())?;
    npy::save(&spec.out.join(ESTIMATE_NPY), &result.estimate)?;
    write_objective_csv(
        &spec.out.join(OBJECTIVE_CSV),
        &result.objective_history,
        cfg.objective_log_every,
        result.iterations,
    )?;
    let mut outputs = vec![ESTIMATE_NPY, OBJECTIVE_CSV];
    match &result.row {
        Some(row) => {
            append_rows(&spec.out.join(METRICS_CSV), std::slice::from_ref(row))?;
            outputs.push(METRICS_CSV);
            log::info!(
                "{}: PSNR {:.3} dB, SAM {:.4}°, ERGAS {:.4}, UIQI {:.4}",
                row.run_id,
                row.psnr_db,
                row.sam_deg,
                row.ergas,
                row.uiqi
            );
        }
        None => log::info!("no reference cube; metrics skipped"),
    }
    write_manifest(spec, &outputs)?;
    Ok(result)
}

#[derive(Clone, Debug)]
pub struct AblationOutput {
    pub with_graph: MetricRow,
    pub without_graph: MetricRow,
}

impl AblationOutput {
    /// `SAM(β=0) − SAM(β)`; positive when the band graph helps.
    pub fn delta_sam(&self) -> f64 {
        self.without_graph.sam_deg - self.with_graph.sam_deg
    }
}

/// Fuses with the configured β and with β=0 and writes both rows to `ablation.csv`.
pub fn run_ablate(spec: &ExperimentSpec) -> Result<AblationOutput> {
    let cfg = spec.fusion()?;
    let inputs = load_inputs(spec)?;
    if inputs.reference.is_none() {
        return Err(Error::Config("ablate needs a reference cube".into()));
    }
    prepare_out(&spec.out)?;
    let mut plain = cfg.clone();
    plain.beta = 0.0;
    let with = fuse_once(&inputs, cfg, spec.p, format!("{}/beta={}", spec.run_id, cfg.beta))?;
    let without = fuse_once(&inputs, &plain, spec.p, format!("{}/beta=0", spec.run_id))?;
    let out = AblationOutput {
        with_graph: with.row.expect("reference present"),
        without_graph: without.row.expect("reference present"),
    };
    append_rows(&spec.out.join(ABLATION_CSV), &[out.with_graph.clone(), out.without_graph.clone()])?;
    write_manifest(spec, &[ABLATION_CSV])?;
    log::info!("delta SAM (beta=0 minus beta={}) = {:.4}°", cfg.beta, out.delta_sam());
    Ok(out)
}

pub fn run_oracle_check(fault: Option<Fault>) -> Result<Vec<Check>> {
    oracle::run_checks(fault)
}
