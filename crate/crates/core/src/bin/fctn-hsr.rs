use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fctn_hsr::experiment::{self, ExperimentFile, Mode};
use fctn_hsr::oracle::Fault;
use fctn_hsr::{Error, Weighting};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "fctn-hsr", version, about = "Hyperspectral super-resolution by coupled FCTN decomposition")]
struct Cli {
    /// Worker threads for dense products (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Degrade a reference cube into a low-resolution HSI and an MSI.
    Simulate(RunArgs),
    /// Fuse an HSI and an MSI into a high-resolution HSI.
    Fuse(RunArgs),
    /// Fuse with the configured beta and with beta=0 and report both.
    Ablate(RunArgs),
    /// Run the built-in property checks on tiny instances.
    OracleCheck {
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    CompositeSign,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WeightingArg {
    Objective,
    UpdateEquations,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML settings file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference cube (NPY, M×N×S).
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Low-resolution HSI (NPY, m×n×S).
    #[arg(long)]
    hsi: Option<PathBuf>,
    /// High-resolution MSI (NPY, M×N×s).
    #[arg(long)]
    msi: Option<PathBuf>,
    /// Spectral response, headerless CSV with s rows and S columns.
    #[arg(long)]
    srf: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label of the metrics row (default `<command>-seed<seed>`).
    #[arg(long)]
    run_id: Option<String>,
    /// Use the bundled synthetic scene as the reference cube.
    #[arg(long)]
    synthetic: bool,
    /// Seed of the synthetic scene.
    #[arg(long)]
    scene_seed: Option<u64>,
    /// Bands of the synthetic scene.
    #[arg(long)]
    bands: Option<usize>,
    /// MSI bands of the generated spectral response when no --srf is given.
    #[arg(long)]
    msi_bands: Option<usize>,
    /// Weight of the MSI fit.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Ridge weight on Q and the spatial factors.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Weight of the band-graph regularizer.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Bandwidth of the band-similarity weights.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Neighbouring bands linked on each side.
    #[arg(long)]
    graph_half_width: Option<usize>,
    /// Number of sweeps.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed of the factor initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the observation noise (the MSI uses seed + 1).
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Spatial downsampling ratio.
    #[arg(long)]
    p: Option<usize>,
    /// HSI noise level in dB; noiseless when omitted.
    #[arg(long, allow_negative_numbers = true)]
    snr_hsi: Option<f64>,
    /// MSI noise level in dB; noiseless when omitted.
    #[arg(long, allow_negative_numbers = true)]
    snr_msi: Option<f64>,
    /// Upper-triangle bond ranks r12,r13,...,r23,...
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Scales as MxN pairs, e.g. 8x8,5x5,2x2,3x3.
    #[arg(long)]
    plan: Option<String>,
    /// Relative residual tolerance of the spectral CG solve.
    #[arg(long)]
    cg_tol: Option<f64>,
    /// Iteration cap of the spectral CG solve.
    #[arg(long)]
    cg_max_iter: Option<usize>,
    /// Record the objective every this many sweeps.
    #[arg(long)]
    log_every: Option<usize>,
    /// Which data term carries lambda.
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    /// Stop once the objective stalls.
    #[arg(long)]
    early_stop: bool,
}

impl RunArgs {
    fn settings(&self) -> Result<ExperimentFile, Error> {
        let base = match &self.config {
            Some(path) => ExperimentFile::load(path)?,
            None => ExperimentFile::default(),
        };
        let flags = ExperimentFile {
            reference: self.reference.clone(),
            hsi: self.hsi.clone(),
            msi: self.msi.clone(),
            srf: self.srf.clone(),
            out: self.out.clone(),
            run_id: self.run_id.clone(),
            synthetic: self.synthetic.then_some(true),
            scene_seed: self.scene_seed,
            scene_ranks: None,
            bands: self.bands,
            msi_bands: self.msi_bands,
            p: self.p,
            snr_hsi: self.snr_hsi,
            snr_msi: self.snr_msi,
            noise_seed: self.noise_seed,
            plan: self.plan.clone(),
            ranks: self.ranks.clone(),
            lambda: self.lambda,
            mu: self.mu,
            beta: self.beta,
            sigma: self.sigma,
            graph_half_width: self.graph_half_width,
            max_iter: self.max_iter,
            seed: self.seed,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            objective_log_every: self.log_every,
            weighting: self.weighting.map(|w| match w {
                WeightingArg::Objective => Weighting::Objective,
                WeightingArg::UpdateEquations => Weighting::UpdateEquations,
            }),
            early_stop: self.early_stop.then_some(true),
        };
        Ok(base.overlay(flags))
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let (mode, args) = match &cli.command {
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Fuse(a) => (Mode::Fuse, a),
        Command::Ablate(a) => (Mode::Ablate, a),
        Command::OracleCheck { inject_fault } => {
            let fault = inject_fault.map(|FaultArg::CompositeSign| Fault::CompositeSign);
            let checks = experiment::run_oracle_check(fault)?;
            let mut failed = 0;
            for c in &checks {
                let verdict = if c.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict}  {:<48} worst {:.3e}  tol {:.0e}  ({} instances)",
                    c.name, c.worst, c.tolerance, c.instances
                );
                failed += usize::from(!c.passed());
            }
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            return Ok(if failed == 0 { 0 } else { EXIT_CHECK_FAILED });
        }
    };
    let spec = args.settings()?.resolve(mode)?;
    match mode {
        Mode::Simulate => {
            let out = experiment::run_simulate(&spec)?;
            println!("hsi {:?}  msi {:?}  -> {}", out.y.shape(), out.z.shape(), spec.out.display());
        }
        Mode::Fuse => {
            let out = experiment::run_fuse(&spec)?;
            match &out.row {
                Some(r) => println!(
                    "{}  psnr {:.4} dB  sam {:.4} deg  ergas {:.4}  uiqi {:.4}  iterations {}  ({:.2} s)",
                    r.run_id, r.psnr_db, r.sam_deg, r.ergas, r.uiqi, r.iterations, r.seconds
                ),
                None => println!("{}  iterations {}  ({:.2} s)", spec.run_id, out.iterations, out.seconds),
            }
        }
        Mode::Ablate => {
            let out = experiment::run_ablate(&spec)?;
            for r in [&out.with_graph, &out.without_graph] {
                println!("{}  psnr {:.4} dB  sam {:.4} deg", r.run_id, r.psnr_db, r.sam_deg);
            }
            println!("delta sam {:.4} deg", out.delta_sam());
        }
        Mode::OracleCheck => unreachable!("handled above"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_CONFIG })
        }
    }
}
