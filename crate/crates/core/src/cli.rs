//! Command-line front end.
//!
//! Every subcommand writes `metadata.json` into its output directory.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_ols, posterior_mean_beta, run_fixed_lambda_chain, BaselineMethod};
use crate::error::{Result, StmError};
use crate::gibbs::{run_chain, Chain};
use crate::io::{
    config_help, load_covariates, read_chain, write_chain, write_covariates, RunConfig, RunMetadata,
    VolumeFile,
};
use crate::lattice::Lattice;
use crate::model::Dataset;
use crate::simgen::{gen_dataset, pattern_hash, SimScenario, SIM_COVARIATES};
use crate::summary::{rmse, summarize, trace_report, SummaryMaps};

pub const DATA_FILE: &str = "data.stmv";
pub const COVARIATES_FILE: &str = "covariates.csv";
pub const BETA_TRUE_FILE: &str = "beta_true.stmv";
pub const LAMBDA_TRUE_FILE: &str = "lambda_true.stmv";
pub const TRUTH_FILE: &str = "truth.json";
pub const BETA_MEAN_FILE: &str = "beta_mean.stmv";
pub const RUN_CONFIG_FILE: &str = "run_config.cfg";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";

/// Acceptance rates outside this band are listed in the summary report.
pub const ACCEPT_BAND: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Parser)]
#[command(name = "stm", version, about = "Spatial transformation models for imaging data", after_help = config_help())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known coefficient images and exponents.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and store the chain.
    #[command(after_help = config_help())]
    Fit(FitArgs),
    /// Posterior means, credible intervals and threshold maps from a chain.
    Summarize(SummarizeArgs),
    /// Fit a comparison model.
    #[command(after_help = config_help())]
    Baseline(BaselineArgs),
    /// RMSE of estimated coefficient images against a simulation's truth.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Lattice size, e.g. 32,32 or 16,16,8.
    #[arg(long, value_delimiter = ',', default_values_t = vec![32usize, 32])]
    pub dims: Vec<usize>,
    /// Number of subjects.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Set every exponent to 1.
    #[arg(long)]
    pub no_transformation: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, required_unless_present = "from_metadata")]
    pub data: Option<PathBuf>,
    #[arg(long, required_unless_present = "from_metadata")]
    pub covariates: Option<PathBuf>,
    /// Config file; defaults apply to keys it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repeat the run recorded in a fit's metadata.json.
    #[arg(long, conflicts_with_all = ["data", "covariates", "config"])]
    pub from_metadata: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Voxel indices whose draws are written to trace.csv.
    #[arg(long, value_delimiter = ',')]
    pub trace_voxels: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// ols or gmrf-fixed-lambda.
    #[arg(long)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub covariates: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Directories holding beta_mean.stmv and metadata.json.
    #[arg(long, num_args = 1.., required = true)]
    pub estimates: Vec<PathBuf>,
}

/// Ground-truth sidecar written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub n_subjects: usize,
    pub sigma: f64,
    pub lambda_levels: Vec<f64>,
    pub pattern_hash: String,
    pub c0: f64,
    pub retries: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub level: f64,
    pub n_draws: usize,
    pub fraction_signif: Vec<f64>,
    pub fraction_lambda_not_one: f64,
    pub mean_accept_rate: f64,
    pub accept_band: (f64, f64),
    /// Voxels whose λ acceptance rate falls outside `accept_band`.
    pub accept_outliers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: String,
    pub coefficient: usize,
    pub rmse: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
        Command::Summarize(a) => summarize_cmd(&a),
        Command::Baseline(a) => baseline(&a),
        Command::Compare(a) => {
            let rows = compare(&a.truth, &a.estimates)?;
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(["method", "coefficient", "rmse"])?;
            for r in rows {
                w.write_record([r.method, r.coefficient.to_string(), format!("{:.6}", r.rmse)])?;
            }
            w.flush().map_err(|e| StmError::io("<stdout>", e))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| StmError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| StmError::io(path, e))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let mut sc = SimScenario {
        dims: a.dims.clone(),
        n: a.n,
        seed: a.seed,
        ..SimScenario::default()
    };
    if a.no_transformation {
        sc = sc.without_transformation();
    }
    let sim = gen_dataset(&sc)?;
    create_dir(&a.out)?;
    let ds = &sim.dataset;
    VolumeFile::new(sc.dims.clone(), ds.n_subjects(), ds.y().transpose().as_slice().to_vec())?
        .write(a.out.join(DATA_FILE))?;
    write_covariates(a.out.join(COVARIATES_FILE), &["x1", "x2", "x3"], &sim.covariates)?;
    VolumeFile::from_columns(sc.dims.clone(), &sim.beta_true)?.write(a.out.join(BETA_TRUE_FILE))?;
    VolumeFile::new(sc.dims.clone(), 1, sim.lambda_true.clone())?.write(a.out.join(LAMBDA_TRUE_FILE))?;
    let patterns: Vec<Vec<f64>> = (0..SIM_COVARIATES)
        .map(|k| sim.beta_true.column(k).iter().copied().collect())
        .collect();
    let truth = Truth {
        seed: sc.seed,
        dims: sc.dims.clone(),
        n_subjects: sc.n,
        sigma: sc.sigma,
        lambda_levels: sc.lambda_levels.clone(),
        pattern_hash: pattern_hash(&patterns),
        c0: ds.c0(),
        retries: sim.retries,
    };
    write_text(&a.out.join(TRUTH_FILE), &(serde_json::to_string_pretty(&truth)? + "\n"))?;
    let mut meta = RunMetadata::new("simulate");
    meta.seed = Some(sc.seed);
    meta.c0 = Some(ds.c0());
    meta.data_fingerprint = Some(crate::gibbs::data_fingerprint(ds));
    meta.wall_seconds = start.elapsed().as_secs_f64();
    meta.write(&a.out)
}

/// Reads a volume of responses and a covariate CSV into a dataset, resolving
/// the Box-Cox shift.
pub fn load_dataset(data: &Path, covariates: &Path, cfg: &RunConfig) -> Result<(Dataset, f64)> {
    let vol = VolumeFile::read(data)?;
    let x = load_covariates(covariates)?;
    if x.nrows() != vol.n_subjects {
        return Err(StmError::Dimension(format!(
            "{} has {} subjects but {} has {} rows",
            data.display(),
            vol.n_subjects,
            covariates.display(),
            x.nrows()
        )));
    }
    let lattice = Lattice::new(&vol.dims)?;
    let c0 = cfg.c0.resolve(&vol.data);
    let ds = Dataset::new(lattice, vol.to_subject_major(), x, c0)?;
    if !ds.is_full_rank() {
        eprintln!("stm: warning: design matrix is rank deficient; coefficients are identified only through the prior");
    }
    Ok((ds, c0))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let (data, covariates, cfg) = match &a.from_metadata {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| StmError::io(path, e))?;
            let meta: RunMetadata =
                serde_json::from_str(&text).map_err(|e| StmError::format(path, e.to_string()))?;
            if meta.command != "fit" || meta.inputs.len() < 2 {
                return Err(StmError::format(path, "not the metadata of a fit run"));
            }
            let echo = meta
                .config
                .ok_or_else(|| StmError::format(path, "metadata has no config echo"))?;
            (meta.inputs[0].clone(), meta.inputs[1].clone(), RunConfig::parse(&echo)?)
        }
        None => (
            a.data.clone().expect("clap enforces --data"),
            a.covariates.clone().expect("clap enforces --covariates"),
            load_config(a.config.as_deref())?,
        ),
    };
    let (ds, c0) = load_dataset(&data, &covariates, &cfg)?;
    let hp = cfg.hyperparams(ds.n_covariates())?;
    let chain = run_chain(&ds, &hp, &cfg.sampler_config(), None)?;
    write_chain(&a.out, &chain)?;
    let echo = cfg.echo(Some(c0));
    write_text(&a.out.join(RUN_CONFIG_FILE), &echo)?;

    let mut meta = RunMetadata::new("fit");
    meta.seed = Some(cfg.seed);
    meta.inputs = vec![absolute(&data), absolute(&covariates)];
    meta.config = Some(echo);
    meta.c0 = Some(c0);
    meta.method = Some("stm".into());
    meta.data_fingerprint = Some(chain.meta.data_fingerprint.clone());
    meta.mean_sweep_seconds = Some(chain.meta.mean_sweep_seconds());
    if !ds.is_full_rank() {
        meta.notes.push("design matrix is rank deficient".into());
    }
    meta.wall_seconds = start.elapsed().as_secs_f64();
    meta.write(&a.out)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn bool_map(m: &DMatrix<bool>) -> DMatrix<f64> {
    m.map(|b| if b { 1.0 } else { 0.0 })
}

fn bools(v: &[bool]) -> Vec<f64> {
    v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Writes every summary map as a volume file into `out`.
pub fn write_summary_maps(out: &Path, dims: &[usize], s: &SummaryMaps) -> Result<()> {
    let dims = dims.to_vec();
    let images: [(&str, DMatrix<f64>); 4] = [
        (BETA_MEAN_FILE, s.beta_mean.clone()),
        ("beta_ci_lo.stmv", s.beta_ci_lo.clone()),
        ("beta_ci_hi.stmv", s.beta_ci_hi.clone()),
        ("beta_signif.stmv", bool_map(&s.beta_signif)),
    ];
    for (name, m) in images {
        VolumeFile::from_columns(dims.clone(), &m)?.write(out.join(name))?;
    }
    let maps: [(&str, Vec<f64>); 6] = [
        ("lambda_mean.stmv", s.lambda_mean.clone()),
        ("lambda_ci_lo.stmv", s.lambda_ci_lo.clone()),
        ("lambda_ci_hi.stmv", s.lambda_ci_hi.clone()),
        ("lambda_not_one.stmv", bools(&s.lambda_not_one)),
        ("tau_mean.stmv", s.tau_mean.clone()),
        ("accept_rate.stmv", s.accept_rate.clone()),
    ];
    for (name, v) in maps {
        VolumeFile::new(dims.clone(), 1, v)?.write(out.join(name))?;
    }
    Ok(())
}

pub fn summary_report(chain: &Chain, s: &SummaryMaps) -> SummaryReport {
    let p = s.beta_mean.ncols();
    let rates = &s.accept_rate;
    SummaryReport {
        level: s.level,
        n_draws: chain.draws.len(),
        fraction_signif: (0..p).map(|k| s.fraction_signif(k)).collect(),
        fraction_lambda_not_one: s.fraction_lambda_not_one(),
        mean_accept_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
        accept_band: ACCEPT_BAND,
        accept_outliers: rates
            .iter()
            .enumerate()
            .filter(|(_, &r)| r <= ACCEPT_BAND.0 || r >= ACCEPT_BAND.1)
            .map(|(d, _)| d)
            .collect(),
    }
}

pub fn summarize_cmd(a: &SummarizeArgs) -> Result<()> {
    let start = Instant::now();
    let chain = read_chain(&a.chain)?;
    let s = summarize(&chain, a.level)?;
    create_dir(&a.out)?;
    write_summary_maps(&a.out, &chain.meta.dims, &s)?;
    let report = summary_report(&chain, &s);
    if chain.meta.config.sample_lambda && !report.accept_outliers.is_empty() {
        eprintln!(
            "stm: warning: {} voxels have lambda acceptance outside ({}, {})",
            report.accept_outliers.len(),
            ACCEPT_BAND.0,
            ACCEPT_BAND.1
        );
    }
    write_text(&a.out.join(SUMMARY_FILE), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if !a.trace_voxels.is_empty() {
        let path = a.out.join(TRACE_FILE);
        let f = fs::File::create(&path).map_err(|e| StmError::io(&path, e))?;
        let mut w = std::io::BufWriter::new(f);
        trace_report(&chain, &a.trace_voxels, &mut w)?;
        w.flush().map_err(|e| StmError::io(&path, e))?;
    }
    let mut meta = RunMetadata::new("summarize");
    meta.seed = Some(chain.meta.config.seed);
    meta.inputs = vec![absolute(&a.chain)];
    meta.method = Some(if chain.meta.config.sample_lambda { "stm" } else { "gmrf-fixed-lambda" }.into());
    meta.data_fingerprint = Some(chain.meta.data_fingerprint.clone());
    meta.mean_sweep_seconds = Some(chain.meta.mean_sweep_seconds());
    meta.wall_seconds = start.elapsed().as_secs_f64();
    meta.write(&a.out)
}

pub fn baseline(a: &BaselineArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(a.config.as_deref())?;
    let (ds, c0) = load_dataset(&a.data, &a.covariates, &cfg)?;
    create_dir(&a.out)?;
    let dims = ds.lattice().dims().to_vec();
    let mut meta = RunMetadata::new("baseline");
    meta.inputs = vec![absolute(&a.data), absolute(&a.covariates)];
    meta.method = Some(a.method.as_str().into());
    meta.c0 = Some(c0);
    meta.data_fingerprint = Some(crate::gibbs::data_fingerprint(&ds));
    match a.method {
        BaselineMethod::Ols => {
            let fit = fit_ols(&ds)?;
            VolumeFile::from_columns(dims, &fit.beta_est)?.write(a.out.join(BETA_MEAN_FILE))?;
        }
        BaselineMethod::GmrfFixedLambda => {
            let hp = cfg.hyperparams(ds.n_covariates())?;
            let chain = run_fixed_lambda_chain(&ds, &hp, &cfg.sampler_config())?;
            VolumeFile::from_columns(dims.clone(), &posterior_mean_beta(&chain)?)?
                .write(a.out.join(BETA_MEAN_FILE))?;
            let s = summarize(&chain, cfg.level)?;
            write_summary_maps(&a.out, &dims, &s)?;
            let echo = cfg.echo(Some(c0));
            write_text(&a.out.join(RUN_CONFIG_FILE), &echo)?;
            meta.seed = Some(cfg.seed);
            meta.config = Some(echo);
            meta.mean_sweep_seconds = Some(chain.meta.mean_sweep_seconds());
        }
    }
    meta.wall_seconds = start.elapsed().as_secs_f64();
    meta.write(&a.out)
}

/// One row per estimate directory per coefficient image. The method name
/// comes from the directory's metadata, falling back to the directory name.
pub fn compare(truth_dir: &Path, estimates: &[PathBuf]) -> Result<Vec<CompareRow>> {
    let truth = VolumeFile::read(truth_dir.join(BETA_TRUE_FILE))?;
    let mut rows = Vec::new();
    for dir in estimates {
        let path = dir.join(BETA_MEAN_FILE);
        let est = VolumeFile::read(&path)?;
        if est.dims != truth.dims || est.n_subjects != truth.n_subjects {
            return Err(StmError::Dimension(format!(
                "{} has shape {:?}×{}, truth has {:?}×{}",
                path.display(),
                est.dims,
                est.n_subjects,
                truth.dims,
                truth.n_subjects
            )));
        }
        let method = RunMetadata::read(dir)
            .ok()
            .and_then(|m| m.method)
            .unwrap_or_else(|| dir.file_name().map_or("?".into(), |n| n.to_string_lossy().into_owned()));
        for k in 0..truth.n_subjects {
            rows.push(CompareRow {
                method: method.clone(),
                coefficient: k,
                rmse: rmse(est.record(k), truth.record(k)),
            });
        }
    }
    Ok(rows)
}
