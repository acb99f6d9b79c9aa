//! Command-line driver. A run is described by one JSON [`RunConfig`];
//! flags given on the command line override the file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv, split, standardize, synthesize, Dataset, FeatureSchema, SplitSpec, SynthSpec,
};
use crate::error::{Error, Result};
use crate::fairness::fairness_report;
use crate::model::{error_rate, logistic_loss, LinearModel, LossConfig, ModelRecord};
use crate::optim::SGDConfig;
use crate::pareto::{
    default_weights, export_front, front_from_records, front_records, trace_front, FrontConfig,
    FrontPointRecord, ParetoFront, SweepMode,
};
use crate::sharpe::{
    default_ff, solve_sharpe, verify_nondominated, SharpeConfig, SharpeRecord, DEFAULT_EPSILON_F2,
};

pub const DEFAULT_N_TRAIN: usize = 5_000;
pub const DEFAULT_GRID_SIZE: usize = 50;
pub const DEFAULT_DELTA: f64 = 0.024;
/// Per-coordinate slack for the non-domination verdict.
pub const NONDOMINATED_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontSettings {
    /// Explicit weights; when absent a grid of `grid_size` is used.
    pub weights: Option<Vec<f64>>,
    pub grid_size: usize,
    /// Cold-started weights solved in parallel instead of a warm sweep.
    pub parallel: bool,
}

impl Default for FrontSettings {
    fn default() -> Self {
        Self {
            weights: None,
            grid_size: DEFAULT_GRID_SIZE,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SharpeSettings {
    /// Benchmark loss; when absent it is the largest front loss minus `delta`.
    pub ff: Option<f64>,
    pub delta: f64,
    pub epsilon_f2: f64,
}

impl Default for SharpeSettings {
    fn default() -> Self {
        Self {
            ff: None,
            delta: DEFAULT_DELTA,
            epsilon_f2: DEFAULT_EPSILON_F2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub out: PathBuf,
    pub split: SplitSpec,
    pub loss: LossConfig,
    pub sgd: SGDConfig,
    pub front: FrontSettings,
    pub sharpe: SharpeSettings,
    /// Cluster layout for `synth`; defaults to a biased two-group mixture.
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            schema: None,
            out: PathBuf::from("out"),
            split: SplitSpec {
                n_train: DEFAULT_N_TRAIN,
                seed: 0,
            },
            loss: LossConfig::default(),
            sgd: SGDConfig::default(),
            front: FrontSettings::default(),
            sharpe: SharpeSettings::default(),
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    /// Loads the config file, if any, and applies flag overrides.
    pub fn resolve(common: &CommonArgs) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => Self::from_json_file(p)?,
            None => Self::default(),
        };
        if let Some(p) = &common.data {
            cfg.data = Some(p.clone());
        }
        if let Some(p) = &common.schema {
            cfg.schema = Some(p.clone());
        }
        if let Some(p) = &common.out {
            cfg.out = p.clone();
        }
        if let Some(s) = common.seed {
            cfg.split.seed = s;
            cfg.sgd.seed = s;
        }
        Ok(cfg)
    }

    pub fn weights(&self) -> Vec<f64> {
        match &self.front.weights {
            Some(w) => w.clone(),
            None => default_weights(self.front.grid_size),
        }
    }

    pub fn front_config(&self) -> FrontConfig {
        FrontConfig {
            weights: self.weights(),
            sgd: self.sgd,
            loss: self.loss,
            mode: if self.front.parallel {
                SweepMode::ColdParallel
            } else {
                SweepMode::WarmSequential
            },
        }
    }

    fn data_path(&self) -> Result<&Path> {
        let p = self
            .data
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no data file given".into()))?;
        if !p.exists() {
            return Err(Error::FileNotFound(p.to_path_buf()));
        }
        Ok(p)
    }

    fn schema_path(&self) -> Result<&Path> {
        let p = self
            .schema
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no schema file given".into()))?;
        if !p.exists() {
            return Err(Error::FileNotFound(p.to_path_buf()));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Feature schema (JSON)
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for both the split and SGD
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Parser)]
#[command(
    name = "fair-sharpe",
    version,
    about = "Fair linear classifiers via Pareto fronts and the Sharpe predictor"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace the loss / disparate-impact front
    Front {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve for the Sharpe predictor
    Sharpe {
        #[command(flatten)]
        common: CommonArgs,
        /// Benchmark loss
        #[arg(long)]
        ff: Option<f64>,
        /// Offset below the largest front loss when no benchmark is given
        #[arg(long)]
        delta: Option<f64>,
        /// front.json from an earlier `front` run
        #[arg(long)]
        front: Option<PathBuf>,
    },
    /// Report metrics of a saved model on a dataset
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// model.json, or a sharpe.json holding one
        #[arg(long)]
        model: PathBuf,
    },
    /// Write a synthetic biased dataset and its schema
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of features
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Number of rows
        #[arg(long, default_value_t = 2_000)]
        samples: usize,
    },
}

/// Train and test splits, standardized with the training statistics.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub schema: FeatureSchema,
    pub digest: String,
}

/// Loads, splits and standardizes the configured data.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let schema = FeatureSchema::from_json_file(cfg.schema_path()?)?;
    let data = load_csv(cfg.data_path()?, &schema)?;
    let (train, test) = split(&data, cfg.split)?;
    let (train, params) = standardize(&train);
    let test = params.apply(&test)?;
    let schema = train.frozen_schema();
    let digest = schema.digest();
    Ok(Prepared {
        train,
        test,
        schema,
        digest,
    })
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn range(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Traces the front and writes `front.csv`, `front.json` and
/// `schema.frozen.json` into the output directory.
pub fn cmd_front(cfg: &RunConfig) -> Result<ParetoFront> {
    let prep = prepare(cfg)?;
    let front = trace_front(&prep.train, &prep.test, &cfg.front_config())?;
    ensure_dir(&cfg.out)?;
    export_front(&front, &cfg.out.join("front.csv"))?;
    write_json(
        &cfg.out.join("front.json"),
        &front_records(&front, &prep.digest),
    )?;
    prep.schema
        .to_json_file(&cfg.out.join("schema.frozen.json"))?;

    let (f1_lo, f1_hi) = range(front.objectives().map(|o| o.f1));
    let (f2_lo, f2_hi) = range(front.objectives().map(|o| o.f2));
    println!("points: {}", front.len());
    println!("f1:     [{f1_lo:.6}, {f1_hi:.6}]");
    println!("f2_di:  [{f2_lo:.6e}, {f2_hi:.6e}]");
    Ok(front)
}

pub fn read_front_json(path: &Path, digest: &str) -> Result<ParetoFront> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let records: Vec<FrontPointRecord> = serde_json::from_reader(File::open(path)?)?;
    front_from_records(&records, digest)
}

/// Solves for the Sharpe predictor and writes `sharpe.json`, `model.json`,
/// `sharpe_trajectory.jsonl` and `schema.frozen.json`.
pub fn cmd_sharpe(cfg: &RunConfig, front_path: Option<&Path>) -> Result<SharpeRecord> {
    let prep = prepare(cfg)?;
    let front = front_path
        .map(|p| read_front_json(p, &prep.digest))
        .transpose()?;
    let ff = match (cfg.sharpe.ff, &front) {
        (Some(ff), _) => ff,
        (None, Some(f)) => default_ff(f, cfg.sharpe.delta)?,
        (None, None) => {
            return Err(Error::InvalidConfig(
                "a benchmark loss (--ff) or a front (--front) is required".into(),
            ))
        }
    };
    let scfg = SharpeConfig {
        ff,
        epsilon_f2: cfg.sharpe.epsilon_f2,
        sgd: cfg.sgd,
        loss: cfg.loss,
    };
    let mut result = solve_sharpe(&prep.train, &prep.test, &scfg, front.as_ref())?;
    if let Some(f) = &front {
        verify_nondominated(&mut result, f, NONDOMINATED_TOL);
    }

    ensure_dir(&cfg.out)?;
    let record = result.record(&prep.digest);
    write_json(&cfg.out.join("sharpe.json"), &record)?;
    write_json(&cfg.out.join("model.json"), &record.model)?;
    let traj = BufWriter::new(File::create(cfg.out.join("sharpe_trajectory.jsonl"))?);
    result.trajectory.write_jsonl(traj)?;
    prep.schema
        .to_json_file(&cfg.out.join("schema.frozen.json"))?;

    println!("ff:     {ff:.6}");
    println!("ratio:  {:.6}", record.ratio);
    println!("f1:     {:.6}", record.f1);
    println!("f2_di:  {:.6e}", record.f2);
    if let Some(nd) = record.nondominated {
        println!("nondominated: {nd}");
    }
    if record.floor_active {
        println!("note: f2_di is at the floor {:e}", cfg.sharpe.epsilon_f2);
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub f1: f64,
    pub error_rate: f64,
    pub cv_score: f64,
    pub f2_di: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelFile {
    Plain(ModelRecord),
    Wrapped { model: ModelRecord },
}

pub fn read_model_json(path: &Path) -> Result<ModelRecord> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    Ok(match serde_json::from_reader(File::open(path)?)? {
        ModelFile::Plain(m) | ModelFile::Wrapped { model: m } => m,
    })
}

/// Metrics of `model` on `d`.
pub fn evaluate(model: &LinearModel, d: &Dataset, loss: &LossConfig) -> Result<EvaluationReport> {
    let fair = fairness_report(model, d)?;
    Ok(EvaluationReport {
        n: d.len(),
        f1: logistic_loss(model, d, loss)?,
        error_rate: error_rate(model, d)?,
        cv_score: fair.cv_score,
        f2_di: fair.f2_di,
    })
}

/// Evaluates a saved model on the whole data file. The schema should be the
/// frozen one written at training time; its scaling is applied to the data
/// and its digest must match the model's.
pub fn cmd_evaluate(cfg: &RunConfig, model_path: &Path) -> Result<EvaluationReport> {
    let record = read_model_json(model_path)?;
    let schema = FeatureSchema::from_json_file(cfg.schema_path()?)?;
    let mut data = load_csv(cfg.data_path()?, &schema)?;
    if let Some(s) = &schema.scaling {
        data = s.apply(&data)?;
    }
    let digest = data.frozen_schema().digest();
    if record.schema_digest != digest {
        return Err(Error::SchemaMismatch {
            model: record.schema_digest,
            data: digest,
        });
    }
    let report = evaluate(&record.model()?, &data, &cfg.loss)?;

    ensure_dir(&cfg.out)?;
    write_json(&cfg.out.join("evaluate.json"), &report)?;
    println!("n:          {}", report.n);
    println!("f1:         {:.6}", report.f1);
    println!("error_rate: {:.6}", report.error_rate);
    println!("cv_score:   {:.6}", report.cv_score);
    println!("f2_di:      {:.6e}", report.f2_di);
    Ok(report)
}

/// Writes `data.csv` and `schema.json` for a synthetic dataset. The seed is
/// the split seed (or `--seed`).
pub fn cmd_synth(cfg: &RunConfig, dim: usize, samples: usize) -> Result<PathBuf> {
    let spec = match &cfg.synth {
        Some(s) => s.clone(),
        None if dim < 2 || samples < 20 => {
            return Err(Error::InvalidConfig(
                "synthetic data needs at least 2 features and 20 rows".into(),
            ))
        }
        None => SynthSpec::biased(dim, samples),
    };
    let data = synthesize(&spec, cfg.split.seed)?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("data.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    data.write_csv(&mut w)?;
    w.flush()?;
    FeatureSchema::numeric(spec.dim()).to_json_file(&cfg.out.join("schema.json"))?;
    println!("wrote {} rows to {}", data.len(), path.display());
    Ok(path)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Front { common } => {
            cmd_front(&RunConfig::resolve(&common)?)?;
        }
        Command::Sharpe {
            common,
            ff,
            delta,
            front,
        } => {
            let mut cfg = RunConfig::resolve(&common)?;
            if ff.is_some() {
                cfg.sharpe.ff = ff;
            }
            if let Some(d) = delta {
                cfg.sharpe.delta = d;
            }
            cmd_sharpe(&cfg, front.as_deref())?;
        }
        Command::Evaluate { common, model } => {
            cmd_evaluate(&RunConfig::resolve(&common)?, &model)?;
        }
        Command::Synth {
            common,
            dim,
            samples,
        } => {
            cmd_synth(&RunConfig::resolve(&common)?, dim, samples)?;
        }
    }
    Ok(())
}
