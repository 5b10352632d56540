use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use spqn::conv_spec::read_conv_spec;
use spqn::dataset_file::{dataset_to_string, read_dataset, write_dataset, Dataset};
use spqn::manifest::{default_manifest_path, write_manifest, Recorder};
use spqn::model_file::{read_model, write_model};
use spqn::number::fmt17;
use spqn::FormatError;
use spqn_core::builders::{build_baseline_spn, build_conv_spqn, build_trianglefree_spqn};
use spqn_core::eval::Evaluator;
use spqn_core::sample::Sampler;
use spqn_core::train::{train, TrainConfig};
use spqn_core::validate::{self, Profile, Rule, ValidationReport};
use spqn_core::{dataset, oracle, Evidence, Model};

#[derive(Parser)]
#[command(name = "spqn", version, about = "Build, check, evaluate, sample and train sum-product-quotient networks")]
struct Cli {
    /// Worker threads for parallel sections (1 = fully sequential).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Conv,
    Trianglefree,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    DncSpn,
    ValidCmo,
    SoundnessBruteforce,
    All,
    Auto,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Profile {
        match p {
            ProfileArg::DncSpn => Profile::DncSpn,
            ProfileArg::ValidCmo => Profile::ValidCmo,
            ProfileArg::SoundnessBruteforce => Profile::SoundnessBruteforce,
            ProfileArg::All => Profile::All,
            ProfileArg::Auto => Profile::Auto,
        }
    }
}

#[derive(clap::Args)]
struct ManifestArg {
    /// Run manifest path (default: OUT.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a network and write it as a model file.
    Build {
        #[arg(long, value_enum)]
        arch: Arch,
        /// Convolution spec (conv and baseline).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Number of graph vertices (trianglefree).
        #[arg(long = "M", visible_alias = "m")]
        m: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the logit initialization.
        #[arg(long, env = "SPQN_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        manifest: ManifestArg,
    },
    /// Check tractability conditions; prints violations then PASS or FAIL.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        profile: ProfileArg,
        /// Largest variable count for enumeration-based checks.
        #[arg(long, default_value_t = validate::DEFAULT_ENUMERATION_LIMIT)]
        max_vars: usize,
    },
    /// Log-likelihood of each sample in a dataset file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Draw samples, optionally conditioned on a one-line dataset file.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, env = "SPQN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        condition: Option<PathBuf>,
        /// Output dataset file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        manifest: ManifestArg,
    },
    /// Maximum-likelihood training with Adam.
    Train {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5e-2)]
        lr: f64,
        #[arg(long, default_value_t = 0.9)]
        beta1: f64,
        #[arg(long, default_value_t = 0.9)]
        beta2: f64,
        #[arg(long, default_value_t = 1e-8)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, env = "SPQN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_shuffle: bool,
        #[command(flatten)]
        manifest: ManifestArg,
    },
    /// Generate the synthetic grid path dataset.
    GenDataset {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, env = "SPQN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        manifest: ManifestArg,
    },
    /// Print the probability of every full assignment.
    Enumerate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = validate::DEFAULT_ENUMERATION_LIMIT)]
        max_vars: usize,
    },
}

fn finish_manifest(rec: Recorder, outputs: &[PathBuf], explicit: Option<PathBuf>) -> Result<()> {
    let path = explicit.unwrap_or_else(|| default_manifest_path(&outputs[0]));
    write_manifest(&path, &rec.finish(outputs)?)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    read_model(path).with_context(|| format!("loading {}", path.display()))
}

fn load_data(path: &Path, num_vars: usize) -> Result<Vec<Evidence>> {
    let Dataset { num_vars: n, samples } = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    if n != num_vars {
        bail!("{} has {n} variables, the model has {num_vars}", path.display());
    }
    Ok(samples)
}

fn build(arch: Arch, spec: Option<&Path>, m: Option<usize>, seed: u64) -> Result<Model> {
    let need_spec = || spec.context("--spec is required for this architecture");
    Ok(match arch {
        Arch::Conv => build_conv_spqn(&read_conv_spec(need_spec()?)?, seed)?,
        Arch::Baseline => build_baseline_spn(&read_conv_spec(need_spec()?)?, seed)?,
        Arch::Trianglefree => build_trianglefree_spqn(m.context("--M is required for trianglefree")?)?,
    })
}

/// Prints the report and returns whether it passed. Models that fail to
/// load for structural reasons are reported as a `structure` violation.
fn validate_cmd(model: &Path, profile: Profile, max_vars: usize, out: &mut impl std::io::Write) -> Result<bool> {
    let report = match read_model(model) {
        Ok(m) => validate::validate_profile(&m, profile, max_vars)?,
        Err(FormatError::Core(spqn_core::Error::Structure { node, detail })) => {
            let mut r = ValidationReport::default();
            r.push(node, Rule::Structure, detail);
            r
        }
        Err(FormatError::Core(spqn_core::Error::Cycle(node))) => {
            let mut r = ValidationReport::default();
            r.push(node, Rule::Structure, "cycle through this node");
            r
        }
        Err(e) => return Err(e).with_context(|| format!("loading {}", model.display())),
    };
    write!(out, "{report}")?;
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let argv: Vec<String> = std::env::args().collect();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    match cli.command {
        Command::Build { arch, spec, m, out: path, seed, manifest } => {
            let mut rec = Recorder::start(argv, cli.threads);
            rec.seed("seed", seed);
            if let Some(s) = &spec {
                rec.input(s);
            }
            let model = build(arch, spec.as_deref(), m, seed)?;
            write_model(&path, &model)?;
            finish_manifest(rec, &[path], manifest.manifest)?;
        }
        Command::Validate { model, profile, max_vars } => {
            let passed = validate_cmd(&model, profile.into(), max_vars, &mut out)?;
            out.flush()?;
            if !passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Eval { model, data } => {
            let model = load_model(&model)?;
            let samples = load_data(&data, model.network.num_vars())?;
            let eval = Evaluator::new(&model.network, &model.params)?;
            let values = eval.evaluate_batch(&samples)?;
            for (i, v) in values.iter().enumerate() {
                writeln!(out, "{i}\t{}", fmt17(*v))?;
            }
            let mean = if values.is_empty() {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            writeln!(out, "mean={}", fmt17(mean))?;
        }
        Command::Sample { model: model_path, count, seed, condition, out: path, manifest } => {
            let mut rec = Recorder::start(argv, cli.threads);
            rec.seed("seed", seed);
            rec.input(&model_path);
            let model = load_model(&model_path)?;
            let n = model.network.num_vars();
            let partial = match &condition {
                Some(c) => {
                    rec.input(c);
                    let rows = load_data(c, n)?;
                    match <[Evidence; 1]>::try_from(rows) {
                        Ok([row]) => row,
                        Err(rows) => bail!("{} must hold exactly one row, found {}", c.display(), rows.len()),
                    }
                }
                None => Evidence::all_star(n),
            };
            let samples = Sampler::new(&model.network, &model.params)?.sample_batch(&partial, count, seed)?;
            match path {
                Some(p) => {
                    write_dataset(&p, n, &samples)?;
                    finish_manifest(rec, &[p], manifest.manifest)?;
                }
                None => out.write_all(dataset_to_string(n, &samples).as_bytes())?,
            }
        }
        Command::Train {
            model: model_path,
            data,
            valid,
            out: path,
            lr,
            beta1,
            beta2,
            epsilon,
            batch,
            epochs,
            seed,
            no_shuffle,
            manifest,
        } => {
            let mut rec = Recorder::start(argv, cli.threads);
            rec.seed("seed", seed);
            rec.input(&model_path);
            rec.input(&data);
            let model = load_model(&model_path)?;
            let n = model.network.num_vars();
            let train_set = load_data(&data, n)?;
            let valid_set = match &valid {
                Some(v) => {
                    rec.input(v);
                    Some(load_data(v, n)?)
                }
                None => None,
            };
            let config = TrainConfig {
                learning_rate: lr,
                beta1,
                beta2,
                epsilon,
                batch_size: batch,
                epochs,
                seed,
                shuffle: !no_shuffle,
            };
            let (params, history) = train(&model.network, &model.params, &train_set, valid_set.as_deref(), &config)?;
            for h in &history {
                let valid = h.valid_ll.map_or_else(|| "nan".to_string(), fmt17);
                writeln!(out, "epoch={} train_ll={} valid_ll={valid}", h.epoch, fmt17(h.train_ll))?;
            }
            let trained = Model { params, ..model };
            write_model(&path, &trained)?;
            finish_manifest(rec, &[path], manifest.manifest)?;
        }
        Command::GenDataset { width, height, count, seed, out: path, manifest } => {
            if width < 2 || height < 2 {
                bail!("width and height must be at least 2");
            }
            let mut rec = Recorder::start(argv, cli.threads);
            rec.seed("seed", seed);
            let samples: Vec<Evidence> = dataset::generate_path_dataset(width, height, count, seed)
                .iter()
                .map(|g| g.to_evidence())
                .collect();
            write_dataset(&path, width * height, &samples)?;
            finish_manifest(rec, &[path], manifest.manifest)?;
        }
        Command::Enumerate { model, max_vars } => {
            let model = load_model(&model)?;
            let dist = oracle::enumerate_distribution(&model.network, &model.params, max_vars)?;
            let n = model.network.num_vars();
            for (code, p) in dist.probs().iter().enumerate() {
                writeln!(out, "{}\t{}", Evidence::from_index(n, code as u64), fmt17(*p))?;
            }
            writeln!(out, "total={}", fmt17(dist.total()))?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
