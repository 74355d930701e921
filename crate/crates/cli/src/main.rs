mod bundle;
mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mvset::experiments::{compare, run_pipeline, ComparisonConfig, ComparisonReport};
use mvset::io::{default_header, read_csv_matrix, write_csv_matrix};
use mvset::{datagen, MixtureSpec};
use ndarray::Array2;

use bundle::{read_json, summarize, write_bundle, Bundle};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "mvset", version, about = "Minimum volume set estimation with calibrated one-class SVMs")]
struct Cli {
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic or bundled data set as CSV.
    Gen(GenArgs),
    /// Fit ensembles over a bandwidth grid and write a model bundle.
    Fit(FitArgs),
    /// Score the rows of a CSV file against a bundle.
    Eval(EvalArgs),
    /// Score a regular lattice over the bounding box (two features only).
    Grid(GridArgs),
    /// Compare against the standard one-class SVM and the KDE plug-in.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataSet {
    Bimodal,
    Contaminated,
    Moons,
    /// Boston housing RM and LSTAT, standardized.
    Boston,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, conflicts_with = "spec_file")]
    data: Option<DataSet>,
    /// Mixture description as JSON.
    #[arg(long)]
    spec_file: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(short, long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = datagen::TWO_MOONS_NOISE)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mass_half_width: Option<f64>,
    #[arg(long)]
    mass_count: Option<usize>,
    /// Extra masses to calibrate, comma separated.
    #[arg(long, value_delimiter = ',')]
    extra_masses: Option<Vec<f64>>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(short = 'B', long)]
    members: Option<usize>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    sigma_count: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl FitArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone(); })*
            };
        }
        set!(
            nu => nu, alpha => alpha, mass_half_width => mass_half_width, mass_count => mass_count,
            extra_masses => extra_masses, train_fraction => train_fraction, members => members,
            sigma_min => sigma.min, sigma_max => sigma.max, sigma_count => sigma.count,
            mc_samples => mc_samples, seed => seed,
        );
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.output = Some(p.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(short, long)]
    model: PathBuf,
    #[arg(short, long)]
    query: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    beta: f64,
    /// Output CSV with columns score,inside.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(short, long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    /// Output CSV with columns x,y,score.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Bimodal Gaussian mixture.
    Bimodal,
    /// Bimodal mixture with 5% uniform outliers.
    Contaminated,
    /// KDE plug-in against the calibrated approach over dimensions.
    DimensionSweep,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// JSON array of comparison configurations, as written by a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dimensions for the sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8")]
    dims: Vec<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(short = 'B', long)]
    members: Option<usize>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    sigma_count: Option<usize>,
    /// Also score the calibrated approach at every bandwidth.
    #[arg(long)]
    per_sigma: bool,
    #[arg(short, long)]
    out: PathBuf,
}

impl CompareArgs {
    fn resolve(&self) -> anyhow::Result<Vec<ComparisonConfig>> {
        let mut configs: Vec<ComparisonConfig> = match (&self.config, self.preset) {
            (Some(p), _) => read_json(p)?,
            (None, Some(Preset::Bimodal)) => vec![ComparisonConfig::bimodal(2)],
            (None, Some(Preset::Contaminated)) => vec![ComparisonConfig::contaminated()],
            (None, Some(Preset::DimensionSweep)) => self.dims.iter().map(|&d| ComparisonConfig::dimension_sweep(d)).collect(),
            (None, None) => bail!(mvset::Error::invalid("compare", "need --preset or --config")),
        };
        for c in &mut configs {
            if let Some(v) = self.repetitions {
                c.repetitions = v;
            }
            if let Some(v) = self.members {
                c.members = v;
            }
            if let Some(v) = self.n {
                c.n = v;
            }
            if let Some(v) = self.seed {
                c.seed = v;
            }
            if let Some(v) = self.sigma_min {
                c.sigmas.min = v;
            }
            if let Some(v) = self.sigma_max {
                c.sigmas.max = v;
            }
            if let Some(v) = self.sigma_count {
                c.sigmas.count = v;
            }
            if self.per_sigma {
                c.methods.calibrated_per_sigma = true;
            }
            c.validate()?;
        }
        Ok(configs)
    }
}

fn read_matrix(path: &Path) -> anyhow::Result<mvset::io::CsvMatrix> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_csv_matrix(file).with_context(|| format!("reading {}", path.display()))?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let (header, x): (Vec<String>, Array2<f64>) = match (args.data, &args.spec_file) {
        (_, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let spec = MixtureSpec::from_json(&text)?;
            (default_header(spec.dim()), mvset::sample_mixture(&spec, args.n, args.seed)?)
        }
        (Some(DataSet::Bimodal), None) => {
            (default_header(args.dim), mvset::sample_mixture(&MixtureSpec::bimodal(args.dim), args.n, args.seed)?)
        }
        (Some(DataSet::Contaminated), None) => (
            default_header(2),
            mvset::sample_mixture(&MixtureSpec::bimodal_contaminated(), args.n, args.seed)?,
        ),
        (Some(DataSet::Moons), None) => (default_header(2), mvset::two_moons(args.n, args.noise, args.seed)?),
        (Some(DataSet::Boston), None) => {
            let (x, _) = mvset::standardize(&datagen::boston_rooms_lstat()?)?;
            (vec!["RM".into(), "LSTAT".into()], x)
        }
        (None, None) => bail!(mvset::Error::invalid("gen", "need --data or --spec-file")),
    };
    let mut w = create(&args.out)?;
    write_csv_matrix(&mut w, &header, &x)?;
    w.flush()?;
    println!("{} ({} rows)", args.out.display(), x.nrows());
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> anyhow::Result<()> {
    let cfg = args.resolve()?;
    let pipeline = cfg.pipeline()?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| mvset::Error::invalid("input", "no input file given"))?;
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| mvset::Error::invalid("output", "no output directory given"))?;
    let x = read_matrix(&input)?.data;
    RunConfig::check_dim(x.ncols())?;
    let result = run_pipeline(&x, &pipeline)?;
    let summary = summarize(&result, &cfg, &x)?;
    write_bundle(&out, &cfg, &result, &summary)?;
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    println!("sigma_opt = {}", summary.sigma_opt);
    for e in &summary.empirical_masses {
        println!("empirical mass at {}: {}", e.beta, e.mass);
    }
    println!("bundle written to {}", out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let bundle = Bundle::load(&args.model)?;
    let e = &bundle.ensemble;
    e.grid().index_of(args.beta)?;
    let mut w = create(&args.out)?;
    writeln!(w, "score,inside")?;
    let q = read_matrix(&args.query)?.data;
    if q.nrows() == 0 {
        w.flush()?;
        println!("0 rows");
        return Ok(());
    }
    if q.ncols() != e.feature_dim() {
        bail!(mvset::Error::DimensionMismatch {
            expected: e.feature_dim(),
            found: q.ncols(),
        });
    }
    let scores = e.aggregate(&e.member_scores(&q)?, args.beta)?;
    let mut inside = 0usize;
    for s in &scores {
        let flag = *s >= 0.0;
        inside += flag as usize;
        writeln!(w, "{s},{}", flag as u8)?;
    }
    w.flush()?;
    println!("{} rows, inside fraction {}", scores.len(), inside as f64 / scores.len() as f64);
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> anyhow::Result<()> {
    let bundle = Bundle::load(&args.model)?;
    let e = &bundle.ensemble;
    if e.feature_dim() != 2 {
        bail!(mvset::Error::invalid("grid", format!("needs 2 features, model has {}", e.feature_dim())));
    }
    if args.resolution < 2 {
        bail!(mvset::Error::invalid("resolution", "must be at least 2"));
    }
    e.grid().index_of(args.beta)?;
    let rect = &bundle.summary.bounding_box;
    let r = args.resolution;
    let axis = |j: usize| -> Vec<f64> {
        let (lo, hi) = (rect.lower()[j], rect.upper()[j]);
        (0..r)
            .map(|i| if i + 1 == r { hi } else { lo + (hi - lo) * i as f64 / (r - 1) as f64 })
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    let mut lattice = Array2::zeros((r * r, 2));
    for (iy, y) in ys.iter().enumerate() {
        for (ix, x) in xs.iter().enumerate() {
            lattice[[iy * r + ix, 0]] = *x;
            lattice[[iy * r + ix, 1]] = *y;
        }
    }
    let scores = e.aggregate(&e.member_scores(&lattice)?, args.beta)?;
    let mut w = create(&args.out)?;
    writeln!(w, "x,y,score")?;
    for (p, s) in lattice.outer_iter().zip(&scores) {
        writeln!(w, "{},{},{s}", p[0], p[1])?;
    }
    w.flush()?;
    println!("{} ({} rows)", args.out.display(), scores.len());
    Ok(())
}

fn write_comparison(dir: &Path, configs: &[ComparisonConfig], reports: &[ComparisonReport]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = create(&dir.join("config.json"))?;
    serde_json::to_writer_pretty(&mut w, configs).map_err(mvset::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = create(&dir.join("comparison.json"))?;
    serde_json::to_writer_pretty(&mut w, reports).map_err(mvset::Error::from)?;
    writeln!(w)?;
    w.flush()?;

    let mut w = create(&dir.join("summary.csv"))?;
    writeln!(w, "dim,method,median_error,mean_error")?;
    for r in reports {
        for (name, m) in [
            ("calibrated", &r.calibrated),
            ("standard_ocsvm", &r.standard_ocsvm),
            ("kde_plugin", &r.kde_plugin),
        ] {
            if let Some(m) = m {
                writeln!(w, "{},{name},{},{}", r.dim, m.median, m.mean)?;
            }
        }
    }
    w.flush()?;

    let mut w = create(&dir.join("by_sigma.csv"))?;
    writeln!(w, "dim,method,sigma,median_error")?;
    for r in reports {
        for (name, v) in [
            ("calibrated", &r.calibrated_median_by_sigma),
            ("standard_ocsvm", &r.standard_median_by_sigma),
        ] {
            for (s, e) in r.sigmas.iter().zip(v) {
                writeln!(w, "{},{name},{s},{e}", r.dim)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let configs = args.resolve()?;
    let reports = configs.iter().map(compare).collect::<mvset::Result<Vec<_>>>()?;
    write_comparison(&args.out, &configs, &reports)?;
    for r in &reports {
        let show = |m: &Option<mvset::experiments::MethodSummary>| m.as_ref().map_or("-".to_string(), |m| m.median.to_string());
        println!(
            "d = {}: median error calibrated {}, standard {}, kde {}",
            r.dim,
            show(&r.calibrated),
            show(&r.standard_ocsvm),
            show(&r.kde_plugin)
        );
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .find_map(|e| e.downcast_ref::<mvset::Error>())
        .is_some_and(|e| !e.is_validation());
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
