use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splitplot::harness::{
    analyze, read_matrix_csv, run_experiment, write_timings, ExperimentConfig, HypothesisSource, IngestOptions,
};
use splitplot::hypothesis::validate_hypothesis;
use splitplot::{BlockMatrix, Error, EstimatorConfig, Flavor, StudyDesign, UpsilonPolicy};

const THREADS_VAR: &str = "SPLITPLOT_THREADS";

#[derive(Parser)]
#[command(name = "splitplot", version, about = "Quadratic-form tests for split-plot designs with group-specific dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo type-I error experiment described by a TOML config.
    Simulate(SimulateArgs),
    /// Test a hypothesis on observed data.
    Test(TestArgs),
    /// Check that a CSV matrix is a symmetric projection.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-grid-point wall times; defaults to `<output stem>.timings.csv`.
    #[arg(long)]
    timings: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Manifest listing one group CSV per line.
    #[arg(long)]
    data: PathBuf,
    /// `A`, `B` or a CSV file holding the D × D matrix T.
    #[arg(long)]
    hypothesis: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "Bstar", value_parser = parse_flavor)]
    flavor: Flavor,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip one header line in every group file.
    #[arg(long)]
    skip_header: bool,
    /// Write the machine-readable record here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Permutation multipliers per trace order, e.g. `5,10,100`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    multipliers: Option<Vec<usize>>,
    /// Shared index tuples per permutation.
    #[arg(long)]
    subsamples: Option<usize>,
    /// Permutation repetitions of the full B estimators.
    #[arg(long)]
    b_permutations: Option<usize>,
    /// Maximum number of kernel evaluations for exhaustive estimators.
    #[arg(long)]
    enumeration_cap: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    hypothesis: PathBuf,
    /// Group dimensions, e.g. `5,95`; defaults to a single group.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
}

fn parse_flavor(s: &str) -> Result<Flavor, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_VAR}='{value}' is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn default_timings_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    output.with_file_name(format!("{stem}.timings.csv"))
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if args.output.is_some() {
        config.output = args.output;
    }
    let outcome = run_experiment(&config)?;
    let timings = args.timings.or_else(|| config.output.as_deref().map(default_timings_path));
    if let Some(path) = &timings {
        write_timings(path, &outcome.timings)?;
    }
    println!("{:>6} {:>4} {:>4} {:>4} {:>4} {:>7} {:>5} {:>8}", "D", "d1", "d2", "n1", "n2", "flavor", "rule", "rate");
    for row in &outcome.rows {
        println!(
            "{:>6} {:>4} {:>4} {:>4} {:>4} {:>7} {:>5} {:>8.4}",
            row.total_dim,
            row.d1,
            row.d2,
            row.n1,
            row.n2,
            row.flavor.to_string(),
            row.rule.to_string(),
            row.rejection_rate
        );
    }
    if let Some(path) = &config.output {
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &timings {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn test(args: TestArgs) -> Result<(), Error> {
    let source: HypothesisSource = args.hypothesis.parse()?;
    let mut config = EstimatorConfig::default();
    let mut upsilon = UpsilonPolicy::default();
    if let Some(m) = args.multipliers {
        upsilon.multipliers = [m[0], m[1], m[2]];
    }
    if let Some(s) = args.subsamples {
        upsilon.subsamples = s;
    }
    if upsilon.multipliers.contains(&0) || upsilon.subsamples == 0 {
        return Err(Error::Config("subsample counts must be positive".into()));
    }
    config.upsilon = upsilon;
    if let Some(b) = args.b_permutations {
        if b == 0 {
            return Err(Error::Config("--b-permutations must be positive".into()));
        }
        config.b_permutations = b;
    }
    if let Some(cap) = args.enumeration_cap {
        config.enumeration_cap = cap;
    }
    let options = IngestOptions {
        skip_header: args.skip_header,
    };
    let record = analyze(&args.data, options, &source, args.alpha, args.flavor, args.seed, &config)?;
    print!("{}", record.render());
    if let Some(path) = &args.json {
        std::fs::write(path, record.to_json()?)?;
    }
    if record.report.statistic.is_none() {
        return Err(Error::Degenerate("no test decision could be made".into()));
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Error> {
    let m = read_matrix_csv(&args.hypothesis, false)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Structural(format!("matrix is {} × {}, expected square", m.nrows(), m.ncols())));
    }
    let dims = args.dims.unwrap_or_else(|| vec![m.nrows()]);
    let sizes = vec![2; dims.len()];
    let t = BlockMatrix::new(StudyDesign::new(dims, sizes)?, m)?;
    let report = validate_hypothesis(&t);
    println!("asymmetry              {:e}", report.asymmetry);
    println!("idempotence defect     {:e}", report.idempotence_defect);
    println!("block transpose defect {:e}", report.block_transpose_defect);
    println!("rank                   {}", report.rank);
    if report.passed {
        println!("valid projection");
        Ok(())
    } else {
        Err(Error::InvalidHypothesis {
            asymmetry: report.asymmetry.max(report.block_transpose_defect),
            idempotence: report.idempotence_defect,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Test(args) => test(args),
        Command::Validate(args) => validate(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
