use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use otcpcc::bench::{self, ErrorConfig, Scenario, TimingConfig};
use otcpcc::cpcc::{
    evaluate_cpcc, gradient_check, Backend, FlowWeightScheme, GradCheckConfig, RhoParams,
};
use otcpcc::io::{format_sig, read_points_file, read_weights_file, write_plan};
use otcpcc::measures::WeightedPointSet;
use otcpcc::ot_approx::{fast_flowtree, twd_classes, SinkhornParams, DEFAULT_PROJECTIONS};
use otcpcc::trees::{AugmentedTree, LabelTree};

#[derive(Parser)]
#[command(
    name = "otcpcc",
    version,
    about = "Optimal-transport distances and CPCC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two point sets
    Dist(DistArgs),
    /// CPCC of a labelled dataset against a label tree
    Cpcc(CpccArgs),
    /// Synthetic timing and approximation-error studies
    Bench {
        #[command(subcommand)]
        study: BenchCommand,
    },
    /// Compare the analytic CPCC gradient with finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Clone)]
struct MethodParams {
    /// Sinkhorn regularization
    #[arg(long, default_value_t = SinkhornParams::default().epsilon)]
    epsilon: f64,
    /// Number of SWD projections
    #[arg(long, default_value_t = DEFAULT_PROJECTIONS)]
    projections: usize,
    /// Seed for random projections and quadtree shifts
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MethodParams {
    fn rho_params(&self) -> RhoParams {
        RhoParams {
            sinkhorn: SinkhornParams {
                epsilon: self.epsilon,
                ..SinkhornParams::default()
            },
            projections: self.projections,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct DistArgs {
    #[arg(long)]
    method: Backend,
    /// Point file of the first set
    #[arg(long)]
    a: PathBuf,
    /// Point file of the second set
    #[arg(long)]
    b: PathBuf,
    /// Weight file for the first set (uniform if omitted)
    #[arg(long)]
    weights_a: Option<PathBuf>,
    #[arg(long)]
    weights_b: Option<PathBuf>,
    /// Label tree; `twd` and `fastft` then treat the sets as classes of it
    #[arg(long, requires_all = ["class_a", "class_b"])]
    tree: Option<PathBuf>,
    #[arg(long)]
    class_a: Option<String>,
    #[arg(long)]
    class_b: Option<String>,
    #[command(flatten)]
    params: MethodParams,
    /// Write the transport plan as `i,j,mass` triplets
    #[arg(long)]
    emit_plan: Option<PathBuf>,
}

#[derive(Args)]
struct CpccArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, default_value = "emd")]
    backend: Backend,
    #[arg(long, default_value = "uniform")]
    flow_weights: FlowWeightScheme,
    /// Directory receiving one gradient CSV per class
    #[arg(long)]
    grad: Option<PathBuf>,
    #[command(flatten)]
    params: MethodParams,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Wall-clock time of single distance computations
    Time(TimeArgs),
    /// Absolute error against exact EMD
    Error(ErrorArgs),
}

#[derive(Args)]
struct TimeArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<Backend>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "128,256,512,1024,2048,4096"
    )]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = bench::TIMING_DIM)]
    dim: usize,
    /// Per-trial time budget in seconds
    #[arg(long, default_value_t = bench::DEFAULT_BUDGET.as_secs_f64())]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ErrorArgs {
    #[arg(long)]
    scenario: Scenario,
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<Backend>,
    #[arg(long, value_delimiter = ',', default_value = "100,200,500")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = bench::ERROR_DIM)]
    dim: usize,
    /// Exact-EMD time budget in seconds
    #[arg(long, default_value_t = bench::DEFAULT_BUDGET.as_secs_f64())]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    backend: Backend,
    /// Samples per class
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Dist(args) => dist(args)?,
        Command::Cpcc(args) => cpcc(args)?,
        Command::Bench {
            study: BenchCommand::Time(args),
        } => bench_time(args)?,
        Command::Bench {
            study: BenchCommand::Error(args),
        } => bench_error(args)?,
        Command::Gradcheck(args) => return gradcheck(args),
    }
    Ok(ExitCode::SUCCESS)
}

fn load_set(points: &Path, weights: Option<&Path>) -> Result<WeightedPointSet> {
    let rows = read_points_file(points).with_context(|| format!("reading {}", points.display()))?;
    let w = weights
        .map(|p| read_weights_file(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    Ok(rows.to_point_set(w)?)
}

fn load_tree(path: &Path) -> Result<LabelTree> {
    LabelTree::from_json_file(path).with_context(|| format!("reading {}", path.display()))
}

fn dist(args: DistArgs) -> Result<()> {
    let a = load_set(&args.a, args.weights_a.as_deref())?;
    let b = load_set(&args.b, args.weights_b.as_deref())?;
    let params = args.params.rho_params();
    let tree_mode = args.tree.is_some() && args.method.requires_tree();
    let (value, plan) = if tree_mode {
        let tree = load_tree(args.tree.as_deref().expect("checked"))?;
        let (u, v) = (
            args.class_a.expect("required"),
            args.class_b.expect("required"),
        );
        if u == v {
            bail!("--class-a and --class-b must differ");
        }
        let samples = [
            (u.clone(), a.weights().to_vec()),
            (v.clone(), b.weights().to_vec()),
        ]
        .into_iter()
        .collect();
        let aug = AugmentedTree::new(&tree, &samples)?;
        match args.method {
            Backend::Twd => (twd_classes(&aug, &u, &v)?, None),
            _ => {
                let f = fast_flowtree(&aug, &u, &v, a.points().view(), b.points().view())?;
                (f.value, Some(f.plan))
            }
        }
    } else {
        let d = otcpcc::cpcc::point_set_distance(args.method, &a, &b, &params)?;
        (d.value, d.plan)
    };
    println!("{}", format_sig(value));
    if let Some(path) = args.emit_plan {
        let Some(plan) = plan else {
            bail!("method `{}` produces no transport plan", args.method);
        };
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_plan(BufWriter::new(file), &plan)?;
    }
    Ok(())
}

fn cpcc(args: CpccArgs) -> Result<()> {
    let data =
        read_points_file(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let tree = load_tree(&args.tree)?;
    let batch = data.to_batch()?.with_flow_weights(args.flow_weights)?;
    let params = args.params.rho_params();
    let result = evaluate_cpcc(&batch, &tree, args.backend, &params, args.grad.is_some())?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "cpcc={}", format_sig(result.value))?;
    if result.degenerate {
        writeln!(out, "# degenerate: one of the distance lists is constant")?;
    }
    writeln!(out, "u,v,tree_distance,rho")?;
    for p in &result.pairs {
        writeln!(
            out,
            "{},{},{},{}",
            p.u,
            p.v,
            format_sig(p.t),
            format_sig(p.rho)
        )?;
    }

    if let (Some(dir), Some(grads)) = (args.grad, result.gradients) {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (label, g) in grads {
            let path = dir.join(format!("grad_{label}.csv"));
            let mut w = BufWriter::new(File::create(&path)?);
            let header: Vec<String> = (0..g.ncols()).map(|k| format!("g{k}")).collect();
            writeln!(w, "{}", header.join(","))?;
            for row in g.rows() {
                let line: Vec<String> = row.iter().map(|&x| format_sig(x)).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn budget(seconds: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(seconds).context("budget must be a non-negative number of seconds")
}

fn joined<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn emit_records(
    out: Option<&Path>,
    records: &[bench::BenchRecord],
    metadata: &[(String, String)],
) -> Result<()> {
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            bench::write_records(&mut w, records, metadata)?;
            w.flush()?;
            for s in bench::summarize(records) {
                let err = s
                    .mean_abs_error
                    .map(|e| format!(" mean_abs_error={}", format_sig(e)));
                println!(
                    "{} n={} trials={} mean_seconds={} mean_value={}{}",
                    s.method,
                    s.n,
                    s.trials,
                    format_sig(s.mean_seconds),
                    format_sig(s.mean_value),
                    err.unwrap_or_default()
                );
            }
        }
        None => bench::write_records(io::stdout().lock(), records, metadata)?,
    }
    Ok(())
}

fn bench_time(args: TimeArgs) -> Result<()> {
    let mut cfg = TimingConfig::new(args.methods, args.sizes, args.repeats, args.seed);
    cfg.dim = args.dim;
    cfg.budget = budget(args.budget)?;
    let records = bench::bench_timing(&cfg)?;
    let metadata = vec![
        ("study".into(), "time".into()),
        ("dim".into(), cfg.dim.to_string()),
        ("repeats".into(), cfg.repeats.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("budget_seconds".into(), format_sig(args.budget)),
        ("rng".into(), "chacha8".into()),
    ];
    emit_records(args.out.as_deref(), &records, &metadata)
}

fn bench_error(args: ErrorArgs) -> Result<()> {
    let mut cfg = ErrorConfig::new(args.scenario, args.methods, args.sizes, args.seeds);
    cfg.dim = args.dim;
    cfg.budget = budget(args.budget)?;
    let records = bench::bench_error(&cfg)?;
    let metadata = vec![
        ("study".into(), "error".into()),
        ("scenario".into(), cfg.scenario.name().into()),
        ("dim".into(), cfg.dim.to_string()),
        ("sizes".into(), joined(&cfg.sizes)),
        ("seeds".into(), joined(&cfg.seeds)),
        ("budget_seconds".into(), format_sig(args.budget)),
        ("grid".into(), "implementation default; dimension and size grid are not fixed by the method description".into()),
        ("rng".into(), "chacha8".into()),
    ];
    emit_records(args.out.as_deref(), &records, &metadata)
}

fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let mut cfg = GradCheckConfig::new(args.backend, args.n, args.d, args.seed);
    cfg.step = args.step;
    let report = gradient_check(&cfg)?;
    println!("cpcc={}", format_sig(report.cpcc));
    println!("max_rel_error={}", format_sig(report.max_rel_error));
    if report.passed {
        println!("PASS (tolerance {})", format_sig(report.tolerance));
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL (tolerance {})", format_sig(report.tolerance));
        Ok(ExitCode::FAILURE)
    }
}
