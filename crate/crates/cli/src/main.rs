mod svg;

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exactnet_core::analysis::{
    decision_regions_json, decision_regions_with, exact_ig, sampled_ig, AnalysisError, Attribution, Scheme,
};
use exactnet_core::geometry::{validate_region, PlanarRegion, Point};
use exactnet_core::network::{parse_eran, parse_json_network, Network};
use exactnet_core::service::{self, Service};
use exactnet_core::symbolic::{Engine, EngineConfig, EngineError, DEFAULT_REGION_BUDGET};

#[derive(Parser)]
#[command(
    name = "exactnet",
    version,
    about = "Exact linear-region analysis of piecewise-linear networks"
)]
struct Cli {
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true, env = "SYRENN_THREADS", default_value_t = 0)]
    threads: usize,
    /// Maximum number of regions per layer before giving up.
    #[arg(long, global = true, default_value_t = DEFAULT_REGION_BUDGET)]
    region_budget: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a line or polygon into linear regions.
    Partitions(PartitionsArgs),
    /// Integrated gradients along baseline → input.
    Ig(IgArgs),
    /// Decision regions over a polygon, rendered as SVG.
    Classify(ClassifyArgs),
    /// Run the line-delimited JSON analysis server.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Eran,
    Json,
}

#[derive(Args)]
struct NetworkArgs {
    #[arg(long)]
    network: PathBuf,
    /// Defaults to json for *.json files, eran otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct PartitionsArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// JSON file with polygon vertices in counter-clockwise order.
    #[arg(long, conflicts_with = "line", required_unless_present = "line")]
    polytope: Option<PathBuf>,
    /// Segment endpoints as "a;b", coordinates comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    line: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IgArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, allow_hyphen_values = true)]
    input: String,
    #[arg(long, allow_hyphen_values = true)]
    baseline: String,
    #[arg(long, default_value_t = 0)]
    label: usize,
    /// Also compare sampled IG at m = 10, 100, … up to this count.
    #[arg(long, value_name = "M")]
    compare_sampling: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long)]
    polytope: PathBuf,
    #[arg(long)]
    svg: PathBuf,
    /// Comma-separated fill colors overriding the default palette.
    #[arg(long, value_delimiter = ',')]
    colors: Vec<String>,
    /// Also write the labeled regions as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "SYRENN_PORT", default_value_t = service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn geometry(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::Network(_) | EngineError::ThreadPool(_) => 1,
            EngineError::BudgetExceeded { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Engine(e) => e.into(),
            other => Failure::parse(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::parse(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_network(args: &NetworkArgs) -> Result<Network> {
    let text = read(&args.network)?;
    let format = args.format.unwrap_or_else(|| {
        if args.network.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Format::Json
        } else {
            Format::Eran
        }
    });
    match format {
        Format::Eran => parse_eran(&text),
        Format::Json => parse_json_network(&text),
    }
    .map_err(|e| Failure::parse(format!("{}: {e}", args.network.display())))
}

/// `"1,2"` or `"[1, 2]"` → point.
fn parse_point(text: &str) -> Result<Point> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    let coords = inner
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|e| Failure::parse(format!("bad coordinate {c:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Point::new(coords).map_err(|e| Failure::parse(e.to_string()))
}

fn parse_line(text: &str) -> Result<(Point, Point)> {
    match text.split(';').collect::<Vec<_>>()[..] {
        [a, b] => Ok((parse_point(a)?, parse_point(b)?)),
        _ => Err(Failure::parse(format!("line must be \"a;b\", got {text:?}"))),
    }
}

/// Accepts `[[x, y], …]` or `{"vertices": [[x, y], …]}`.
fn load_polytope(path: &Path, engine: &Engine) -> Result<PlanarRegion> {
    let value: serde_json::Value =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    let vertices = value.get("vertices").unwrap_or(&value).clone();
    let vertices: Vec<Vec<f64>> =
        serde_json::from_value(vertices).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    let points = vertices
        .into_iter()
        .map(Point::new)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Failure::geometry(e.to_string()))?;
    validate_region(points, engine.tolerances()).map_err(|e| Failure::geometry(format!("{}: {e}", path.display())))
}

fn check_dim(net: &Network, p: &Point) -> Result<()> {
    if p.dim() == net.input_dim() {
        Ok(())
    } else {
        Err(Failure::geometry(format!(
            "point has dimension {}, network expects {}",
            p.dim(),
            net.input_dim()
        )))
    }
}

fn partitions(engine: &Engine, args: &PartitionsArgs) -> Result<()> {
    let net = load_network(&args.net)?;
    let started = Instant::now();
    let (json, summary) = if let Some(line) = &args.line {
        let (a, b) = parse_line(line)?;
        check_dim(&net, &a)?;
        check_dim(&net, &b)?;
        let line = engine.symbolic_rep_1d(&net, &a, &b)?;
        (line.to_json_string(), format!("{} segments", line.segment_count()))
    } else {
        let x = load_polytope(args.polytope.as_deref().expect("clap requires one input"), engine)?;
        check_dim(&net, &x.preimage()[0])?;
        let parts = engine.symbolic_rep_2d(&net, &x)?;
        (parts.to_json_string(), format!("{} regions", parts.len()))
    };
    eprintln!("{summary} in {:.3}s", started.elapsed().as_secs_f64());
    write_output(args.out.as_deref(), &(json + "\n"))
}

fn max_error(a: &Attribution, b: &Attribution) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

fn ig(engine: &Engine, args: &IgArgs) -> Result<()> {
    let net = load_network(&args.net)?;
    let (input, baseline) = (parse_point(&args.input)?, parse_point(&args.baseline)?);
    check_dim(&net, &input)?;
    check_dim(&net, &baseline)?;
    let exact = engine.install(|| exact_ig(&net, &baseline, &input, args.label))?;
    let mut json = exact.to_json_value();
    eprintln!(
        "completeness: sum {:.12} vs f(input) - f(baseline) {:.12} (error {:.3e})",
        exact.total(),
        exact.expected_total(),
        (exact.total() - exact.expected_total()).abs()
    );
    if let Some(max_m) = args.compare_sampling {
        if max_m == 0 {
            return Err(Failure::parse("--compare-sampling needs at least 1 sample"));
        }
        let mut ms: Vec<usize> = std::iter::successors(Some(10usize), |m| m.checked_mul(10))
            .take_while(|&m| m <= max_m)
            .collect();
        if ms.last() != Some(&max_m) {
            ms.push(max_m);
        }
        eprintln!("{:>10}  {:>14}  {:>14}", "m", "left error", "trapezoid error");
        let mut table = Vec::new();
        for m in ms {
            let left = engine.install(|| sampled_ig(&net, &baseline, &input, args.label, m, Scheme::Left))?;
            let trap = engine.install(|| sampled_ig(&net, &baseline, &input, args.label, m, Scheme::Trapezoid))?;
            let (le, te) = (max_error(&left, &exact), max_error(&trap, &exact));
            eprintln!("{m:>10}  {le:>14.6e}  {te:>14.6e}");
            table.push(serde_json::json!({ "m": m, "left_error": le, "trapezoid_error": te }));
        }
        json["sampling"] = serde_json::Value::Array(table);
    }
    write_output(args.out.as_deref(), &(json.to_string() + "\n"))
}

fn classify(engine: &Engine, args: &ClassifyArgs) -> Result<()> {
    let net = load_network(&args.net)?;
    let x = load_polytope(&args.polytope, engine)?;
    check_dim(&net, &x.preimage()[0])?;
    let started = Instant::now();
    let regions = decision_regions_with(engine, &net, &x)?;
    eprintln!("{} regions in {:.3}s", regions.len(), started.elapsed().as_secs_f64());
    let text =
        svg::render(&x, &regions, net.output_dim(), &args.colors).map_err(|e| Failure::geometry(e.to_string()))?;
    std::fs::write(&args.svg, text).map_err(|e| Failure::parse(format!("{}: {e}", args.svg.display())))?;
    if let Some(out) = &args.out {
        write_output(Some(out), &(decision_regions_json(&x, &regions).to_string() + "\n"))?;
    }
    Ok(())
}

fn serve(engine: Engine, args: &ServeArgs) -> Result<()> {
    let addr = format!("{}:{}", args.host, args.port);
    let listener = TcpListener::bind(&addr).map_err(|e| Failure {
        code: if e.kind() == std::io::ErrorKind::AddrInUse {
            4
        } else {
            1
        },
        message: format!("cannot bind {addr}: {e}"),
    })?;
    let shutdown = Arc::new(AtomicBool::new(false));
    {
        let shutdown = Arc::clone(&shutdown);
        ctrlc::set_handler(move || shutdown.store(true, Ordering::SeqCst))
            .map_err(|e| Failure::parse(format!("cannot install signal handler: {e}")))?;
    }
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or(addr);
    eprintln!("listening on {local}");
    service::serve(listener, Arc::new(Service::new(engine)), shutdown)
        .map_err(|e| Failure::parse(format!("server error: {e}")))?;
    log::info!("shut down");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let engine = Engine::new(EngineConfig {
        threads: cli.threads,
        region_budget: cli.region_budget,
        ..EngineConfig::default()
    })?;
    match &cli.command {
        Command::Partitions(args) => partitions(&engine, args),
        Command::Ig(args) => ig(&engine, args),
        Command::Classify(args) => classify(&engine, args),
        Command::Serve(args) => serve(engine, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let default_level = if matches!(cli.command, Command::Serve(_)) {
        "info"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
