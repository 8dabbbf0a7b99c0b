//! Command-line front end: subcommand dispatch, deterministic provenance
//! headers, and CSV/JSON emission.
//!
//! Exit codes: `0` success, `1` analysis completed but the operating point
//! is infeasible, `2` input error (unreadable or invalid documents, bad
//! flags; argument-parse failures also exit 2 via clap).
//!
//! Every output starts with a provenance record — tool name, version, seed,
//! and a SHA-256 hash of the resolved run configuration — as `#` comment
//! lines in CSV and a `provenance` object in JSON. No timestamps, so
//! identical configurations reproduce byte-identical outputs.

use crate::codesim::{self, SimConfig, SimMode};
use crate::document::{self, Document};
use crate::gaussian::{self, GaussianConfig, SweepRow};
use crate::prob::{Dist, Distortion};
use crate::regions::{axis, RegionPoint};
use crate::secrecy::{self, SideInfoRDProblem};
use crate::transport;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

/// The contracted header for region-point tables.
pub const REGION_POINT_CSV_HEADER: &str = "R_bits,Rc_bits,D,DE,feasible";

const BUNDLED_BINARY_EXAMPLE: &str = include_str!("../data/binary_example.json");
const BUNDLED_GAUSSIAN_DEFAULT: &str = include_str!("../data/gaussian_default.json");

#[derive(Debug, Parser)]
#[command(
    name = "isac-dp",
    version,
    about = "Rate/distortion regions, coding simulation, optimal-transport correction, \
             and eavesdropper distortion floors for distribution-preserving \
             sensing-communication systems",
    after_help = "Units: columns suffixed _bits are rates in bits per channel use; D, DE, \
                  distortion columns are in the distortion table's units; probabilities and \
                  plan masses are dimensionless. Set ISAC_DP_THREADS to cap parallelism."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Primary output format
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Seed for every random choice in the run
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership report and operating points for a system document.
    ///
    /// CSV rows follow the header R_bits,Rc_bits,D,DE,feasible (rates in
    /// bits; D/DE in distortion units; DE empty unless a secrecy evaluation
    /// supplied one); a comment line names each row's point.
    Region(RegionArgs),
    /// Jointly Gaussian worked example: closed-form sweep over (rho, alpha).
    ///
    /// CSV columns rho,alpha (correlation/combiner parameters, unitless),
    /// a (estimator gain), R_bits,Rc_bits (bits), achieved_D (distortion
    /// units), feasible.
    Gaussian(GaussianArgs),
    /// Block-coding simulation of a system document (exact enumeration or
    /// Monte Carlo).
    ///
    /// JSON report: p_err/decode_failure are probabilities; tv_* are total
    /// variations in [0,1]; mean_distortion is in distortion units; *_ci are
    /// 95% half-widths.
    Simulate(SimulateArgs),
    /// Optimal transport between two distributions under a cost table.
    ///
    /// Plan CSV columns: source,target (symbol indices), mass (probability,
    /// 12 significant digits). The summary JSON reports cost (cost units),
    /// the duality certificate, and the greedy comparison.
    Transport(TransportArgs),
    /// Secure operating point: communication rates plus the eavesdropper
    /// distortion floor.
    ///
    /// Curve CSV columns: rate_bits (bits), distortion (distortion units).
    Secure(SecureArgs),
    /// Reproduce the bundled binary multiplicative example end to end.
    ///
    /// Same column conventions as `region`.
    BinaryExample,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// System document (JSON)
    pub doc: PathBuf,
    /// Only validate the document and list diagnostics, one per line
    #[arg(long)]
    pub validate_only: bool,
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    /// Configuration document (defaults to the bundled worked-example values)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override configuration fields, e.g. --set var_w=0.25
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Correlation values to sweep (defaults to the configuration's rho)
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Combiner grid as MIN:MAX:POINTS
    #[arg(long, default_value = "0:1:41")]
    pub alpha_grid: String,
    /// Also run a Monte Carlo validation with this many samples
    #[arg(long)]
    pub mc: Option<usize>,
    /// Write the companion configuration JSON here (default: next to --out)
    #[arg(long)]
    pub config_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// System document (JSON)
    pub doc: PathBuf,
    /// Block length
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// log2 of the message count
    #[arg(long, default_value_t = 1)]
    pub km: u32,
    /// log2 of the bin count (private randomization)
    #[arg(long, default_value_t = 1)]
    pub ki: u32,
    /// log2 of the common-randomness count
    #[arg(long, default_value_t = 1)]
    pub kg: u32,
    /// Typicality slack (entrywise empirical-frequency tolerance)
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Monte Carlo trials (mc mode only)
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Run a block-length curve over these n values instead of a single run
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    /// Cap on enumerated joint states in exact mode
    #[arg(long, default_value_t = codesim::DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    /// Write the per-n curve CSV here (default: next to --out)
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransportArgs {
    /// Document holding the source distribution
    pub source: PathBuf,
    /// Document holding the target distribution
    pub target: PathBuf,
    /// Cost table CSV (rows = source symbols, columns = target symbols)
    #[arg(long)]
    pub cost: PathBuf,
    /// Distribution name in the source document (default: its only one)
    #[arg(long)]
    pub source_dist: Option<String>,
    /// Distribution name in the target document (default: its only one)
    #[arg(long)]
    pub target_dist: Option<String>,
    /// Write the summary JSON here (default: next to --out)
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SecureArgs {
    /// System document (JSON)
    pub doc: PathBuf,
    /// Insider description rate in bits per symbol
    #[arg(long)]
    pub re: f64,
    /// Common-randomness budget in bits (default: the operating point's own)
    #[arg(long)]
    pub rc: Option<f64>,
    /// Write the eavesdropper distortion-rate curve CSV here
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Provenance
// ---------------------------------------------------------------------------

/// The resolved run parameters, hashed into every output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub output: Option<String>,
    pub seed: u64,
    pub overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    fn new(run: &RunConfig) -> Self {
        let canonical = serde_json::to_vec(run).expect("run config serializes");
        let digest = Sha256::digest(&canonical);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            tool: "isac-dp",
            version: env!("CARGO_PKG_VERSION"),
            seed: run.seed,
            config_sha256: hex,
        }
    }

    fn csv_comment(&self) -> String {
        format!(
            "# tool={} version={} seed={} config_sha256={}\n",
            self.tool, self.version, self.seed, self.config_sha256
        )
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run a parsed command line, returning the process exit code.
pub fn dispatch(cli: Cli) -> Result<i32> {
    init_thread_pool()?;
    match &cli.command {
        Command::Region(args) => run_region(&cli, args),
        Command::Gaussian(args) => run_gaussian(&cli, args),
        Command::Simulate(args) => run_simulate(&cli, args),
        Command::Transport(args) => run_transport(&cli, args),
        Command::Secure(args) => run_secure(&cli, args),
        Command::BinaryExample => run_binary_example(&cli),
    }
}

fn init_thread_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("ISAC_DP_THREADS") {
        let n: usize = raw.parse().map_err(|_| {
            Error::InvalidParameter(format!("ISAC_DP_THREADS = {raw:?} is not a thread count"))
        })?;
        if n == 0 {
            return Err(Error::InvalidParameter(
                "ISAC_DP_THREADS must be at least 1".into(),
            ));
        }
        // a second initialization in the same process is fine to ignore
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn emit_secondary(
    explicit: &Option<PathBuf>,
    primary_out: &Option<PathBuf>,
    suffix: &str,
    content: &str,
) -> Result<()> {
    let path = match (explicit, primary_out) {
        (Some(p), _) => p.clone(),
        (None, Some(out)) => {
            let stem = out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "output".into());
            out.with_file_name(format!("{stem}.{suffix}"))
        }
        // no destination anywhere: the primary output already carries the
        // same information, so silently skip
        (None, None) => return Ok(()),
    };
    std::fs::write(path, content)?;
    Ok(())
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn region_point_csv_line(p: &RegionPoint) -> String {
    format!(
        "{},{},{},{},{}",
        crate::fmt::rate(p.r_bits),
        crate::fmt::rate(p.rc_bits),
        crate::fmt::rate(p.d),
        p.d_e.map(crate::fmt::rate).unwrap_or_default(),
        p.feasible
    )
}

fn feasibility_exit(feasible: bool) -> i32 {
    if feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    }
}

// ---------------------------------------------------------------------------
// region
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RegionReport {
    provenance: Provenance,
    membership: crate::regions::MembershipReport,
    points: BTreeMap<&'static str, RegionPoint>,
    /// Operations whose preconditions this system does not meet.
    skipped: BTreeMap<&'static str, String>,
}

/// Named operating points, plus the reason for each point that had to be
/// skipped because the system does not meet its preconditions.
type CollectedPoints = (
    BTreeMap<&'static str, RegionPoint>,
    BTreeMap<&'static str, String>,
);

fn collect_region_points(sys: &crate::regions::IsacSystem) -> Result<CollectedPoints> {
    let mut points = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    points.insert("theorem_1", sys.theorem1_point()?);
    points.insert("no_common_randomness", sys.ncr_point()?);
    points.insert("causal_strict", sys.causal_strict_point()?);
    match sys.deterministic_encoder_point() {
        Ok(p) => {
            points.insert("deterministic_encoder", p);
        }
        Err(Error::Precondition(msg)) => {
            skipped.insert("deterministic_encoder", msg);
        }
        Err(e) => return Err(e),
    }
    match sys.deterministic_capacity_point() {
        Ok(p) => {
            points.insert("deterministic_capacity", p);
        }
        Err(Error::Precondition(msg)) => {
            skipped.insert("deterministic_capacity", msg);
        }
        Err(e) => return Err(e),
    }
    Ok((points, skipped))
}

fn region_output(cli: &Cli, report: &RegionReport) -> String {
    match cli.format {
        OutputFormat::Json => to_pretty_json(report),
        OutputFormat::Csv => {
            let mut out = report.provenance.csv_comment();
            out.push_str(&format!(
                "# membership tv_s_vs_shat={} in_p={} in_p_ncr={} in_p_de={} in_p_de_prime={}\n",
                crate::fmt::prob(report.membership.tv_s_vs_shat),
                report.membership.in_p,
                report.membership.in_p_ncr,
                report.membership.in_p_de,
                report.membership.in_p_de_prime
            ));
            let names: Vec<&str> = report.points.keys().copied().collect();
            out.push_str(&format!("# points: {}\n", names.join(",")));
            for (name, msg) in &report.skipped {
                out.push_str(&format!("# skipped {name}: {msg}\n"));
            }
            out.push_str(REGION_POINT_CSV_HEADER);
            out.push('\n');
            for point in report.points.values() {
                out.push_str(&region_point_csv_line(point));
                out.push('\n');
            }
            out
        }
    }
}

fn run_region(cli: &Cli, args: &RegionArgs) -> Result<i32> {
    if args.validate_only {
        let diagnostics = document::validate_document(&args.doc)?;
        let mut out = String::new();
        for d in &diagnostics {
            out.push_str(&format!("{d}\n"));
        }
        if diagnostics.is_empty() {
            out.push_str("document is valid\n");
        }
        emit(&cli.out, &out)?;
        return Ok(if diagnostics.is_empty() {
            EXIT_OK
        } else {
            EXIT_INPUT_ERROR
        });
    }
    let doc = document::load_document(&args.doc)?;
    let sys = doc.system()?;
    let run = RunConfig {
        subcommand: "region".into(),
        inputs: vec![args.doc.display().to_string()],
        output: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        overrides: Vec::new(),
    };
    let (points, skipped) = collect_region_points(sys)?;
    let report = RegionReport {
        provenance: Provenance::new(&run),
        membership: sys.membership()?,
        points,
        skipped,
    };
    let feasible = report.points["theorem_1"].feasible;
    emit(&cli.out, &region_output(cli, &report))?;
    Ok(feasibility_exit(feasible))
}

// ---------------------------------------------------------------------------
// gaussian
// ---------------------------------------------------------------------------

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "grid {spec:?} is not MIN:MAX:POINTS"
        )));
    }
    let min: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("grid minimum {:?}", parts[0])))?;
    let max: f64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("grid maximum {:?}", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("grid point count {:?}", parts[2])))?;
    if !min.is_finite() || !max.is_finite() || max < min {
        return Err(Error::InvalidParameter(format!(
            "grid range [{min}, {max}] is invalid"
        )));
    }
    if points == 0 || points > 100_000 {
        return Err(Error::InvalidParameter(format!(
            "grid point count {points} outside 1..=100000"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    Ok((0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect())
}

fn apply_overrides(
    cfg_text: &str,
    overrides: &[String],
) -> Result<(GaussianConfig, Vec<(String, String)>)> {
    let mut value: serde_json::Value = serde_json::from_str(cfg_text)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParameter("configuration must be a JSON object".into()))?;
    let mut applied = Vec::new();
    for pair in overrides {
        let (key, raw) = pair.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("override {pair:?} is not KEY=VALUE"))
        })?;
        let num: f64 = raw
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("override value {raw:?} in {pair:?}")))?;
        obj.insert(key.to_string(), serde_json::Value::from(num));
        applied.push((key.to_string(), raw.to_string()));
    }
    let cfg: GaussianConfig = serde_json::from_value(value)?;
    cfg.validate()?;
    Ok((cfg, applied))
}

#[derive(Serialize)]
struct GaussianCompanion {
    provenance: Provenance,
    config: GaussianConfig,
    rho_list: Vec<f64>,
    alpha_grid_spec: String,
    mc: Option<gaussian::McReport>,
}

fn run_gaussian(cli: &Cli, args: &GaussianArgs) -> Result<i32> {
    let cfg_text = match &args.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => BUNDLED_GAUSSIAN_DEFAULT.to_string(),
    };
    let (cfg, applied) = apply_overrides(&cfg_text, &args.set)?;
    let rho_list = if args.rho.is_empty() {
        vec![cfg.rho]
    } else {
        args.rho.clone()
    };
    let alpha_grid = parse_grid(&args.alpha_grid)?;
    let run = RunConfig {
        subcommand: "gaussian".into(),
        inputs: args
            .config
            .iter()
            .map(|p| p.display().to_string())
            .chain([
                format!("rho={rho_list:?}"),
                format!("alpha={}", args.alpha_grid),
            ])
            .collect(),
        output: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        overrides: applied,
    };
    let provenance = Provenance::new(&run);
    let rows = gaussian::sweep(&cfg, &rho_list, &alpha_grid)?;
    let mc = match args.mc {
        Some(n) => Some(gaussian::mc_validate(&cfg, n, cli.seed)?),
        None => None,
    };
    let companion = GaussianCompanion {
        provenance: provenance.clone(),
        config: cfg,
        rho_list,
        alpha_grid_spec: args.alpha_grid.clone(),
        mc,
    };
    let any_feasible = rows.iter().any(|r| r.point.feasible);
    let primary = match cli.format {
        OutputFormat::Csv => {
            let mut out = provenance.csv_comment();
            out.push_str(&format!(
                "# config {}\n",
                serde_json::to_string(&companion.config).expect("config serializes")
            ));
            if let Some(mc) = &companion.mc {
                out.push_str(&format!(
                    "# mc {}\n",
                    serde_json::to_string(mc).expect("report serializes")
                ));
            }
            out.push_str(SweepRow::csv_header());
            out.push('\n');
            for row in &rows {
                out.push_str(&row.csv_line());
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct JsonOut<'a> {
                provenance: &'a Provenance,
                config: &'a GaussianConfig,
                mc: &'a Option<gaussian::McReport>,
                rows: &'a [SweepRow],
            }
            to_pretty_json(&JsonOut {
                provenance: &provenance,
                config: &companion.config,
                mc: &companion.mc,
                rows: &rows,
            })
        }
    };
    emit(&cli.out, &primary)?;
    emit_secondary(
        &args.config_out,
        &cli.out,
        "config.json",
        &to_pretty_json(&companion),
    )?;
    Ok(feasibility_exit(any_feasible))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn run_simulate(cli: &Cli, args: &SimulateArgs) -> Result<i32> {
    let doc = document::load_document(&args.doc)?;
    let sys = doc.system()?;
    let cfg = SimConfig {
        n: args.n,
        km: args.km,
        ki: args.ki,
        kg: args.kg,
        delta: args.delta,
        trials: args.trials,
        seed: cli.seed,
        mode: match args.mode {
            ModeArg::Exact => SimMode::Exact,
            ModeArg::Mc => SimMode::MonteCarlo,
        },
        state_cap: args.state_cap,
    };
    let run = RunConfig {
        subcommand: "simulate".into(),
        inputs: vec![args.doc.display().to_string()],
        output: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        overrides: vec![(
            "sim".into(),
            serde_json::to_string(&cfg).expect("config serializes"),
        )],
    };
    let provenance = Provenance::new(&run);
    #[derive(Serialize)]
    struct SimOut {
        provenance: Provenance,
        reports: Vec<codesim::SimReport>,
    }
    let reports = if args.ns.is_empty() {
        vec![codesim::run(sys, &cfg)?]
    } else {
        codesim::run_curve(sys, &cfg, &args.ns)?
    };
    let curve = codesim::curve_csv(&reports);
    let primary = match cli.format {
        OutputFormat::Json => to_pretty_json(&SimOut {
            provenance,
            reports,
        }),
        OutputFormat::Csv => {
            let mut out = provenance.csv_comment();
            out.push_str(&curve);
            out
        }
    };
    emit(&cli.out, &primary)?;
    if !args.ns.is_empty() {
        emit_secondary(&args.curve_out, &cli.out, "curve.csv", &curve)?;
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// transport
// ---------------------------------------------------------------------------

fn pick_dist(doc: &Document, which: &Option<String>, path: &Path) -> Result<Dist> {
    match which {
        Some(name) => doc.dist(name),
        None => {
            let names: Vec<&str> = doc.dist_names().collect();
            match names.as_slice() {
                [only] => doc.dist(only),
                [] => Err(Error::InvalidParameter(format!(
                    "{} defines no distributions",
                    path.display()
                ))),
                many => Err(Error::InvalidParameter(format!(
                    "{} defines several distributions ({}); pick one with --source-dist/--target-dist",
                    path.display(),
                    many.join(", ")
                ))),
            }
        }
    }
}

fn parse_cost_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>> = trimmed
            .split(',')
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!(
                        "cost CSV line {}, column {}: {:?} is not a number",
                        lineno + 1,
                        col + 1,
                        cell.trim()
                    ))
                })
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("cost CSV has no rows".into()));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct TransportSummary {
    provenance: Provenance,
    cost: f64,
    certified_optimal: bool,
    greedy_cost: f64,
    wasserstein: transport::WassersteinCheck,
    max_marginal_error: f64,
}

fn run_transport(cli: &Cli, args: &TransportArgs) -> Result<i32> {
    let source_doc = document::load_document(&args.source)?;
    let target_doc = document::load_document(&args.target)?;
    let p = pick_dist(&source_doc, &args.source_dist, &args.source)?;
    let q = pick_dist(&target_doc, &args.target_dist, &args.target)?;
    let cost = Distortion::new(parse_cost_csv(&std::fs::read_to_string(&args.cost)?)?)?;
    let run = RunConfig {
        subcommand: "transport".into(),
        inputs: vec![
            args.source.display().to_string(),
            args.target.display().to_string(),
            args.cost.display().to_string(),
        ],
        output: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        overrides: Vec::new(),
    };
    let provenance = Provenance::new(&run);
    let plan = transport::optimal_coupling(&p, &q, &cost)?;
    let greedy = transport::greedy_coupling(&p, &q, &cost)?;
    let wasserstein = transport::wasserstein_bound_check(&p, &q, &cost)?;
    let marginal_err = plan
        .row_marginal()
        .iter()
        .zip(p.probs())
        .chain(plan.col_marginal().iter().zip(q.probs()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let summary = TransportSummary {
        provenance: provenance.clone(),
        cost: plan.cost(),
        certified_optimal: plan.certify_optimal(&cost, 1e-9),
        greedy_cost: greedy.cost(),
        wasserstein,
        max_marginal_error: marginal_err,
    };
    let mut plan_csv = provenance.csv_comment();
    plan_csv.push_str("source,target,mass\n");
    for ((i, j), &mass) in plan.plan().indexed_iter() {
        if mass > 0.0 {
            plan_csv.push_str(&format!("{i},{j},{}\n", crate::fmt::prob(mass)));
        }
    }
    let primary = match cli.format {
        OutputFormat::Csv => plan_csv.clone(),
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct JsonOut<'a> {
                #[serde(flatten)]
                summary: &'a TransportSummary,
                plan: Vec<(usize, usize, f64)>,
            }
            let triplets = plan
                .plan()
                .indexed_iter()
                .filter(|(_, &m)| m > 0.0)
                .map(|((i, j), &m)| (i, j, m))
                .collect();
            to_pretty_json(&JsonOut {
                summary: &summary,
                plan: triplets,
            })
        }
    };
    emit(&cli.out, &primary)?;
    emit_secondary(
        &args.summary_out,
        &cli.out,
        "summary.json",
        &to_pretty_json(&summary),
    )?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// secure
// ---------------------------------------------------------------------------

fn run_secure(cli: &Cli, args: &SecureArgs) -> Result<i32> {
    let doc = document::load_document(&args.doc)?;
    let sys = doc.system()?;
    let run = RunConfig {
        subcommand: "secure".into(),
        inputs: vec![args.doc.display().to_string()],
        output: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        overrides: vec![
            ("re".into(), args.re.to_string()),
            (
                "rc".into(),
                args.rc.map(|v| v.to_string()).unwrap_or_default(),
            ),
        ],
    };
    let provenance = Provenance::new(&run);
    let point = secrecy::secure_region_point(sys, args.re, args.rc)?;
    let joint = sys.build_joint()?;
    let curve =
        SideInfoRDProblem::from_joint(&joint, axis::SHAT, &[axis::Y], sys.distortion().clone())?
            .rd_curve(&secrecy::default_lambda_grid())?;
    let mut curve_csv = provenance.csv_comment();
    curve_csv.push_str(&curve.csv());
    #[derive(Serialize)]
    struct SecureOut<'a> {
        provenance: &'a Provenance,
        point: &'a RegionPoint,
    }
    let primary = match cli.format {
        OutputFormat::Json => to_pretty_json(&SecureOut {
            provenance: &provenance,
            point: &point,
        }),
        OutputFormat::Csv => {
            let mut out = provenance.csv_comment();
            out.push_str(REGION_POINT_CSV_HEADER);
            out.push('\n');
            out.push_str(&region_point_csv_line(&point));
            out.push('\n');
            out
        }
    };
    emit(&cli.out, &primary)?;
    emit_secondary(&args.curve_out, &cli.out, "curve.csv", &curve_csv)?;
    Ok(feasibility_exit(point.feasible))
}

// ---------------------------------------------------------------------------
// binary-example
// ---------------------------------------------------------------------------

fn run_binary_example(cli: &Cli) -> Result<i32> {
    let doc = document::parse_document(BUNDLED_BINARY_EXAMPLE)?;
    let sys = doc.system()?;
    let run = RunConfig {
        subcommand: "binary-example".into(),
        inputs: vec!["bundled:binary_example".into()],
        output: cli.out.as_ref().map(|p| p.display().to_string()),
        seed: cli.seed,
        overrides: Vec::new(),
    };
    let provenance = Provenance::new(&run);
    let membership = sys.membership()?;
    let point = sys.theorem1_point()?;
    let primary = match cli.format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct ExampleOut {
                provenance: Provenance,
                system_document: serde_json::Value,
                membership: crate::regions::MembershipReport,
                theorem_1: RegionPoint,
            }
            to_pretty_json(&ExampleOut {
                provenance,
                system_document: serde_json::from_str(BUNDLED_BINARY_EXAMPLE)?,
                membership,
                theorem_1: point.clone(),
            })
        }
        OutputFormat::Csv => {
            let mut out = provenance.csv_comment();
            out.push_str(&format!(
                "# membership tv_s_vs_shat={} in_p={}\n",
                crate::fmt::prob(membership.tv_s_vs_shat),
                membership.in_p
            ));
            out.push_str(REGION_POINT_CSV_HEADER);
            out.push('\n');
            out.push_str(&region_point_csv_line(&point));
            out.push('\n');
            out
        }
    };
    emit(&cli.out, &primary)?;
    Ok(feasibility_exit(point.feasible))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:5").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a:1:5").is_err());
    }

    #[test]
    fn overrides_apply_and_reject_garbage() {
        let (cfg, applied) =
            apply_overrides(BUNDLED_GAUSSIAN_DEFAULT, &["alpha=0.5".into()]).unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(applied, vec![("alpha".into(), "0.5".into())]);
        assert!(apply_overrides(BUNDLED_GAUSSIAN_DEFAULT, &["alpha".into()]).is_err());
        assert!(apply_overrides(BUNDLED_GAUSSIAN_DEFAULT, &["alpha=x".into()]).is_err());
        // unknown keys are rejected by the configuration schema
        assert!(apply_overrides(BUNDLED_GAUSSIAN_DEFAULT, &["sigma=1".into()]).is_err());
    }

    #[test]
    fn cost_csv_parsing() {
        let rows = parse_cost_csv("# comment\n0, 1\n1, 0\n\n").unwrap();
        assert_eq!(rows, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(parse_cost_csv("0, x\n").is_err());
        assert!(parse_cost_csv("# only a comment\n").is_err());
    }

    #[test]
    fn provenance_is_deterministic_and_untimed() {
        let run = RunConfig {
            subcommand: "region".into(),
            inputs: vec!["doc.json".into()],
            output: None,
            seed: 7,
            overrides: Vec::new(),
        };
        let a = Provenance::new(&run);
        let b = Provenance::new(&run);
        assert_eq!(a.config_sha256, b.config_sha256);
        assert_eq!(a.seed, 7);
        let comment = a.csv_comment();
        assert!(comment.starts_with("# tool=isac-dp"));
        assert!(!comment.to_lowercase().contains("time"));
        let other = Provenance::new(&RunConfig { seed: 8, ..run });
        assert_ne!(a.config_sha256, other.config_sha256);
    }

    #[test]
    fn region_point_csv_formats_missing_de_as_empty() {
        let mut p = RegionPoint {
            r_bits: 0.5,
            rc_bits: 0.0,
            d: 0.25,
            d_e: None,
            feasible: true,
            diagnostics: Default::default(),
        };
        assert_eq!(region_point_csv_line(&p), "0.500000,0,0.250000,,true");
        p.d_e = Some(0.125);
        assert_eq!(
            region_point_csv_line(&p),
            "0.500000,0,0.250000,0.125000,true"
        );
    }
}
