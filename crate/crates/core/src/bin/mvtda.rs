use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mvtda_core::maxtest::{run_max_test, MaxTestConfig};
use mvtda_core::partition::{
    build_slice_complexes, read_masks, threshold_slices, write_masks, SetOp,
};
use mvtda_core::pcvr::{run_pcvr, PcvrConfig};
use mvtda_core::pipeline::{run_mv, run_study, PipelineConfig, StudyConfig};
use mvtda_core::plot::null_svg;
use mvtda_core::simgen::{generate, PatternId, PatternSpec};
use mvtda_core::smoothing::{smooth_stack, SmootherConfig};
use mvtda_core::stack::{load_stack, save_stack_manifest};
use mvtda_core::zigzag::{render_zigzag, summarize, zigzag_persistence};
use mvtda_core::{MvError, Result};

#[derive(Parser)]
#[command(
    name = "mvtda",
    version,
    about = "Maximum-void detection and tracking of loops in image stacks"
)]
struct Cli {
    /// Worker threads for permutations, replicates and per-frame work.
    /// Outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum persistence test on one stack.
    Test(TestArgs),
    /// Full pipeline: test, threshold, slice complexes, zigzag, plots.
    Run(RunArgs),
    /// Generate a synthetic pattern with its ground truth.
    Simulate(SimulateArgs),
    /// Simulation study comparing the method with the point-cloud baseline.
    Study(StudyArgs),
    /// Point-cloud Vietoris-Rips baseline with persistence-rank tracking.
    Pcvr(PcvrArgs),
    /// Zigzag persistence from saved slice masks or a thresholded stack.
    Zigzag(ZigzagArgs),
}

#[derive(Args)]
struct SmoothArgs {
    /// Local polynomial degree (0, 1 or 2).
    #[arg(long, default_value_t = 2)]
    smooth_degree: u8,
    /// Fraction of the frame's pixels in each local fit.
    #[arg(long, default_value_t = 0.05)]
    smooth_span: f64,
    /// Use the raw stack as is.
    #[arg(long)]
    no_smooth: bool,
}

impl SmoothArgs {
    fn config(&self) -> Result<Option<SmootherConfig>> {
        if self.no_smooth {
            return Ok(None);
        }
        SmootherConfig::new(self.smooth_degree, self.smooth_span).map(Some)
    }
}

#[derive(Args)]
struct TestOpts {
    /// Stack manifest (JSON), CSV frame or dims-header text file.
    #[arg(long)]
    input: PathBuf,
    /// Homology dimension tested.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Null replicates B.
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    /// Rejection level; reject when p < alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Seed of the permutation streams.
    #[arg(long, env = "MVTDA_SEED", default_value_t = 42)]
    seed: u64,
    /// p = (1 + #{null >= obs}) / (1 + B) instead of #{null >= obs} / B.
    #[arg(long)]
    pvalue_add_one: bool,
    #[command(flatten)]
    smooth: SmoothArgs,
}

impl TestOpts {
    fn config(&self) -> Result<MaxTestConfig> {
        Ok(MaxTestConfig {
            permutations: self.permutations,
            dim: self.dim,
            alpha: self.alpha,
            seed: self.seed,
            smoother: self.smooth.config()?,
            pvalue_add_one: self.pvalue_add_one,
        })
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    opts: TestOpts,
    /// Result JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a histogram of the null maxima.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    opts: TestOpts,
    /// How consecutive slices are joined: union or intersection.
    #[arg(long, default_value = "union")]
    set_op: SetOp,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// A1..A4 or cylinder.
    #[arg(long, conflicts_with = "spec")]
    pattern: Option<PatternId>,
    /// A pattern definition file instead of a shipped pattern.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Noise seed; the pattern's own seed when omitted.
    #[arg(long, env = "MVTDA_SEED")]
    seed: Option<u64>,
    /// Noise standard deviation; the pattern's own when omitted.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration (JSON); the shipped defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of patterns.
    #[arg(long, value_delimiter = ',')]
    patterns: Option<Vec<PatternId>>,
    /// Noisy replicates per pattern.
    #[arg(long)]
    replicates: Option<usize>,
    /// Master seed for noise and permutations.
    #[arg(long, env = "MVTDA_SEED")]
    seed: Option<u64>,
    /// Null replicates per max test.
    #[arg(long)]
    permutations: Option<usize>,
    /// Noise standard deviation for every pattern.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PcvrArgs {
    /// Stack manifest (JSON), CSV frame or dims-header text file.
    #[arg(long)]
    input: PathBuf,
    /// Pixels at or above this value become points.
    #[arg(long, default_value_t = 5.0)]
    threshold: f64,
    /// Largest Rips scale, in pixels.
    #[arg(long, default_value_t = 12.0)]
    max_scale: f64,
    /// Loops with smaller Rips persistence are not tracked.
    #[arg(long, default_value_t = 0.5)]
    min_persistence: f64,
    /// Track table CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ZigzagArgs {
    /// Directory of mask_NNN.csv files, e.g. the masks/ written by `run`.
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    masks: Option<PathBuf>,
    /// Stack to threshold instead of masks (smoothed first unless --no-smooth).
    #[arg(long, requires = "threshold")]
    input: Option<PathBuf>,
    /// Keep pixels at or above this value.
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    smooth: SmoothArgs,
    /// How consecutive slices are joined: union or intersection.
    #[arg(long, default_value = "union")]
    set_op: SetOp,
    /// Seconds between frames (masks carry no timing).
    #[arg(long, default_value_t = 1.0)]
    time_spacing: f64,
    /// Output directory for zigzag.csv and zigzag.svg.
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| MvError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| MvError::io(path, e))
}

fn cmd_test(a: &TestArgs) -> Result<()> {
    let raw = load_stack(&a.opts.input)?;
    let res = run_max_test(&raw, &a.opts.config()?)?;
    let body = serde_json::to_string_pretty(&res).expect("result serializes") + "\n";
    match &a.out {
        Some(p) => write_file(p, &body)?,
        None => print!("{body}"),
    }
    if let Some(p) = &a.svg {
        write_file(p, &null_svg(&res))?;
    }
    eprintln!(
        "rho = {:.6}, p = {}, reject = {}",
        res.rho_obs, res.p_value, res.reject
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = PipelineConfig {
        input: a.opts.input.clone(),
        test: a.opts.config()?,
        set_op: a.set_op,
        out_dir: a.out.clone(),
        emit_plots: !a.no_plots,
    };
    let r = run_mv(&cfg)?;
    eprintln!(
        "p = {}, reject = {}, theta = {}",
        r.p_value,
        r.reject,
        r.theta_hat.map_or("none".into(), |t| format!("{t:.6}"))
    );
    if let Some(z) = &r.zigzag {
        eprintln!(
            "zigzag: {} H0 and {} H1 intervals",
            z.h0_intervals, z.h1_intervals
        );
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut spec = match (&a.pattern, &a.spec) {
        (Some(id), _) => PatternSpec::canonical(*id)?,
        (None, Some(p)) => PatternSpec::load(p)?,
        (None, None) => return Err(MvError::invalid("give --pattern or --spec")),
    };
    if let Some(s) = a.seed {
        spec.noise.seed = s;
    }
    if let Some(s) = a.sigma0 {
        spec.noise.sigma0 = s;
    }
    let (raw, truth, table) = generate(&spec, &spec.noise)?;
    save_stack_manifest(&raw, &a.out, "raw")?;
    save_stack_manifest(&truth, &a.out, "truth")?;
    let fg = threshold_slices(&truth, spec.mu_ring);
    write_masks(&a.out.join("masks"), &fg, truth.rows(), truth.cols())?;
    let t = serde_json::to_string_pretty(&table).expect("truth serializes") + "\n";
    write_file(&a.out.join("truth.json"), &t)?;
    let s = serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n";
    write_file(&a.out.join("pattern.json"), &s)?;
    eprintln!(
        "{}: {} loops over {} frames -> {}",
        spec.id,
        table.loop_ids().len(),
        table.frames,
        a.out.display()
    );
    Ok(())
}

fn cmd_study(a: &StudyArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| MvError::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| MvError::invalid(format!("{}: {e}", p.display())))?
        }
        None => StudyConfig::default(),
    };
    if let Some(p) = &a.patterns {
        cfg.patterns = p.clone();
    }
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.permutations {
        cfg.permutations = b;
    }
    if a.sigma0.is_some() {
        cfg.sigma0 = a.sigma0;
    }
    let res = run_study(&cfg)?;
    let json = serde_json::to_string_pretty(&res).expect("study serializes") + "\n";
    write_file(&a.out.join("study.json"), &json)?;
    write_file(&a.out.join("study.csv"), &res.to_csv())?;
    write_file(&a.out.join("study.svg"), &res.to_svg()?)?;
    for s in &res.summary {
        let f = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:?}: detection {} continuity {} combined {}",
            s.method,
            f(s.detection_rate),
            f(s.continuity_rate),
            f(s.rate)
        );
    }
    Ok(())
}

fn cmd_pcvr(a: &PcvrArgs) -> Result<()> {
    let raw = load_stack(&a.input)?;
    let cfg = PcvrConfig {
        threshold: a.threshold,
        max_scale: a.max_scale,
        min_persistence: a.min_persistence,
    };
    let (_, table) = run_pcvr(&raw, &cfg)?;
    let csv = table.to_csv();
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_zigzag(a: &ZigzagArgs) -> Result<()> {
    let (rows, cols, sets, theta) = match (&a.masks, &a.input) {
        (Some(dir), _) => {
            let (r, c, s) = read_masks(dir)?;
            (r, c, s, a.threshold.unwrap_or(f64::NAN))
        }
        (None, Some(input)) => {
            let theta = a.threshold.expect("clap enforces --threshold");
            let raw = load_stack(input)?;
            if raw.ndim() != 3 {
                return Err(MvError::invalid("zigzag needs a 2D+time stack"));
            }
            let z = match a.smooth.config()? {
                Some(cfg) => smooth_stack(&raw, &cfg)?,
                None => raw,
            };
            (z.rows(), z.cols(), threshold_slices(&z, theta), theta)
        }
        (None, None) => unreachable!("clap enforces a source"),
    };
    let seq = build_slice_complexes(&sets, rows, cols, a.set_op, theta)?;
    let zz = zigzag_persistence(&seq, 1)?.with_spacing(a.time_spacing);
    let (csv, svg) = render_zigzag(&zz, a.time_spacing);
    write_file(&a.out.join("zigzag.csv"), &csv)?;
    write_file(&a.out.join("zigzag.svg"), &svg)?;
    println!("{}", summarize(&zz));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
        info!("using {n} threads");
    }
    let res = match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Run(a) => cmd_run(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Study(a) => cmd_study(a),
        Command::Pcvr(a) => cmd_pcvr(a),
        Command::Zigzag(a) => cmd_zigzag(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
