use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use xy_butterfly_lab::commands;
use xy_butterfly_lab::config::{CompilerKind, Mode, Overrides, RunConfig};
use xy_butterfly_lab::output::{output_dir, write_atomic, Metadata};

#[derive(Parser)]
#[command(name = "butterfly-lab", version, about = "Butterfly velocity of the 1d XY model: analytic and OTOC-protocol estimates")]
struct Cli {
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic v_B from the dispersion, or an (r, h) sweep as CSV.
    Analytic(AnalyticArgs),
    /// RTR and Trotter compilation error against depth.
    Compile(RunArgs),
    /// C_j(t) surface.
    Otoc(RunArgs),
    /// Surface, spreading times and fitted v_B.
    Velocity(RunArgs),
    /// The velocity pipeline for every row of `[sweep]`.
    Sweep(RunArgs),
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long = "J", default_value_t = 1.0, allow_negative_numbers = true)]
    j: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    r: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    h: f64,
    /// Print `r,h,v_B` over a grid symmetric about r = 0 and h = 0.
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 3.0)]
    r_max: f64,
    #[arg(long, default_value_t = 3.0)]
    h_max: f64,
    #[arg(long, default_value_t = 61)]
    points: usize,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (else the config's, else $BUTTERFLY_LAB_OUT, else ./butterfly-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Probe sites, comma separated.
    #[arg(long, value_delimiter = ',')]
    js: Option<Vec<usize>>,
    #[arg(long = "J", allow_negative_numbers = true)]
    j: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_points: Option<usize>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    p_read: Option<f64>,
    #[arg(long, value_enum)]
    compiler: Option<CompilerArg>,
    /// Brick-wall depth of the protocol compiler.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Depths for `compile`, comma separated.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
    /// Target time for `compile`.
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
    Noisy,
    Averaged,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CompilerArg {
    Exact,
    Rtr,
    Trotter,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        if let Some(path) = &self.config {
            if !path.is_file() {
                bail!("config file {} not found", path.display());
            }
        }
        if self.layers == Some(0) || self.depths.as_ref().is_some_and(|d| d.contains(&0)) {
            bail!("layers must be at least 1");
        }
        let overrides = Overrides {
            seed: self.seed,
            mode: self.mode.map(|m| match m {
                ModeArg::Exact => Mode::Exact,
                ModeArg::Sampled => Mode::Sampled,
                ModeArg::Noisy => Mode::Noisy,
                ModeArg::Averaged => Mode::Averaged,
            }),
            shots: self.shots,
            threshold: self.threshold,
            js: self.js.clone(),
            output_dir: None,
            j: self.j,
            r: self.r,
            h: self.h,
            n: self.n,
            t_stop: self.t_max,
            t_points: self.t_points,
            p2: self.p2,
            p_read: self.p_read,
            compiler: self.compiler.map(|c| match c {
                CompilerArg::Exact => CompilerKind::Exact,
                CompilerArg::Rtr => CompilerKind::Rtr,
                CompilerArg::Trotter => CompilerKind::Trotter,
            }),
            layers: self.layers,
            max_iters: self.max_iters,
        };
        let mut cfg = RunConfig::resolve(self.config.as_deref(), &overrides)?;
        if let Some(d) = &self.depths {
            cfg.compile.layers = d.clone();
        }
        if let Some(t) = self.t {
            cfg.compile.t = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dir(&self, cfg: &RunConfig) -> PathBuf {
        output_dir(self.out.as_deref(), cfg)
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analytic(a) => {
            if a.sweep {
                let cfg = RunConfig::default();
                let meta = Metadata::new("analytic --sweep", &cfg);
                print!("{}", commands::analytic_sweep(&meta, a.j, a.r_max, a.h_max, a.points)?);
            } else {
                if ![a.j, a.r, a.h].iter().all(|x| x.is_finite()) {
                    bail!("J, r and h must be finite");
                }
                println!("{}", commands::analytic_line(a.j, a.r, a.h));
            }
        }
        Command::Compile(args) => {
            let cfg = args.resolve()?;
            let rows = commands::compile_rows(&cfg)?;
            println!("{:>6} {:>14} {:>14}", "layers", "rtr_error", "trotter_error");
            for r in &rows {
                println!("{:>6} {:>14.6e} {:>14.6e}", r.layers, r.rtr.final_error, r.trotter_error);
            }
            report(&commands::write_compile(&args.dir(&cfg), &cfg, &rows)?);
        }
        Command::Otoc(args) => {
            let cfg = args.resolve()?;
            let (points, _) = commands::surface(&cfg)?;
            let path = args.dir(&cfg).join("surface.csv");
            write_atomic(&path, &commands::surface_csv(&Metadata::new("otoc", &cfg), &points))?;
            let failed = points.iter().filter(|p| p.record.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} surface cells failed and are written as nan");
            }
            report(&[path]);
        }
        Command::Velocity(args) => {
            let cfg = args.resolve()?;
            let run = commands::pipeline(&cfg)?;
            println!("{}", commands::summary_header());
            println!("{}", commands::summary_line(&run));
            report(&commands::write_velocity(&args.dir(&cfg), &run)?);
            if let Err(e) = &run.report.fit {
                bail!("velocity fit failed: {e}");
            }
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let runs = commands::sweep(&cfg)?;
            println!("{}", commands::summary_header());
            for run in &runs {
                println!("{}", commands::summary_line(run));
            }
            report(&commands::write_sweep(&args.dir(&cfg), &cfg, &runs)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
