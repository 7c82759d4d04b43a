//! Command implementations behind the `switchsynth` binary.

pub mod plot;
pub mod problem;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use switchsynth::synthesis::{DiagnosticsSink, SearchStats};
use switchsynth::{
    decomposition, parse_model, simulate_closed_loop, verify_decomposition, Algorithm, Controller, ControllerError,
    SearchContext, SwitchedSystem, SynthesisError,
};

use crate::plot::{trace_svg, Region};
use crate::problem::ProblemFile;

#[derive(Debug, Parser)]
#[command(
    name = "switchsynth",
    version,
    about = "Guaranteed controller synthesis for sampled switched systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a controller for a problem file.
    Synth {
        problem: PathBuf,
        /// Output controller file (default: next to the problem, `.ctl.json`).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = Algorithm::Pruned)]
        algo: Algorithm,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write one line per search event to this file.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Re-check every cell of a controller.
    Verify {
        controller: PathBuf,
        /// Problem to verify against (default: the one stored in the controller).
        problem: Option<PathBuf>,
    },
    /// Closed-loop simulation; several controllers are applied in turn.
    Simulate {
        #[arg(required = true)]
        controllers: Vec<PathBuf>,
        /// Initial state, comma separated.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        x0: Vec<f64>,
        /// Number of patterns to apply.
        #[arg(short, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file (default: the one stored in the controller).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Trace CSV (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Time a synthesis run with one pattern-search function.
    Bench {
        problem: PathBuf,
        #[arg(long, default_value_t = Algorithm::Pruned)]
        algo: Algorithm,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarize a model, problem or controller file.
    Info { file: PathBuf },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid input.
    #[error(transparent)]
    Input(#[from] anyhow::Error),
    /// Synthesis, verification or simulation failed.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Timeout(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Failed(_) => 2,
            CliError::Timeout(_) => 3,
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Synth {
            problem,
            output,
            algo,
            jobs,
            diagnostics,
            timeout,
        } => synth(&problem, output, algo, jobs, diagnostics.as_deref(), timeout, out),
        Command::Verify { controller, problem } => verify(&controller, problem.as_deref(), out),
        Command::Simulate {
            controllers,
            x0,
            n,
            seed,
            model,
            output,
            plot,
        } => simulate(
            &controllers,
            &x0,
            n,
            seed,
            model.as_deref(),
            output.as_deref(),
            plot.as_deref(),
            out,
        ),
        Command::Bench {
            problem,
            algo,
            timeout,
            jobs,
        } => bench(&problem, algo, timeout, jobs, out),
        Command::Info { file } => info(&file, out),
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    writeln!(out, "{line}").context("writing output")?;
    Ok(())
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { emit($out, format_args!($($arg)*)) };
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("starting worker threads")?)
}

fn with_timeout(ctx: SearchContext, start: Instant, timeout: Option<f64>) -> Result<SearchContext, CliError> {
    match timeout {
        Some(s) => {
            let limit = Duration::try_from_secs_f64(s).map_err(|_| anyhow!("invalid timeout {s}"))?;
            Ok(ctx.with_deadline(start + limit))
        }
        None => Ok(ctx),
    }
}

fn default_output(problem: &Path) -> PathBuf {
    problem.with_extension("ctl.json")
}

fn stats_line(s: &SearchStats) -> String {
    format!(
        "expansions {}, cuts {}, validations {}, integrations {}",
        s.expansions, s.cuts, s.validations, s.integrations
    )
}

fn synthesis_failure(e: SynthesisError, ctx: &SearchContext, elapsed: Duration) -> CliError {
    match e {
        SynthesisError::Timeout { .. } => CliError::Timeout(format!(
            "timed out after {:.3} s ({})",
            elapsed.as_secs_f64(),
            stats_line(&ctx.stats())
        )),
        SynthesisError::SynthesisFailure { cell, id } => {
            CliError::Failed(format!("synthesis failed: no pattern controls cell {id} = {cell}"))
        }
        other => CliError::Input(other.into()),
    }
}

fn synth(
    problem: &Path,
    output: Option<PathBuf>,
    algo: Algorithm,
    jobs: usize,
    diagnostics: Option<&Path>,
    timeout: Option<f64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (pf, sys) = ProblemFile::load(problem).map_err(anyhow::Error::from)?;
    let start = Instant::now();
    let mut ctx = with_timeout(SearchContext::new(), start, timeout)?;
    let diag = match diagnostics {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let w = Arc::new(Mutex::new(BufWriter::new(f)));
            let sink = w.clone();
            let f: DiagnosticsSink = Arc::new(move |e| {
                let _ = writeln!(sink.lock().unwrap(), "{e}");
            });
            ctx = ctx.with_diagnostics(f);
            Some(w)
        }
        None => None,
    };
    let result = pool(jobs)?.install(|| decomposition(&sys, &pf.problem, algo, &ctx));
    let elapsed = start.elapsed();
    if let Some(w) = diag {
        w.lock().unwrap().flush().context("writing diagnostics")?;
    }
    let dec = result.map_err(|e| synthesis_failure(e, &ctx, elapsed))?;
    let n_cells = dec.cells.len();
    let max_len = dec.max_pattern_len();
    let ctl = Controller::new(&sys, dec).map_err(anyhow::Error::from)?;
    let path = output.unwrap_or_else(|| default_output(problem));
    ctl.save(&path).with_context(|| format!("writing {}", path.display()))?;
    say!(
        out,
        "problem {}: {} cells, max pattern length {}",
        pf.name,
        n_cells,
        max_len
    )?;
    say!(
        out,
        "wall time {:.3} s ({})",
        elapsed.as_secs_f64(),
        stats_line(&ctx.stats())
    )?;
    say!(out, "controller written to {}", path.display())
}

fn load_controller(path: &Path) -> Result<Controller, CliError> {
    Controller::load(path)
        .with_context(|| format!("reading controller {}", path.display()))
        .map_err(CliError::Input)
}

fn embedded_system(ctl: &Controller, path: &Path) -> Result<SwitchedSystem, CliError> {
    ctl.system()
        .with_context(|| format!("parsing the model stored in {}", path.display()))?
        .ok_or_else(|| anyhow!("{} stores no model; pass one explicitly", path.display()).into())
}

fn verify(controller: &Path, problem: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let ctl = load_controller(controller)?;
    let mut dec = ctl.decomposition();
    let sys = match problem {
        Some(p) => {
            let (pf, sys) = ProblemFile::load(p).map_err(anyhow::Error::from)?;
            dec.problem = pf.problem;
            sys
        }
        None => embedded_system(&ctl, controller)?,
    };
    let report = verify_decomposition(&sys, &dec);
    for c in &report.cells {
        let mut why = Vec::new();
        if !c.well_formed {
            why.push("malformed".to_string());
        }
        if let Some(e) = &c.error {
            why.push(format!("integration: {e}"));
        } else {
            for (ok, name) in [
                (c.in_target, "post outside target"),
                (c.in_safe, "tube leaves S"),
                (c.avoids_obstacle, "tube meets B"),
            ] {
                if !ok {
                    why.push(name.into());
                }
            }
        }
        if why.is_empty() {
            say!(out, "cell {} {} {}: pass", c.index, c.region, c.pattern)?;
        } else {
            say!(
                out,
                "cell {} {} {}: FAIL ({})",
                c.index,
                c.region,
                c.pattern,
                why.join(", ")
            )?;
        }
    }
    match &report.uncovered {
        None => say!(out, "cover: pass")?,
        Some(b) => say!(out, "cover: FAIL (uncovered {b})")?,
    }
    let failed = report.failed_cells();
    if report.passed() {
        say!(out, "verified {} cells", report.cells.len())
    } else {
        Err(CliError::Failed(format!(
            "verification failed: {} of {} cells{}",
            failed.len(),
            report.cells.len(),
            if report.covers { "" } else { ", cover incomplete" }
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    controllers: &[PathBuf],
    x0: &[f64],
    n: usize,
    seed: u64,
    model: Option<&Path>,
    output: Option<&Path>,
    plot: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let ctls = controllers
        .iter()
        .map(|p| load_controller(p))
        .collect::<Result<Vec<_>, _>>()?;
    let sys = match model {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_model(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => embedded_system(&ctls[0], &controllers[0])?,
    };
    if x0.len() != sys.dim() {
        return Err(anyhow!(
            "--x0 has {} components, the model has dimension {}",
            x0.len(),
            sys.dim()
        )
        .into());
    }
    let refs: Vec<&Controller> = ctls.iter().collect();
    let trace = match simulate_closed_loop(&sys, &refs, x0, n, seed) {
        Ok(t) => t,
        Err(ControllerError::OutsideDomain { t, x }) => {
            return Err(CliError::Failed(format!(
                "state left the controlled domain at t = {t}: {x:?}"
            )))
        }
        Err(e) => return Err(anyhow::Error::from(e).into()),
    };
    let csv = trace.to_csv();
    match output {
        Some(p) => std::fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?,
        None => out.write_all(csv.as_bytes()).context("writing trace")?,
    }
    if let Some(p) = plot {
        let first = &ctls[0].problem;
        let mut regions = vec![Region {
            label: "S",
            area: &first.s,
            stroke: "#555",
            fill: "none",
        }];
        if let Some(b) = &first.b {
            regions.push(Region {
                label: "B",
                area: b,
                stroke: "#d62728",
                fill: "#d62728",
            });
        }
        for (i, c) in ctls.iter().enumerate() {
            regions.push(Region {
                label: if i == 0 { "R" } else { "R'" },
                area: &c.problem.r,
                stroke: "#2ca02c",
                fill: "#2ca02c",
            });
        }
        std::fs::write(p, trace_svg(&trace, &regions)).with_context(|| format!("writing {}", p.display()))?;
    }
    if output.is_some() {
        say!(
            out,
            "simulated {} patterns, {} trace points",
            trace.patterns.len(),
            trace.points.len()
        )?;
    }
    Ok(())
}

fn bench(
    problem: &Path,
    algo: Algorithm,
    timeout: Option<f64>,
    jobs: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (pf, sys) = ProblemFile::load(problem).map_err(anyhow::Error::from)?;
    let start = Instant::now();
    let ctx = with_timeout(SearchContext::new(), start, timeout)?;
    let result = pool(jobs)?.install(|| decomposition(&sys, &pf.problem, algo, &ctx));
    let elapsed = start.elapsed();
    let dec = result.map_err(|e| synthesis_failure(e, &ctx, elapsed))?;
    say!(
        out,
        "{} {}: {} cells, wall time {:.3} s ({})",
        pf.name,
        algo,
        dec.cells.len(),
        elapsed.as_secs_f64(),
        stats_line(&ctx.stats())
    )
}

fn info(file: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let name = file.to_string_lossy();
    if name.ends_with(".json") {
        let ctl = load_controller(file)?;
        let m = &ctl.meta;
        say!(
            out,
            "controller for system {} (format {})",
            m.system,
            ctl.format_version
        )?;
        say!(
            out,
            "tau {}, K {}, D {}, scheme {}, lte_tol {:e}",
            m.tau,
            m.k,
            m.d,
            m.scheme,
            m.lte_tol
        )?;
        say!(
            out,
            "R {}, target {}, S {}",
            ctl.problem.r,
            ctl.problem.target,
            ctl.problem.s
        )?;
        let lens = ctl.cells.iter().map(|c| c.pattern.len());
        say!(
            out,
            "{} cells, max pattern length {}",
            ctl.cells.len(),
            lens.max().unwrap_or(0)
        )
    } else if name.ends_with(".problem") {
        let (pf, sys) = ProblemFile::load(file).map_err(anyhow::Error::from)?;
        let p = &pf.problem;
        say!(
            out,
            "problem {} on model {} ({})",
            pf.name,
            sys.name(),
            pf.model_path.display()
        )?;
        say!(out, "R {}, target {}, S {}", p.r, p.target, p.s)?;
        match &p.b {
            Some(b) => say!(out, "B {b}")?,
            None => say!(out, "B none")?,
        }
        say!(
            out,
            "K {}, D {}, split {}, scheme {}, lte_tol {:e}",
            p.k,
            p.d,
            p.split,
            p.integrator.scheme,
            p.integrator.lte_tol
        )
    } else {
        let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
        let sys = parse_model(&text).with_context(|| format!("parsing {}", file.display()))?;
        say!(
            out,
            "system {}: dimension {}, {} modes, tau {}",
            sys.name(),
            sys.dim(),
            sys.n_modes(),
            sys.tau()
        )?;
        if sys.n_dists() > 0 {
            say!(out, "disturbance {}", sys.dist_box())?;
        }
        for m in 1..=sys.n_modes() {
            for (i, e) in sys.rhs(m).iter().enumerate() {
                say!(out, "mode {m}: x{}' = {e}", i + 1)?;
            }
        }
        Ok(())
    }
}
