use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use signaling_bandits::config::{ExperimentConfig, SearchSpec};
use signaling_bandits::experiments::{
    calibrate_world, run_global_context, run_local_contexts, run_optimality_sweep, run_reference_game, HeatmapCell,
};
use signaling_bandits::output::{self, format_sig, TableRow};

#[derive(Debug, Parser)]
#[command(name = "sigbandits", version, about = "Speaker models for signaling-bandit games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment (or search) document. Defaults to the built-in setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files. Nothing is written without it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Switch every speaker to the hard-max limit.
    #[arg(long)]
    beta_inf: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reference game with a single rewarded target.
    Sim1(Common),
    /// Every speaker on every small context, averaged.
    Sim2(Common),
    /// Speakers reason about the whole action space.
    Sim3(Common),
    /// Both regimes with hard-max speakers.
    Sweep(Common),
    /// Exhaustive search for a world reproducing the target table.
    Calibrate(Common),
    /// Mean utterance probabilities over small contexts.
    Heatmap(Common),
}

fn load_config(path: Option<&Path>, builtin: fn() -> ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("invalid config {}", p.display()))
        }
        None => Ok(builtin()),
    }
}

fn out_dir(common: &Common, cfg_dir: Option<&str>) -> anyhow::Result<Option<PathBuf>> {
    let dir = common.out.clone().or_else(|| cfg_dir.map(PathBuf::from));
    if let Some(d) = &dir {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(dir)
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn create(dir: &Path, stem: &str, format: Format) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(format!("{stem}.{}", ext(format)));
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_table(dir: Option<&Path>, stem: &str, format: Format, rows: &[TableRow]) -> anyhow::Result<()> {
    print!("{}", output::render_table(rows));
    if let Some(dir) = dir {
        let w = create(dir, stem, format)?;
        match format {
            Format::Csv => output::write_table_csv(w, rows)?,
            Format::Json => output::write_table_json(w, rows)?,
        }
    }
    Ok(())
}

fn write_heatmap(dir: Option<&Path>, stem: &str, format: Format, cells: &[HeatmapCell]) -> anyhow::Result<()> {
    if let Some(dir) = dir {
        let w = create(dir, stem, format)?;
        match format {
            Format::Csv => output::write_heatmap_csv(w, cells)?,
            Format::Json => output::write_heatmap_json(w, cells)?,
        }
    }
    Ok(())
}

fn tag(name: &str, beta_inf: bool) -> String {
    if beta_inf {
        format!("{name}-inf")
    } else {
        name.to_string()
    }
}

fn run_experiment(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Sim1(c) => {
            let mut cfg = load_config(c.config.as_deref(), ExperimentConfig::lewis)?;
            if c.beta_inf {
                cfg = cfg.with_infinite_speakers();
            }
            let dir = out_dir(c, cfg.out_dir.as_deref())?;
            let name = tag("sim1", c.beta_inf);
            let rows: Vec<TableRow> = run_reference_game(&cfg)?
                .into_iter()
                .map(|r| TableRow::new(name.clone(), r))
                .collect();
            write_table(dir.as_deref(), &name, c.format, &rows)
        }
        Command::Sim2(c) | Command::Sim3(c) | Command::Heatmap(c) => {
            let mut cfg = load_config(c.config.as_deref(), ExperimentConfig::signaling_bandit)?;
            if c.beta_inf {
                cfg = cfg.with_infinite_speakers();
            }
            let dir = out_dir(c, cfg.out_dir.as_deref())?;
            let (name, result) = match command {
                Command::Sim3(_) => ("sim3", run_global_context(&cfg)?),
                _ => ("sim2", run_local_contexts(&cfg)?),
            };
            let name = tag(name, c.beta_inf);
            let heatmap_stem = format!("{name}-heatmap");
            if !matches!(command, Command::Heatmap(_)) {
                let rows: Vec<TableRow> = result
                    .rows
                    .into_iter()
                    .map(|r| TableRow::new(name.clone(), r))
                    .collect();
                write_table(dir.as_deref(), &name, c.format, &rows)?;
            } else {
                for cell in &result.heatmap {
                    println!(
                        "{:<10} {:<10} {:>6} {:>10.4} {}",
                        cell.speaker,
                        cell.feature,
                        format_sig(cell.value),
                        cell.probability,
                        if cell.is_true { "X" } else { "" }
                    );
                }
            }
            write_heatmap(dir.as_deref(), &heatmap_stem, c.format, &result.heatmap)
        }
        Command::Sweep(c) => {
            let cfg = load_config(c.config.as_deref(), ExperimentConfig::signaling_bandit)?;
            let dir = out_dir(c, cfg.out_dir.as_deref())?;
            let rows: Vec<TableRow> = run_optimality_sweep(&cfg)?
                .into_iter()
                .map(|s| TableRow::new(format!("sweep-{}", s.regime), s.row))
                .collect();
            write_table(dir.as_deref(), "sweep", c.format, &rows)
        }
        Command::Calibrate(c) => {
            let mut spec = match &c.config {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading search {}", p.display()))?;
                    SearchSpec::from_json(&text).with_context(|| format!("invalid search {}", p.display()))?
                }
                None => SearchSpec::default_search(),
            };
            if c.beta_inf {
                spec.params = spec.params.with_infinite_speakers();
            }
            let dir = out_dir(c, None)?;
            let report = calibrate_world(&spec)?;
            println!(
                "enumerated {}, pruned {} (value set) + {} (constraints), evaluated {}, matched {}",
                report.enumerated, report.pruned_value_set, report.pruned_constraint, report.evaluated,
                report.matches.len()
            );
            let names: Vec<&str> = spec.feature_space.features().iter().map(|f| f.name.as_str()).collect();
            for m in &report.matches {
                let ws: Vec<String> = names
                    .iter()
                    .zip(&m.weights)
                    .map(|(n, w)| format!("{n}={w}"))
                    .collect();
                println!(
                    "  {} values {:?} max deviation {:.4} held-out {}",
                    ws.join(" "),
                    m.value_set,
                    m.max_deviation,
                    m.held_out_context.as_deref().unwrap_or("-")
                );
            }
            match (&report.best, report.matches.is_empty()) {
                (Some(b), true) => println!("no match; closest max deviation {:.4} at {:?}", b.max_deviation, b.weights),
                (None, _) => println!("no candidates to evaluate"),
                _ => {}
            }
            if let Some(dir) = dir {
                let w = create(&dir, "calibration", c.format)?;
                match c.format {
                    Format::Csv => output::write_calibration_csv(w, &report, &names)?,
                    Format::Json => output::write_calibration_json(w, &report)?,
                }
            }
            Ok(())
        }
    }
}

fn jobs(command: &Command) -> Option<usize> {
    match command {
        Command::Sim1(c)
        | Command::Sim2(c)
        | Command::Sim3(c)
        | Command::Sweep(c)
        | Command::Calibrate(c)
        | Command::Heatmap(c) => c.jobs,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs(&cli.command) {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| run_experiment(&cli.command))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::Write::flush(&mut io::stdout());
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
