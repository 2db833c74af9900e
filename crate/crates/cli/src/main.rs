use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdla_lab::Error;

mod commands;
mod config;

use commands::Ctx;
use config::Config;

#[derive(Parser, Debug)]
#[command(name = "mdla-lab", version, about = "Multi-particle DLA and supercooled Stefan experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; falls back to MDLA_LAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for replica-parallel experiments.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one MDLA simulation.
    Mdla(Common),
    /// One of the Figure 2 configurations.
    Figure2 {
        #[command(flatten)]
        common: Common,
        /// N:T, e.g. 9900:0.01.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Supercooled Stefan problem on the half-line.
    Stefan1d(Common),
    /// Winding number of a polyline about a point.
    Winding(Common),
    /// Crossing-property Monte Carlo.
    Crossing(Common),
    /// Mushy-region example.
    Example58(Common),
    /// Growth, chaos and tagged-particle diagnostics.
    Analyze(Common),
}

fn seed_from_env() -> Result<Option<u64>, Error> {
    match std::env::var("MDLA_LAB_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| Error::Config(format!("MDLA_LAB_SEED='{s}' is not a u64"))),
        Err(_) => Ok(None),
    }
}

fn context(name: &'static str, c: &Common) -> Result<Ctx, Error> {
    let mut cfg = match &c.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
        None => Config::default(),
    };
    for s in &c.overrides {
        cfg.set(s)?;
    }
    if let Some(j) = c.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| Error::Config(e.to_string()))?;
    }
    let seed = match c.seed {
        Some(s) => s,
        None => seed_from_env()?.unwrap_or(0),
    };
    Ok(Ctx { command: name, cfg, seed, out: c.out.clone() })
}

fn dispatch(cmd: Command) -> Result<(), (Error, Option<PathBuf>)> {
    let (name, common, variant) = match &cmd {
        Command::Mdla(c) => ("mdla", c, None),
        Command::Figure2 { common, variant } => ("figure2", common, variant.as_deref()),
        Command::Stefan1d(c) => ("stefan1d", c, None),
        Command::Winding(c) => ("winding", c, None),
        Command::Crossing(c) => ("crossing", c, None),
        Command::Example58(c) => ("example58", c, None),
        Command::Analyze(c) => ("analyze", c, None),
    };
    let mut ctx = context(name, common).map_err(|e| (e, None))?;
    let result = match name {
        "mdla" => commands::mdla(&mut ctx),
        "figure2" => commands::figure2(&mut ctx, variant),
        "stefan1d" => commands::stefan1d(&mut ctx),
        "winding" => commands::winding(&mut ctx),
        "crossing" => commands::crossing(&mut ctx),
        "example58" => commands::example58(&mut ctx),
        _ => commands::analyze(&mut ctx),
    };
    result.map_err(|e| {
        let dump = e.is_invariant().then(|| write_dump(&ctx, &e)).flatten();
        (e, dump)
    })
}

/// Writes the failing invariant and resolved configuration next to the
/// other outputs.
fn write_dump(ctx: &Ctx, e: &Error) -> Option<PathBuf> {
    let path = ctx.out.join("invariant_dump.txt");
    let mut text = format!("command = {}\nseed = {}\nerror = {e}\n", ctx.command, ctx.seed);
    for (k, v) in ctx.cfg.resolved() {
        text.push_str(&format!("config.{k} = {v}\n"));
    }
    std::fs::create_dir_all(&ctx.out).ok()?;
    std::fs::write(&path, text).ok()?;
    Some(path)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, dump)) if e.is_invariant() => {
            eprintln!("error: {e}");
            match dump {
                Some(p) => eprintln!("state dump: {}", p.display()),
                None => eprintln!("state dump could not be written"),
            }
            ExitCode::from(2)
        }
        Err((e, _)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
