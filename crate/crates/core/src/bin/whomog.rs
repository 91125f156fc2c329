use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use whomog::cli::config::parse_reciprocal;
use whomog::cli::{self, RunConfig};
use whomog::Error;

#[derive(Parser)]
#[command(name = "whomog", version, about = "Homogenization of reaction-diffusion systems with dynamic interface conditions")]
struct Args {
    /// Configuration file (key = value lines); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Extra `key=value` settings applied after the configuration file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the cell problems and write the effective tensor.
    Cell,
    /// Run the homogenized limit problem.
    Macro,
    /// Run the ε-problem.
    Micro {
        /// Period ε = 1/N, overriding `micro.epsilon`.
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Compare micro runs at several ε with the limit problem.
    Sweep,
    /// Run all invariant checks.
    Check,
    /// Print the normalized configuration.
    Config,
}

fn load(args: &Args) -> whomog::Result<RunConfig> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => String::new(),
    };
    let mut overrides = args.set.clone();
    if let Some(dir) = &args.output {
        overrides.push(format!("output.dir={}", dir.display()));
    }
    if let Cmd::Micro { epsilon: Some(eps) } = &args.command {
        parse_reciprocal("--epsilon", eps)?;
        overrides.push(format!("micro.epsilon={eps}"));
    }
    cli::parse_config_with_overrides(&text, &overrides).map_err(|e| match (&args.config, e) {
        (Some(path), e @ Error::Parse { .. }) => Error::InFile {
            path: path.clone(),
            source: Box::new(e),
        },
        (_, e) => e,
    })
}

fn threads() -> whomog::Result<()> {
    let Ok(value) = std::env::var("WHOMOG_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Validation {
            key: "WHOMOG_THREADS".into(),
            message: format!("`{value}` is not a positive integer"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation {
            key: "WHOMOG_THREADS".into(),
            message: e.to_string(),
        })
}

fn run(args: &Args) -> whomog::Result<u8> {
    threads()?;
    let config = load(args)?;
    let print_files = |files: &[PathBuf]| {
        for f in files {
            println!("wrote {}", f.display());
        }
    };
    match args.command {
        Cmd::Cell => {
            let out = cli::run_cell(&config)?;
            let d = out.tensor.entries;
            println!("D11 = {:.10} D12 = {:.10} D22 = {:.10}", d[0][0], d[0][1], d[1][1]);
            print_files(&out.files);
        }
        Cmd::Macro => {
            let out = cli::run_macro_command(&config)?;
            if let Some(last) = out.trajectory.diagnostics.last() {
                println!("t = {} mass1 = {:.10e} mass2 = {:.10e}", last.t, last.mass1, last.mass2);
            }
            print_files(&out.files);
        }
        Cmd::Micro { .. } => {
            let out = cli::run_micro_command(&config)?;
            let h = out.trajectory.hje_time_norms;
            println!("epsilon = {} hje1 = {:.6e} hje2 = {:.6e} trace C = {:.6}", out.epsilon, h[0], h[1], out.trace_constant);
            print_files(&out.files);
        }
        Cmd::Sweep => {
            let out = cli::run_sweep_command(&config)?;
            println!("{}", whomog::two_scale::SweepRow::COLUMNS.join(" "));
            for row in &out.report.rows {
                let v: Vec<String> = row.values().iter().map(|x| format!("{x:.4e}")).collect();
                println!("{}", v.join(" "));
            }
            print_files(&out.files);
            if let Some(e) = out.report.monotonicity_error() {
                error!("{e}");
                return Ok(e.exit_code() as u8);
            }
        }
        Cmd::Check => {
            let report = cli::run_checks(&config);
            std::fs::create_dir_all(&config.output.dir).map_err(|e| Error::Io {
                path: config.output.dir.clone(),
                source: e,
            })?;
            let path = config.output.dir.join("check_report.csv");
            report.write(&path)?;
            for item in &report.items {
                let status = if item.passed { "pass" } else { "FAIL" };
                println!("{status:4} {:24} {:.3e} (limit {:.3e}) {}", item.name, item.value, item.threshold, item.detail);
            }
            println!("wrote {}", path.display());
            if !report.passed() {
                return Ok(2);
            }
        }
        Cmd::Config => print!("{config}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
