use clap::{Parser, Subcommand};
use lsfield::expcli::{
    preset, run_config_file, run_config_text, slope_report, ExpError, ExpectedOrder, RunOptions, Table, PRESETS,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lsfield", version, about = "Lancaster–Sarmanov field information experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON experiment configuration or a named preset.
    Run {
        /// Path to the configuration file.
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Name of a shipped preset (see `presets list`).
        #[arg(long)]
        preset: Option<String>,
        /// Output root; defaults to $LSFIELD_OUTPUT_ROOT, then the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the log-log tail slope of a curve CSV.
    Slope {
        csv: PathBuf,
        /// Fit window as `lo:hi`.
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64),
        #[arg(long, default_value = "mi")]
        column: String,
        /// Declared theoretical order(s) to compare against.
        #[arg(long = "expect", allow_negative_numbers = true)]
        expect: Vec<f64>,
        /// Relative tolerance for the comparison.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[arg(long, default_value_t = 10)]
        min_points: usize,
        /// Also write the CSV summary here.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// List or print the shipped presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("hi: {e}"))?;
    Ok((lo, hi))
}

fn execute(cli: Cli) -> Result<(), ExpError> {
    match cli.command {
        Command::Run { config, preset: name, out } => {
            let options = RunOptions {
                output_root: out,
                base_dir: None,
            };
            let manifest = match (config, name) {
                (Some(path), _) => run_config_file(&path, &options)?,
                (None, Some(name)) => run_config_text(preset(&name)?, &options)?,
                (None, None) => unreachable!("clap requires one"),
            };
            println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
            if manifest.summaries.get("slope_pass") == Some(&0.0) {
                eprintln!("slope check failed; see slope.txt in {}", manifest.output_dir);
            }
        }
        Command::Slope {
            csv,
            window,
            column,
            expect,
            tol,
            min_points,
            csv_out,
        } => {
            let text = std::fs::read_to_string(&csv).map_err(|e| ExpError::Io {
                path: csv.display().to_string(),
                message: e.to_string(),
            })?;
            let table = Table::parse(&text).map_err(ExpError::Csv)?;
            let expected: Vec<ExpectedOrder> = expect
                .iter()
                .map(|&order| ExpectedOrder {
                    label: format!("order {order}"),
                    order,
                })
                .collect();
            let report = slope_report(&table, &column, window, &expected, tol, min_points)?;
            print!("{}", report.to_text());
            match csv_out {
                Some(path) => std::fs::write(&path, report.to_csv()).map_err(|e| ExpError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?,
                None => print!("{}", report.to_csv()),
            }
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, text) in PRESETS {
                    let description = serde_json::from_str::<serde_json::Value>(text)
                        .ok()
                        .and_then(|v| v["description"].as_str().map(str::to_string))
                        .unwrap_or_default();
                    println!("{name}\t{description}");
                }
            }
            PresetAction::Show { name } => print!("{}", preset(&name)?),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(match e {
                ExpError::Config { .. } | ExpError::Parse(_) | ExpError::UnknownPreset(_) => 2,
                _ => 1,
            })
        }
    }
}
