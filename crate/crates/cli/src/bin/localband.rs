use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use localband_cli::commands::{cmd_band, cmd_fit, cmd_simulate, cmd_ustat, load_config};
use localband_cli::config::help_table;
use localband_cli::CliError;

#[derive(Parser)]
#[command(name = "localband", version, about = "Local moment estimates with simultaneous confidence bands")]
#[command(after_help = help_table())]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

// Flags are accepted before and after the subcommand; the later ones win.
#[derive(Subcommand)]
enum Command {
    /// Fit the kernel forest and write estimates plus a reusable fit bundle.
    #[command(after_help = help_table())]
    Fit(Flags),
    /// Build the confidence band, from `--set fit_dir=DIR` or an inline fit.
    #[command(after_help = help_table())]
    Band(Flags),
    /// Run the Monte Carlo coverage sweep.
    #[command(after_help = help_table())]
    Simulate(Flags),
    /// Run the Hajek-residual scaling experiment.
    #[command(after_help = help_table())]
    Ustat(Flags),
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Fit(f) | Command::Band(f) | Command::Simulate(f) | Command::Ustat(f) => f,
        }
    }
}

#[derive(Args)]
struct Flags {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Subsample proportion b/n.
    #[arg(long)]
    bn: Option<String>,
    #[arg(long)]
    trees: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// Any config key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Flags {
    /// `--set` pairs first, then named flags, so named flags win.
    fn pairs(&self, pairs: &mut Vec<(String, String)>) -> Result<(), CliError> {
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("--set expects key=value, got `{item}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let named = [
            ("data", &self.data),
            ("out", &self.out),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("alpha", &self.alpha),
            ("bn", &self.bn),
            ("trees", &self.trees),
            ("replicates", &self.replicates),
            ("mode", &self.mode),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                pairs.retain(|(seen, _)| seen != k);
                pairs.push((k.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Cli {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut pairs = Vec::new();
        self.flags.pairs(&mut pairs)?;
        self.command.flags().pairs(&mut pairs)?;
        // Later entries replace earlier ones.
        let mut deduped: Vec<(String, String)> = Vec::new();
        for (k, v) in pairs {
            deduped.retain(|(seen, _)| *seen != k);
            deduped.push((k, v));
        }
        Ok(deduped)
    }

    fn config_path(&self) -> Option<&std::path::Path> {
        self.command.flags().config.as_deref().or(self.flags.config.as_deref())
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let overrides = cli.overrides()?;
    let (cfg, explicit) = load_config(cli.config_path(), &overrides)?;
    Ok(match cli.command {
        Command::Fit(_) => cmd_fit(&cfg)?.to_string(),
        Command::Band(_) => cmd_band(&cfg, &explicit)?.to_string(),
        Command::Simulate(_) => cmd_simulate(&cfg)?.0.to_string(),
        Command::Ustat(_) => cmd_ustat(&cfg)?.0.to_string(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
