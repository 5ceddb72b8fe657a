use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use kinexplain::cohort::RiskGroup;
use kinexplain::perturb::Kind;
use kinexplain::pipeline::{Paths, Pipeline, RunConfig, Selection};
use kinexplain::xai::Method;

#[derive(Parser)]
#[command(name = "kinexplain", version, about = "Attribution and perturbation analysis of skeleton motion classifiers")]
struct Cli {
    /// TOML run configuration. Built-in defaults when absent.
    #[arg(long, global = true, env = "KINEXPLAIN_CONFIG")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Puts data, models and outputs under this directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,

    #[arg(long, global = true, value_enum, default_value_t = GroupArg::Both)]
    group: GroupArg,

    /// Perturbation kind; every configured kind when absent.
    #[arg(long, global = true, value_enum)]
    kind: Option<KindArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Synth,
    /// Train the ensemble on the training split.
    Train,
    /// Ensemble predictions and accuracy for every window.
    Predict,
    /// CAM / Grad-CAM joint attributions for every window.
    Explain,
    /// Assign windows to risk groups.
    Group,
    /// Select top-k and non-top-k joints per method and risk group.
    Topk,
    /// Run the perturbation experiments.
    Perturb,
    /// Render curves, skeletons and score tables.
    Report,
    /// Every step from synth to report.
    Run,
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cam,
    Gradcam,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Low,
    High,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Velocity,
    Angle,
    Combined,
}

impl Cli {
    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        if let Some(out) = &self.out {
            cfg.paths = Paths::under(out);
        }
        Ok(cfg)
    }

    fn selection(&self, cfg: &RunConfig) -> Selection {
        let mut sel = Selection::all(cfg);
        sel.methods = match self.method {
            MethodArg::Cam => vec![Method::Cam],
            MethodArg::Gradcam => vec![Method::GradCam],
            MethodArg::Both => Method::ALL.to_vec(),
        };
        sel.groups = match self.group {
            GroupArg::Low => vec![RiskGroup::VeryLow],
            GroupArg::High => vec![RiskGroup::VeryHigh],
            GroupArg::Both => vec![RiskGroup::VeryLow, RiskGroup::VeryHigh],
        };
        if let Some(kind) = self.kind {
            sel.kinds = vec![match kind {
                KindArg::Velocity => Kind::Velocity,
                KindArg::Angle => Kind::Angle,
                KindArg::Combined => Kind::Combined,
            }];
        }
        sel
    }
}

fn run(cli: &Cli) -> anyhow::Result<Vec<String>> {
    let cfg = cli.run_config()?;
    if let Command::Config = cli.command {
        return Ok(vec![cfg.to_toml()]);
    }
    let sel = cli.selection(&cfg);
    let pipeline = Pipeline::new(cfg)?;
    let notes = match cli.command {
        Command::Synth => pipeline.synth(),
        Command::Train => pipeline.train(),
        Command::Predict => pipeline.predict(),
        Command::Explain => pipeline.explain(&sel.methods),
        Command::Group => pipeline.group(),
        Command::Topk => pipeline.topk(&sel.methods, &sel.groups),
        Command::Perturb => pipeline.perturb(&sel),
        Command::Report => pipeline.report(&sel),
        Command::Run => pipeline.run_all(&sel),
        Command::Config => unreachable!(),
    };
    notes.context(command_name(&cli.command))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth => "synth",
        Command::Train => "train",
        Command::Predict => "predict",
        Command::Explain => "explain",
        Command::Group => "group",
        Command::Topk => "topk",
        Command::Perturb => "perturb",
        Command::Report => "report",
        Command::Run => "run",
        Command::Config => "config",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(notes) => {
            for n in notes {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<kinexplain::Error>().map_or(1, |k| k.exit_code());
            ExitCode::from(code as u8)
        }
    }
}
