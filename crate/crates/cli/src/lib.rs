//! `kfs` command-line front end.
//!
//! Settings come from an optional flat TOML file (`--config`) overlaid by
//! command-line flags. Every command validates its full configuration before
//! doing any work, and output files are written all at once or not at all.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod bounds;
mod experiment;
mod model;
pub mod output;
pub mod settings;
pub mod vectors;

pub use bounds::BOUNDS_HEADER;
pub use experiment::{
    ExperimentKind, BETA_HEADER, QUASI_ORTH_HEADER, SEPARABILITY_HEADER, VERIFY_HEADER,
};
pub use settings::Settings;

/// Process exit code for a completed run in which some bound check failed.
pub const EXIT_SOUNDNESS_FAILURE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// All work finished but at least one verify row has `pass = false`.
    SoundnessFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::SoundnessFailure => EXIT_SOUNDNESS_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kfs",
    version,
    about = "Kernel few-shot bounds, experiments and models"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Flat TOML file of settings; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads for trial execution.
    #[arg(long, global = true)]
    pub workers: Option<String>,
    /// Output file (stdout when omitted, except for experiments).
    #[arg(long, global = true)]
    pub out: Option<String>,
}

impl GlobalArgs {
    const KEYS: &'static [&'static str] = &["seed", "workers", "out"];

    fn pairs(&self) -> Vec<(String, String)> {
        [
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

/// Declares an argument struct whose fields are all optional string flags,
/// plus the list of setting keys it accepts.
macro_rules! setting_args {
    ($(#[$meta:meta])* $name:ident { $($(#[$fm:meta])* $field:ident,)* }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, Args)]
        pub struct $name {
            $($(#[$fm])* #[arg(long)] pub $field: Option<String>,)*
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn pairs(&self) -> Vec<(String, String)> {
                let mut v = Vec::new();
                $(if let Some(x) = &self.$field {
                    v.push((stringify!($field).to_string(), x.clone()));
                })*
                v
            }
        }
    };
}

setting_args!(BoundsArgs {
    /// Kernel list, e.g. `linear,gauss:1,poly:2` (labels only; bounds depend on beta).
    kernel,
    /// Input dimension list (required).
    n,
    /// Support sizes.
    k,
    /// Quasi-orthogonality levels in (0, 1).
    delta,
    /// Norm slack in (0, 1).
    epsilon,
    /// New-class radius r_Y.
    r,
    /// Constant effective dimension; defaults to n.
    beta,
    /// Growth constant A.
    a,
    /// Volume constant C.
    c,
    /// Neighbourhood constant C*.
    c_star,
    /// Observed D statistic; enables the threshold columns.
    d,
    /// Base-class radius r_X.
    r_x,
    /// Threshold grid resolution.
    grid,
    /// Use the acceptance bound exactly as printed instead of the normalised form.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    as_printed,
});

setting_args!(ExperimentArgs {
    /// Kernel list, e.g. `linear,gauss:1`.
    kernel,
    /// Input dimension list (required).
    n,
    /// Quasi-orthogonality levels.
    delta,
    /// Trials per grid point.
    trials,
    /// Separability set sizes.
    set_size,
    /// Support sizes.
    k,
    /// Norm slack.
    epsilon,
    /// New-class radius.
    r_y,
    /// Base-class radius (also the sampling ball for estimate-beta).
    r_x,
    /// Distance of the new-class centre from the origin.
    c_y,
    /// Evaluation draws per class per fit trial.
    eval_draws,
    /// Threshold policy: `mid`, `opt` or a number.
    theta,
    /// Radii for estimate-beta.
    radii,
    /// Monte Carlo samples for estimate-beta.
    samples,
    /// Bootstrap replicates for estimate-beta.
    bootstrap,
});

setting_args!(FitArgs {
    /// Vectors file holding the support sample.
    support,
    /// Kernel, e.g. `gauss:1`.
    kernel,
    /// New-class radius r_Y (required).
    r_y,
    /// `opt` or a value in (0, 1) (required).
    delta,
    /// `mid`, `opt` or a value.
    theta,
    /// Label for the new class.
    label,
    /// Base-class radius for the optimising policies.
    r_x,
    /// Growth constant A.
    a,
    /// Neighbourhood constant C*.
    c_star,
    /// Constant effective dimension; defaults to n.
    beta,
    /// Grid resolution for the optimising policies.
    grid,
    /// Optimise the acceptance bound as printed instead of the normalised form.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    as_printed,
});

setting_args!(ClassifyArgs {
    /// Model JSON written by `fit`.
    model,
    /// Vectors file to label.
    input,
    /// Label returned by the constant base predictor.
    base_label,
});

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form bounds over a parameter grid.
    Bounds(BoundsArgs),
    /// Run a seeded Monte Carlo experiment; writes CSV plus a JSON manifest.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentKind,
        #[command(flatten)]
        args: ExperimentArgs,
    },
    /// Fit a few-shot model from a support sample.
    Fit(FitArgs),
    /// Label vectors with a fitted model over a constant base predictor.
    Classify(ClassifyArgs),
}

fn settings(global: &GlobalArgs, flags: Vec<(String, String)>) -> Result<Settings> {
    let mut s = match &global.config {
        Some(path) => Settings::from_config_file(path)?,
        None => Settings::default(),
    };
    s.overlay(global.pairs());
    s.overlay(flags);
    Ok(s)
}

fn allowed(command: &[&'static str]) -> Vec<&'static str> {
    GlobalArgs::KEYS.iter().chain(command).copied().collect()
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Bounds(args) => {
            let s = settings(&cli.global, args.pairs())?;
            s.restrict_to("bounds", &allowed(BoundsArgs::KEYS))?;
            bounds::run(&s)
        }
        Command::Experiment { name, args } => {
            let s = settings(&cli.global, args.pairs())?;
            experiment::run(name, &s)
        }
        Command::Fit(args) => {
            let s = settings(&cli.global, args.pairs())?;
            s.restrict_to("fit", &allowed(FitArgs::KEYS))?;
            model::fit(&s)
        }
        Command::Classify(args) => {
            let s = settings(&cli.global, args.pairs())?;
            s.restrict_to("classify", &allowed(ClassifyArgs::KEYS))?;
            model::classify(&s)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}
