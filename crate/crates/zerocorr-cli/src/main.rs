use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use zerocorr_cli::{run, CliError, RunConfig};

macro_rules! overrides {
    ($($field:ident),* $(,)?) => {
        /// Any config key may be given as a flag; flags override the config file.
        #[derive(Args, Debug, Default, Clone)]
        struct Overrides {
            $(
                #[arg(long, value_name = "VALUE")]
                $field: Option<String>,
            )*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push((stringify!($field), x.as_str()));
                    }
                )*
                v
            }
        }
    };
}

overrides!(
    ensemble, n, d, k, b, b_list, psi, t_min, t_max, steps, t, d_list, fit_min, fit_max, fit_steps, samples, seed,
    chunks, estimator, smooth, max_moment, truncation, half_width, replicates, bins, r_max, level, omega_convention,
    cases, output, threads,
);

#[derive(Parser, Debug)]
#[command(name = "zerocorr", version, about = "Two-point correlation of zeros of Gaussian random polynomials")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// K(t) on a grid of separations, as CSV.
    Curve(Overrides),
    /// Short-range constant, zero density and D_n.
    Constants(Overrides),
    /// Monte Carlo zero density against the closed form.
    Density(Overrides),
    /// Small-separation constants on the parabola y = b x².
    Parabola(Overrides),
    /// Gap between the restricted Kostlan and the limiting correlation.
    Universality(Overrides),
    /// Moments of the volume spanned by random unit vectors.
    Parallelotope(Overrides),
    /// Pair correlation from sampled real roots (n = 1).
    Empirical(Overrides),
    /// Run the invariant suite (`--level fast | full`).
    Validate(Overrides),
}

fn build(cli: &Cli) -> Result<RunConfig, CliError> {
    let (name, o) = match &cli.command {
        Command::Curve(o) => ("curve", o),
        Command::Constants(o) => ("constants", o),
        Command::Density(o) => ("density", o),
        Command::Parabola(o) => ("parabola", o),
        Command::Universality(o) => ("universality", o),
        Command::Parallelotope(o) => ("parallelotope", o),
        Command::Empirical(o) => ("empirical", o),
        Command::Validate(o) => ("validate", o),
    };
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.command = name.into();
    for (k, v) in o.pairs() {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(&cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
