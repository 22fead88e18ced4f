//! Command-line options and their config-file counterparts.
//!
//! Every option group is a struct of `Option`s. The same struct is filled
//! once from flags and once from a TOML config whose keys are the flag
//! names without dashes (`max-iters = 500`, `B = 2.0`), then merged with
//! flags winning. Defaults apply last.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use tucker_gd::bench::{Estimator, SweepVar};
use tucker_gd::models::ModelKind;

use crate::CliError;

macro_rules! layered {
    (
        $(#[$sm:meta])*
        pub struct $name:ident {
            $(
                $(#[doc = $doc:literal])*
                $field:ident ($key:literal $(, $extra:meta)*): $ty:ty,
            )*
        }
    ) => {
        $(#[$sm])*
        #[derive(Args, Deserialize, Debug, Default, Clone)]
        #[serde(default)]
        pub struct $name {
            $(
                $(#[doc = $doc])*
                #[arg(long = $key $(, $extra)*)]
                #[serde(rename = $key)]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            /// Fills every unset field from `lower`.
            pub fn over(self, lower: Self) -> Self {
                Self { $($field: self.$field.or(lower.$field)),* }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Hosvd,
    Hooi,
}

layered! {
    /// Truth and observation parameters.
    pub struct ModelOpts {
        /// Observation model: denoise, regression, poisson or binomial.
        model("model"): ModelKind,
        /// Tensor dimensions, e.g. 20,20,20.
        dims("dims", value_delimiter = ','): Vec<usize>,
        /// Tucker ranks, e.g. 3,3,3.
        ranks("ranks", value_delimiter = ','): Vec<usize>,
        /// Noise level (denoise, regression). Default 1.
        sigma("sigma"): f64,
        /// Per-entry noise sd range lo,hi for heteroskedastic denoising.
        sd_range("sd-range", value_delimiter = ','): Vec<f64>,
        /// Signal level of denoise and regression truths. Default 2.
        lambda("lambda"): f64,
        /// Entry bound of Poisson and binomial truths. Default 2.
        big_b("B"): f64,
        /// Poisson intensity (required for poisson).
        intensity("I"): f64,
        /// Binomial population size (required for binomial).
        population("N"): u64,
        /// Regression sample size. Default ceil(1.2 p^1.5 r).
        n("n"): usize,
        /// Random seed. Default 0.
        seed("seed"): u64,
    }
}

layered! {
    /// Gradient-descent settings.
    pub struct PgdOpts {
        /// Step-size constant; the step is eta0 / (c lambda^1.5). Default 0.25.
        eta0("eta0"): f64,
        /// Fixed step size, overriding eta0.
        eta("eta"): f64,
        /// Iteration cap. Default 2000.
        max_iters("max-iters"): usize,
        /// Relative objective-change tolerance. Default 1e-8.
        rel_tol("rel-tol"): f64,
        /// Halve the step until the objective decreases.
        backtracking("backtracking", num_args = 0..=1, default_missing_value = "true"): bool,
        /// Apply the incoherence and core projections.
        projections("projections", num_args = 0..=1, default_missing_value = "true"): bool,
        /// Incoherence parameters mu1,mu2,mu3. Default 3,3,3.
        mu("mu", value_delimiter = ','): Vec<f64>,
        /// Choose a and b from the initial estimate. Default true.
        auto_tune("auto-tune", num_args = 0..=1, default_missing_value = "true"): bool,
        /// With auto-tuning, use a = lambda instead of a = c lambda.
        literal_a("literal-a", num_args = 0..=1, default_missing_value = "true"): bool,
        /// Regularization weight (without auto-tuning). Default 1.
        a("a"): f64,
        /// Factor scale (without auto-tuning). Default 1.
        b("b"): f64,
        /// Spectral step of the initializer. Default hooi.
        init("init"): InitMethod,
    }
}

layered! {
    /// Output location.
    pub struct OutOpts {
        /// Output directory.
        out_dir("out-dir"): PathBuf,
        /// File-name stem of the outputs.
        name("name"): String,
    }
}

layered! {
    /// Input data of `fit`.
    pub struct DataOpts {
        /// Dataset sidecar (TOML) written by `gen` or by hand.
        data("data"): PathBuf,
        /// Truth tensor, overriding the sidecar's.
        truth("truth"): PathBuf,
        /// Tucker ranks, overriding the sidecar's.
        ranks("ranks", value_delimiter = ','): Vec<usize>,
    }
}

layered! {
    /// Grid and replication of `sweep`.
    pub struct SweepOpts {
        /// Swept quantity: n, p, r, I or N.
        sweep_var("sweep-var"): SweepVar,
        /// Grid values, e.g. 500,1000,2000.
        grid("grid", value_delimiter = ','): Vec<f64>,
        /// Replicates per grid point. Default 20.
        replicates("replicates"): usize,
        /// Estimators: gd, init_only, warm_start_gd, hosvd_baseline, hooi_baseline.
        estimators("estimators", value_delimiter = ','): Vec<Estimator>,
        /// Record wall-clock seconds per estimator.
        timing("timing", num_args = 0..=1, default_missing_value = "true"): bool,
        /// Worker threads. Default 1.
        jobs("jobs"): usize,
    }
}

#[derive(Parser, Debug)]
#[command(name = "tucker-gd", version, about = "Low-Tucker-rank tensor estimation by projected gradient descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic truth and observations and write them to disk.
    Gen {
        /// TOML file of option defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Fit a model to a dataset.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataOpts,
        #[command(flatten)]
        pgd: PgdOpts,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Run a simulation sweep and write its CSV and manifest.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Manifest of an earlier sweep to start from.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        sweep: SweepOpts,
        #[command(flatten)]
        pgd: PgdOpts,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Print summary statistics of a tensor file.
    Inspect {
        /// Tensor file.
        path: PathBuf,
        /// Number of leading singular values to print per mode. Default 5.
        #[arg(long)]
        top: Option<usize>,
    },
}

/// A parsed config file, checked against the keys the subcommand accepts.
pub struct ConfigFile {
    text: String,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>, allowed: &[&[&str]]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self { text: String::new() });
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let allowed: BTreeSet<&str> = allowed.iter().flat_map(|k| k.iter().copied()).collect();
        if let Some(bad) = table.keys().find(|k| !allowed.contains(k.as_str())) {
            return Err(CliError::Usage(format!("{}: unknown key `{bad}`", path.display())));
        }
        Ok(Self { text })
    }

    pub fn group<T: for<'de> Deserialize<'de> + Default>(&self) -> Result<T, CliError> {
        if self.text.is_empty() {
            return Ok(T::default());
        }
        toml::from_str(&self.text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }
}

pub fn triple<T: Copy>(v: &[T], what: &str) -> Result<[T; 3], CliError> {
    <[T; 3]>::try_from(v).map_err(|_| CliError::Usage(format!("--{what} takes exactly three comma-separated values")))
}
