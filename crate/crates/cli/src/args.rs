use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nndm::{AlphaChoice, Delta0Choice, FitOptions};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "nndm", version, about = "Nearest neighbor-Dirichlet mixture density estimation")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "NNDM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model to a CSV sample and write the model file and a fit report.
    Fit(FitCmd),
    /// Evaluate the posterior mean density, and optionally a credible band, on a grid.
    Density(DensityCmd),
    /// Write Monte Carlo density draws evaluated on a grid.
    Sample(SampleCmd),
    /// Score a grid of prior scales by leave-one-out cross-validation.
    Cv(CvCmd),
    /// Train a two-class density classifier and score a labelled test set.
    Classify(ClassifyCmd),
    /// Monte Carlo L1 error on a built-in test density.
    Bench(BenchCmd),
    /// Frequentist coverage of pointwise credible intervals on a built-in test density.
    Coverage(CoverageCmd),
    /// Out-of-sample log-likelihood across neighborhood sizes.
    KSweep(KSweepCmd),
}

/// `δ₀²` setting: `default`, `cv` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Delta0Arg {
    Default,
    Cv,
    Value(f64),
}

impl FromStr for Delta0Arg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "default" => Ok(Delta0Arg::Default),
            "cv" => Ok(Delta0Arg::Cv),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .map(Delta0Arg::Value)
                .ok_or_else(|| format!("expected `default`, `cv` or a positive number, got `{s}`")),
        }
    }
}

/// `α` setting: `default`, `auto` or a non-negative number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaArg {
    Default,
    Auto,
    Value(f64),
}

impl FromStr for AlphaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "default" => Ok(AlphaArg::Default),
            "auto" => Ok(AlphaArg::Auto),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .map(AlphaArg::Value)
                .ok_or_else(|| format!("expected `default`, `auto` or a non-negative number, got `{s}`")),
        }
    }
}

/// `lo:hi:steps` with `lo < hi` and `steps >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `lo:hi:steps` with lo < hi and steps >= 2, got `{s}`");
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(bad());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let steps: usize = steps.trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi && steps >= 2) {
            return Err(bad());
        }
        Ok(Range { lo, hi, steps })
    }
}

/// Automatic univariate grid: `lo:hi:steps`, or `steps` alone for data range ± 3 sample SDs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AutoGrid {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub steps: usize,
}

impl FromStr for AutoGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains(':') {
            let r: Range = s.parse()?;
            return Ok(AutoGrid {
                lo: Some(r.lo),
                hi: Some(r.hi),
                steps: r.steps,
            });
        }
        match s.trim().parse::<usize>() {
            Ok(steps) if steps >= 2 => Ok(AutoGrid { lo: None, hi: None, steps }),
            _ => Err(format!("expected `lo:hi:steps` or a step count >= 2, got `{s}`")),
        }
    }
}

/// Class priors `π₀,π₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Priors(pub f64, pub f64);

impl FromStr for Priors {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `p0,p1`, got `{s}`");
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        Ok(Priors(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    /// Neighborhood size including the owner; defaults to ⌊n^(1/3)⌋ + 1 for p = 1 and 10 otherwise.
    #[arg(long)]
    pub k: Option<usize>,
    /// Prior scale δ₀²: `default` (1), `cv`, or a value.
    #[arg(long, conflicts_with = "cv_delta0")]
    pub delta0: Option<Delta0Arg>,
    /// Shorthand for `--delta0 cv`.
    #[arg(long)]
    pub cv_delta0: bool,
    /// Log-spaced cross-validation grid `lo:hi:steps`; defaults to 25 points over [1e-3, 1e2].
    #[arg(long)]
    pub cv_grid: Option<Range>,
    /// Dirichlet concentration α: `default` (0), `auto`, or a value.
    #[arg(long)]
    pub alpha: Option<AlphaArg>,
    /// Prior mean precision ν₀.
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Prior degrees of freedom γ₀; must exceed p − 1.
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Root seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FitArgs {
    pub fn resolved_delta0(&self, fallback: Delta0Arg) -> Delta0Arg {
        if self.cv_delta0 {
            Delta0Arg::Cv
        } else {
            self.delta0.unwrap_or(fallback)
        }
    }

    pub fn options(&self, delta0: Delta0Arg, alpha: AlphaArg) -> Result<FitOptions, String> {
        let grid = match self.cv_grid {
            Some(r) => Some(nndm::hyper::log_spaced_grid(r.lo, r.hi, r.steps).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok(FitOptions {
            k: self.k,
            delta0: match self.resolved_delta0(delta0) {
                Delta0Arg::Default => Delta0Choice::Default,
                Delta0Arg::Cv => Delta0Choice::Cv(grid),
                Delta0Arg::Value(v) => Delta0Choice::Value(v),
            },
            alpha: match self.alpha.unwrap_or(alpha) {
                AlphaArg::Default => AlphaChoice::Default,
                AlphaArg::Auto => AlphaChoice::Rule,
                AlphaArg::Value(v) => AlphaChoice::Value(v),
            },
            mu0: None,
            nu0: self.nu0,
            gamma0: self.gamma0,
            seed: self.seed,
        })
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// Grid CSV with one point per row.
    #[arg(long, conflicts_with = "grid_auto")]
    pub grid: Option<PathBuf>,
    /// Univariate grid `lo:hi:steps`, or `steps` with bounds from `--input`.
    #[arg(long)]
    pub grid_auto: Option<AutoGrid>,
    /// Training CSV used for automatic grid bounds.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FitCmd {
    /// Training CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Model file to write.
    #[arg(long, default_value = "nndm-model.json")]
    pub model: PathBuf,
    /// Fit report to write.
    #[arg(long, default_value = "nndm-fit-report.json")]
    pub report: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct DensityCmd {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Monte Carlo draws for the credible band; 0 writes the mean only.
    #[arg(long, default_value_t = 0)]
    pub draws: usize,
    /// Credible level of the band.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Draw seed; defaults to the seed stored in the model.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Density table to write.
    #[arg(long, default_value = "nndm-density.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleCmd {
    /// Model file written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of density draws.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Draw seed; defaults to the seed stored in the model.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Long-format table of draws to write.
    #[arg(long, default_value = "nndm-draws.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CvCmd {
    /// Training CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Neighborhood size; defaults as for `fit`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Log-spaced grid `lo:hi:steps`; defaults to 25 points over [1e-3, 1e2].
    #[arg(long)]
    pub cv_grid: Option<Range>,
    /// Prior mean precision ν₀.
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Prior degrees of freedom γ₀.
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long, default_value = "nndm-cv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyCmd {
    /// Training CSV with a 0/1 label column.
    #[arg(long)]
    pub train: PathBuf,
    /// Test CSV with the same columns as the training file.
    #[arg(long)]
    pub test: PathBuf,
    /// Label column, by header name or 1-based index; defaults to the last column.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Class priors `p0,p1`; defaults to the training prevalence.
    #[arg(long)]
    pub priors: Option<Priors>,
    /// Standardize features with the training mean and SD before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Monte Carlo probability draws per test point; 0 scores the mean only.
    #[arg(long, default_value_t = 0)]
    pub draws: usize,
    /// Per-point predictions to write.
    #[arg(long, default_value = "nndm-predictions.csv")]
    pub predictions: PathBuf,
    /// Metrics report to write.
    #[arg(long, default_value = "nndm-metrics.json")]
    pub metrics: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchCmd {
    /// Test density: gs, mg, t or cw.
    #[arg(long)]
    pub density: String,
    /// Dimension.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Training size.
    #[arg(long)]
    pub n: usize,
    /// Test points per replicate.
    #[arg(long, default_value_t = 500)]
    pub nt: usize,
    /// Replicates.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Fit settings; δ₀² defaults to `cv`.
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long, default_value = "nndm-bench")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CoverageCmd {
    /// Test density: gs, mg, t or cw.
    #[arg(long)]
    pub density: String,
    /// Dimension.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Training size.
    #[arg(long)]
    pub n: usize,
    /// Fixed test points.
    #[arg(long, default_value_t = 200)]
    pub nt: usize,
    /// Replicates.
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Monte Carlo draws per replicate.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Credible level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Fit settings; δ₀² defaults to `cv` and α to `auto`.
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long, default_value = "nndm-coverage")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct KSweepCmd {
    /// Test density: gs, mg, t or cw.
    #[arg(long)]
    pub density: String,
    /// Dimension.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Training size.
    #[arg(long)]
    pub n: usize,
    /// Fixed test points.
    #[arg(long, default_value_t = 500)]
    pub nt: usize,
    /// Neighborhood sizes to compare.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ks: Vec<usize>,
    /// Replicates.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Fit settings; δ₀² defaults to `cv`. `--k` is rejected in favour of `--ks`.
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long, default_value = "nndm-k-sweep")]
    pub output: PathBuf,
}
