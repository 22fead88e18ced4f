//! Simulation studies: estimator comparisons over a one-variable grid,
//! aggregation over replicates, CSV output and rate-slope fits.
//!
//! Every (grid point, replicate) cell draws its own truth and data from the
//! child seed `child_seed(child_seed(seed, grid_index), replicate)`, and all
//! estimators in a cell see the same data. Cells are independent, so they
//! can run on several threads; aggregation always walks them in grid and
//! replicate order, which keeps results identical for any thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decomp::{hooi, hosvd, HOOI_MAX_ITERS};
use crate::error::{ensure, Error, Result};
use crate::init::{initialize, sketch, Spectral};
use crate::models::ModelKind;
use crate::pgd::{fit, rmse, PgdConfig, StepSize};
pub use crate::simgen::default_sample_size;
use crate::simgen::{child_seed, Instance, InstanceSpec};
use crate::tensor::Dims;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Model initializer followed by gradient descent.
    Gd,
    /// Model initializer alone.
    InitOnly,
    /// Gradient descent started at the truth.
    WarmStartGd,
    /// HOSVD of the model's proxy tensor (`Y` for denoising).
    HosvdBaseline,
    /// HOOI of the model's proxy tensor.
    HooiBaseline,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::Gd, Estimator::InitOnly, Estimator::WarmStartGd, Estimator::HosvdBaseline, Estimator::HooiBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Gd => "gd",
            Estimator::InitOnly => "init_only",
            Estimator::WarmStartGd => "warm_start_gd",
            Estimator::HosvdBaseline => "hosvd_baseline",
            Estimator::HooiBaseline => "hooi_baseline",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator {s:?}")))
    }
}

/// The quantity varied across the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepVar {
    /// Regression sample size.
    #[serde(rename = "n")]
    SampleSize,
    /// Common dimension `p1 = p2 = p3`.
    #[serde(rename = "p")]
    Dim,
    /// Common rank `r1 = r2 = r3`.
    #[serde(rename = "r")]
    Rank,
    /// Poisson intensity.
    #[serde(rename = "I")]
    Intensity,
    /// Binomial population size.
    #[serde(rename = "N")]
    Population,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::SampleSize => "n",
            SweepVar::Dim => "p",
            SweepVar::Rank => "r",
            SweepVar::Intensity => "I",
            SweepVar::Population => "N",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepVar::SampleSize),
            "p" => Ok(SweepVar::Dim),
            "r" => Ok(SweepVar::Rank),
            "I" => Ok(SweepVar::Intensity),
            "N" => Ok(SweepVar::Population),
            other => Err(Error::InvalidArgument(format!("unknown sweep variable {other:?}; expected n, p, r, I or N"))),
        }
    }
}

/// Gradient-descent settings used by the `gd` and `warm_start_gd` arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdSettings {
    pub eta0: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub backtracking: bool,
    pub projections: bool,
    pub mu: [f64; 3],
}

impl Default for GdSettings {
    fn default() -> Self {
        let d = PgdConfig::default();
        let eta0 = match d.step {
            StepSize::Scaled(v) | StepSize::Fixed(v) => v,
        };
        Self {
            eta0,
            max_iters: d.max_iters,
            rel_tol: d.rel_tol,
            backtracking: d.backtracking,
            projections: d.projections_enabled,
            mu: d.mu,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub sweep_var: SweepVar,
    pub grid: Vec<f64>,
    pub dims: Dims,
    pub ranks: Dims,
    /// Regression sample size; `None` uses `⌈1.2 p̄^{3/2} r̄⌉`.
    pub n: Option<usize>,
    pub sigma: f64,
    /// Signal level of denoising and regression truths.
    pub lambda: f64,
    /// Entry bound of Poisson and binomial truths.
    pub big_b: f64,
    pub intensity: f64,
    pub population: u64,
    /// Per-entry noise sd drawn uniformly from this range (denoising).
    pub sd_range: Option<[f64; 2]>,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Use HOOI (rather than HOSVD) inside the initializers.
    pub init_hooi: bool,
    pub gd: GdSettings,
    /// Record wall-clock time per estimator (makes output nondeterministic).
    pub timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            model: ModelKind::TensorRegression,
            sweep_var: SweepVar::SampleSize,
            grid: vec![],
            dims: [15, 15, 15],
            ranks: [2, 2, 2],
            n: None,
            sigma: 1.0,
            lambda: 2.0,
            big_b: 2.0,
            intensity: 1.0,
            population: 10,
            sd_range: None,
            replicates: 20,
            seed: 0,
            estimators: vec![Estimator::Gd, Estimator::InitOnly],
            init_hooi: true,
            gd: GdSettings::default(),
            timing: false,
        }
    }
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    ensure!(v >= 1.0 && v.fract() == 0.0 && v.is_finite(), InvalidArgument, "{what} must be a positive integer, got {v}");
    Ok(v as usize)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.replicates >= 1, InvalidArgument, "replicates must be at least 1");
        ensure!(!self.grid.is_empty(), InvalidArgument, "grid is empty");
        ensure!(!self.estimators.is_empty(), InvalidArgument, "no estimators selected");
        let allowed = match self.model {
            ModelKind::TensorRegression => [SweepVar::SampleSize, SweepVar::Dim, SweepVar::Rank].as_slice(),
            ModelKind::PoissonPca => &[SweepVar::Intensity, SweepVar::Dim, SweepVar::Rank],
            ModelKind::BinomialPca => &[SweepVar::Population, SweepVar::Dim, SweepVar::Rank],
            ModelKind::SubGaussianPca => &[SweepVar::Dim, SweepVar::Rank],
        };
        ensure!(
            allowed.contains(&self.sweep_var),
            InvalidArgument,
            "cannot sweep {} for the {} model",
            self.sweep_var,
            self.model
        );
        for i in 0..self.grid.len() {
            self.instance_spec(i, 0)?;
        }
        Ok(())
    }

    /// Instance description for grid point `index`, replicate `rep`.
    pub fn instance_spec(&self, index: usize, rep: usize) -> Result<InstanceSpec> {
        let v = *self.grid.get(index).ok_or_else(|| Error::InvalidArgument(format!("grid index {index} out of range")))?;
        let mut inst = InstanceSpec {
            model: self.model,
            dims: self.dims,
            ranks: self.ranks,
            seed: self.cell_seed(index, rep),
            lambda: None,
            big_b: None,
            sigma: None,
            sd_range: None,
            n: None,
            intensity: None,
            population: None,
        };
        match self.model {
            ModelKind::SubGaussianPca => {
                inst.lambda = Some(self.lambda);
                inst.sigma = Some(self.sigma);
                inst.sd_range = self.sd_range;
            }
            ModelKind::TensorRegression => {
                inst.lambda = Some(self.lambda);
                inst.sigma = Some(self.sigma);
                inst.n = self.n;
            }
            ModelKind::PoissonPca => {
                inst.big_b = Some(self.big_b);
                inst.intensity = Some(self.intensity);
            }
            ModelKind::BinomialPca => {
                inst.big_b = Some(self.big_b);
                inst.population = Some(self.population);
            }
        }
        match self.sweep_var {
            SweepVar::SampleSize => inst.n = Some(as_count(v, "n")?),
            SweepVar::Dim => inst.dims = [as_count(v, "p")?; 3],
            SweepVar::Rank => inst.ranks = [as_count(v, "r")?; 3],
            SweepVar::Intensity => inst.intensity = Some(v),
            SweepVar::Population => inst.population = Some(as_count(v, "N")? as u64),
        }
        crate::decomp::check_ranks(inst.dims, inst.ranks)?;
        if let Some(i) = inst.intensity {
            ensure!(i > 0.0 && i.is_finite(), InvalidArgument, "intensity must be positive, got {i}");
        }
        if let Some([lo, hi]) = inst.sd_range {
            ensure!(0.0 <= lo && lo <= hi && hi.is_finite(), InvalidArgument, "bad sd range [{lo}, {hi}]");
        }
        Ok(inst)
    }

    fn pgd_config(&self) -> PgdConfig {
        PgdConfig {
            step: StepSize::Scaled(self.gd.eta0),
            max_iters: self.gd.max_iters,
            rel_tol: self.gd.rel_tol,
            backtracking: self.gd.backtracking,
            projections_enabled: self.gd.projections,
            mu: self.gd.mu,
            big_b: self.big_b,
            ..PgdConfig::default()
        }
    }

    /// Seed of replicate `rep` at grid point `index`.
    pub fn cell_seed(&self, index: usize, rep: usize) -> u64 {
        child_seed(child_seed(self.seed, index as u64), rep as u64)
    }

    /// Manifest echoing the experiment, in TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("cannot serialize experiment spec: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("bad experiment spec: {e}")))
    }
}

/// Draws the truth and data for grid point `index`, replicate `rep`.
pub fn make_instance(spec: &ExperimentSpec, index: usize, rep: usize) -> Result<Instance> {
    spec.instance_spec(index, rep)?.generate()
}

/// Outcome of one estimator on one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOutcome {
    pub rmse: f64,
    pub seconds: f64,
    pub diverged: bool,
}

/// Runs `estimator` on an instance.
pub fn run_estimator(spec: &ExperimentSpec, inst: &Instance, estimator: Estimator) -> Result<RunOutcome> {
    let ranks = inst.truth.ranks();
    let x_star = inst.truth.reconstruct();
    let spectral = Spectral::from_flag(spec.init_hooi);
    let start = Instant::now();
    let (estimate, diverged) = match estimator {
        Estimator::InitOnly => (initialize(&inst.model, ranks, 1.0, spectral)?.reconstruct(), false),
        Estimator::Gd => {
            let init = initialize(&inst.model, ranks, 1.0, spectral)?;
            let rep = fit(&inst.model, &init, &spec.pgd_config(), None)?;
            (rep.final_state.reconstruct(), rep.diverged())
        }
        Estimator::WarmStartGd => {
            let rep = fit(&inst.model, &inst.truth, &spec.pgd_config(), None)?;
            (rep.final_state.reconstruct(), rep.diverged())
        }
        Estimator::HosvdBaseline => (hosvd(&sketch(&inst.model)?, ranks)?.reconstruct(), false),
        Estimator::HooiBaseline => (hooi(&sketch(&inst.model)?, ranks, HOOI_MAX_ITERS)?.reconstruct(), false),
    };
    let seconds = if spec.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(RunOutcome { rmse: rmse(&estimate, &x_star)?, seconds, diverged })
}

/// Aggregate over replicates for one grid point and estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub estimator: Estimator,
    pub replicates: usize,
    pub mean_rmse: f64,
    /// Standard error of the mean RMSE (sample sd over `sqrt(replicates)`).
    pub se_rmse: f64,
    pub mean_seconds: f64,
    pub diverged_count: usize,
    /// Per-replicate RMSE, in replicate order.
    pub rmse: Vec<f64>,
}

impl Row {
    /// Mean over replicates of `RMSE²` (the mean squared error per entry).
    pub fn mean_squared_error(&self) -> f64 {
        self.rmse.iter().map(|r| r * r).sum::<f64>() / self.rmse.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub model: ModelKind,
    pub sweep_var: SweepVar,
    /// Grid-major, estimators in spec order within each grid point.
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: &str = "model,sweep_var,sweep_value,estimator,replicates,mean_rmse,se_rmse,mean_seconds,diverged_count";

impl ExperimentResult {
    pub fn row(&self, sweep_value: f64, estimator: Estimator) -> Option<&Row> {
        self.rows.iter().find(|r| r.sweep_value == sweep_value && r.estimator == estimator)
    }

    pub fn rows_for(&self, estimator: Estimator) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                self.model,
                self.sweep_var,
                r.sweep_value,
                r.estimator,
                r.replicates,
                r.mean_rmse,
                r.se_rmse,
                r.mean_seconds,
                r.diverged_count
            )?;
        }
        Ok(())
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every cell of the experiment on up to `jobs` threads.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentResult> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..spec.grid.len()).flat_map(|g| (0..spec.replicates).map(move |r| (g, r))).collect();
    let run_cell = |&(g, r): &(usize, usize)| -> Result<Vec<RunOutcome>> {
        let inst = make_instance(spec, g, r)?;
        spec.estimators.iter().map(|&e| run_estimator(spec, &inst, e)).collect()
    };
    let outcomes: Vec<Result<Vec<RunOutcome>>> = if jobs <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let slots: Vec<Mutex<Option<Result<Vec<RunOutcome>>>>> = cells.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(cells.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= cells.len() {
                        break;
                    }
                    let out = run_cell(&cells[i]);
                    *slots[i].lock().expect("slot lock") = Some(out);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every cell ran")).collect()
    };
    let outcomes: Vec<Vec<RunOutcome>> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (g, &value) in spec.grid.iter().enumerate() {
        let cell_outcomes = &outcomes[g * spec.replicates..(g + 1) * spec.replicates];
        for (e, &estimator) in spec.estimators.iter().enumerate() {
            let rmse: Vec<f64> = cell_outcomes.iter().map(|o| o[e].rmse).collect();
            let (mean_rmse, se_rmse) = mean_and_se(&rmse);
            let mean_seconds = cell_outcomes.iter().map(|o| o[e].seconds).sum::<f64>() / spec.replicates as f64;
            rows.push(Row {
                sweep_value: value,
                estimator,
                replicates: spec.replicates,
                mean_rmse,
                se_rmse,
                mean_seconds,
                diverged_count: cell_outcomes.iter().filter(|o| o[e].diverged).count(),
                rmse,
            });
        }
    }
    Ok(ExperimentResult { model: spec.model, sweep_var: spec.sweep_var, rows })
}

/// Least-squares line `y ≈ slope · x + intercept` with its coefficient of
/// determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    ensure!(xs.len() == ys.len(), DimensionMismatch, "{} x values, {} y values", xs.len(), ys.len());
    ensure!(xs.len() >= 2, InvalidArgument, "need at least two points for a line");
    ensure!(xs.iter().chain(ys).all(|v| v.is_finite()), InvalidArgument, "non-finite point in line fit");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    ensure!(sxx > 0.0, InvalidArgument, "degenerate grid: all x values coincide");
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit { slope, intercept: my - slope * mx, r2 })
}

/// Line through `(log x, log MSE)` (or `(x, MSE)` without `log_log`) over
/// the grid, where MSE is the replicate mean of `RMSE²` for `estimator`.
pub fn fit_rate_slope(result: &ExperimentResult, estimator: Estimator, log_log: bool) -> Result<LineFit> {
    let rows: Vec<&Row> = result.rows_for(estimator).collect();
    ensure!(rows.len() >= 3, InvalidArgument, "rate fit needs at least 3 grid points, got {}", rows.len());
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| {
            let mse = r.mean_squared_error();
            if log_log {
                (r.sweep_value.ln(), mse.ln())
            } else {
                (r.sweep_value, mse)
            }
        })
        .unzip();
    least_squares_line(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor3;

    fn tiny(model: ModelKind, sweep_var: SweepVar, grid: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec {
            model,
            sweep_var,
            grid,
            dims: [6, 6, 6],
            ranks: [2, 2, 2],
            replicates: 2,
            seed: 11,
            estimators: Estimator::ALL.to_vec(),
            gd: GdSettings { max_iters: 50, ..GdSettings::default() },
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn noiseless_denoising_init_is_exact() {
        let spec = ExperimentSpec {
            sigma: 0.0,
            dims: [30, 30, 30],
            replicates: 1,
            estimators: vec![Estimator::InitOnly],
            ..tiny(ModelKind::SubGaussianPca, SweepVar::Rank, vec![2.0])
        };
        let res = run_experiment(&spec, 1).unwrap();
        assert!(res.rows[0].mean_rmse <= 1e-8, "{}", res.rows[0].mean_rmse);
    }

    #[test]
    fn results_are_identical_across_thread_counts() {
        let spec = tiny(ModelKind::PoissonPca, SweepVar::Intensity, vec![1.0, 4.0]);
        let a = run_experiment(&spec, 1).unwrap();
        let b = run_experiment(&spec, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2 * Estimator::ALL.len());
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let text = String::from_utf8(csv_a).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), 9);
            assert!(line.starts_with("poisson,I,"));
        }
    }

    #[test]
    fn every_model_and_estimator_runs() {
        for (model, var, grid) in [
            (ModelKind::TensorRegression, SweepVar::SampleSize, vec![150.0]),
            (ModelKind::BinomialPca, SweepVar::Population, vec![20.0]),
            (ModelKind::SubGaussianPca, SweepVar::Dim, vec![7.0]),
        ] {
            let res = run_experiment(&tiny(model, var, grid), 1).unwrap();
            for row in &res.rows {
                assert!(row.mean_rmse.is_finite() && row.mean_rmse >= 0.0);
                assert!(row.se_rmse >= 0.0);
                assert_eq!(row.mean_seconds, 0.0);
            }
        }
    }

    #[test]
    fn warm_start_from_noiseless_truth_stays_put() {
        let spec = ExperimentSpec {
            sigma: 0.0,
            estimators: vec![Estimator::WarmStartGd],
            ..tiny(ModelKind::TensorRegression, SweepVar::SampleSize, vec![120.0])
        };
        let res = run_experiment(&spec, 1).unwrap();
        assert!(res.rows[0].mean_rmse <= 1e-10);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = tiny(ModelKind::TensorRegression, SweepVar::SampleSize, vec![100.0]);
        assert!(ok.validate().is_ok());
        assert!(ExperimentSpec { grid: vec![], ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { replicates: 0, ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { sweep_var: SweepVar::Intensity, ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { grid: vec![2.5], ..ok.clone() }.validate().is_err());
        assert!(ExperimentSpec { sweep_var: SweepVar::Rank, grid: vec![7.0], ..ok }.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = ExperimentSpec { sd_range: Some([0.5, 2.0]), ..tiny(ModelKind::SubGaussianPca, SweepVar::Dim, vec![5.0, 6.0]) };
        let text = spec.to_toml().unwrap();
        assert!(text.contains("model = \"denoise\""));
        assert!(text.contains("sweep_var = \"p\""));
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec);
        let partial = ExperimentSpec::from_toml("model = \"poisson\"\nsweep_var = \"I\"\ngrid = [1.0, 2.0]\n").unwrap();
        assert_eq!(partial.model, ModelKind::PoissonPca);
        assert_eq!(partial.replicates, 20);
    }

    #[test]
    fn sample_size_rule() {
        assert_eq!(default_sample_size([15, 15, 15], [2, 2, 2]), 140);
        assert_eq!(default_sample_size([20, 20, 20], [3, 3, 3]), 322);
    }

    #[test]
    fn exact_power_law_slope() {
        let xs: Vec<f64> = [500.0f64, 1000.0, 2000.0, 4000.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [500.0f64, 1000.0, 2000.0, 4000.0].iter().map(|x| (3.0 / x).ln()).collect();
        let line = least_squares_line(&xs, &ys).unwrap();
        assert!((line.slope + 1.0).abs() <= 1e-10);
        assert!((line.intercept - 3f64.ln()).abs() <= 1e-10);
        assert!((line.r2 - 1.0).abs() <= 1e-12);
        let flat = least_squares_line(&xs, &[0.5; 4]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(least_squares_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn rate_slope_reads_result_rows() {
        let make_row = |x: f64| Row {
            sweep_value: x,
            estimator: Estimator::Gd,
            replicates: 1,
            mean_rmse: (2.0 / x).sqrt(),
            se_rmse: 0.0,
            mean_seconds: 0.0,
            diverged_count: 0,
            rmse: vec![(2.0 / x).sqrt()],
        };
        let res = ExperimentResult {
            model: ModelKind::PoissonPca,
            sweep_var: SweepVar::Intensity,
            rows: [1.0, 2.0, 4.0, 8.0].into_iter().map(make_row).collect(),
        };
        let line = fit_rate_slope(&res, Estimator::Gd, true).unwrap();
        assert!((line.slope + 1.0).abs() <= 1e-10);
        let short = ExperimentResult { rows: res.rows[..2].to_vec(), ..res.clone() };
        assert!(fit_rate_slope(&short, Estimator::Gd, true).is_err());
    }

    #[test]
    fn rmse_is_the_scaled_frobenius_distance() {
        let a = Tensor3::filled([2, 2, 2], 1.0);
        let b = Tensor3::from_fn([2, 2, 2], |i, j, k| (i + j + k) as f64);
        let oracle = (a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 8.0).sqrt();
        assert!((rmse(&a, &b).unwrap() - oracle).abs() <= 1e-15);
    }
}
